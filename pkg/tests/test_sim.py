"""Scenario loading and the deterministic grid run."""

import json
import math

import pytest

import vogrid.sim as sim
from vogrid.advertise import build_info_tree, query_info
from vogrid.conftree import read_tree, write_tree
from vogrid.jobs import JobState
from vogrid.sim import (
    GridWorld,
    NonQuiescent,
    ScenarioParseError,
    load_scenario,
    load_scenario_file,
    make_site_config,
    run_scenario,
)
from vogrid.station import station_from_config

from conftest import fixture_path

ALICE = "/C=US/O=demo/CN=alice"

SKEWED = load_scenario(json.loads(fixture_path("skewed_scenario.json").read_text()))


def _scenario_doc(catalog, sites, jobs, **extra):
    return {"name": "t", "catalog": catalog, "sites": sites, "jobs": jobs, **extra}


def _site_doc(config, stations=None, gridmap=(ALICE,)):
    return {"config_xml": write_tree(config), "stations": stations or {},
            "gridmap": list(gridmap)}


def _one_site_doc(*, datasets=None, slots=1, links=None, cached=(),
                  jobs=("d",), run_seconds=0.0, requirements=None,
                  gridmap=(ALICE,)):
    """Single site S/c/st scenario with one file per listed dataset."""
    catalog = datasets or {"d": [["f0", 1_000_000_000, "HOME"]]}
    config = make_site_config("S", "c", "st",
                              links or {"HOME": 1e8}, slots=slots)
    job_docs = []
    for i, ds in enumerate(jobs, 1):
        ad = {"Owner": f'"{ALICE}"', "Dataset": f'"{ds}"'}
        if run_seconds:
            ad["RunSeconds"] = repr(run_seconds)
        if requirements:
            ad["Requirements"] = requirements
        job_docs.append({"id": f"j{i}", "ad": ad})
    site = _site_doc(config, stations={"st": {"cached_files": list(cached)}},
                     gridmap=gridmap)
    return _scenario_doc(catalog, [site], job_docs)


# -- loading -------------------------------------------------------------------------

def test_load_scenario_parses_the_fixture():
    assert SKEWED.name == "skewed-cache"
    assert len(SKEWED.sites) == 3
    assert [ad.ad_id for ad in SKEWED.job_ads] == [f"j{i}" for i in range(1, 7)]
    assert "ds-A" in SKEWED.catalog


def test_missing_rank_gets_the_station_query_rank():
    scenario = load_scenario(_one_site_doc())
    from vogrid.classads import parse_expr
    assert scenario.job_ads[0].lookup("Rank") == \
        parse_expr("fun(Dataset, OTHER.Station_ID)")


def test_explicit_rank_is_kept():
    doc = _one_site_doc()
    doc["jobs"][0]["ad"]["Rank"] = "0 - 5"
    scenario = load_scenario(doc)
    from vogrid.classads import parse_expr
    assert scenario.job_ads[0].lookup("Rank") == parse_expr("0 - 5")


@pytest.mark.parametrize("mangle", [
    lambda d: d.pop("catalog"),
    lambda d: d.pop("jobs"),
    lambda d: d["jobs"][0].pop("id"),
    lambda d: d["jobs"][0]["ad"].update({"Dataset": "not a parseable ("}),
    lambda d: d["catalog"].update({"bad": [["f", 0, "HOME"]]}),
    lambda d: d["sites"][0].update({"config_xml": "<broken"}),
])
def test_load_scenario_rejects_bad_documents(mangle):
    doc = _one_site_doc()
    mangle(doc)
    with pytest.raises(ScenarioParseError):
        load_scenario(doc)


def test_load_scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(_one_site_doc()))
    assert load_scenario_file(str(path)).name == "t"
    path.write_text("{not json")
    with pytest.raises(ScenarioParseError):
        load_scenario_file(str(path))


def test_duplicate_station_rejected():
    doc = _one_site_doc()
    doc["sites"].append(doc["sites"][0])
    with pytest.raises(ScenarioParseError):
        GridWorld(load_scenario(doc), "data-aware", 0)


def test_unknown_policy_rejected():
    with pytest.raises(ScenarioParseError):
        GridWorld(SKEWED, "optimal", 0)


def test_make_site_config_round_trips():
    config = make_site_config("S", "c", "st", {"HOME": 12_500_000.0, "AWAY": 1e8},
                              slots=3, mean_service_seconds=0.25)
    reread = read_tree(write_tree(config))
    assert reread == config
    st = station_from_config(reread.find("station"))
    assert st.links == {"HOME": 12_500_000.0, "AWAY": 1e8}
    assert st.mean_service_seconds == 0.25
    assert reread.find("cluster").attributes["slots"] == "3"
    assert reread.attributes["schema_version"] == "v0_3"


# -- the skewed-cache scenario ------------------------------------------------------

def test_data_aware_sends_every_job_home():
    report, _ = run_scenario(SKEWED, "data-aware", 0)
    assert report["mean_staging_seconds"] == 10.0
    assert report["max_staging_seconds"] == 10.0
    by_job = {j["job"]: j for j in report["jobs"]}
    homes = {"j1": "A/", "j2": "B/", "j3": "C/", "j4": "A/", "j5": "B/", "j6": "C/"}
    for job_id, prefix in homes.items():
        entry = by_job[job_id]
        assert entry["state"] == "Done"
        assert entry["resource"].startswith(prefix)
        assert entry["staging_seconds"] == 10.0
    assert report["final_clock"] == 10.0


def test_round_robin_mostly_misses_the_caches():
    report, _ = run_scenario(SKEWED, "round-robin", 0)
    assert report["mean_staging_seconds"] == 70.0
    assert [j["staging_seconds"] for j in report["jobs"]] == \
        [10.0, 100.0, 100.0, 100.0, 100.0, 10.0]


def test_random_policy_is_seeded():
    report, _ = run_scenario(SKEWED, "random", 7)
    assert report["mean_staging_seconds"] == 85.0


def test_runs_are_deterministic():
    for policy, seed in (("data-aware", 0), ("random", 3), ("round-robin", 1)):
        a_report, a_log = run_scenario(SKEWED, policy, seed)
        b_report, b_log = run_scenario(SKEWED, policy, seed)
        assert a_report == b_report
        assert a_log == b_log


def test_report_shape():
    report, _ = run_scenario(SKEWED, "data-aware", 5)
    assert set(report) == {"scenario", "policy", "seed", "jobs",
                           "mean_staging_seconds", "max_staging_seconds",
                           "events", "final_clock"}
    assert report["scenario"] == "skewed-cache"
    assert report["policy"] == "data-aware"
    assert report["seed"] == 5
    assert report["events"] == 12  # one staged and one done per job
    for entry in report["jobs"]:
        assert set(entry) == {"job", "state", "resource", "staging_seconds",
                              "run_seconds", "total_seconds", "reason"}
        assert entry["reason"] is None
        assert entry["run_seconds"] == 0.0
        assert entry["total_seconds"] == entry["staging_seconds"]


# -- lifecycle and exclusivity invariants --------------------------------------------

FORWARD = [JobState.SUBMITTED, JobState.IDLE, JobState.MATCHED,
           JobState.STAGING, JobState.RUNNING, JobState.DONE]


def _assert_legal_history(record):
    states = [h.state for h in record.history]
    stamps = [h.stamp for h in record.history]
    assert stamps == sorted(stamps)
    assert states[0] is JobState.SUBMITTED
    for cur, nxt in zip(states, states[1:]):
        if nxt is JobState.HELD:
            assert cur is not JobState.HELD
        elif cur is JobState.HELD:
            assert nxt is JobState.IDLE
        else:
            assert FORWARD.index(nxt) == FORWARD.index(cur) + 1


@pytest.mark.parametrize("policy,seed", [
    ("data-aware", 0), ("random", 11), ("round-robin", 2)])
def test_every_history_is_legal(policy, seed):
    world = GridWorld(SKEWED, policy, seed)
    world.run()
    for record in world.queue.jobs.values():
        _assert_legal_history(record)
        assert record.state in (JobState.DONE, JobState.HELD)


def test_one_job_per_resource_at_a_time():
    # two jobs, one slot: the busy interval of the only ad must not overlap
    doc = _one_site_doc(jobs=("d", "d"), run_seconds=5.0)
    report, log = run_scenario(load_scenario(doc), "data-aware", 0)
    intervals = {}
    for entry in log:
        if entry["event"] == "match":
            intervals.setdefault(entry["resource"], []).append([entry["t"], None])
        elif entry["event"] == "done":
            intervals[entry["resource"]][-1][1] = entry["t"]
    for spans in intervals.values():
        spans.sort()
        for (s1, e1), (s2, _) in zip(spans, spans[1:]):
            assert e1 is not None and s2 >= e1
    # and the second job really waited for the first to finish
    by_job = {j["job"]: j for j in report["jobs"]}
    assert by_job["j1"]["total_seconds"] == 15.0  # 10s staging + 5s run
    assert by_job["j2"]["state"] == "Done"
    # second copy found the file already cached: zero staging
    assert by_job["j2"]["staging_seconds"] == 0.0
    assert report["final_clock"] == 20.0


def test_staging_times_reconcile_with_the_event_log():
    report, log = run_scenario(SKEWED, "round-robin", 0)
    logged = {e["job"]: e["staging_seconds"] for e in log if e["event"] == "match"}
    for entry in report["jobs"]:
        assert math.isclose(entry["staging_seconds"], logged[entry["job"]],
                            rel_tol=1e-9)
    # staging equals the negated preference the station reported at match time
    assert all(v > 0 for v in logged.values())


# -- held jobs -----------------------------------------------------------------------

def test_unauthorized_everywhere_holds_at_time_zero():
    doc = _one_site_doc(gridmap=())
    report, log = run_scenario(load_scenario(doc), "data-aware", 0)
    [entry] = report["jobs"]
    assert entry["state"] == "Held"
    assert entry["reason"] == "unauthorized-everywhere"
    assert entry["staging_seconds"] is None
    assert report["mean_staging_seconds"] is None
    assert [e for e in log if e["event"] == "held"][0]["t"] == 0.0


def test_impossible_requirements_hold_with_no_candidates():
    doc = _one_site_doc(requirements='OTHER.Architecture == "VMS"')
    report, _ = run_scenario(load_scenario(doc), "data-aware", 0)
    [entry] = report["jobs"]
    assert entry["state"] == "Held"
    assert entry["reason"] == "no-candidates"


def test_unroutable_dataset_holds_with_rank_errors():
    doc = _one_site_doc(
        datasets={"d": [["f0", 1_000_000_000, "HOME"]],
                  "far": [["g0", 1_000_000_000, "ELSEWHERE"]]},
        jobs=("far",))
    report, _ = run_scenario(load_scenario(doc), "data-aware", 0)
    [entry] = report["jobs"]
    assert entry["state"] == "Held"
    assert entry["reason"] == "all-rank-error"


def test_partial_visibility_defers_the_hold():
    # j1 takes the slot; j2 must idle (it did not see the full resource set)
    # and only matches after j1 finishes, rather than being held
    doc = _one_site_doc(jobs=("d", "d"), run_seconds=5.0)
    world = GridWorld(load_scenario(doc), "data-aware", 0)
    world.run()
    j2 = world.queue.jobs[2]
    assert j2.state is JobState.DONE
    assert JobState.HELD not in {h.state for h in j2.history}
    match_stamp = next(h.stamp for h in j2.history if h.state is JobState.MATCHED)
    assert match_stamp == 15.0


def test_stranded_jobs_hold_when_nothing_is_pending():
    # one slot, two jobs; the second's dataset cannot be staged anywhere, so
    # once the heap drains the sweep parks it with the pipeline's reason
    doc = _one_site_doc(
        datasets={"d": [["f0", 1_000_000_000, "HOME"]],
                  "far": [["g0", 1_000_000_000, "ELSEWHERE"]]},
        jobs=("d", "far"), run_seconds=2.0)
    report, _ = run_scenario(load_scenario(doc), "data-aware", 0)
    by_job = {j["job"]: j for j in report["jobs"]}
    assert by_job["j1"]["state"] == "Done"
    assert by_job["j2"]["state"] == "Held"
    assert by_job["j2"]["reason"] == "all-rank-error"


# -- quiescence ------------------------------------------------------------------------

def test_event_cap_detects_runaway_runs(monkeypatch):
    monkeypatch.setattr(sim, "EVENT_CAP", 3)
    with pytest.raises(NonQuiescent):
        run_scenario(SKEWED, "data-aware", 0)
    monkeypatch.setattr(sim, "EVENT_CAP", 12)
    run_scenario(SKEWED, "data-aware", 0)  # exactly at the cap is fine


# -- live activity records ----------------------------------------------------------------

def test_live_info_reflects_in_flight_jobs():
    world = GridWorld(SKEWED, "data-aware", 0)
    world._match_cycle()
    live = world.live_info("site=A/cluster=ca")
    assert live == {"staging_jobs": "j1,j4"}
    assert world.live_info("site=B/cluster=cb") == {"staging_jobs": "j2,j5"}
    assert world.live_info("site=A") == {}  # needs a cluster component
    world.run()
    assert world.live_info("site=A/cluster=ca") == {}


def test_live_info_merges_into_the_information_tree():
    world = GridWorld(SKEWED, "data-aware", 0)
    world._match_cycle()
    site_a = world.scenario.sites[0].config
    tree = build_info_tree(site_a)
    entries = dict(query_info(tree, "site=A", live=world.live_info))
    cluster = entries["site=A/cluster=ca"]
    assert cluster["activity_staging_jobs"] == "j1,j4"
    assert cluster["slots"] == "2"
    # static attributes never get shadowed by activity on a name collision
    assert "staging_jobs" not in cluster
