"""Deterministic grid simulator.

A scenario bundles site configurations, station runtime fixtures, gridmaps,
a dataset catalog, and a list of job ads. The run submits every job at time
zero and then alternates match cycles with clock advances until nothing is
left to do. Staging a matched job takes exactly the negated preference score
its chosen station reported, so the quantity the ranking minimizes is the
quantity the report measures.

Scoring and staging both use the station states as they were when the cycle
started; queue and cache updates land on the live stations and are visible
from the next cycle on.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass

from .advertise import generate_classads, select_patterns
from .classads import ClassAd, evaluate, parse_expr, symmetric_match
from .classads.ads import AdKind
from .classads.registry import EMPTY_REGISTRY
from .conftree import TreeNode, derive_service_config, read_tree
from .jobs import JobQueue, JobState, job_ad_field
from .matchmaker import (
    AdStore,
    MatchDecision,
    StoredAd,
    preauthorize,
    run_match_cycle,
    standard_registry,
)
from .station import (
    CacheAdd,
    DatasetCatalog,
    DequeueInput,
    EnqueueInput,
    StationState,
    apply_event,
    get_preference,
    station_from_config,
)

POLICIES = ("data-aware", "random", "round-robin")

EVENT_CAP = 10 ** 6

DEFAULT_TTL = 10.0 ** 9


class ScenarioParseError(Exception):
    pass


class NonQuiescent(Exception):
    pass


@dataclass
class SiteSpec:
    config: TreeNode
    station_fixtures: dict[str, dict]
    gridmap: list[str]


@dataclass
class Scenario:
    name: str
    catalog: DatasetCatalog
    sites: list[SiteSpec]
    job_ads: list[ClassAd]
    ttl: float = DEFAULT_TTL


_DEFAULT_RANK_SOURCE = "fun(Dataset, OTHER.Station_ID)"


def load_scenario(doc: dict) -> Scenario:
    try:
        catalog = DatasetCatalog({
            ds: [tuple(entry) for entry in files]
            for ds, files in doc["catalog"].items()
        })
        sites = []
        for site_doc in doc["sites"]:
            sites.append(SiteSpec(
                config=read_tree(site_doc["config_xml"]),
                station_fixtures=dict(site_doc.get("stations", {})),
                gridmap=list(site_doc.get("gridmap", [])),
            ))
        job_ads = []
        for job_doc in doc["jobs"]:
            attrs = dict(job_doc["ad"])
            if "Rank" not in attrs:
                attrs["Rank"] = _DEFAULT_RANK_SOURCE
            job_ads.append(ClassAd(
                {name: parse_expr(src) for name, src in attrs.items()},
                AdKind.JOB, ad_id=str(job_doc["id"])))
        return Scenario(name=doc.get("name", "scenario"), catalog=catalog,
                        sites=sites, job_ads=job_ads,
                        ttl=float(doc.get("ttl", DEFAULT_TTL)))
    except ScenarioParseError:
        raise
    except Exception as exc:
        raise ScenarioParseError(f"bad scenario document: {exc}") from exc


def load_scenario_file(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(f"{path}: {exc}") from None
    return load_scenario(doc)


def make_site_config(site: str, cluster: str, station: str,
                     links: dict[str, float], slots: int = 1,
                     gatekeeper_url: str | None = None,
                     architecture: str = "Linux",
                     mean_service_seconds: float = 1.0) -> TreeNode:
    """Convenience builder for the site trees scenarios embed."""
    link_nodes = [
        TreeNode("link", {"to": to, "bandwidth_bytes_per_second": repr(float(bw))})
        for to, bw in sorted(links.items())
    ]
    station_node = TreeNode("station", {
        "name": station,
        "mean_service_seconds": repr(float(mean_service_seconds)),
    }, link_nodes)
    gatekeeper_node = TreeNode("gatekeeper", {
        "url": gatekeeper_url or f"gram://{cluster}.{site}.example:2119",
        "jobmanager": "fork",
    })
    cluster_node = TreeNode("cluster", {
        "name": cluster,
        "architecture": architecture,
        "slots": str(slots),
    }, [gatekeeper_node, station_node])
    return TreeNode("site", {"name": site, "schema_version": "v0_3"},
                    [cluster_node])


def _numeric_field(ad: ClassAd, name: str, default: float) -> float:
    if name not in ad:
        return default
    v = evaluate(ad.lookup(name), ad, None, EMPTY_REGISTRY)
    if not v.is_numeric() or not math.isfinite(v.as_real()) or v.as_real() < 0:
        raise ScenarioParseError(f"job {ad.ad_id!r}: {name} must be nonnegative")
    return v.as_real()


def _output_bytes(ad: ClassAd) -> int | None:
    if "OutputBytes" not in ad:
        return None
    return int(_numeric_field(ad, "OutputBytes", 0.0))


class GridWorld:
    """One scenario instance: stations, ads, the job queue, and the clock."""

    def __init__(self, scenario: Scenario, policy: str, seed: int):
        if policy not in POLICIES:
            raise ScenarioParseError(f"unknown policy {policy!r}")
        self.scenario = scenario
        self.policy = policy
        self.rng = random.Random(seed)
        self.seed = seed
        self.clock = 0.0
        self.catalog = scenario.catalog
        self.registry = standard_registry()
        self.store = AdStore()
        self.stations: dict[str, StationState] = {}
        self.station_of_ad: dict[str, str] = {}
        self.event_log: list[dict] = []
        self.events_processed = 0
        self._heap: list = []
        self._heap_seq = 0
        self._rr_ptr = 0
        self._pending_files: dict[int, list[str]] = {}
        self.queue = JobQueue()
        self.busy: dict[str, int] = {}  # ad id -> queue job id
        self._build(scenario)

    def _build(self, scenario: Scenario):
        for site in scenario.sites:
            stations_cfg = derive_service_config(site.config, "station")
            for node in stations_cfg.children:
                st = station_from_config(
                    node, site.station_fixtures.get(node.attributes["name"]))
                if st.station_id in self.stations:
                    raise ScenarioParseError(
                        f"station {st.station_id!r} defined twice")
                self.stations[st.station_id] = st
            for ad in generate_classads(select_patterns(site.config)):
                self.store.collect_ad(ad, site.gridmap, scenario.ttl, now=0.0)
                sid = evaluate(ad.lookup("Station_ID"), ad, None,
                               EMPTY_REGISTRY).data
                self.station_of_ad[ad.ad_id] = sid
        unknown = set(self.station_of_ad.values()) - set(self.stations)
        if unknown:
            raise ScenarioParseError(
                f"ads reference undefined stations {sorted(unknown)}")
        self._rr_order = sorted(self.station_of_ad)
        for ad in scenario.job_ads:
            self.queue.submit(ad, stamp=self.clock)
            self._log("submit", job=ad.ad_id)

    # -- plumbing ---------------------------------------------------------

    def _log(self, event: str, **payload):
        entry = {"t": self.clock, "event": event}
        entry.update(payload)
        self.event_log.append(entry)

    def _push(self, at: float, kind: str, job_id: int):
        self._heap_seq += 1
        heapq.heappush(self._heap, (at, self._heap_seq, kind, job_id))

    def _station_query_over(self, snapshot: dict[str, StationState]):
        def query(dataset: str, station_id: str, output_bytes: int | None) -> float:
            return get_preference(self.catalog, snapshot[station_id], dataset,
                                  output_bytes).score
        return query

    def _preference(self, snapshot: dict[str, StationState], ad_id: str,
                    job_ad: ClassAd):
        station = snapshot[self.station_of_ad[ad_id]]
        return get_preference(self.catalog, station,
                              job_ad_field(job_ad, "Dataset"),
                              _output_bytes(job_ad))

    # -- one scheduling pass ----------------------------------------------

    def _baseline_cycle(self, jobs: list[ClassAd], env: dict,
                        claimed: set[str]) -> list[MatchDecision]:
        """Requirements and authorization still hold; ranking is bypassed."""
        decisions = []
        visible = self.store.snapshot(self.clock)
        for job in jobs:
            available = [s for s in visible if s.ad.ad_id not in claimed]
            candidates = [s for s in available
                          if symmetric_match(job, s.ad, self.registry, env)]
            if not candidates:
                decisions.append(MatchDecision.no_match(job.ad_id, "no-candidates"))
                continue
            authorized = [s for s in candidates
                          if preauthorize(self.store, job, s.ad.ad_id)]
            if not authorized:
                decisions.append(
                    MatchDecision.no_match(job.ad_id, "unauthorized-everywhere"))
                continue
            pick = self._choose_baseline(authorized)
            claimed.add(pick.ad.ad_id)
            decisions.append(MatchDecision.match(job.ad_id, pick.ad.ad_id, 0.0))
        return decisions

    def _choose_baseline(self, authorized: list[StoredAd]) -> StoredAd:
        ordered = sorted(authorized, key=lambda s: (s.name, s.ad.ad_id))
        if self.policy == "random":
            return self.rng.choice(ordered)
        by_id = {s.ad.ad_id: s for s in authorized}
        n = len(self._rr_order)
        for k in range(n):
            ad_id = self._rr_order[(self._rr_ptr + k) % n]
            if ad_id in by_id:
                self._rr_ptr = (self._rr_ptr + k + 1) % n
                return by_id[ad_id]
        raise AssertionError("no authorized ad in rotation")

    def _match_cycle(self) -> int:
        """Match the idle jobs once. Returns how many matched.

        A job that failed to match while every ad was visible (none busy, none
        claimed earlier in its own cycle) can never match later, so it is held
        right here; otherwise it stays idle for the next cycle. A final sweep
        in run() holds whatever is left when no event can free a slot again.
        """
        idle = sorted(self.queue.in_state(JobState.IDLE), key=lambda j: j.job_id)
        if not idle:
            return 0
        snapshot = dict(self.stations)
        env = {"station_query": self._station_query_over(snapshot)}
        job_ads = [j.ad for j in idle]
        busy_at_start = set(self.busy)
        if self.policy == "data-aware":
            decisions = run_match_cycle(self.store, job_ads, self.registry, env,
                                        now=self.clock, claimed=busy_at_start)
        else:
            decisions = self._baseline_cycle(job_ads, env, set(busy_at_start))
        matched = 0
        saw_everything = not busy_at_start
        for record, decision in zip(idle, decisions):
            if decision.matched:
                matched += 1
                saw_everything = False
                self._start_staging(record, decision, snapshot)
            elif saw_everything:
                self.queue.transition(record.job_id, JobState.HELD,
                                      stamp=self.clock, detail=decision.reason)
                self._log("held", job=decision.job_id, reason=decision.reason)
        if matched == 0 and not self._heap:
            # no event will ever free a slot; park the rest with their reasons
            for record, decision in zip(idle, decisions):
                if record.state is JobState.IDLE:
                    reason = decision.reason or "no-candidates"
                    self.queue.transition(record.job_id, JobState.HELD,
                                          stamp=self.clock, detail=reason)
                    self._log("held", job=decision.job_id, reason=reason)
        return matched

    def _start_staging(self, record, decision: MatchDecision,
                       snapshot: dict[str, StationState]):
        ad_id = decision.resource_id
        report = self._preference(snapshot, ad_id, record.ad)
        staging = -report.score
        self.busy[ad_id] = record.job_id
        self.queue.transition(record.job_id, JobState.MATCHED,
                              stamp=self.clock, detail=ad_id)
        self.queue.transition(record.job_id, JobState.STAGING, stamp=self.clock)
        station_id = self.station_of_ad[ad_id]
        dataset = job_ad_field(record.ad, "Dataset")
        missing = [f.file_name for f in self.catalog.files(dataset)
                   if f.file_name not in snapshot[station_id].cached_files]
        live = self.stations[station_id]
        for _ in missing:
            live = apply_event(live, EnqueueInput())
        self.stations[station_id] = live
        self._pending_files[record.job_id] = missing
        self._log("match", job=decision.job_id, resource=ad_id,
                  rank=decision.rank, staging_seconds=staging)
        self._push(self.clock + staging, "staged", record.job_id)

    def _finish_staging(self, job_id: int):
        record = self.queue.get(job_id)
        station_id = self.station_of_ad[record.matched_resource()]
        live = self.stations[station_id]
        for file_name in self._pending_files.pop(job_id, []):
            live = apply_event(live, DequeueInput())
            live = apply_event(live, CacheAdd(file_name))
        self.stations[station_id] = live
        self.queue.transition(job_id, JobState.RUNNING, stamp=self.clock)
        self._log("running", job=record.ad.ad_id)
        self._push(self.clock + _numeric_field(record.ad, "RunSeconds", 0.0),
                   "done", job_id)

    def _finish_run(self, job_id: int):
        record = self.queue.get(job_id)
        ad_id = record.matched_resource()
        self.queue.transition(job_id, JobState.DONE, stamp=self.clock)
        del self.busy[ad_id]
        self._log("done", job=record.ad.ad_id, resource=ad_id)

    # -- main loop ----------------------------------------------------------

    def run(self):
        while True:
            self._match_cycle()
            if not self._heap:
                return  # idle jobs only survive a cycle if something is pending
            batch_time = self._heap[0][0]
            self.clock = batch_time
            while self._heap and self._heap[0][0] == batch_time:
                _, _, kind, job_id = heapq.heappop(self._heap)
                self.events_processed += 1
                if self.events_processed > EVENT_CAP:
                    raise NonQuiescent(f"more than {EVENT_CAP} events")
                if kind == "staged":
                    self._finish_staging(job_id)
                else:
                    self._finish_run(job_id)

    # -- reporting -----------------------------------------------------------

    def live_info(self, dn: str) -> dict:
        """Activity records for the info tree: jobs active under a cluster dn."""
        parts = dict(p.split("=", 1) for p in dn.split("/") if "=" in p)
        if "cluster" not in parts or "site" not in parts:
            return {}
        prefix = f"{parts['site']}/{parts['cluster']}"
        running, staging = [], []
        for job in self.queue.jobs.values():
            resource = job.matched_resource()
            if resource is None or resource.split("#")[0] != prefix:
                continue
            if job.state is JobState.RUNNING:
                running.append(job.ad.ad_id)
            elif job.state is JobState.STAGING:
                staging.append(job.ad.ad_id)
        out = {}
        if running:
            out["running_jobs"] = ",".join(sorted(running))
        if staging:
            out["staging_jobs"] = ",".join(sorted(staging))
        return out

    def report(self) -> dict:
        jobs = []
        staging_times = []
        for job in self.queue.jobs.values():
            entry = {"job": job.ad.ad_id, "state": job.state.value,
                     "resource": None, "staging_seconds": None,
                     "run_seconds": None, "total_seconds": None, "reason": None}
            if job.state is JobState.HELD:
                entry["reason"] = job.detail
            stamps = {}
            for h in job.history:
                stamps.setdefault(h.state, h.stamp)
            if JobState.MATCHED in stamps:
                entry["resource"] = job.matched_resource()
            if JobState.STAGING in stamps and JobState.RUNNING in stamps:
                entry["staging_seconds"] = (stamps[JobState.RUNNING]
                                            - stamps[JobState.STAGING])
                staging_times.append(entry["staging_seconds"])
            if JobState.RUNNING in stamps and JobState.DONE in stamps:
                entry["run_seconds"] = stamps[JobState.DONE] - stamps[JobState.RUNNING]
            if JobState.DONE in stamps:
                entry["total_seconds"] = (stamps[JobState.DONE]
                                          - stamps[JobState.SUBMITTED])
            jobs.append(entry)
        return {
            "scenario": self.scenario.name,
            "policy": self.policy,
            "seed": self.seed,
            "jobs": jobs,
            "mean_staging_seconds": (sum(staging_times) / len(staging_times)
                                     if staging_times else None),
            "max_staging_seconds": max(staging_times) if staging_times else None,
            "events": self.events_processed,
            "final_clock": self.clock,
        }


def run_scenario(scenario: Scenario, policy: str, seed: int) -> tuple[dict, list[dict]]:
    world = GridWorld(scenario, policy, seed)
    world.run()
    return world.report(), world.event_log
