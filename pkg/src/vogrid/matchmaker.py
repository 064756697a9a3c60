"""Matchmaking service.

Resources advertise themselves with classads and a gridmap (the set of grid
subjects allowed to run there); jobs are matched against the unexpired ads in
FIFO order. For each job the pipeline is:

    visible ads -> symmetric Requirements -> gridmap pre-authorization
    -> Rank evaluation (external functions query stations now) -> argmax

Ranks that come back Undefined or Error drop the candidate rather than
demoting it. Ties on rank break by resource Name (byte order), then ad id.
Each ad can be claimed once per cycle; a claimed ad is invisible to later
jobs in the same cycle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .classads import (
    AdKind,
    ClassAd,
    FnRegistry,
    Scope,
    UNDEFINED,
    Value,
    ValueKind,
    evaluate,
    real,
    symmetric_match,
)
from .classads.exprs import Literal
from .classads.registry import EMPTY_REGISTRY
from . import wire

log = logging.getLogger("vogrid.matchmaker")

QUERY_TIMEOUT_SECONDS = 2.0

REQUIRED_AD_ATTRS = ("Name", "Gatekeeper", "Station_ID")

_ZERO_RANK = Literal(real(0.0))


class IncompleteAd(Exception):
    pass


@dataclass(frozen=True)
class StoredAd:
    ad: ClassAd
    received_at: float
    ttl_seconds: float
    name: str
    station_id: str


@dataclass(frozen=True)
class MatchDecision:
    job_id: str
    resource_id: str | None = None
    rank: float | None = None
    reason: str | None = None

    @property
    def matched(self) -> bool:
        return self.resource_id is not None

    @classmethod
    def match(cls, job_id: str, resource_id: str, rank: float) -> "MatchDecision":
        if not math.isfinite(rank):
            raise ValueError("matched rank must be finite")
        return cls(job_id, resource_id=resource_id, rank=rank)

    @classmethod
    def no_match(cls, job_id: str, reason: str) -> "MatchDecision":
        return cls(job_id, reason=reason)

    def to_json(self) -> dict:
        if self.matched:
            return {"job_id": self.job_id, "outcome": "matched",
                    "resource_id": self.resource_id, "rank": self.rank}
        return {"job_id": self.job_id, "outcome": "no-match", "reason": self.reason}


def _self_text(ad: ClassAd, name: str) -> str | None:
    v = evaluate(ad.lookup(name), ad, None, EMPTY_REGISTRY) if name in ad else UNDEFINED
    return v.data if v.kind is ValueKind.TEXT else None


class AdStore:
    """Resource ads keyed by ad id, each with an expiry and a gridmap."""

    def __init__(self):
        self._ads: dict[str, StoredAd] = {}
        self._gridmaps: dict[str, frozenset[str]] = {}

    def collect_ad(self, ad: ClassAd, gridmap: Iterable[str], ttl_seconds: float,
                   now: float) -> None:
        """Upsert one advertisement; its gridmap is replaced in the same step."""
        for attr in REQUIRED_AD_ATTRS:
            if attr not in ad:
                raise IncompleteAd(f"ad {ad.ad_id!r} lacks {attr}")
        name = _self_text(ad, "Name")
        station_id = _self_text(ad, "Station_ID")
        if name is None or station_id is None:
            raise IncompleteAd(f"ad {ad.ad_id!r}: Name and Station_ID must be text")
        self._ads[ad.ad_id] = StoredAd(ad, now, float(ttl_seconds), name, station_id)
        self._gridmaps[ad.ad_id] = frozenset(gridmap)

    def remove(self, ad_id: str) -> None:
        self._ads.pop(ad_id, None)
        self._gridmaps.pop(ad_id, None)

    def snapshot(self, now: float) -> list[StoredAd]:
        """Unexpired ads in insertion order. ttl 0 means never visible."""
        return [s for s in self._ads.values() if now < s.received_at + s.ttl_seconds]

    def gridmap(self, ad_id: str) -> frozenset[str]:
        return self._gridmaps.get(ad_id, frozenset())


def preauthorize(store: AdStore, job: ClassAd, resource_id: str) -> bool:
    """True iff the job Owner's grid subject is in the resource's gridmap."""
    owner = _self_text(job, "Owner")
    if owner is None:
        log.warning("job %s has no usable Owner; unauthorized everywhere", job.ad_id)
        return False
    return owner in store.gridmap(resource_id)


# -- match-time ranking ---------------------------------------------------------

StationQuery = Callable[[str, str, int | None], float]
# (dataset, station_id, output_bytes override) -> preference score


def _job_output_bytes(job: ClassAd) -> int | None:
    if "OutputBytes" not in job:
        return None
    v = evaluate(job.lookup("OutputBytes"), job, None, EMPTY_REGISTRY)
    if v.kind is ValueKind.UNDEFINED:
        return None
    if not v.is_numeric() or v.as_real() < 0:
        raise ValueError("OutputBytes must be a nonnegative number")
    return int(v.as_real())


def _fun_handler(args: list, self_ad, other_ad, env) -> Value:
    """fun(dataset, station_id): ask that station how it likes this dataset."""
    if env is None or "station_query" not in env:
        raise RuntimeError("no station query configured")
    dataset, station = args
    if dataset.kind is not ValueKind.TEXT or station.kind is not ValueKind.TEXT:
        raise TypeError("fun() wants two text arguments")
    score = env["station_query"](dataset.data, station.data,
                                 _job_output_bytes(self_ad))
    return real(float(score))


def standard_registry() -> FnRegistry:
    reg = FnRegistry()
    reg.register("fun", 2, _fun_handler)
    return reg


def directory_query(directory: Mapping[str, tuple[str, int]],
                    timeout: float = QUERY_TIMEOUT_SECONDS,
                    auth_token: str | None = None) -> StationQuery:
    """Station query that resolves Station_ID through a host:port directory."""
    def query(dataset: str, station_id: str, output_bytes: int | None) -> float:
        host, port = directory[station_id]
        msg = {"type": "GET_PREFERENCE", "dataset": dataset}
        if output_bytes is not None:
            msg["output_bytes"] = output_bytes
        reply = wire.send_request(host, port, msg, timeout=timeout,
                                  auth_token=auth_token)
        if "error" in reply:
            raise wire.WireError(reply["error"].get("message", "station error"))
        return float(reply["result"]["score"])
    return query


def rank_resources(job: ClassAd, candidates: list[StoredAd], reg: FnRegistry,
                   env: dict | None) -> list[tuple[str, Value]]:
    """Evaluate the job's Rank against each candidate, in candidate order."""
    rank_expr = job.lookup("Rank") if "Rank" in job else _ZERO_RANK
    out = []
    for cand in candidates:
        out.append((cand.ad.ad_id, evaluate(rank_expr, job, cand.ad, reg, env)))
    return out


def run_match_cycle(store: AdStore, jobs: list[ClassAd], reg: FnRegistry,
                    env: dict | None, now: float = 0.0,
                    claimed: set[str] | None = None) -> list[MatchDecision]:
    """One FIFO pass over the jobs; each ad can be claimed at most once.

    Ads whose ids arrive in `claimed` are treated as already taken.
    """
    claimed = set(claimed or ())
    decisions = []
    visible = store.snapshot(now)
    for job in jobs:
        available = [s for s in visible if s.ad.ad_id not in claimed]
        candidates = [s for s in available if symmetric_match(job, s.ad, reg, env)]
        if not candidates:
            decisions.append(MatchDecision.no_match(job.ad_id, "no-candidates"))
            continue
        authorized = [s for s in candidates if preauthorize(store, job, s.ad.ad_id)]
        if not authorized:
            decisions.append(MatchDecision.no_match(job.ad_id, "unauthorized-everywhere"))
            continue
        ranked = rank_resources(job, authorized, reg, env)
        by_id = {s.ad.ad_id: s for s in authorized}
        best = None
        best_key = None
        for ad_id, value in ranked:
            if not value.is_numeric():
                continue
            rank = value.as_real()
            if not math.isfinite(rank):
                continue
            key = (-rank, by_id[ad_id].name.encode("utf-8"), ad_id.encode("utf-8"))
            if best_key is None or key < best_key:
                best, best_key = (ad_id, rank), key
        if best is None:
            decisions.append(MatchDecision.no_match(job.ad_id, "all-rank-error"))
            continue
        claimed.add(best[0])
        decisions.append(MatchDecision.match(job.ad_id, best[0], best[1]))
    return decisions


# -- wire service ----------------------------------------------------------------

class MatchmakerService:
    """Stateful ADVERTISE / MATCH_REQUEST handler for one matchmaking loop."""

    def __init__(self, station_query: StationQuery | None = None,
                 clock: Callable[[], float] | None = None):
        import time
        self.store = AdStore()
        self.registry = standard_registry()
        self.env = {"station_query": station_query} if station_query else {}
        self.clock = clock or time.monotonic

    def handle_message(self, msg: dict) -> dict:
        from .classads import ad_from_json
        if not isinstance(msg, dict) or "type" not in msg or "id" not in msg:
            return wire.error_reply(msg.get("id") if isinstance(msg, dict) else None,
                                    "malformed", "request needs type and id fields")
        msg_id = msg["id"]
        mtype = msg["type"]
        if mtype == "ADVERTISE":
            try:
                ad = ad_from_json(msg["ad"])
                gridmap = msg.get("gridmap", [])
                ttl = float(msg.get("ttl", 0))
                if not isinstance(gridmap, list):
                    raise TypeError("gridmap must be a list")
            except Exception as exc:
                return wire.error_reply(msg_id, "malformed", str(exc))
            try:
                self.store.collect_ad(ad, gridmap, ttl, self.clock())
            except IncompleteAd as exc:
                return wire.error_reply(msg_id, "incomplete-ad", str(exc))
            return {"id": msg_id, "result": {"ok": True, "ad_id": ad.ad_id}}
        if mtype == "MATCH_REQUEST":
            try:
                jobs = [ad_from_json(j) for j in msg["jobs"]]
            except Exception as exc:
                return wire.error_reply(msg_id, "malformed", str(exc))
            decisions = run_match_cycle(self.store, jobs, self.registry,
                                        self.env, self.clock())
            return {"id": msg_id,
                    "result": {"decisions": [d.to_json() for d in decisions]}}
        return wire.error_reply(msg_id, "unsupported", f"unknown request type {mtype!r}")
