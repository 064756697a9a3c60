"""Job records and the submission queue.

A job's life is Submitted, Idle, Matched, Staging, Running, Done, and any
non-terminal step may instead park it in Held with a reason; releasing a held
job re-queues it as Idle. History entries carry logical stamps, which only
need to be monotone: the queue hands out sequence numbers, the simulator
passes its own clock.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .classads import ClassAd, ValueKind, ad_from_json, ad_to_json, evaluate
from .classads.registry import EMPTY_REGISTRY


class JobState(Enum):
    SUBMITTED = "Submitted"
    IDLE = "Idle"
    MATCHED = "Matched"
    STAGING = "Staging"
    RUNNING = "Running"
    DONE = "Done"
    HELD = "Held"


_NEXT = {
    JobState.SUBMITTED: {JobState.IDLE},
    JobState.IDLE: {JobState.MATCHED},
    JobState.MATCHED: {JobState.STAGING},
    JobState.STAGING: {JobState.RUNNING},
    JobState.RUNNING: {JobState.DONE},
    JobState.DONE: set(),
    JobState.HELD: {JobState.IDLE},
}

REQUIRED_JOB_ATTRS = ("Owner", "Dataset")


class RejectedAd(Exception):
    pass


class UnknownJob(Exception):
    pass


class IllegalJobTransition(Exception):
    pass


def job_ad_field(ad: ClassAd, name: str) -> str | None:
    if name not in ad:
        return None
    v = evaluate(ad.lookup(name), ad, None, EMPTY_REGISTRY)
    return v.data if v.kind is ValueKind.TEXT else None


def validate_job_ad(ad: ClassAd) -> tuple[str, str]:
    owner = job_ad_field(ad, "Owner")
    dataset = job_ad_field(ad, "Dataset")
    if owner is None:
        raise RejectedAd("job ad must define Owner as text")
    if dataset is None:
        raise RejectedAd("job ad must define Dataset as text")
    return owner, dataset


@dataclass(frozen=True)
class HistoryEntry:
    state: JobState
    stamp: float
    detail: str | None = None

    def to_json(self) -> dict:
        return {"state": self.state.value, "stamp": self.stamp, "detail": self.detail}


class JobRecord:
    def __init__(self, job_id: int, ad: ClassAd):
        self.job_id = job_id
        self.ad = ad
        self.history: list[HistoryEntry] = []

    @property
    def state(self) -> JobState | None:
        return self.history[-1].state if self.history else None

    @property
    def detail(self) -> str | None:
        return self.history[-1].detail if self.history else None

    def advance(self, state: JobState, stamp: float, detail: str | None = None):
        cur = self.state
        if cur is None:
            legal = state is JobState.SUBMITTED
        elif state is JobState.HELD:
            legal = cur is not JobState.HELD
        else:
            legal = state in _NEXT[cur]
        if not legal:
            raise IllegalJobTransition(
                f"job {self.job_id}: {cur.value if cur else 'new'} -> {state.value}")
        if self.history and stamp < self.history[-1].stamp:
            raise IllegalJobTransition(
                f"job {self.job_id}: stamp {stamp} goes backwards")
        self.history.append(HistoryEntry(state, stamp, detail))

    def matched_resource(self) -> str | None:
        for entry in reversed(self.history):
            if entry.state is JobState.MATCHED:
                return entry.detail
        return None

    def status_json(self) -> dict:
        return {
            "job_id": self.job_id,
            "state": self.state.value if self.state else None,
            "detail": self.detail,
            "history": [e.to_json() for e in self.history],
        }


class JobQueue:
    """Ordered job records; every mutation can be mirrored to a journal sink."""

    def __init__(self, journal_sink: Callable[[dict], None] | None = None):
        self.jobs: dict[int, JobRecord] = {}
        self._next_id = 1
        self._seq = 0
        self._sink = journal_sink

    def set_journal_sink(self, sink: Callable[[dict], None] | None):
        self._sink = sink

    def _stamp(self) -> int:
        self._seq += 1
        return self._seq

    def _emit(self, record: dict):
        if self._sink is not None:
            self._sink(record)

    def submit(self, ad: ClassAd, stamp: float | None = None) -> JobRecord:
        validate_job_ad(ad)
        job = JobRecord(self._next_id, ad)
        self._next_id += 1
        self.jobs[job.job_id] = job
        self._emit({"event": "new", "job_id": job.job_id, "ad": ad_to_json(ad)})
        for state in (JobState.SUBMITTED, JobState.IDLE):
            self.transition(job.job_id, state, stamp=stamp)
        return job

    def transition(self, job_id: int, state: JobState,
                   stamp: float | None = None, detail: str | None = None) -> JobRecord:
        job = self.get(job_id)
        job.advance(state, self._stamp() if stamp is None else stamp, detail)
        entry = job.history[-1]
        self._emit({"event": "state", "job_id": job_id, "state": state.value,
                    "stamp": entry.stamp, "detail": detail})
        return job

    def release(self, job_id: int) -> JobRecord:
        job = self.get(job_id)
        if job.state is not JobState.HELD:
            raise IllegalJobTransition(f"job {job_id} is not held")
        return self.transition(job_id, JobState.IDLE)

    def get(self, job_id: int) -> JobRecord:
        if job_id not in self.jobs:
            raise UnknownJob(f"no job {job_id}")
        return self.jobs[job_id]

    def in_state(self, state: JobState) -> list[JobRecord]:
        return [j for j in self.jobs.values() if j.state is state]

    def apply_journal_record(self, record: dict):
        """Replay one journal record; stamps and ids come from the record."""
        event = record["event"]
        if event == "new":
            job = JobRecord(int(record["job_id"]), ad_from_json(record["ad"]))
            self.jobs[job.job_id] = job
            self._next_id = max(self._next_id, job.job_id + 1)
        elif event == "state":
            job = self.get(int(record["job_id"]))
            job.advance(JobState(record["state"]), record["stamp"],
                        record.get("detail"))
            if isinstance(record["stamp"], int):
                self._seq = max(self._seq, record["stamp"])
        else:
            raise ValueError(f"unknown journal event {event!r}")
