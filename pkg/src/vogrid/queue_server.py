"""Journaled job queue service.

Every accepted mutation is appended to a newline-delimited JSON journal and
fsynced before the reply goes out, so a killed server restarted on the same
journal file reconstructs identical job states and histories. A trailing
partial line (a crash mid-write) is ignored on replay; corruption anywhere
else is an error.
"""

from __future__ import annotations

import json
import os
import threading

from . import wire
from .classads import ad_from_json
from .jobs import (
    IllegalJobTransition,
    JobQueue,
    RejectedAd,
    UnknownJob,
)


class CorruptJournal(Exception):
    pass


class Journal:
    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "ab")

    def append(self, record: dict):
        line = json.dumps(record, separators=(",", ":")) + "\n"
        self._fh.write(line.encode("utf-8"))
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self):
        self._fh.close()


def replay_journal(path: str) -> list[dict]:
    if not os.path.exists(path):
        return []
    with open(path, "rb") as fh:
        raw = fh.read()
    records = []
    lines = raw.split(b"\n")
    complete = raw.endswith(b"\n")
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if not complete and i == len(lines) - 1:  # interrupted final write
                break
            raise CorruptJournal(f"{path}: bad record on line {i + 1}") from None
    return records


class QueueService:
    """SUBMIT / STATUS / RELEASE / LIST handler backed by a journal file."""

    def __init__(self, journal_path: str):
        self._lock = threading.Lock()
        self.queue = JobQueue(journal_sink=None)
        for record in replay_journal(journal_path):
            self.queue.apply_journal_record(record)
        self.journal = Journal(journal_path)
        self.queue.set_journal_sink(self.journal.append)

    def close(self):
        self.journal.close()

    def handle_message(self, msg: dict) -> dict:
        if not isinstance(msg, dict) or "type" not in msg or "id" not in msg:
            return wire.error_reply(msg.get("id") if isinstance(msg, dict) else None,
                                    "malformed", "request needs type and id fields")
        msg_id = msg["id"]
        mtype = msg["type"]
        with self._lock:
            if mtype == "SUBMIT":
                try:
                    ad = ad_from_json(msg["ad"])
                except Exception as exc:
                    return wire.error_reply(msg_id, "malformed", str(exc))
                try:
                    job = self.queue.submit(ad)
                except RejectedAd as exc:
                    return wire.error_reply(msg_id, "rejected-ad", str(exc))
                return {"id": msg_id, "result": {"job_id": job.job_id,
                                                 "state": job.state.value}}
            if mtype in ("STATUS", "RELEASE"):
                job_id = msg.get("job_id")
                if not isinstance(job_id, int):
                    return wire.error_reply(msg_id, "malformed",
                                            "job_id must be an integer")
                try:
                    if mtype == "RELEASE":
                        job = self.queue.release(job_id)
                    else:
                        job = self.queue.get(job_id)
                except UnknownJob as exc:
                    return wire.error_reply(msg_id, "unknown-job", str(exc))
                except IllegalJobTransition as exc:
                    return wire.error_reply(msg_id, "illegal-transition", str(exc))
                return {"id": msg_id, "result": job.status_json()}
            if mtype == "LIST":
                jobs = [{"job_id": j.job_id, "state": j.state.value}
                        for j in self.queue.jobs.values()]
                return {"id": msg_id, "result": {"jobs": jobs}}
        return wire.error_reply(msg_id, "unsupported", f"unknown request type {mtype!r}")


def submit_over_wire(host: str, port: int, ad_json: dict,
                     auth_token: str | None = None) -> int:
    reply = wire.send_request(host, port, {"type": "SUBMIT", "ad": ad_json},
                              auth_token=auth_token)
    if "error" in reply:
        raise RuntimeError(f"{reply['error']['code']}: {reply['error']['message']}")
    return reply["result"]["job_id"]
