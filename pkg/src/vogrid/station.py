"""Simulated data-handling station.

A station knows which files of the shared catalog it holds locally, how deep
its input/output request queues are, and the bandwidth of its links to other
sites. It answers preference queries with an estimated total data latency:

    input_transfer = sum over missing files of size / link(source)
    input_wait     = input_queue_depth * mean_service_seconds
    output         = expected_output_bytes / link(output_destination)
                     + output_queue_depth * mean_service_seconds
    score          = -(input_transfer + input_wait + output)

Higher scores are preferred. Transfers are modeled as sequential; link
speeds are static configuration values supplied by the site, not measured.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, NamedTuple


class UnknownDataset(Exception):
    pass


class NoRouteToSource(Exception):
    pass


class IllegalTransition(Exception):
    pass


class FileEntry(NamedTuple):
    file_name: str
    size_bytes: int
    source_site: str


class DatasetCatalog:
    """Named datasets, each an ordered list of files with sizes and sources."""

    def __init__(self, datasets: Mapping[str, Iterable[tuple]]):
        self._datasets: dict[str, list[FileEntry]] = {}
        for name, entries in datasets.items():
            files = [FileEntry(*e) for e in entries]
            seen = set()
            for f in files:
                if f.file_name in seen:
                    raise ValueError(f"dataset {name!r}: duplicate file {f.file_name!r}")
                if f.size_bytes <= 0:
                    raise ValueError(f"dataset {name!r}: file {f.file_name!r} has size <= 0")
                seen.add(f.file_name)
            self._datasets[name] = files

    def files(self, dataset: str) -> list[FileEntry]:
        if dataset not in self._datasets:
            raise UnknownDataset(dataset)
        return list(self._datasets[dataset])

    def names(self) -> list[str]:
        return list(self._datasets)

    def __contains__(self, dataset: str) -> bool:
        return dataset in self._datasets


@dataclass(frozen=True)
class StationState:
    station_id: str
    cached_files: frozenset[str] = frozenset()
    input_queue_depth: int = 0
    output_queue_depth: int = 0
    mean_service_seconds: float = 1.0
    links: Mapping[str, float] = None  # site name -> bytes/second
    output_destination: str = ""
    expected_output_bytes: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cached_files", frozenset(self.cached_files))
        object.__setattr__(self, "links", dict(self.links or {}))
        for site, bw in self.links.items():
            if bw <= 0:
                raise ValueError(f"station {self.station_id!r}: link {site!r} bandwidth <= 0")
        if self.input_queue_depth < 0 or self.output_queue_depth < 0:
            raise ValueError(f"station {self.station_id!r}: negative queue depth")
        if self.output_destination and self.output_destination not in self.links:
            raise ValueError(f"station {self.station_id!r}: output destination "
                             f"{self.output_destination!r} has no link")


@dataclass(frozen=True)
class PreferenceReport:
    score: float
    missing_bytes: int
    input_transfer_seconds: float
    input_wait_seconds: float
    output_seconds: float


def lookup_dataset(cat: DatasetCatalog, st: StationState,
                   dataset: str) -> tuple[list[FileEntry], list[FileEntry]]:
    """Partition a dataset's files into (cached here, missing here), in catalog order."""
    present, missing = [], []
    for f in cat.files(dataset):
        (present if f.file_name in st.cached_files else missing).append(f)
    return present, missing


def get_preference(cat: DatasetCatalog, st: StationState, dataset: str,
                   output_bytes: int | None = None) -> PreferenceReport:
    """Estimated data latency for running this dataset here, as a preference score.

    output_bytes overrides the station's per-job default when given.
    """
    _, missing = lookup_dataset(cat, st, dataset)
    transfer = 0.0
    missing_bytes = 0
    for f in missing:
        bw = st.links.get(f.source_site)
        if bw is None:
            raise NoRouteToSource(f"station {st.station_id!r}: no link to {f.source_site!r}")
        transfer += f.size_bytes / bw
        missing_bytes += f.size_bytes
    wait = st.input_queue_depth * st.mean_service_seconds
    out_bytes = st.expected_output_bytes if output_bytes is None else output_bytes
    output = st.output_queue_depth * st.mean_service_seconds
    if out_bytes:
        if not st.output_destination:
            raise NoRouteToSource(
                f"station {st.station_id!r}: output bytes but no output destination")
        output += out_bytes / st.links[st.output_destination]
    return PreferenceReport(
        score=-(transfer + wait + output),
        missing_bytes=missing_bytes,
        input_transfer_seconds=transfer,
        input_wait_seconds=wait,
        output_seconds=output,
    )


# -- state transitions ---------------------------------------------------------

@dataclass(frozen=True)
class EnqueueInput:
    pass


@dataclass(frozen=True)
class DequeueInput:
    pass


@dataclass(frozen=True)
class EnqueueOutput:
    pass


@dataclass(frozen=True)
class DequeueOutput:
    pass


@dataclass(frozen=True)
class CacheAdd:
    file_name: str


@dataclass(frozen=True)
class CacheEvict:
    file_name: str


def apply_event(st: StationState, ev) -> StationState:
    """One queue or cache step; every other field is unchanged."""
    if isinstance(ev, EnqueueInput):
        return replace(st, input_queue_depth=st.input_queue_depth + 1)
    if isinstance(ev, DequeueInput):
        if st.input_queue_depth == 0:
            raise IllegalTransition("input queue is empty")
        return replace(st, input_queue_depth=st.input_queue_depth - 1)
    if isinstance(ev, EnqueueOutput):
        return replace(st, output_queue_depth=st.output_queue_depth + 1)
    if isinstance(ev, DequeueOutput):
        if st.output_queue_depth == 0:
            raise IllegalTransition("output queue is empty")
        return replace(st, output_queue_depth=st.output_queue_depth - 1)
    if isinstance(ev, CacheAdd):
        return replace(st, cached_files=st.cached_files | {ev.file_name})
    if isinstance(ev, CacheEvict):
        if ev.file_name not in st.cached_files:
            raise IllegalTransition(f"{ev.file_name!r} not cached")
        return replace(st, cached_files=st.cached_files - {ev.file_name})
    raise IllegalTransition(f"unknown event {ev!r}")


# -- wire handling ---------------------------------------------------------------

def _error_reply(msg_id, code: str, message: str) -> dict:
    return {"id": msg_id, "error": {"code": code, "message": message}}


def _file_entry_json(f: FileEntry) -> dict:
    return {"file": f.file_name, "size": f.size_bytes, "source": f.source_site}


def handle_message(cat: DatasetCatalog, st: StationState, msg: dict) -> dict:
    """Answer one GET_PREFERENCE or LOOKUP request. Queries never mutate state."""
    if not isinstance(msg, dict) or "type" not in msg or "id" not in msg:
        return _error_reply(msg.get("id") if isinstance(msg, dict) else None,
                            "malformed", "request needs type and id fields")
    msg_id = msg["id"]
    mtype = msg["type"]
    if mtype not in ("GET_PREFERENCE", "LOOKUP"):
        return _error_reply(msg_id, "unsupported", f"unknown request type {mtype!r}")
    dataset = msg.get("dataset")
    if not isinstance(dataset, str):
        return _error_reply(msg_id, "malformed", "dataset field must be a string")
    try:
        if mtype == "LOOKUP":
            present, missing = lookup_dataset(cat, st, dataset)
            return {"id": msg_id, "result": {
                "present": [_file_entry_json(f) for f in present],
                "missing": [_file_entry_json(f) for f in missing],
            }}
        output_bytes = msg.get("output_bytes")
        if output_bytes is not None and (not isinstance(output_bytes, (int, float))
                                         or output_bytes < 0):
            return _error_reply(msg_id, "malformed", "output_bytes must be nonnegative")
        report = get_preference(cat, st, dataset, output_bytes)
        return {"id": msg_id, "result": {
            "score": report.score,
            "missing_bytes": report.missing_bytes,
            "input_transfer_seconds": report.input_transfer_seconds,
            "input_wait_seconds": report.input_wait_seconds,
            "output_seconds": report.output_seconds,
        }}
    except UnknownDataset:
        return _error_reply(msg_id, "unknown-dataset", f"no dataset named {dataset!r}")
    except NoRouteToSource as exc:
        return _error_reply(msg_id, "no-route", str(exc))


def station_from_config(node, fixture: dict | None = None) -> StationState:
    """Build a station from its site-configuration element.

    The element carries name and optional mean_service_seconds,
    output_destination and expected_output_bytes attributes; `link` children
    carry to= and bandwidth_bytes_per_second=. A fixture dict (scenario
    runtime state) overrides or extends any of the constructor fields.
    """
    attrs = node.attributes
    links = {}
    for child in node.children:
        if child.element_name == "link":
            links[child.attributes["to"]] = float(child.attributes["bandwidth_bytes_per_second"])
    spec = {
        "station_id": attrs["name"],
        "mean_service_seconds": float(attrs.get("mean_service_seconds", 1.0)),
        "output_destination": attrs.get("output_destination", ""),
        "expected_output_bytes": int(attrs.get("expected_output_bytes", 0)),
        "links": links,
    }
    if fixture:
        merged_links = dict(links)
        merged_links.update(fixture.get("links", {}))
        spec.update({k: v for k, v in fixture.items() if k != "links"})
        spec["links"] = merged_links
    spec["cached_files"] = frozenset(spec.get("cached_files", ()))
    return StationState(**spec)
