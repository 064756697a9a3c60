"""Command line front end.

Servers print `LISTENING <port>` once ready, so callers can pass --port 0
and read the assigned port from the first line of output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import wire
from .advertise import InfoService, advertise_once, parse_gridmap
from .classads import AdKind, parse_classad
from .conftree import (
    AnswerScript,
    ConfigureError,
    InteractiveInput,
    configure,
    derive_service_config,
    meta_schema,
    parse_answer_file,
    read_tree,
    write_tree,
)
from .matchmaker import MatchmakerService, directory_query
from .queue_server import QueueService
from .sim import POLICIES, load_scenario_file, run_scenario
from .station import DatasetCatalog, station_from_config
from .conftree.derive import MissingSection, UnsupportedSchemaVersion


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write_out(path: str | None, content: str):
    if path is None or path == "-":
        sys.stdout.write(content)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(content)


def _host_port(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"{value!r} is not HOST:PORT")
    return host or "127.0.0.1", int(port)


def _serve(handler, port: int, auth: str | None):
    server = wire.LineServer("127.0.0.1", port, handler, auth_token=auth)
    print(f"LISTENING {server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def _load_station(args):
    site = read_tree(_read(args.config))
    stations = derive_service_config(site, "station")
    for node in stations.children:
        if node.attributes.get("name") == args.station:
            fixture = json.loads(_read(args.fixture)) if args.fixture else None
            return station_from_config(node, fixture)
    raise SystemExit(f"no station named {args.station!r} in {args.config}")


def _request_or_die(host, port, msg, auth):
    try:
        reply = wire.send_request(host, port, msg, auth_token=auth)
    except OSError as exc:
        raise SystemExit(f"cannot reach {host}:{port}: {exc}")
    if "error" in reply:
        err = reply["error"]
        raise SystemExit(f"{err.get('code')}: {err.get('message')}")
    return reply["result"]


# -- conf ------------------------------------------------------------------------

def cmd_conf_run(args):
    schema = read_tree(_read(args.schema))
    prior = read_tree(_read(args.prior)) if args.prior else None
    source = parse_answer_file(_read(args.answers)) if args.answers \
        else InteractiveInput()
    try:
        config = configure(schema, source, prior=prior)
    except ConfigureError as exc:
        raise SystemExit(f"configuration failed: {exc}")
    _write_out(args.output, write_tree(config))


def cmd_conf_meta(args):
    _write_out(args.output, write_tree(meta_schema()))


def cmd_conf_derive(args):
    config = read_tree(_read(args.config))
    try:
        derived = derive_service_config(config, args.service)
    except (UnsupportedSchemaVersion, MissingSection) as exc:
        raise SystemExit(f"cannot derive: {exc}")
    _write_out(args.output, write_tree(derived))


# -- services ----------------------------------------------------------------------

def cmd_adv_run(args):
    config = read_tree(_read(args.config))
    gridmap = parse_gridmap(_read(args.gridmap)) if args.gridmap else []
    host, port = args.mm
    ttl = 2.0 * args.interval

    def send(msg):
        return wire.send_request(host, port, msg, auth_token=args.auth)

    while True:
        pushed = advertise_once(config, send, gridmap, ttl)
        print(f"advertised {len(pushed)} ads: {', '.join(pushed)}", flush=True)
        if args.once:
            return
        time.sleep(args.interval)


def cmd_info_serve(args):
    service = InfoService(read_tree(_read(args.config)))
    _serve(service.handle_message, args.port, args.auth)


def cmd_station_serve(args):
    catalog = DatasetCatalog({ds: [tuple(e) for e in files] for ds, files
                              in json.loads(_read(args.catalog)).items()})
    state = _load_station(args)
    from .station import handle_message
    _serve(lambda msg: handle_message(catalog, state, msg), args.port, args.auth)


def cmd_mm_serve(args):
    directory = {}
    if args.station_directory:
        raw = json.loads(_read(args.station_directory))
        directory = {sid: (str(hp[0]), int(hp[1])) for sid, hp in raw.items()}
    query = directory_query(directory, auth_token=args.auth) if directory else None
    service = MatchmakerService(station_query=query)
    _serve(service.handle_message, args.port, args.auth)


def cmd_q_serve(args):
    service = QueueService(args.journal)
    try:
        _serve(service.handle_message, args.port, args.auth)
    finally:
        service.close()


# -- queue client -------------------------------------------------------------------

def cmd_submit(args):
    ad_id = os.path.splitext(os.path.basename(args.ad))[0]
    ad = parse_classad(_read(args.ad), AdKind.JOB, ad_id=ad_id)
    from .classads import ad_to_json
    host, port = args.queue
    result = _request_or_die(host, port,
                             {"type": "SUBMIT", "ad": ad_to_json(ad)}, args.auth)
    print(f"job {result['job_id']} {result['state']}")


def cmd_status(args):
    host, port = args.queue
    result = _request_or_die(host, port,
                             {"type": "STATUS", "job_id": args.job}, args.auth)
    print(f"job {result['job_id']}: {result['state']}"
          + (f" ({result['detail']})" if result.get("detail") else ""))
    for entry in result["history"]:
        detail = f"  {entry['detail']}" if entry.get("detail") else ""
        print(f"  {entry['stamp']:>8}  {entry['state']}{detail}")


def cmd_release(args):
    host, port = args.queue
    result = _request_or_die(host, port,
                             {"type": "RELEASE", "job_id": args.job}, args.auth)
    print(f"job {result['job_id']} {result['state']}")


# -- sim ---------------------------------------------------------------------------

def cmd_sim_run(args):
    scenario = load_scenario_file(args.scenario)
    report, event_log = run_scenario(scenario, args.policy, args.seed)
    if args.events:
        with open(args.events, "w", encoding="utf-8") as fh:
            for entry in event_log:
                fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
    _write_out(args.output, json.dumps(report, indent=2) + "\n")


# -- wiring ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vogrid",
        description="Desk-scale grid: configuration, advertisement, "
                    "matchmaking, and simulation.")
    top = parser.add_subparsers(dest="command", required=True)

    conf = top.add_parser("conf", help="configuration sessions and derivation")
    confsub = conf.add_subparsers(dest="subcommand", required=True)
    p = confsub.add_parser("run", help="configure a schema into a config tree")
    p.add_argument("--schema", required=True)
    p.add_argument("--answers", help="scripted answers; interactive if omitted")
    p.add_argument("--prior", help="previous config supplying defaults")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(fn=cmd_conf_run)
    p = confsub.add_parser("meta", help="print the built-in meta-schema")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(fn=cmd_conf_meta)
    p = confsub.add_parser("derive", help="project a per-service config")
    p.add_argument("--config", required=True)
    p.add_argument("--service", required=True,
                   choices=("advertiser", "station", "monitoring"))
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(fn=cmd_conf_derive)

    adv = top.add_parser("adv", help="resource advertiser")
    advsub = adv.add_subparsers(dest="subcommand", required=True)
    p = advsub.add_parser("run", help="advertise a site to the matchmaker")
    p.add_argument("--config", required=True)
    p.add_argument("--mm", required=True, type=_host_port)
    p.add_argument("--interval", type=float, default=30.0)
    p.add_argument("--gridmap", help="authorized grid subjects, one per line")
    p.add_argument("--once", action="store_true", help="advertise once and exit")
    p.add_argument("--auth")
    p.set_defaults(fn=cmd_adv_run)

    info = top.add_parser("info", help="pull-based site information tree")
    infosub = info.add_subparsers(dest="subcommand", required=True)
    p = infosub.add_parser("serve")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--auth")
    p.set_defaults(fn=cmd_info_serve)

    station = top.add_parser("station", help="data-handling station")
    stationsub = station.add_subparsers(dest="subcommand", required=True)
    p = stationsub.add_parser("serve")
    p.add_argument("--config", required=True, help="site configuration XML")
    p.add_argument("--station", required=True, help="station name in the config")
    p.add_argument("--catalog", required=True, help="dataset catalog JSON")
    p.add_argument("--fixture", help="JSON runtime state overrides")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--auth")
    p.set_defaults(fn=cmd_station_serve)

    mm = top.add_parser("mm", help="matchmaking service")
    mmsub = mm.add_subparsers(dest="subcommand", required=True)
    p = mmsub.add_parser("serve")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--station-directory",
                   help="JSON map of Station_ID to [host, port]")
    p.add_argument("--auth")
    p.set_defaults(fn=cmd_mm_serve)

    q = top.add_parser("q", help="job queue server")
    qsub = q.add_subparsers(dest="subcommand", required=True)
    p = qsub.add_parser("serve")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--journal", required=True)
    p.add_argument("--auth")
    p.set_defaults(fn=cmd_q_serve)

    p = top.add_parser("submit", help="submit a job ad to the queue")
    p.add_argument("--queue", required=True, type=_host_port)
    p.add_argument("--ad", required=True, help="classad text file")
    p.add_argument("--auth")
    p.set_defaults(fn=cmd_submit)

    p = top.add_parser("status", help="job state and history")
    p.add_argument("--queue", required=True, type=_host_port)
    p.add_argument("--job", required=True, type=int)
    p.add_argument("--auth")
    p.set_defaults(fn=cmd_status)

    p = top.add_parser("release", help="re-queue a held job")
    p.add_argument("--queue", required=True, type=_host_port)
    p.add_argument("--job", required=True, type=int)
    p.add_argument("--auth")
    p.set_defaults(fn=cmd_release)

    sim = top.add_parser("sim", help="deterministic scenario runs")
    simsub = sim.add_subparsers(dest="subcommand", required=True)
    p = simsub.add_parser("run")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policy", default="data-aware", choices=POLICIES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--events", help="also write the event log, one JSON per line")
    p.set_defaults(fn=cmd_sim_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
