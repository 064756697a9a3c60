"""vogrid: a desk-scale virtual-organization grid.

Classad matchmaking with match-time station queries, schema-driven site
configuration, config-derived resource advertisement and monitoring, a
journaled job queue, and a deterministic scenario simulator.
"""

__version__ = "0.1.0"

from . import advertise, classads, conftree, jobs, matchmaker, queue_server, sim
from . import station, wire

__all__ = [
    "__version__",
    "advertise",
    "classads",
    "conftree",
    "jobs",
    "matchmaker",
    "queue_server",
    "sim",
    "station",
    "wire",
]
