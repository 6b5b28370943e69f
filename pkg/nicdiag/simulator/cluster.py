from __future__ import annotations

from nicdiag.errors import TelemetryValidationError
from nicdiag.telemetry.model import Topology, TopologyEntry


def generate_cluster(n_compute: int, n_switch: int) -> Topology:
    """One NIC per compute node, assigned round-robin to leaf switch ports."""
    if n_compute < 1 or n_switch < 1:
        raise TelemetryValidationError(
            "need at least one compute node and one switch", [f"compute={n_compute}", f"switches={n_switch}"]
        )
    width = max(2, len(str(n_compute)))
    next_port = [1] * n_switch
    entries = []
    for i in range(n_compute):
        sw = i % n_switch
        entries.append(
            TopologyEntry(
                node=f"server{i + 1:0{width}d}",
                nic="NIC1",
                link=f"switch{sw + 1}",
                link_port=f"100GE1/0/{next_port[sw]}",
            )
        )
        next_port[sw] += 1
    return Topology(tuple(entries))
