"""Decoupled clock-distribution layer.

Timing is distributed over the physical graph independently of payload
routing: each switch and radio unit locks to the best reachable timing
source over a shortest-hop branch, switches regenerate (attenuate) the
accumulated jitter, and radio units are always leaves. Session setup,
teardown, reroute, and migration never touch this tree.
"""

from __future__ import annotations

import hashlib
import heapq
import csv
import math
from dataclasses import dataclass

from .topology import NodeId, NodeKind, PhysLink, PhysicalTopology


@dataclass(frozen=True)
class ClockSource:
    """External timing reference feeding the tree at a BBU or switch."""

    node: NodeId
    quality_rank: int = 0  # lower is better
    frequency_offset: float = 0.0  # parts-per-billion


@dataclass(frozen=True)
class SyncStatus:
    node: NodeId
    accumulated_jitter: float  # seconds, RMS
    effective_offset: float  # ppb, inherited from the root source
    hops_from_source: int

    def __post_init__(self) -> None:
        if self.accumulated_jitter < 0:
            raise ValueError("accumulated_jitter must be >= 0")


@dataclass
class ClockTree:
    """Forest of timing branches: parent pointers plus per-node root source."""

    parent: dict[NodeId, tuple[NodeId, PhysLink]]
    source_of: dict[NodeId, ClockSource]  # every synchronized node, roots included
    unsynchronized: set[NodeId]

    def canonical_hash(self) -> str:
        """Stable digest of the tree structure, for decoupling checks."""
        items = []
        for node in sorted(self.source_of):
            src = self.source_of[node]
            up = self.parent.get(node)
            parent_part = f"{up[0]}:{up[1].key}" if up else "root"
            items.append(f"{node}<-{parent_part}@{src.node}/{src.quality_rank}/{src.frequency_offset!r}")
        items.append("unsync:" + ",".join(str(n) for n in sorted(self.unsynchronized)))
        return hashlib.sha256("|".join(items).encode()).hexdigest()


def _branch_candidates(
    topology: PhysicalTopology, source: ClockSource
) -> dict[NodeId, tuple[int, tuple[NodeId, ...]]]:
    """Shortest-hop paths from one source to every reachable node.

    Ties between equal-hop paths are broken by lexicographic node
    sequence. Radio units never relay, so they are reached but not
    expanded.
    """
    start = source.node
    best: dict[NodeId, tuple[int, tuple[NodeId, ...]]] = {start: (0, (start,))}
    heap: list[tuple[int, tuple[NodeId, ...], NodeId]] = [(0, (start,), start)]
    while heap:
        hops, path, node = heapq.heappop(heap)
        if best.get(node, (math.inf, ())) != (hops, path):
            continue
        if node != start and topology.nodes[node].kind is NodeKind.RRH:
            continue  # slave-only nodes do not redistribute timing
        for peer, _ in topology.neighbors(node):
            cand = (hops + 1, path + (peer,))
            if peer not in best or cand < best[peer]:
                best[peer] = cand
                heapq.heappush(heap, (cand[0], cand[1], peer))
    return best


def build_sync_tree(topology: PhysicalTopology, sources: list[ClockSource]) -> ClockTree:
    """Assign every node a timing parent toward the best reachable source.

    Selection order per node: source quality rank, then hop count, then
    source node id, then lexicographic branch path. Nodes cut off from
    every source are reported as unsynchronized rather than raising.
    """
    seen_nodes = set()
    for source in sources:
        kind = topology.nodes.get(source.node)
        if kind is None:
            raise ValueError(f"clock source references unknown node {source.node}")
        if kind.kind not in (NodeKind.BBU, NodeKind.FH_SWITCH):
            raise ValueError(
                f"clock sources attach to BBUs or switches, not {kind.kind.value}"
            )
        if source.node in seen_nodes:
            raise ValueError(f"duplicate clock source at node {source.node}")
        seen_nodes.add(source.node)

    reach = [(source, _branch_candidates(topology, source)) for source in sources]
    parent: dict[NodeId, tuple[NodeId, PhysLink]] = {}
    source_of: dict[NodeId, ClockSource] = {}
    unsynchronized: set[NodeId] = set()
    for node_id in topology.nodes:
        candidates = []
        for source, paths in reach:
            hit = paths.get(node_id)
            if hit is not None:
                hops, path = hit
                candidates.append((source.quality_rank, hops, source.node, path, source))
        if not candidates:
            unsynchronized.add(node_id)
            continue
        rank, hops, _, path, source = min(candidates, key=lambda c: c[:4])
        source_of[node_id] = source
        if hops > 0:
            up = path[-2]
            parent[node_id] = (up, topology.link_between(up, node_id))
    return ClockTree(parent=parent, source_of=source_of, unsynchronized=unsynchronized)


def propagate_sync(
    tree: ClockTree, topology: PhysicalTopology, regen_factor: float = 1.0
) -> dict[NodeId, SyncStatus]:
    """Accumulate jitter and offset down every branch of the tree.

    A child inherits sqrt((parent_jitter * regen)^2 + link_jitter^2),
    where regen applies only when the parent is a switch (switches clean
    the clock before passing it on; other relays forward it untouched).
    """
    if not 0 <= regen_factor <= 1:
        raise ValueError("regen_factor must be in [0, 1]")
    status: dict[NodeId, SyncStatus] = {}
    for node in tree.source_of:
        if node not in tree.parent:
            src = tree.source_of[node]
            status[node] = SyncStatus(node, 0.0, src.frequency_offset, 0)

    def resolve(node: NodeId) -> SyncStatus:
        ready = status.get(node)
        if ready is not None:
            return ready
        up, link = tree.parent[node]
        parent_status = resolve(up)
        regen = regen_factor if topology.nodes[up].kind is NodeKind.FH_SWITCH else 1.0
        jitter = math.sqrt((parent_status.accumulated_jitter * regen) ** 2 + link.jitter_std**2)
        result = SyncStatus(
            node=node,
            accumulated_jitter=jitter,
            effective_offset=parent_status.effective_offset,
            hops_from_source=parent_status.hops_from_source + 1,
        )
        status[node] = result
        return result

    for node in tree.source_of:
        resolve(node)
    return status


def write_sync_csv(
    tree: ClockTree,
    status: dict[NodeId, SyncStatus],
    path: str,
) -> None:
    """Export the per-node synchronization report."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "source_id", "hops", "jitter_ns", "offset_ppb"])
        for node in sorted(set(tree.source_of) | tree.unsynchronized):
            if node in tree.unsynchronized:
                writer.writerow([node, "", "", "", ""])
            else:
                st = status[node]
                writer.writerow(
                    [
                        node,
                        tree.source_of[node].node,
                        st.hops_from_source,
                        repr(st.accumulated_jitter * 1e9),
                        repr(st.effective_offset),
                    ]
                )
