from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from drain3.drain import Drain, LogCluster

from nicdiag.telemetry.model import LogRecord

WILDCARD = "<*>"


@dataclass(frozen=True)
class LogTemplate:
    id: int
    tokens: tuple[str, ...]
    example_count: int = 0

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def informative(self) -> bool:
        return any(token != WILDCARD for token in self.tokens)


class TemplateParser:
    """
    Fixed-depth Drain parse tree. Template ids are 0-based in creation order;
    `match` looks records up without growing or generalizing the tree.
    """

    def __init__(self, depth: int = 4, sim_threshold: float = 0.4, max_children: int = 100):
        self.depth = depth
        self.sim_threshold = sim_threshold
        self.max_children = max_children
        self._drain = Drain(depth=depth, sim_th=sim_threshold, max_children=max_children, param_str=WILDCARD)

    def add(self, message: str) -> int:
        cluster, _change = self._drain.add_log_message(message)
        return cluster.cluster_id - 1

    def match(self, message: str) -> int | None:
        tokens = self._drain.get_content_as_tokens(message)
        cluster = self._drain.tree_search(self._drain.root_node, tokens, self.sim_threshold, False)
        return None if cluster is None else cluster.cluster_id - 1

    def templates(self) -> list[LogTemplate]:
        clusters = sorted(self._drain.clusters, key=lambda c: c.cluster_id)
        return [LogTemplate(c.cluster_id - 1, tuple(c.log_template_tokens), c.size) for c in clusters]

    @classmethod
    def from_templates(
        cls,
        templates: Iterable[LogTemplate],
        depth: int = 4,
        sim_threshold: float = 0.4,
        max_children: int = 100,
    ) -> "TemplateParser":
        parser = cls(depth=depth, sim_threshold=sim_threshold, max_children=max_children)
        drain = parser._drain
        for template in sorted(templates, key=lambda t: t.id):
            cluster = LogCluster(list(template.tokens), template.id + 1)
            cluster.size = template.example_count
            drain.id_to_cluster[cluster.cluster_id] = cluster
            drain.add_seq_to_prefix_tree(drain.root_node, cluster)
            drain.clusters_counter = max(drain.clusters_counter, cluster.cluster_id)
        return parser


def parse_templates(
    records: Sequence[LogRecord],
    depth: int = 4,
    sim_threshold: float = 0.4,
    max_children: int = 100,
) -> tuple[list[LogTemplate], list[int]]:
    """Mine templates; the second element gives each record's template id, aligned with `records`."""
    parser = TemplateParser(depth=depth, sim_threshold=sim_threshold, max_children=max_children)
    assignments = [parser.add(r.message) for r in records]
    return parser.templates(), assignments
