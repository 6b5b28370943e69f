from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.metrics.pairwise import cosine_distances

from nicdiag.errors import ModelConfigurationError, TelemetryValidationError, TrainingError
from nicdiag.features.templates import WILDCARD, LogTemplate, TemplateParser
from nicdiag.telemetry.model import LogRecord

MAGIC = "NICDIAG-LOGMODEL"
FORMAT_VERSION = 1
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TemplateVector:
    template: int
    weights: dict[str, float]


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float


@dataclass(frozen=True)
class LogQuantFeature:
    symbols: dict[int, int]

    @property
    def anomalous(self) -> list[int]:
        return sorted(c for c, s in self.symbols.items() if s)


@dataclass(frozen=True, eq=False)
class LogClusterModel:
    templates: tuple[LogTemplate, ...]
    clusters: dict[int, tuple[int, ...]]
    merges: tuple[Merge, ...] = ()
    mu: dict[int, float] = field(default_factory=dict)
    sigma: dict[int, float] = field(default_factory=dict)
    depth: int = 4
    sim_threshold: float = 0.4
    max_children: int = 100
    distance_threshold: float = 0.5

    @property
    def cluster_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.clusters))

    @property
    def template_to_cluster(self) -> dict[int, int]:
        return {t: c for c, members in self.clusters.items() for t in members}

    @property
    def fitted(self) -> bool:
        return set(self.mu) == set(self.clusters)

    def parser(self) -> TemplateParser:
        cached = self.__dict__.get("_parser")
        if cached is None:
            cached = TemplateParser.from_templates(
                self.templates, self.depth, self.sim_threshold, self.max_children
            )
            object.__setattr__(self, "_parser", cached)
        return cached


def _template_tokens(template: LogTemplate) -> list[str]:
    return [t for t in template.tokens if t != WILDCARD]


def _vectorizer() -> TfidfVectorizer:
    return TfidfVectorizer(
        analyzer=_template_tokens, token_pattern=None, smooth_idf=False, norm=None, lowercase=False
    )


def vectorize_templates(templates: Sequence[LogTemplate]) -> list[TemplateVector]:
    """Token TF-IDF over the template corpus, wildcard excluded, idf = ln(n/df) + 1."""
    if not templates:
        raise TelemetryValidationError("no templates to vectorize")
    empty = [str(t.id) for t in templates if not t.informative]
    if empty:
        raise TelemetryValidationError("template consists only of wildcards", empty)
    vectorizer = _vectorizer()
    matrix = vectorizer.fit_transform(list(templates)).tocsr()
    vocab = vectorizer.get_feature_names_out()
    vectors: list[TemplateVector] = []
    for row, template in enumerate(templates):
        start, end = matrix.indptr[row], matrix.indptr[row + 1]
        weights = {str(vocab[j]): float(w) for j, w in zip(matrix.indices[start:end], matrix.data[start:end])}
        vectors.append(TemplateVector(template.id, dict(sorted(weights.items()))))
    return vectors


def _dense(vectors: Sequence[TemplateVector]) -> np.ndarray:
    vocab = sorted({token for v in vectors for token in v.weights})
    index = {token: i for i, token in enumerate(vocab)}
    out = np.zeros((len(vectors), len(vocab)), dtype=np.float64)
    for row, v in enumerate(vectors):
        for token, weight in v.weights.items():
            out[row, index[token]] = weight
    return out


def cluster_templates(
    vectors: Sequence[TemplateVector],
    distance_threshold: float = 0.5,
    templates: Sequence[LogTemplate] = (),
    log_fn: Callable[[str], None] | None = None,
) -> LogClusterModel:
    """
    Average-linkage agglomeration over cosine distance. Merges while the closest pair is
    within `distance_threshold`; equal distances merge the pair with the smallest
    (min template id, max template id) first.
    """
    log = log_fn or (lambda _msg: None)
    if not vectors:
        raise TelemetryValidationError("cluster_templates needs at least one template vector")
    ordered = sorted(vectors, key=lambda v: v.template)
    ids = [v.template for v in ordered]
    dist = np.clip(cosine_distances(_dense(ordered)), 0.0, 2.0)
    np.fill_diagonal(dist, 0.0)

    # clusters as sorted index lists into `ids`; representative = first (smallest id).
    # Ties go to the smallest (min id, max id) over the merged members, then to the representatives.
    clusters: list[list[int]] = [[i] for i in range(len(ids))]
    merges: list[Merge] = []
    while len(clusters) > 1:
        best: tuple[float, int, int] | None = None
        best_key: tuple[int, int, int, int] | None = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = float(dist[np.ix_(clusters[a], clusters[b])].mean())
                low, high = ids[clusters[a][0]], ids[clusters[b][0]]
                key = (min(low, high), max(ids[clusters[a][-1]], ids[clusters[b][-1]]), low, high)
                if best is None or d < best[0] - TIE_TOLERANCE:
                    best, best_key = (d, a, b), key
                elif abs(d - best[0]) <= TIE_TOLERANCE and key < best_key:
                    best, best_key = (d, a, b), key
        d, a, b = best
        if d > distance_threshold:
            break
        merges.append(Merge(ids[clusters[a][0]], ids[clusters[b][0]], d))
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]

    clusters.sort(key=lambda members: ids[members[0]])
    mapping = {cid: tuple(ids[i] for i in members) for cid, members in enumerate(clusters)}
    log(f"logs: {len(ids)} templates -> {len(mapping)} clusters ({len(merges)} merges)")
    by_id = {t.id: t for t in templates}
    return LogClusterModel(
        templates=tuple(by_id[i] for i in ids if i in by_id),
        clusters=mapping,
        merges=tuple(merges),
        distance_threshold=distance_threshold,
    )


def fit_normal_counts(model: LogClusterModel, normal_windows: Sequence[Mapping[int, int]]) -> LogClusterModel:
    if len(normal_windows) < 2:
        raise TrainingError(f"log statistics need at least 2 normal windows; got {len(normal_windows)}")
    mu: dict[int, float] = {}
    sigma: dict[int, float] = {}
    for cid in model.cluster_ids:
        counts = np.array([float(w.get(cid, 0)) for w in normal_windows], dtype=np.float64)
        mu[cid] = float(counts.mean())
        sigma[cid] = float(counts.std())
    return replace(model, mu=mu, sigma=sigma)


def window_counts(
    model: LogClusterModel,
    records: Iterable[LogRecord],
    log_fn: Callable[[str], None] | None = None,
) -> dict[int, int]:
    parser = model.parser()
    to_cluster = model.template_to_cluster
    counts = {cid: 0 for cid in model.cluster_ids}
    unmatched = 0
    for record in records:
        template = parser.match(record.message)
        if template is None or template not in to_cluster:
            unmatched += 1
            continue
        counts[to_cluster[template]] += 1
    if unmatched and log_fn is not None:
        log_fn(f"logs: {unmatched} records matched no known template")
    return counts


def quantize_counts(model: LogClusterModel, counts: Mapping[int, int]) -> LogQuantFeature:
    # With sigma == 0 the rule degenerates to count > mu.
    return LogQuantFeature(
        {
            cid: int(counts.get(cid, 0) > model.mu.get(cid, 0.0) + 3.0 * model.sigma.get(cid, 0.0))
            for cid in model.cluster_ids
        }
    )


def save_log_model(model: LogClusterModel, path: Path) -> None:
    lines = [
        f"{MAGIC} v{FORMAT_VERSION}",
        f"drain depth={model.depth} sim_threshold={model.sim_threshold!r} max_children={model.max_children}",
        f"distance_threshold {model.distance_threshold!r}",
    ]
    for t in model.templates:
        lines.append(f"template\t{t.id}\t{t.example_count}\t{t.text}")
    for cid in model.cluster_ids:
        members = " ".join(str(m) for m in model.clusters[cid])
        lines.append(f"cluster\t{cid}\t{members}\t{model.mu.get(cid, 0.0)!r}\t{model.sigma.get(cid, 0.0)!r}")
    for m in model.merges:
        lines.append(f"merge\t{m.left}\t{m.right}\t{m.distance!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_log_model(path: Path) -> LogClusterModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"{MAGIC} v{FORMAT_VERSION}":
        raise ModelConfigurationError(f"{path}: not a {MAGIC} v{FORMAT_VERSION} file")
    try:
        drain = dict(item.split("=", 1) for item in lines[1].split()[1:])
        distance_threshold = float(lines[2].split()[1])
        templates: list[LogTemplate] = []
        clusters: dict[int, tuple[int, ...]] = {}
        mu: dict[int, float] = {}
        sigma: dict[int, float] = {}
        merges: list[Merge] = []
        for line in lines[3:]:
            parts = line.split("\t")
            if parts[0] == "template":
                templates.append(LogTemplate(int(parts[1]), tuple(parts[3].split(" ")), int(parts[2])))
            elif parts[0] == "cluster":
                cid = int(parts[1])
                clusters[cid] = tuple(int(m) for m in parts[2].split())
                mu[cid] = float(parts[3])
                sigma[cid] = float(parts[4])
            elif parts[0] == "merge":
                merges.append(Merge(int(parts[1]), int(parts[2]), float(parts[3])))
    except (IndexError, KeyError, ValueError) as exc:
        raise ModelConfigurationError(f"{path}: malformed log model ({exc})") from exc
    return LogClusterModel(
        templates=tuple(templates),
        clusters=clusters,
        merges=tuple(merges),
        mu=mu,
        sigma=sigma,
        depth=int(drain["depth"]),
        sim_threshold=float(drain["sim_threshold"]),
        max_children=int(drain["max_children"]),
        distance_threshold=distance_threshold,
    )
