"""Finite metric spaces, weighted metric trees, and metric transforms."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

# Absolute slack on triangle comparisons: path sums of user weights can be
# off by an ulp, so exact comparisons would reject honest tree metrics.
TRIANGLE_SLACK = 1e-12

Edge = tuple[str, str]


class MetricValidationError(ValueError):
    """A distance matrix or tree violates a structural invariant."""


def edge_key(u: str, v: str) -> Edge:
    """Canonical (sorted) key for an undirected edge."""
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite set of labeled points with a square distance matrix.

    The constructor only normalizes shapes; use :func:`validate_metric` to
    enforce the metric axioms. Instances are immutable and safe to share.
    """

    labels: tuple[str, ...]
    dist: np.ndarray

    def __post_init__(self):
        dist = np.asarray(self.dist, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise MetricValidationError(f"distance matrix must be square, got shape {dist.shape}")
        labels = tuple(str(x) for x in self.labels)
        if len(labels) != dist.shape[0]:
            raise MetricValidationError(
                f"{len(labels)} labels for a {dist.shape[0]}x{dist.shape[1]} matrix"
            )
        if len(set(labels)) != len(labels):
            raise MetricValidationError("labels must be distinct")
        dist = dist.copy()
        dist.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", dist)

    @property
    def n_points(self) -> int:
        return len(self.labels)

    def to_json_dict(self) -> dict:
        return {"labels": list(self.labels), "dist": self.dist.tolist()}

    @classmethod
    def from_json_dict(cls, data: dict) -> "FiniteMetricSpace":
        return validate_metric(data["dist"], labels=data.get("labels"))


@dataclass(frozen=True)
class TransformSpec:
    """Entrywise power transform d -> d^p, optionally followed by a square root."""

    exponent: float
    half: bool = False

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError(f"transform exponent must be >= 0, got {self.exponent}")

    @property
    def effective_power(self) -> float:
        return self.exponent / 2.0 if self.half else self.exponent


@dataclass(frozen=True, eq=False)
class WeightedTree:
    """A finite tree with positive edge lengths.

    ``edges`` keeps input order; ``weights`` maps canonical edge keys to
    lengths. Construction validates the tree invariants (connected, acyclic,
    all weights positive).
    """

    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    weights: dict[Edge, float]

    def __post_init__(self):
        vertices = tuple(str(v) for v in self.vertices)
        if len(set(vertices)) != len(vertices):
            raise MetricValidationError("tree vertices must be distinct")
        if not vertices:
            raise MetricValidationError("tree must have at least one vertex")
        known = set(vertices)
        edges = []
        weights: dict[Edge, float] = {}
        for e in self.edges:
            u, v = e
            u, v = str(u), str(v)
            if u == v:
                raise MetricValidationError(f"self-loop at vertex {u!r}")
            if u not in known or v not in known:
                raise MetricValidationError(f"edge ({u!r}, {v!r}) references unknown vertex")
            key = edge_key(u, v)
            if key in weights:
                raise MetricValidationError(f"duplicate edge ({u!r}, {v!r})")
            w_raw = self.weights.get((u, v), self.weights.get((v, u)))
            if w_raw is None:
                raise MetricValidationError(f"missing weight for edge ({u!r}, {v!r})")
            w = float(w_raw)
            if not w > 0:
                raise MetricValidationError(f"edge ({u!r}, {v!r}) has non-positive weight {w}")
            edges.append(key)
            weights[key] = w
        if len(edges) != len(vertices) - 1:
            raise MetricValidationError(
                f"a tree on {len(vertices)} vertices needs {len(vertices) - 1} edges, "
                f"got {len(edges)}"
            )
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "weights", weights)
        # |E| = |V| - 1 plus connectivity rules out cycles.
        if len(self._component_of(vertices[0])) != len(vertices):
            raise MetricValidationError("tree is not connected")

    def _component_of(self, start: str) -> set[str]:
        adj = self.adjacency()
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    def adjacency(self) -> dict[str, list[tuple[str, float]]]:
        adj: dict[str, list[tuple[str, float]]] = {v: [] for v in self.vertices}
        for (u, v) in self.edges:
            w = self.weights[(u, v)]
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj

    def with_weights(self, weights: dict[Edge, float]) -> "WeightedTree":
        """Same tree shape with a different length assignment."""
        return WeightedTree(self.vertices, self.edges, dict(weights))

    def to_json_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"u": u, "v": v, "w": self.weights[(u, v)]} for (u, v) in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "WeightedTree":
        edges = [(e["u"], e["v"]) for e in data["edges"]]
        weights = {edge_key(e["u"], e["v"]): float(e["w"]) for e in data["edges"]}
        return cls(tuple(data["vertices"]), tuple(edges), weights)


def validate_metric(matrix, labels=None) -> FiniteMetricSpace:
    """Check the metric axioms and wrap the matrix in a FiniteMetricSpace.

    Reports the first violated invariant together with the witnessing index
    (pair or triple). Triangle comparisons allow an absolute slack of
    ``TRIANGLE_SLACK`` to absorb path-sum rounding.
    """
    dist = np.asarray(matrix, dtype=float)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise MetricValidationError(f"distance matrix must be square, got shape {dist.shape}")
    k = dist.shape[0]
    if labels is None:
        labels = tuple(f"p{i}" for i in range(k))
    if not np.all(np.isfinite(dist)):
        i, j = np.argwhere(~np.isfinite(dist))[0]
        raise MetricValidationError(f"non-finite distance at ({i}, {j})")
    for i in range(k):
        if dist[i, i] != 0.0:
            raise MetricValidationError(f"nonzero diagonal at ({i}, {i}): {dist[i, i]}")
    asym = np.argwhere(dist != dist.T)
    if asym.size:
        i, j = asym[0]
        raise MetricValidationError(
            f"asymmetric at ({i}, {j}): {dist[i, j]} != {dist[j, i]}"
        )
    off = ~np.eye(k, dtype=bool)
    bad = np.argwhere((dist <= 0) & off)
    if bad.size:
        i, j = bad[0]
        raise MetricValidationError(f"non-positive off-diagonal at ({i}, {j}): {dist[i, j]}")
    for l in range(k):
        # d(i, j) <= d(i, l) + d(l, j) for every pair, via the l-th row/column
        slack = dist[:, l][:, None] + dist[l, :][None, :] - dist
        viol = np.argwhere(slack < -TRIANGLE_SLACK)
        if viol.size:
            i, j = viol[0]
            raise MetricValidationError(
                f"triangle inequality fails at ({i}, {j}, {l}): "
                f"{dist[i, j]} > {dist[i, l]} + {dist[l, j]}"
            )
    return FiniteMetricSpace(tuple(labels), dist)


def tree_to_metric(tree: WeightedTree) -> FiniteMetricSpace:
    """Shortest-path metric on the tree vertices, in vertex input order.

    One traversal per source vertex; O(k^2) total, which is fine at desk
    scale (k up to a few thousand).
    """
    order = {v: i for i, v in enumerate(tree.vertices)}
    k = len(tree.vertices)
    adj = tree.adjacency()
    dist = np.zeros((k, k), dtype=float)
    for src in tree.vertices:
        row = dist[order[src]]
        seen = {src}
        queue = deque([(src, 0.0)])
        while queue:
            u, acc = queue.popleft()
            row[order[u]] = acc
            for v, w in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append((v, acc + w))
    return FiniteMetricSpace(tree.vertices, dist)


def entrywise_power(dist: np.ndarray, p: float) -> np.ndarray:
    """Entrywise d^p with the convention 0^0 = 0, keeping the diagonal zero."""
    out = np.zeros_like(dist, dtype=float)
    mask = dist > 0
    out[mask] = dist[mask] ** p
    return out


def power_transform(
    space: FiniteMetricSpace, spec: TransformSpec, require_metric: bool = True
) -> FiniteMetricSpace:
    """Apply d -> d^p (or sqrt(d^p) when ``spec.half``) entrywise.

    When ``require_metric`` is set, the transformed matrix is re-validated and
    a violation raises; otherwise the raw transformed space is returned (its
    triangle inequality may fail for p > 1 without the square root).
    """
    new_dist = entrywise_power(space.dist, spec.effective_power)
    if require_metric:
        return validate_metric(new_dist, labels=space.labels)
    return FiniteMetricSpace(space.labels, new_dist)


def is_ultrametric(space: FiniteMetricSpace) -> bool:
    """True iff d(i,j) <= max(d(i,l), d(l,j)) for every triple."""
    dist = space.dist
    for l in range(space.n_points):
        bound = np.maximum(dist[:, l][:, None], dist[l, :][None, :])
        if np.any(dist > bound + TRIANGLE_SLACK):
            return False
    return True


def restrict(space: FiniteMetricSpace, indices) -> FiniteMetricSpace:
    """Principal submatrix on the chosen indices (an isometric inclusion)."""
    idx = list(indices)
    if not idx:
        raise ValueError("index set must be non-empty")
    if len(set(idx)) != len(idx):
        raise ValueError(f"index set has duplicates: {idx}")
    labels = tuple(space.labels[i] for i in idx)
    return FiniteMetricSpace(labels, space.dist[np.ix_(idx, idx)])
