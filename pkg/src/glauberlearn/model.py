"""Gaussian graphical models with bounded-degree regression structure.

A model couples a simple undirected graph with a symmetric positive definite
precision matrix whose off-diagonal zero pattern matches the graph.  From the
precision matrix we derive the per-node regression coefficients
beta[i][j] = -theta_ij / theta_ii and conditional variances 1 / theta_ii that
drive the single-site update process, plus the assumption bounds
(beta_min, beta_max, sigma_min, sigma_max) the learner is allowed to know.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PD_TOL = 1e-10
INVERSE_TOL = 1e-8
BOUND_SLACK = 1e-12


class ModelError(ValueError):
    """Raised when a matrix or graph fails model validation."""


def _normalize_edge(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise ModelError(f"self-loop on vertex {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..p-1 with cached max degree."""

    p: int
    edges: frozenset[tuple[int, int]]
    d: int = field(init=False)

    def __post_init__(self):
        if self.p <= 0:
            raise ModelError("vertex count must be positive")
        degree = [0] * self.p
        for (i, j) in self.edges:
            if not (0 <= i < j < self.p):
                raise ModelError(f"edge {(i, j)} not normalized or out of range")
            degree[i] += 1
            degree[j] += 1
        object.__setattr__(self, "d", max(degree) if degree else 0)

    @classmethod
    def from_edges(cls, p: int, edges: Iterable[Sequence[int]]) -> "Graph":
        return cls(p=p, edges=frozenset(_normalize_edge(int(i), int(j)) for i, j in edges))

    @classmethod
    def empty(cls, p: int) -> "Graph":
        return cls.from_edges(p, [])

    @classmethod
    def cycle(cls, p: int) -> "Graph":
        if p < 3:
            raise ModelError("cycle needs p >= 3")
        return cls.from_edges(p, [(v, (v + 1) % p) for v in range(p)])

    @classmethod
    def path(cls, p: int) -> "Graph":
        return cls.from_edges(p, [(v, v + 1) for v in range(p - 1)])

    @classmethod
    def star(cls, p: int) -> "Graph":
        return cls.from_edges(p, [(0, v) for v in range(1, p)])

    def neighbors(self, i: int) -> tuple[int, ...]:
        out = [b if a == i else a for (a, b) in self.edges if i in (a, b)]
        return tuple(sorted(out))

    def has_edge(self, i: int, j: int) -> bool:
        return _normalize_edge(i, j) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class ModelBounds:
    """Assumption bounds carried alongside a model (and echoed to the learner)."""

    beta_min: float
    beta_max: float
    sigma_min: float
    sigma_max: float

    def as_dict(self) -> dict:
        return {
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
        }


def _check_symmetric(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ModelError(f"precision matrix must be square, got shape {theta.shape}")
    if not np.allclose(theta, theta.T, rtol=0.0, atol=1e-12):
        raise ModelError("precision matrix is not symmetric")
    return 0.5 * (theta + theta.T)


def _min_eigenvalue(theta: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(theta)[0])


def conditional_coefficients(theta: np.ndarray, i: int) -> tuple[np.ndarray, float]:
    """Regression coefficients and conditional variance of node i given the rest.

    Returns (beta_row, cond_var) with beta_row[j] = -theta_ij / theta_ii for
    j != i, beta_row[i] = 0, and cond_var = 1 / theta_ii.  The conditional
    variance agrees with the Schur complement of the covariance matrix.
    """
    theta = _check_symmetric(theta)
    p = theta.shape[0]
    if not 0 <= i < p:
        raise ModelError(f"vertex {i} out of range for p={p}")
    lam_min = _min_eigenvalue(theta)
    if lam_min <= PD_TOL:
        raise ModelError(f"precision matrix not positive definite (min eigenvalue {lam_min:.3e})")
    beta_row = -theta[i] / theta[i, i]
    beta_row[i] = 0.0
    return beta_row, float(1.0 / theta[i, i])


def stationary_covariance(theta: np.ndarray) -> np.ndarray:
    """Covariance matrix of the stationary law, i.e. the precision inverse."""
    theta = _check_symmetric(theta)
    lam = np.linalg.eigvalsh(theta)
    if lam[0] <= PD_TOL:
        cond = lam[-1] / max(lam[0], np.finfo(float).tiny)
        raise ModelError(
            f"precision matrix numerically singular (min eigenvalue {lam[0]:.3e}, "
            f"condition number {cond:.3e})"
        )
    sigma = np.linalg.inv(theta)
    sigma = 0.5 * (sigma + sigma.T)
    resid = float(np.max(np.abs(sigma @ theta - np.eye(theta.shape[0]))))
    if resid > INVERSE_TOL:
        raise ModelError(f"inverse residual {resid:.3e} exceeds {INVERSE_TOL}")
    return sigma


class GgmModel:
    """Validated model: graph + precision matrix + derived regression structure.

    Instances are immutable after construction (arrays are set read-only) and
    safe to share across concurrent workers.
    """

    def __init__(self, graph: Graph, theta: np.ndarray, provenance: dict | None = None):
        theta = _check_symmetric(theta)
        if theta.shape[0] != graph.p:
            raise ModelError("graph and precision matrix disagree on vertex count")
        lam_min = _min_eigenvalue(theta)
        if lam_min <= PD_TOL:
            raise ModelError(f"precision matrix not positive definite (min eigenvalue {lam_min:.3e})")

        p = graph.p
        off = theta.copy()
        np.fill_diagonal(off, 0.0)
        nz = {(i, j) for i, j in zip(*np.nonzero(off)) if i < j}
        if nz != set(graph.edges):
            extra = sorted(nz - set(graph.edges))[:4]
            missing = sorted(set(graph.edges) - nz)[:4]
            raise ModelError(
                f"sparsity pattern mismatch: nonzeros off the edge set {extra}, "
                f"edges with zero entries {missing}"
            )

        sigma = stationary_covariance(theta)
        beta = -theta / np.diag(theta)[:, None]
        np.fill_diagonal(beta, 0.0)
        cond_var = 1.0 / np.diag(theta)

        edge_betas = np.array([abs(beta[i, j]) for (i, j) in graph.sorted_edges()]
                              + [abs(beta[j, i]) for (i, j) in graph.sorted_edges()])
        if edge_betas.size:
            beta_min = float(edge_betas.min())
            beta_max = float(edge_betas.max())
        else:
            beta_min = beta_max = 0.0
        bounds = ModelBounds(
            beta_min=beta_min,
            beta_max=beta_max,
            sigma_min=float(np.sqrt(cond_var.min())),
            sigma_max=float(np.sqrt(np.diag(sigma).max())),
        )
        if graph.d * bounds.beta_max >= 1.0:
            raise ModelError(
                f"degree/decay assumption violated: d*beta_max = {graph.d * bounds.beta_max:.6f} >= 1"
            )

        for arr in (theta, sigma, beta, cond_var):
            arr.flags.writeable = False
        self.graph = graph
        self.theta = theta
        self.sigma = sigma
        self.beta = beta
        self.cond_var = cond_var
        self.bounds = bounds
        self.provenance = dict(provenance or {})

    @property
    def p(self) -> int:
        return self.graph.p

    @property
    def model_hash(self) -> str:
        payload = json.dumps(
            {"p": self.p, "edges": self.graph.sorted_edges(), "theta": self.theta.ravel().tolist()},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "edges": [list(e) for e in self.graph.sorted_edges()],
            "theta": self.theta.ravel().tolist(),
            "bounds": self.bounds.as_dict(),
            "provenance": self.provenance,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")

    @classmethod
    def from_dict(cls, obj: dict) -> "GgmModel":
        p = int(obj["p"])
        theta = np.asarray(obj["theta"], dtype=float).reshape(p, p)
        graph = Graph.from_edges(p, obj["edges"])
        return cls(graph, theta, provenance=obj.get("provenance"))

    @classmethod
    def load(cls, path: str | Path) -> "GgmModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_bounded_degree_model(graph: Graph, beta_target: float, diag: float = 1.0,
                               provenance: dict | None = None) -> GgmModel:
    """Model factory with uniform edge coefficient beta_target on a given graph.

    theta has `diag` on the diagonal and -beta_target*diag on each edge, so
    every partial regression coefficient equals beta_target exactly.
    """
    if diag <= 0:
        raise ModelError("diagonal must be positive")
    if graph.d * abs(beta_target) >= 1.0:
        raise ModelError(
            f"d*|beta_target| = {graph.d * abs(beta_target):.6f} >= 1 violates the decay assumption"
        )
    p = graph.p
    theta = np.eye(p) * diag
    for (i, j) in graph.edges:
        theta[i, j] = theta[j, i] = -beta_target * diag
    lam_min = _min_eigenvalue(theta)
    if lam_min <= PD_TOL:
        raise ModelError(f"construction is not positive definite (min eigenvalue {lam_min:.3e})")
    prov = {"factory": "bounded_degree", "beta_target": beta_target, "diag": diag}
    prov.update(provenance or {})
    return GgmModel(graph, theta, provenance=prov)


@dataclass(frozen=True)
class EnsembleSpec:
    """Index into the clique-based family used for the hardness sweeps.

    The base member (index 0) packs floor(p/(d+1)) disjoint (d+1)-cliques;
    member v >= 1 removes the v-th clique edge.  Cliques are ordered by lowest
    vertex and edges within a clique lexicographically, so index <-> model is
    a fixed bijection.
    """

    p: int
    d: int
    lam: float
    index: int = 0

    def __post_init__(self):
        if self.d < 1 or self.p < self.d + 1:
            raise ModelError("need p >= d+1 >= 2")
        if self.lam <= 0:
            raise ModelError("edge strength must be positive")
        if not 0 <= self.index <= self.ensemble_size:
            raise ModelError(f"index {self.index} outside 0..{self.ensemble_size}")

    @property
    def n_cliques(self) -> int:
        return self.p // (self.d + 1)

    @property
    def edges_per_clique(self) -> int:
        return (self.d + 1) * self.d // 2

    @property
    def ensemble_size(self) -> int:
        return self.n_cliques * self.edges_per_clique

    def clique_vertices(self, c: int) -> range:
        base = c * (self.d + 1)
        return range(base, base + self.d + 1)

    def removed_edge(self) -> tuple[int, int] | None:
        if self.index == 0:
            return None
        c, e = divmod(self.index - 1, self.edges_per_clique)
        pairs = list(itertools.combinations(self.clique_vertices(c), 2))
        return pairs[e]


def build_clique_ensemble(spec: EnsembleSpec) -> GgmModel:
    """Construct the indexed member of the clique ensemble.

    Base precision: identity plus lam times the sum of clique indicator outer
    products.  Member v zeroes the off-diagonal entries of its removed edge,
    leaving diagonals untouched.
    """
    p = spec.p
    theta = np.eye(p)
    edges: set[tuple[int, int]] = set()
    for c in range(spec.n_cliques):
        ind = np.zeros(p)
        verts = list(spec.clique_vertices(c))
        ind[verts] = 1.0
        theta += spec.lam * np.outer(ind, ind)
        edges.update(itertools.combinations(verts, 2))
    removed = spec.removed_edge()
    if removed is not None:
        a, b = removed
        theta[a, b] = theta[b, a] = 0.0
        edges.discard((a, b))
    graph = Graph.from_edges(p, edges)
    prov = {"factory": "clique_ensemble", "lam": spec.lam, "ensemble_index": spec.index,
            "ensemble_size": spec.ensemble_size}
    return GgmModel(graph, theta, provenance=prov)


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    witness: float
    detail: str


def validate_model(model: GgmModel) -> list[AssumptionCheck]:
    """Report-only re-validation of the three structural assumptions."""
    checks: list[AssumptionCheck] = []
    edges = model.graph.sorted_edges()
    b = model.bounds

    if edges:
        mags = [abs(model.beta[i, j]) for (i, j) in edges] + [abs(model.beta[j, i]) for (i, j) in edges]
        lo, hi = min(mags), max(mags)
        ok = lo >= b.beta_min - BOUND_SLACK and hi <= b.beta_max + BOUND_SLACK
        checks.append(AssumptionCheck(
            "edge_strength", ok, lo,
            f"min |beta| on edges = {lo:.6g}, max = {hi:.6g}, declared [{b.beta_min:.6g}, {b.beta_max:.6g}]"))
    else:
        checks.append(AssumptionCheck(
            "edge_strength", True, 0.0, "empty edge set: bound is vacuous"))

    cv_min = float(model.cond_var.min())
    mv_max = float(np.diag(model.sigma).max())
    ok_var = cv_min >= b.sigma_min**2 - BOUND_SLACK and mv_max <= b.sigma_max**2 + BOUND_SLACK
    checks.append(AssumptionCheck(
        "variance_bounds", ok_var, cv_min,
        f"min conditional variance = {cv_min:.6g} (declared floor {b.sigma_min**2:.6g}), "
        f"max marginal variance = {mv_max:.6g} (declared cap {b.sigma_max**2:.6g})"))

    db = model.graph.d * b.beta_max
    checks.append(AssumptionCheck(
        "degree_decay", db < 1.0, db, f"d*beta_max = {db:.6g} (requires < 1)"))
    return checks


def assumption_report(model: GgmModel) -> str:
    lines = []
    for c in validate_model(model):
        lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    return "\n".join(lines)
