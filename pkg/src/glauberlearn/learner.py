"""Parameter selection, the thresholded edge sweep, and baselines.

Parameter chain (bounds are assumed known, echoed from config):

    y_max = c1 * sigma_max * sqrt(log(p / delta))
    b     = 0.78 - delta / 2
    tau   = d^-1 / (6 y_max / (b sigma_min beta_min) + 1)        [closed form]
            d^-1 / (c3 sqrt(log(p/delta)) / (sigma_min beta_min) + 1)   [c3 set]
    q     = [(1 - e^(-tau/3)) e^(-tau/3)]^3
    eta   = (2 y_max / sigma_min) q tau d,   eta' = 2 eta
    rho   = 3 eta / 2                                            [closed form]
            c4 * tau d sqrt(log(p/delta)) / sigma_min            [c4 set]

At the closed-form tau the separation identity
beta_min (1 - tau d) b q = 3 eta holds exactly; the certificate records it.
The closed forms are extremely conservative at desk scale, so c3/c4 exist as
explicit, reproducible calibration knobs (see data/calibrated_constants.json).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from importlib import resources
from pathlib import Path

import numpy as np

from .detector import IntervalGrid, check_C, pair_sweep
from .dynamics import Trajectory


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Constants:
    """Calibration constants; None means "use the closed form"."""

    c1: float = 1.0
    c3: float | None = None
    c4: float | None = None

    @classmethod
    def from_dict(cls, obj: dict) -> "Constants":
        return cls(c1=float(obj.get("c1", 1.0)),
                   c3=None if obj.get("c3") is None else float(obj["c3"]),
                   c4=None if obj.get("c4") is None else float(obj["c4"]))

    @classmethod
    def calibrated(cls) -> "Constants":
        """Constants produced by the shipped calibration sweep (verify --calibrate)."""
        text = resources.files("glauberlearn").joinpath("data/calibrated_constants.json").read_text()
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LearnerParams:
    p: int
    d: int
    delta: float
    beta_min: float
    sigma_min: float
    sigma_max: float
    c1: float
    c3: float | None
    c4: float | None
    y_max: float
    b: float
    tau: float
    q: float
    eta: float
    eta_prime: float
    rho_exact: float
    rho: float

    def as_dict(self) -> dict:
        return asdict(self)

    def certificate(self) -> dict:
        """Separation certificate: the closed-form identities at these params."""
        identity_residual = (self.beta_min * (1.0 - self.tau * self.d) * self.b * self.q
                             - 3.0 * self.eta)
        return {
            "eta": self.eta,
            "eta_prime": self.eta_prime,
            "rho_exact": self.rho_exact,
            "ratio_rho_eta": self.rho_exact / self.eta if self.eta else float("nan"),
            "eta_prime_is_2eta": self.eta_prime == 2.0 * self.eta,
            "identity_residual": identity_residual,
            "identity_holds": abs(identity_residual) <= 1e-12 if self.c3 is None else None,
        }


def event_probability_q(tau: float) -> float:
    """Closed-form probability of the alternation pattern in one interval."""
    e = math.exp(-tau / 3.0)
    return ((1.0 - e) * e) ** 3


def select_parameters(p: int, d: int, delta: float, beta_min: float,
                      sigma_min: float, sigma_max: float,
                      constants: Constants = Constants()) -> LearnerParams:
    """Derive the interval length, threshold, and separation quantities."""
    if not 0.0 < delta < 0.5:
        raise ConfigError("delta must lie in (0, 1/2): the margin b and the "
                          "union-bound step both require it")
    if min(beta_min, sigma_min, sigma_max) <= 0 or d < 1 or p < 2:
        raise ConfigError("bounds must be positive, d >= 1, p >= 2")

    log_term = math.log(p / delta)
    y_max = constants.c1 * sigma_max * math.sqrt(log_term)
    b = 0.78 - delta / 2.0

    if constants.c3 is None:
        tau = (1.0 / d) / (6.0 * y_max / (b * sigma_min * beta_min) + 1.0)
    else:
        tau = (1.0 / d) / (constants.c3 * math.sqrt(log_term) / (sigma_min * beta_min) + 1.0)

    q = event_probability_q(tau)
    eta = (2.0 * y_max / sigma_min) * q * tau * d
    eta_prime = 2.0 * eta
    rho_exact = 1.5 * eta
    if constants.c4 is None:
        rho = rho_exact
    else:
        rho = constants.c4 * tau * d * math.sqrt(log_term) / sigma_min

    return LearnerParams(p=p, d=d, delta=delta, beta_min=beta_min,
                         sigma_min=sigma_min, sigma_max=sigma_max,
                         c1=constants.c1, c3=constants.c3, c4=constants.c4,
                         y_max=y_max, b=b, tau=tau, q=q,
                         eta=eta, eta_prime=eta_prime,
                         rho_exact=rho_exact, rho=rho)


@dataclass
class LearnResult:
    edges: frozenset[tuple[int, int]]
    aborted: bool
    k_max: int
    rho: float
    scores: dict[tuple[int, int], tuple[float, float]]  # unordered pair -> both orientations
    params: LearnerParams
    realized_n: int

    def to_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "aborted": self.aborted,
            "k_max": self.k_max,
            "rho": self.rho,
            "edges": [list(e) for e in sorted(self.edges)],
            "scores": {f"{i}-{j}": [sij, sji] for (i, j), (sij, sji) in sorted(self.scores.items())},
            "realized_n": self.realized_n,
        }


def learn(traj: Trajectory, params: LearnerParams, workers: int = 1,
          threshold_override: float | None = None) -> LearnResult:
    """Thresholded sweep over every unordered pair.

    If the boundedness gate fails the result is an empty edge set flagged
    aborted.  Otherwise each unordered pair is scored with |sum / k_max| in
    both orientations and declared an edge when either score reaches rho.
    Every emitted term is checked against the almost-sure bound
    2 y_max / sigma_min; a violation on a gated run is an internal error.
    """
    if traj.T < params.tau:
        raise ConfigError(f"horizon {traj.T} shorter than one interval (tau={params.tau})")
    grid = IntervalGrid.from_horizon(traj.T, params.tau)
    if grid.k_max == 0:
        raise ConfigError("k_max = 0: horizon too short for the interval length")
    rho = params.rho if threshold_override is None else float(threshold_override)

    if not check_C(traj, params.y_max):
        return LearnResult(edges=frozenset(), aborted=True, k_max=grid.k_max, rho=rho,
                           scores={}, params=params, realized_n=traj.n_updates)

    ordered = [(i, j) for i in range(traj.p) for j in range(traj.p) if i != j]
    evidence = pair_sweep(traj, grid, params.sigma_min, pairs=ordered, workers=workers)

    term_cap = 2.0 * params.y_max / params.sigma_min + 1e-9
    edges = set()
    scores: dict[tuple[int, int], tuple[float, float]] = {}
    for i in range(traj.p):
        for j in range(i + 1, traj.p):
            ev_ij = evidence[(i, j)]
            ev_ji = evidence[(j, i)]
            for ev in (ev_ij, ev_ji):
                if ev.terms.size and float(np.abs(ev.terms).max()) > term_cap:
                    raise RuntimeError(
                        f"statistic term exceeded the almost-sure bound "
                        f"{term_cap:.6g} on a gated run (pair {ev.i},{ev.j})")
            s_ij, s_ji = ev_ij.score, ev_ji.score
            scores[(i, j)] = (s_ij, s_ji)
            if max(s_ij, s_ji) >= rho:
                edges.add((i, j))
    return LearnResult(edges=frozenset(edges), aborted=False, k_max=grid.k_max, rho=rho,
                       scores=scores, params=params, realized_n=traj.n_updates)


@dataclass(frozen=True)
class RecoveryMetrics:
    exact: bool
    hamming: int
    precision: float
    recall: float
    runtime: float | None = None
    realized_n: int | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def compare(e_hat: frozenset | set, e_true: frozenset | set,
            runtime: float | None = None, realized_n: int | None = None) -> RecoveryMetrics:
    """Set-difference recovery metrics; conventions: 0/0 ratios are 1.0."""
    e_hat = {tuple(sorted(e)) for e in e_hat}
    e_true = {tuple(sorted(e)) for e in e_true}
    inter = len(e_hat & e_true)
    hamming = len(e_hat ^ e_true)
    precision = inter / len(e_hat) if e_hat else 1.0
    recall = inter / len(e_true) if e_true else 1.0
    return RecoveryMetrics(exact=hamming == 0, hamming=hamming,
                           precision=precision, recall=recall,
                           runtime=runtime, realized_n=realized_n)


def baseline_subsample_learn(traj: Trajectory, gap: float,
                             regression_threshold: float) -> frozenset[tuple[int, int]]:
    """Subsample-then-regress baseline: states at gap, 2*gap, ... feed
    per-node least squares; an edge is declared when either direction's
    coefficient clears the threshold.

    With gap well past the mixing scale the rows are near-independent draws
    and the coefficients approach the true regression weights; with a small
    gap the rows are strongly dependent and recovery degrades.
    """
    if gap <= 0:
        raise ConfigError("gap must be positive")
    n_rows = int(traj.T / gap)
    p = traj.p
    if n_rows < p + 1:
        raise ConfigError(f"only {n_rows} subsampled states for p={p}: regression underdetermined")
    t_grid = gap * np.arange(1, n_rows + 1)
    X = np.column_stack([traj.values_at(i, t_grid) for i in range(p)])
    coef = np.zeros((p, p))
    for i in range(p):
        others = [j for j in range(p) if j != i]
        sol, *_ = np.linalg.lstsq(X[:, others], X[:, i], rcond=None)
        coef[i, others] = sol
    edges = {(i, j) for i in range(p) for j in range(i + 1, p)
             if max(abs(coef[i, j]), abs(coef[j, i])) >= regression_threshold}
    return frozenset(edges)
