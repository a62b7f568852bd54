"""Monte-Carlo verifiers for the quantitative claims behind the edge test,
plus numeric utilities (truncated-Gaussian divergence, stationarity checks).

Each verifier reports an McEstimate carrying the estimate, its standard
error, the closed-form target it is checked against, and a pass flag.  All
verifiers are reproducible per seed: child streams are derived from
(seed, batch index) and aggregated deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .detector import IntervalGrid, interval_deltas, _third_occupancy
from .dynamics import Trajectory, simulate
from .learner import LearnerParams, event_probability_q
from .model import GgmModel


class AnalysisError(ValueError):
    pass


@dataclass
class McEstimate:
    name: str
    trials: int
    estimate: float
    std_error: float
    target: float
    z: float
    passed: bool
    status: str = "ok"            # "ok" | "inconclusive"
    retained: int | None = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "check": self.name,
            "trials": self.trials,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "target": self.target,
            "z": self.z,
            "pass": self.passed,
            "status": self.status,
        }
        if self.retained is not None:
            out["retained"] = self.retained
        out.update(self.extra)
        return out


def _child_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([int(seed), *key]).generate_state(1)[0])


def _binomial_se(ref: float, n: int) -> float:
    se = math.sqrt(max(ref * (1.0 - ref), 0.0) / n)
    return se if se > 0 else 1.0 / n


# ---- identity-only events ---------------------------------------------------

def mc_event_A(tau: float, p: int, trials: int, seed: int = 0) -> McEstimate:
    """Empirical frequency of the alternation pattern in one interval.

    Simulates only update identities: per-third total arrivals are Poisson
    with mean p*tau/3 and are thinned uniformly to the two tracked nodes.
    Target is the closed form q(tau).
    """
    if trials < 1000:
        raise AnalysisError("need at least 1000 trials")
    if p < 2:
        raise AnalysisError("need p >= 2")
    rng = np.random.default_rng(_child_seed(seed, 0xA))
    totals = rng.poisson(p * tau / 3.0, size=(trials, 3))
    ci = rng.binomial(totals, 1.0 / p)
    cj = rng.binomial(totals - ci, 1.0 / (p - 1))
    hits = ((ci[:, 0] > 0) & (cj[:, 0] == 0)
            & (cj[:, 1] > 0) & (ci[:, 1] == 0)
            & (ci[:, 2] > 0) & (cj[:, 2] == 0))
    q = event_probability_q(tau)
    est = float(hits.mean())
    se = _binomial_se(q, trials)
    z = (est - q) / se
    return McEstimate(name="event-A-probability", trials=trials, estimate=est,
                      std_error=se, target=q, z=z, passed=abs(z) <= 3.0,
                      extra={"tau": tau, "p": p})


def mc_event_D(model: GgmModel, i: int, j: int, tau: float, trials: int,
               seed: int = 0) -> McEstimate:
    """Frequency of a quiet neighborhood of i (other than j) over one interval.

    Checks the lower bound e^(-tau*d) and reports the exact value
    e^(-tau*|N(i) minus j|) for comparison.
    """
    nbrs = [v for v in model.graph.neighbors(i) if v != j]
    m = len(nbrs)
    rng = np.random.default_rng(_child_seed(seed, 0xD))
    counts = rng.poisson(m * tau, size=trials)
    est = float((counts == 0).mean())
    exact = math.exp(-tau * m)
    bound = math.exp(-tau * model.graph.d)
    se = _binomial_se(exact, trials)
    z = (est - exact) / se
    passed = (est + 3.0 * se >= bound) and abs(z) <= 3.0
    return McEstimate(name="event-D-lower-bound", trials=trials, estimate=est,
                      std_error=se, target=bound, z=z, passed=passed,
                      extra={"exact": exact, "tau": tau, "n_quiet": m})


# ---- trajectory-conditioned events ------------------------------------------

def _scan_intervals(model: GgmModel, i: int, j: int, tau: float, n_intervals: int,
                    seed: int):
    """One batch: simulate a stationary run and classify its intervals.

    Returns (alternation ks, quiet-neighborhood mask, dy_i, dy_j, start-state
    max-abs per candidate interval, grid).
    """
    T = n_intervals * tau
    traj = simulate(model, T=T, init="stationary", seed=seed)
    grid = IntervalGrid.from_horizon(T, tau)
    occ_i = _third_occupancy(traj, grid, i).reshape(grid.k_max, 3)
    occ_j = _third_occupancy(traj, grid, j).reshape(grid.k_max, 3)
    alternation = (occ_i[:, 0] & ~occ_j[:, 0] & occ_j[:, 1] & ~occ_i[:, 1]
                   & occ_i[:, 2] & ~occ_j[:, 2])
    ks0 = np.flatnonzero(alternation)
    t0 = (3 * ks0) * grid.w
    t3 = (3 * ks0 + 3) * grid.w
    quiet = np.ones(ks0.shape[0], dtype=bool)
    for v in model.graph.neighbors(i):
        if v == j:
            continue
        ts = traj.node_times(v)
        quiet &= (np.searchsorted(ts, t3, side="left")
                  - np.searchsorted(ts, t0, side="left")) == 0
    dy_i, dy_j = interval_deltas(traj, i, j, ks0, grid)
    start_abs = np.zeros(ks0.shape[0])
    for v in range(model.p):
        start_abs = np.maximum(start_abs, np.abs(traj.values_at(v, t0)))
    return ks0, quiet, dy_i, dy_j, start_abs, grid


def mc_event_B_conditional(model: GgmModel, i: int, j: int, tau: float,
                           delta: float, trials: int, seed: int = 0,
                           c1: float = 1.0, min_retained: int = 100,
                           batch: int = 200_000) -> McEstimate:
    """Conditional frequency of the big-move event given the alternation
    pattern, a quiet neighborhood, and a bounded starting state.

    Intervals come from long stationary runs; retention is by rejection on the
    realized events.  Target is the margin b = 0.78 - delta/2; the check is
    one-sided (estimate + 3 se >= b).
    """
    sigma_min = model.bounds.sigma_min
    y_max = c1 * model.bounds.sigma_max * math.sqrt(math.log(model.p / delta))
    done = 0
    kept_big = 0
    kept = 0
    b_idx = 0
    while done < trials:
        n = min(batch, trials - done)
        ks0, quiet, _, dy_j, start_abs, _ = _scan_intervals(
            model, i, j, tau, n, _child_seed(seed, 0xB, b_idx))
        retain = quiet & (start_abs <= y_max)
        kept += int(retain.sum())
        kept_big += int((np.abs(dy_j[retain]) >= sigma_min).sum())
        done += n
        b_idx += 1
    target = 0.78 - delta / 2.0
    if kept < min_retained:
        return McEstimate(name="event-B-conditional", trials=done, estimate=float("nan"),
                          std_error=float("nan"), target=target, z=float("nan"),
                          passed=False, status="inconclusive", retained=kept,
                          extra={"tau": tau, "delta": delta, "sigma_min": sigma_min})
    est = kept_big / kept
    se = _binomial_se(est, kept)
    z = (est - target) / se
    return McEstimate(name="event-B-conditional", trials=done, estimate=est,
                      std_error=se, target=target, z=z,
                      passed=est + 3.0 * se >= target, retained=kept,
                      extra={"tau": tau, "delta": delta, "sigma_min": sigma_min,
                             "y_max": y_max})


def oracle_edge_expectation(model: GgmModel, i: int, j: int, tau: float,
                            trials: int | None = None, seed: int = 0,
                            retained_target: int | None = None,
                            batch: int = 200_000,
                            max_intervals: int = 50_000_000) -> McEstimate:
    """Conditional mean of the ratio statistic given the alternation pattern,
    the big-move event, and a quiet neighborhood (ground truth).

    Target is the model's regression coefficient beta[i][j] (0 off edges).
    Either simulate a fixed number of intervals (`trials`) or keep simulating
    until `retained_target` conditioned samples have been collected.
    """
    if (trials is None) == (retained_target is None):
        raise AnalysisError("pass exactly one of trials / retained_target")
    sigma_min = model.bounds.sigma_min
    terms: list[np.ndarray] = []
    done = 0
    b_idx = 0
    while True:
        if trials is not None:
            n = min(batch, trials - done)
            if n <= 0:
                break
        else:
            got = sum(t.shape[0] for t in terms)
            if got >= retained_target or done >= max_intervals:
                break
            n = batch
        ks0, quiet, dy_i, dy_j, _, _ = _scan_intervals(
            model, i, j, tau, n, _child_seed(seed, 0x1, b_idx))
        retain = quiet & (np.abs(dy_j) >= sigma_min)
        terms.append((dy_i / np.where(dy_j == 0.0, 1.0, dy_j))[retain])
        done += n
        b_idx += 1
    sample = np.concatenate(terms) if terms else np.empty(0)
    kept = int(sample.shape[0])
    target = float(model.beta[i, j])
    if kept < max(100, 2):
        return McEstimate(name="ratio-conditional-mean", trials=done, estimate=float("nan"),
                          std_error=float("nan"), target=target, z=float("nan"),
                          passed=False, status="inconclusive", retained=kept,
                          extra={"tau": tau, "pair": [i, j]})
    est = float(sample.mean())
    se = float(sample.std(ddof=1) / math.sqrt(kept))
    z = (est - target) / se
    return McEstimate(name="ratio-conditional-mean", trials=done, estimate=est,
                      std_error=se, target=target, z=z, passed=abs(z) <= 4.0,
                      retained=kept, extra={"tau": tau, "pair": [i, j]})


# ---- numeric utilities -------------------------------------------------------

def truncated_gaussian_kl(mu1: float, mu2: float, sigma: float, a: float) -> float:
    """KL divergence between two equal-variance Gaussians truncated to [-a, a].

    Closed form via the truncated-normal normalizers and first moment:
        KL = log(Z2/Z1) + [ (mu1-mu2)^2 + 2 (mu1-mu2) (m1 - mu1) ] / (2 sigma^2)
    where m1 is the mean of the truncated first distribution.  Reduces to the
    untruncated (mu1-mu2)^2 / (2 sigma^2) as a -> infinity.
    """
    if sigma <= 0 or a <= 0:
        raise AnalysisError("sigma and a must be positive")
    lo1, hi1 = (-a - mu1) / sigma, (a - mu1) / sigma
    lo2, hi2 = (-a - mu2) / sigma, (a - mu2) / sigma
    z1 = norm.cdf(hi1) - norm.cdf(lo1)
    z2 = norm.cdf(hi2) - norm.cdf(lo2)
    if z1 <= 0.0 or z2 <= 0.0:
        raise AnalysisError(f"truncation half-width {a} underflows the normalizer")
    m1_shift = sigma * (norm.pdf(lo1) - norm.pdf(hi1)) / z1
    dmu = mu1 - mu2
    return float(math.log(z2 / z1) + (dmu * dmu + 2.0 * dmu * m1_shift) / (2.0 * sigma * sigma))


@dataclass
class CovarianceCheck:
    chains: int
    max_abs_dev: float
    max_z: float
    passed: bool
    emp_cov: np.ndarray
    target_cov: np.ndarray


def stationarity_check(model: GgmModel, T: float, chains: int, seed: int = 0,
                       burn_in: float = 0.0, init="stationary") -> CovarianceCheck:
    """Terminal-state covariance over independent chains against the model law.

    Each entry's deviation is scored against the Gaussian standard error
    sqrt((S_ii S_jj + S_ij^2) / chains); the check passes at |z| <= 3.
    """
    if chains < 2:
        raise AnalysisError("need at least 2 chains")
    horizon = burn_in + T
    states = np.empty((chains, model.p))
    for c in range(chains):
        traj = simulate(model, T=horizon, init=init, seed=_child_seed(seed, 0xC, c))
        states[c] = traj.state_at(horizon)
    emp = np.cov(states, rowvar=False, ddof=1)
    emp = np.atleast_2d(emp)
    target = model.sigma
    se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / chains)
    zmat = (emp - target) / se
    max_z = float(np.abs(zmat).max())
    return CovarianceCheck(chains=chains, max_abs_dev=float(np.abs(emp - target).max()),
                           max_z=max_z, passed=max_z <= 3.0,
                           emp_cov=emp, target_cov=np.asarray(target))


@dataclass
class SeparationReport:
    edge_pair: tuple[int, int]
    nonedge_pair: tuple[int, int]
    mean_edge: float
    se_edge: float
    mean_nonedge: float
    se_nonedge: float
    eta: float
    eta_prime: float
    rho_exact: float
    nonedge_within_eta: bool
    edge_clears_3eta: bool

    def as_dict(self) -> dict:
        return {
            "edge_pair": list(self.edge_pair),
            "nonedge_pair": list(self.nonedge_pair),
            "mean_edge": self.mean_edge,
            "se_edge": self.se_edge,
            "mean_nonedge": self.mean_nonedge,
            "se_nonedge": self.se_nonedge,
            "eta": self.eta,
            "eta_prime": self.eta_prime,
            "rho_exact": self.rho_exact,
            "nonedge_within_eta": self.nonedge_within_eta,
            "edge_clears_3eta": self.edge_clears_3eta,
        }


def _per_interval_mean(traj: Trajectory, i: int, j: int, grid: IntervalGrid,
                       sigma_min: float) -> tuple[float, float]:
    from .detector import edge_statistic
    ev = edge_statistic(traj, i, j, grid, sigma_min)
    k = grid.k_max
    mean = ev.sum / k
    second = float((ev.terms ** 2).sum()) / k
    se = math.sqrt(max(second - mean * mean, 0.0) / k)
    return mean, se


def separation_empirical(model: GgmModel, params: LearnerParams, intervals: int,
                         seed: int = 0,
                         edge_pair: tuple[int, int] | None = None,
                         nonedge_pair: tuple[int, int] | None = None) -> SeparationReport:
    """Per-interval statistic means (zeros included) for one edge pair and one
    non-edge pair, checked against the eta / 3*eta separation margins."""
    edges = model.graph.sorted_edges()
    if edge_pair is None:
        if not edges:
            raise AnalysisError("model has no edge pair")
        edge_pair = edges[0]
    if nonedge_pair is None:
        nonedge_pair = next(((i, j) for i in range(model.p) for j in range(i + 1, model.p)
                             if not model.graph.has_edge(i, j)), None)
        if nonedge_pair is None:
            raise AnalysisError("model has no non-edge pair")
    T = intervals * params.tau
    traj = simulate(model, T=T, init="stationary", seed=_child_seed(seed, 0x5E))
    grid = IntervalGrid.from_horizon(T, params.tau)
    m_e, se_e = _per_interval_mean(traj, *edge_pair, grid, params.sigma_min)
    m_n, se_n = _per_interval_mean(traj, *nonedge_pair, grid, params.sigma_min)
    sign = 1.0 if model.beta[edge_pair[0], edge_pair[1]] >= 0 else -1.0
    return SeparationReport(
        edge_pair=edge_pair, nonedge_pair=nonedge_pair,
        mean_edge=m_e, se_edge=se_e, mean_nonedge=m_n, se_nonedge=se_n,
        eta=params.eta, eta_prime=params.eta_prime, rho_exact=params.rho_exact,
        nonedge_within_eta=abs(m_n) <= params.eta + 3.0 * se_n,
        edge_clears_3eta=sign * m_e >= 3.0 * params.eta - 3.0 * se_e,
    )
