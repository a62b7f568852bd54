"""Interval grid, observable events, and the per-pair ratio statistic.

The horizon is cut into k_max = floor(T / tau) intervals, each split into
equal thirds W1, W2, W3.  For an ordered pair (i, j):

  * the alternation event requires updates of i in W1 and W3, an update of j
    in W2, and the complementary exclusions (identities only, never values);
  * the big-move event requires |Y_j((k-1/3)tau) - Y_j((k-1)tau)| >= sigma_min;
  * the term is  [Y_i(k*tau-) - Y_i((k-2/3)tau-)] / [Y_j((k-1/3)tau) - Y_j((k-1)tau)],
    left limits in the numerator, right-continuous values in the denominator.

The boundedness gate checks the whole trajectory against y_max before any
statistic is trusted.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Trajectory


class DetectorError(ValueError):
    pass


@dataclass(frozen=True)
class IntervalGrid:
    """tau-partition of [0, T] with third boundaries at multiples of w = tau/3.

    All boundary arithmetic goes through `boundary(m) = m * w` so the scalar
    and vectorized code paths agree bit-for-bit.
    """

    tau: float
    T: float
    w: float
    k_max: int

    @classmethod
    def from_horizon(cls, T: float, tau: float) -> "IntervalGrid":
        if tau <= 0 or T <= 0:
            raise DetectorError("tau and T must be positive")
        w = tau / 3.0
        k_max = int(T / tau)
        # guard against float rounding at the last interval edge
        while k_max > 0 and (3 * k_max) * w > T:
            k_max -= 1
        while (3 * (k_max + 1)) * w <= T:
            k_max += 1
        return cls(tau=tau, T=T, w=w, k_max=k_max)

    def boundary(self, m) -> np.ndarray | float:
        return np.asarray(m) * self.w if np.ndim(m) else m * self.w

    def interval_bounds(self, k: int) -> tuple[float, float, float, float]:
        """(t0, t13, t23, t3) delimiting W1, W2, W3 of 1-based interval k."""
        if not 1 <= k <= self.k_max:
            raise DetectorError(f"interval {k} outside 1..{self.k_max}")
        m = 3 * (k - 1)
        return (m * self.w, (m + 1) * self.w, (m + 2) * self.w, (m + 3) * self.w)

    def third_boundaries(self) -> np.ndarray:
        return np.arange(3 * self.k_max + 1, dtype=float) * self.w


@dataclass
class EdgeEvidence:
    """Accumulated statistic terms for an ordered pair over active intervals."""

    i: int
    j: int
    k_max: int
    active_intervals: np.ndarray  # 1-based interval indexes where A and B fired
    terms: np.ndarray
    dy_i: np.ndarray
    dy_j: np.ndarray

    @property
    def sum(self) -> float:
        return float(self.terms.sum())

    @property
    def count(self) -> int:
        return int(self.terms.shape[0])

    @property
    def score(self) -> float:
        """|sum / k_max|, the thresholded quantity."""
        return abs(self.sum) / self.k_max if self.k_max else 0.0


# ---- scalar event checks (reference path, used by tests and verifiers) ----

def detect_A(traj: Trajectory, i: int, j: int, k: int, grid: IntervalGrid) -> bool:
    """Alternation event for ordered pair (i, j) on interval k: i updates in W1
    and W3 with no j there, j updates in W2 with no i there.  Identities only."""
    if i == j:
        raise DetectorError("pair must be distinct")
    t0, t13, t23, t3 = grid.interval_bounds(k)
    ci = (traj.count_in(i, t0, t13), traj.count_in(i, t13, t23), traj.count_in(i, t23, t3))
    cj = (traj.count_in(j, t0, t13), traj.count_in(j, t13, t23), traj.count_in(j, t23, t3))
    return (ci[0] > 0 and cj[0] == 0 and cj[1] > 0 and ci[1] == 0 and ci[2] > 0 and cj[2] == 0)


def detect_B(traj: Trajectory, j: int, k: int, grid: IntervalGrid, sigma_min: float) -> bool:
    """Big-move event: j's value changes by at least sigma_min (inclusive)
    between the interval start and the end of W2."""
    if sigma_min <= 0:
        raise DetectorError("sigma_min must be positive")
    t0, _, t23, _ = grid.interval_bounds(k)
    return abs(traj.value_at(j, t23) - traj.value_at(j, t0)) >= sigma_min


def check_C(traj: Trajectory, y_max: float) -> bool:
    """Boundedness gate: sup-norm of the trajectory never exceeds y_max."""
    if y_max <= 0:
        raise DetectorError("y_max must be positive")
    return traj.max_abs() <= y_max


def statistic_term(traj: Trajectory, i: int, j: int, k: int, grid: IntervalGrid) -> float:
    """Ratio term for interval k; caller must have checked the A and B events."""
    t0, t13, t23, t3 = grid.interval_bounds(k)
    dy_i = traj.value_before(i, t3) - traj.value_before(i, t13)
    dy_j = traj.value_at(j, t23) - traj.value_at(j, t0)
    if dy_j == 0.0:
        raise DetectorError("zero denominator: big-move event cannot have held")
    return dy_i / dy_j


# ---- vectorized per-pair scan ---------------------------------------------

def _third_occupancy(traj: Trajectory, grid: IntervalGrid, node: int) -> np.ndarray:
    """Boolean occupancy of each third [b(m), b(m+1)) by updates of `node`."""
    bounds = grid.third_boundaries()
    pos = np.searchsorted(traj.node_times(node), bounds, side="left")
    return np.diff(pos) > 0


def interval_deltas(traj: Trajectory, i: int, j: int, ks0: np.ndarray,
                    grid: IntervalGrid) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator changes on 0-based intervals ks0.

    dy_i uses left limits at the ends of the interval and of W1; dy_j uses
    right-continuous values at the interval start and the end of W2.
    """
    w = grid.w
    m = 3 * ks0
    dy_j = traj.values_at(j, (m + 2) * w) - traj.values_at(j, m * w)
    dy_i = traj.values_before(i, (m + 3) * w) - traj.values_before(i, (m + 1) * w)
    return dy_i, dy_j


def _terms_for_intervals(traj: Trajectory, i: int, j: int, ks0: np.ndarray,
                         grid: IntervalGrid, sigma_min: float) -> EdgeEvidence:
    """Apply the big-move filter and compute terms on candidate intervals.

    ks0 holds 0-based interval indexes where the alternation event fired.
    """
    dy_i, dy_j = interval_deltas(traj, i, j, ks0, grid)
    keep = np.abs(dy_j) >= sigma_min
    safe = np.where(dy_j == 0.0, 1.0, dy_j)
    return EdgeEvidence(i=i, j=j, k_max=grid.k_max,
                        active_intervals=ks0[keep] + 1,
                        terms=(dy_i / safe)[keep],
                        dy_i=dy_i[keep], dy_j=dy_j[keep])


def edge_statistic(traj: Trajectory, i: int, j: int, grid: IntervalGrid,
                   sigma_min: float) -> EdgeEvidence:
    """Scan k = 1..k_max for ordered pair (i, j) and accumulate active terms.

    Pure function of its inputs; repeated calls return identical evidence.
    """
    if i == j:
        raise DetectorError("pair must be distinct")
    occ_i = _third_occupancy(traj, grid, i).reshape(grid.k_max, 3)
    occ_j = _third_occupancy(traj, grid, j).reshape(grid.k_max, 3)
    alternation = (occ_i[:, 0] & ~occ_j[:, 0] & occ_j[:, 1] & ~occ_i[:, 1]
                   & occ_i[:, 2] & ~occ_j[:, 2])
    ks0 = np.flatnonzero(alternation)
    return _terms_for_intervals(traj, i, j, ks0, grid, sigma_min)


class PairSweep:
    """Shared occupancy bitsets for scanning many ordered pairs on one grid.

    Third occupancy per node is packed to bits once; each pair then needs five
    bitwise ANDs over k_max/8 bytes to locate its candidate intervals.
    """

    def __init__(self, traj: Trajectory, grid: IntervalGrid):
        self.traj = traj
        self.grid = grid
        k = grid.k_max
        self._w1 = {}
        self._w2 = {}
        self._w3 = {}
        self._nw1 = {}
        self._nw2 = {}
        self._nw3 = {}
        for node in range(traj.p):
            occ = _third_occupancy(traj, grid, node).reshape(k, 3)
            for store, neg_store, col in ((self._w1, self._nw1, 0),
                                          (self._w2, self._nw2, 1),
                                          (self._w3, self._nw3, 2)):
                store[node] = np.packbits(occ[:, col])
                neg_store[node] = np.packbits(~occ[:, col])

    def candidates(self, i: int, j: int) -> np.ndarray:
        """0-based intervals where the alternation event fires for (i, j)."""
        packed = (self._w1[i] & self._nw2[i] & self._w3[i]
                  & self._nw1[j] & self._w2[j] & self._nw3[j])
        ks0 = np.flatnonzero(np.unpackbits(packed, count=self.grid.k_max))
        return ks0

    def evidence(self, i: int, j: int, sigma_min: float) -> EdgeEvidence:
        return _terms_for_intervals(self.traj, i, j, self.candidates(i, j),
                                    self.grid, sigma_min)


def pair_sweep(traj: Trajectory, grid: IntervalGrid, sigma_min: float,
               pairs: Sequence[tuple[int, int]] | None = None,
               workers: int = 1) -> dict[tuple[int, int], EdgeEvidence]:
    """Evidence for every ordered pair (both orientations of each unordered pair).

    The result is a dict keyed by ordered pair, identical for any worker count:
    work is chunked over a fixed pair order and merged back in that order.
    """
    if pairs is None:
        pairs = [(i, j) for i in range(traj.p) for j in range(traj.p) if i != j]
    sweep = PairSweep(traj, grid)
    if workers <= 1:
        return {pr: sweep.evidence(*pr, sigma_min) for pr in pairs}
    results: dict[tuple[int, int], EdgeEvidence] = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for pr, ev in zip(pairs, pool.map(lambda pr: sweep.evidence(*pr, sigma_min), pairs)):
            results[pr] = ev
    return results


def evidence_to_csv(evidences: Iterable[EdgeEvidence], path: str | Path) -> None:
    """Audit dump: one row per active interval term."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_i", "pair_j", "k", "term", "deltaYi", "deltaYj"])
        for ev in evidences:
            for k, term, dyi, dyj in zip(ev.active_intervals, ev.terms, ev.dy_i, ev.dy_j):
                writer.writerow([ev.i, ev.j, int(k), repr(float(term)),
                                 repr(float(dyi)), repr(float(dyj))])
