"""Event-driven simulation of continuous-time single-site dynamics.

The process holds a p-vector state.  Update times arrive as a rate-p Poisson
process on (0, T]; at each arrival a uniformly chosen coordinate is redrawn
from its conditional law given the rest (a linear combination of neighbor
values plus Gaussian noise).  A completed trajectory is an immutable event
log answering point-in-time queries, including left limits.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .model import GgmModel

_GAP_CHUNK = 1 << 20


class UpdateRecord(NamedTuple):
    n: int        # 1-based round index
    time: float
    node: int
    value: float


class TrajectoryError(ValueError):
    """Raised on malformed trajectories or out-of-range queries."""


class Trajectory:
    """Immutable event log with per-node indexes for O(log N) value queries.

    State convention is right-continuous: the value *at* an update time is the
    new value; `value_before` gives the left limit.
    """

    def __init__(self, p: int, T: float, x0: np.ndarray,
                 times: np.ndarray, nodes: np.ndarray, values: np.ndarray,
                 seed: int | None = None, model_hash: str | None = None,
                 noise: np.ndarray | None = None):
        x0 = np.asarray(x0, dtype=float)
        times = np.asarray(times, dtype=float)
        nodes = np.asarray(nodes)
        values = np.asarray(values, dtype=float)
        if x0.shape != (p,):
            raise TrajectoryError(f"x0 has shape {x0.shape}, expected ({p},)")
        if not (times.shape == nodes.shape == values.shape):
            raise TrajectoryError("times/nodes/values length mismatch")
        n = times.shape[0]
        if n and (times[0] <= 0.0 or times[-1] > T):
            raise TrajectoryError("record times must lie in (0, T]")
        if n and np.any(np.diff(times) <= 0.0):
            raise TrajectoryError("record times must be strictly increasing")
        if n and (nodes.min() < 0 or nodes.max() >= p):
            raise TrajectoryError("node id out of range")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(x0)):
            raise TrajectoryError("non-finite state value in trajectory")

        self.p = p
        self.T = float(T)
        self.seed = seed
        self.model_hash = model_hash
        self.x0 = x0.copy()
        self.x0.flags.writeable = False
        self.n_updates = int(n)

        # per-node columnar storage; global chronological order is recovered
        # by merging on time when needed
        order = np.argsort(nodes, kind="stable")
        sorted_nodes = nodes[order].astype(np.int32)
        ptr = np.zeros(p + 1, dtype=np.int64)
        counts = np.bincount(sorted_nodes, minlength=p)
        np.cumsum(counts, out=ptr[1:])
        self._ptr = ptr
        self._times = times[order].copy()
        self._values = values[order].copy()
        self._noise = noise[order].copy() if noise is not None else None
        for arr in (self._times, self._values):
            arr.flags.writeable = False
        self._max_abs = float(max(np.abs(self.x0).max() if p else 0.0,
                                  np.abs(self._values).max() if n else 0.0))

    # ---- per-node access -------------------------------------------------

    def node_times(self, i: int) -> np.ndarray:
        return self._times[self._ptr[i]:self._ptr[i + 1]]

    def node_values(self, i: int) -> np.ndarray:
        return self._values[self._ptr[i]:self._ptr[i + 1]]

    def node_noise(self, i: int) -> np.ndarray:
        if self._noise is None:
            raise TrajectoryError("trajectory was simulated without the noise channel")
        return self._noise[self._ptr[i]:self._ptr[i + 1]]

    def update_count(self, i: int) -> int:
        return int(self._ptr[i + 1] - self._ptr[i])

    # ---- point queries ----------------------------------------------------

    def value_at(self, i: int, t: float) -> float:
        """Coordinate i after applying every record with time <= t."""
        if not 0.0 <= t <= self.T:
            raise TrajectoryError(f"query time {t} outside [0, {self.T}]")
        return float(self.values_at(i, np.array([t]))[0])

    def value_before(self, i: int, t: float) -> float:
        """Left limit: coordinate i after records with time strictly < t."""
        if not 0.0 < t <= self.T:
            raise TrajectoryError(f"left-limit time {t} outside (0, {self.T}]")
        return float(self.values_before(i, np.array([t]))[0])

    def values_at(self, i: int, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.node_times(i), t, side="right") - 1
        vals = self.node_values(i)
        return np.where(idx >= 0, vals[np.maximum(idx, 0)] if vals.size else 0.0, self.x0[i])

    def values_before(self, i: int, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.node_times(i), t, side="left") - 1
        vals = self.node_values(i)
        return np.where(idx >= 0, vals[np.maximum(idx, 0)] if vals.size else 0.0, self.x0[i])

    def state_at(self, t: float) -> np.ndarray:
        return np.array([self.value_at(i, t) for i in range(self.p)])

    def max_abs(self) -> float:
        """sup over t in [0, T] of the sup-norm of the state (piecewise constant)."""
        return self._max_abs

    # ---- range queries ----------------------------------------------------

    def updates_in(self, nodes: Iterable[int], t0: float, t1: float,
                   half_open: bool = True) -> tuple[int, list[tuple[float, int]]]:
        """Records with node in `nodes` and time in [t0, t1) (or [t0, t1]), by time."""
        if not 0.0 <= t0 < t1 <= self.T:
            raise TrajectoryError(f"bad interval [{t0}, {t1}) for horizon {self.T}")
        end_side = "left" if half_open else "right"
        hits: list[tuple[float, int]] = []
        for i in set(int(v) for v in nodes):
            if not 0 <= i < self.p:
                raise TrajectoryError(f"node {i} out of range")
            ts = self.node_times(i)
            lo = np.searchsorted(ts, t0, side="left")
            hi = np.searchsorted(ts, t1, side=end_side)
            hits.extend((float(t), i) for t in ts[lo:hi])
        hits.sort()
        return len(hits), hits

    def count_in(self, i: int, t0: float, t1: float) -> int:
        ts = self.node_times(i)
        return int(np.searchsorted(ts, t1, side="left") - np.searchsorted(ts, t0, side="left"))

    # ---- whole-log views ---------------------------------------------------

    def chronological(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(times, nodes, values) merged back into time order."""
        all_nodes = np.repeat(np.arange(self.p, dtype=np.int32), np.diff(self._ptr))
        order = np.argsort(self._times, kind="stable")
        return self._times[order], all_nodes[order], self._values[order]

    def records(self) -> Iterator[UpdateRecord]:
        times, nodes, values = self.chronological()
        for n in range(times.shape[0]):
            yield UpdateRecord(n + 1, float(times[n]), int(nodes[n]), float(values[n]))

    # ---- serialization -----------------------------------------------------

    def save_jsonl(self, path: str | Path) -> None:
        """JSONL: header line then one record per line, shortest round-trip floats."""
        times, nodes, values = self.chronological()
        with Path(path).open("w") as fh:
            header = {
                "kind": "glauber-trajectory",
                "p": self.p,
                "T": self.T,
                "seed": self.seed,
                "x0": [float(v) for v in self.x0],
                "model_hash": self.model_hash,
                "realized_n": self.n_updates,
            }
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for n in range(times.shape[0]):
                fh.write(f'{{"n": {n + 1}, "time": {times[n]!r}, "node": {int(nodes[n])}, '
                         f'"value": {values[n]!r}}}\n')

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "Trajectory":
        with Path(path).open() as fh:
            header = json.loads(fh.readline())
            if header.get("kind") != "glauber-trajectory":
                raise TrajectoryError(f"{path} is not a trajectory file")
            times, nodes, values = [], [], []
            for line in fh:
                rec = json.loads(line)
                times.append(rec["time"])
                nodes.append(rec["node"])
                values.append(rec["value"])
        return cls(
            p=int(header["p"]), T=float(header["T"]),
            x0=np.asarray(header["x0"], dtype=float),
            times=np.asarray(times), nodes=np.asarray(nodes, dtype=np.int32),
            values=np.asarray(values),
            seed=header.get("seed"), model_hash=header.get("model_hash"),
        )

    @classmethod
    def from_records(cls, p: int, T: float, x0: Sequence[float],
                     records: Iterable[tuple[float, int, float]]) -> "Trajectory":
        """Build a trajectory from explicit (time, node, value) triples."""
        recs = sorted(records)
        times = np.array([r[0] for r in recs], dtype=float)
        nodes = np.array([r[1] for r in recs], dtype=np.int32)
        values = np.array([r[2] for r in recs], dtype=float)
        return cls(p=p, T=T, x0=np.asarray(x0, dtype=float), times=times, nodes=nodes, values=values)


def _draw_update_times(rng: np.random.Generator, p: int, T: float) -> np.ndarray:
    """Cumulative Exponential(p) gaps, truncated to (0, T]."""
    chunks = []
    total = 0.0
    while total <= T:
        g = rng.exponential(scale=1.0 / p, size=_GAP_CHUNK)
        chunks.append(g)
        total += float(g.sum())
    times = np.cumsum(np.concatenate(chunks))
    return times[times <= T]


def simulate(model: GgmModel, T: float, init="stationary", seed: int = 0,
             record_noise: bool = False, use_numba: bool = True) -> Trajectory:
    """Simulate the update process for T time units.

    Randomness protocol (fixed, so identical inputs give bit-identical logs):
    initial state first (only for init="stationary"), then Exponential(1/p)
    gaps in fixed-size chunks until the horizon is passed, then the uniform
    node choices, then the standard normal innovations.  The innovation at a
    round is scaled by the conditional standard deviation of the chosen node.

    init may be "stationary" (draw from the model law), "zero", or an explicit
    length-p vector.  record_noise keeps the scaled innovations as a debug
    channel on the trajectory.
    """
    if T <= 0:
        raise TrajectoryError("horizon must be positive")
    p = model.p
    rng = np.random.default_rng(seed)

    if isinstance(init, str):
        if init == "stationary":
            chol = np.linalg.cholesky(model.sigma)
            x0 = chol @ rng.standard_normal(p)
        elif init == "zero":
            x0 = np.zeros(p)
        else:
            raise TrajectoryError(f"unknown init {init!r}")
    else:
        x0 = np.asarray(init, dtype=float)
        if x0.shape != (p,):
            raise TrajectoryError(f"init vector has shape {x0.shape}, expected ({p},)")

    times = _draw_update_times(rng, p, T)
    n = times.shape[0]
    nodes = rng.integers(0, p, size=n).astype(np.int32)
    cond_std = np.sqrt(model.cond_var)
    eps = rng.standard_normal(n) * cond_std[nodes]

    nbr_idx: list[int] = []
    nbr_beta: list[float] = []
    nbr_ptr = np.zeros(p + 1, dtype=np.int64)
    for i in range(p):
        js = model.graph.neighbors(i)
        nbr_idx.extend(js)
        nbr_beta.extend(model.beta[i, j] for j in js)
        nbr_ptr[i + 1] = len(nbr_idx)

    values = np.empty(n)
    kernel = _kernels.run_updates if use_numba else _kernels.run_updates_py
    kernel(x0.copy(), nbr_ptr, np.asarray(nbr_idx, dtype=np.int32),
           np.asarray(nbr_beta, dtype=float), nodes, eps, values)
    if n and not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise TrajectoryError(
            f"non-finite value at round {bad + 1} (node {int(nodes[bad])}); "
            "check the model's decay assumption and the initial state")

    return Trajectory(p=p, T=T, x0=x0, times=times, nodes=nodes, values=values,
                      seed=seed, model_hash=model.model_hash,
                      noise=eps if record_noise else None)
