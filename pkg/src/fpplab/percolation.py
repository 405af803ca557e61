"""Bond percolation census/p_c tools and oriented percolation on Z^2.

Every bond owns one uniform (a pure function of seed and bond key), and a
bond is open at parameter p iff its uniform is below p. Runs at different
parameters with the same seed are therefore coupled, which makes crossing
and survival monotone replica by replica.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import _kernels
from ._rng import box_edge_uniforms, combine, derive_seed, mix64, to_unit
from .errors import DomainError
from .lattice import LatticeSpec
from .parallel import replica_map
from .stats import linear_fit, t_halfwidth, wilson

BISECTION_STEPS = 40


def _check_prob(p: float, name: str = "p") -> None:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {p}")


def _bond_uniforms(spec: LatticeSpec, seed: int) -> np.ndarray:
    # same keying as weight fields, so a field's uniforms are its bond uniforms
    flat = box_edge_uniforms(np.uint64(seed), np.asarray(spec.lower, dtype=np.int64),
                             np.asarray(spec.shape, dtype=np.int64))
    return flat.reshape((spec.d, *spec.shape))


def _open_pairs(spec: LatticeSpec, u: np.ndarray, p: float):
    mask = spec.edge_mask() & (u < p)
    stride = np.ones(spec.d, dtype=np.int64)
    for k in range(spec.d - 2, -1, -1):
        stride[k] = stride[k + 1] * spec.shape[k + 1]
    us = [np.flatnonzero(mask[a].reshape(-1)) for a in range(spec.d)]
    vs = [x + stride[a] for a, x in enumerate(us)]
    return np.concatenate(us).astype(np.int64), np.concatenate(vs).astype(np.int64)


# ---------------------------------------------------------------------------
# Bond percolation


@dataclass(frozen=True)
class Census:
    p: float
    histogram: dict[int, int]
    max_size: int
    num_sites: int

    def tail_fit(self):
        """Regression of log(cluster count) on cluster size."""
        sizes = sorted(self.histogram)
        return linear_fit(sizes, [math.log(self.histogram[s]) for s in sizes])


def bond_cluster_census(d: int, box_radius: int, p: float, seed: int) -> Census:
    _check_prob(p)
    spec = LatticeSpec.cube(d, box_radius)
    u, v = _open_pairs(spec, _bond_uniforms(spec, seed), p)
    roots, _ = _kernels.union_find(spec.num_sites, u, v)
    sizes = np.bincount(roots, minlength=spec.num_sites)
    sizes = sizes[sizes > 0]
    hist = dict(sorted(Counter(int(s) for s in sizes).items()))
    return Census(p, hist, int(sizes.max()), spec.num_sites)


def _faces(spec: LatticeSpec):
    idx = np.indices(spec.shape)[0].reshape(-1)
    return idx == 0, idx == spec.shape[0] - 1


def crosses(d: int, box_radius: int, p: float, seed: int) -> bool:
    """Whether an open cluster joins the two faces orthogonal to axis 0."""
    _check_prob(p)
    spec = LatticeSpec.cube(d, box_radius)
    u, v = _open_pairs(spec, _bond_uniforms(spec, seed), p)
    roots, _ = _kernels.union_find(spec.num_sites, u, v)
    left, right = _faces(spec)
    return bool(np.intersect1d(roots[left], roots[right]).size)


def crossing_threshold(d: int, box_radius: int, seed: int) -> float:
    """Infimum of the p at which the coupled configuration crosses the box."""
    spec = LatticeSpec.cube(d, box_radius)
    uni = _bond_uniforms(spec, seed)
    mask = spec.edge_mask()
    stride = np.ones(spec.d, dtype=np.int64)
    for k in range(spec.d - 2, -1, -1):
        stride[k] = stride[k + 1] * spec.shape[k + 1]
    us, vs, ws = [], [], []
    for a in range(spec.d):
        ids = np.flatnonzero(mask[a].reshape(-1))
        us.append(ids)
        vs.append(ids + stride[a])
        ws.append(uni[a].reshape(-1)[ids])
    eu, ev, w = (np.concatenate(x) for x in (us, vs, ws))
    order = np.argsort(w, kind="stable").astype(np.int64)
    left, right = _faces(spec)
    i = _kernels.crossing_threshold(spec.num_sites, order, eu.astype(np.int64), ev.astype(np.int64), left, right)
    return float(w[order[i]]) if i >= 0 else 1.0


def _bisect_half(fraction, lo: float = 0.0, hi: float = 1.0, level: float = 0.5) -> float:
    """Smallest parameter where the nondecreasing `fraction` reaches `level`."""
    if fraction(lo) >= level:
        return lo
    if fraction(hi) < level:
        return hi
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if fraction(mid) >= level:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class PcEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    replicas: int
    thresholds: np.ndarray = field(repr=False)

    def crossing_probability(self, p: float) -> float:
        return float(np.mean(self.thresholds <= p))

    def curve(self, grid) -> list[tuple[float, float, float]]:
        """(p, crossing probability, Wilson half-width) rows."""
        rows = []
        for p in grid:
            k = int(np.sum(self.thresholds <= p))
            lo, hi = wilson(k, self.replicas)
            rows.append((float(p), k / self.replicas, (hi - lo) / 2))
        return rows


def estimate_pc(d: int, box_radius: int, replicas: int, seed: int, workers: int | None = None) -> PcEstimate:
    """Bisection for the p where the left-right crossing probability is 1/2."""
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    th = np.array(replica_map(lambda r: crossing_threshold(d, box_radius, derive_seed(seed, "pc", r)),
                              range(replicas), workers))

    def frac(p):
        return np.mean(th <= p)

    def upper(p):
        return wilson(int(np.sum(th <= p)), replicas)[1]

    def lower(p):
        return wilson(int(np.sum(th <= p)), replicas)[0]

    est = _bisect_half(frac)
    return PcEstimate(est, _bisect_half(upper), _bisect_half(lower), replicas, th)


# ---------------------------------------------------------------------------
# Oriented percolation (Durrett's convention: sites (x, t) with x + t even,
# bonds (x, t) -> (x -/+ 1, t + 1), origin occupied at t = 0)


@nb.njit(cache=True, nogil=True)
def _oriented_run(seed, q, horizon, right_edge):
    base = mix64(np.uint64(seed))
    width = 2 * horizon + 3
    off = horizon + 1
    cur = np.zeros(width, dtype=np.bool_)
    nxt = np.zeros(width, dtype=np.bool_)
    cur[off] = True
    left = 0
    right = 0
    right_edge[0] = 0
    for t in range(horizon):
        new_left = horizon + 1
        new_right = -horizon - 1
        ht = combine(base, t)
        for x in range(left, right + 1, 2):
            if not cur[x + off]:
                continue
            hx = combine(ht, x)
            if to_unit(combine(hx, 0)) < q:
                nxt[x - 1 + off] = True
                new_left = min(new_left, x - 1)
                new_right = max(new_right, x - 1)
            if to_unit(combine(hx, 1)) < q:
                nxt[x + 1 + off] = True
                new_left = min(new_left, x + 1)
                new_right = max(new_right, x + 1)
        for x in range(left, right + 1, 2):
            cur[x + off] = False
        if new_right < new_left:
            return False, t + 1
        cur, nxt = nxt, cur
        left, right = new_left, new_right
        right_edge[t + 1] = right
    return True, horizon


@dataclass(frozen=True)
class OrientedRun:
    q: float
    horizon: int
    survived: bool
    right_edge: np.ndarray = field(repr=False)

    @property
    def speed(self) -> float:
        return self.right_edge[-1] / self.horizon if self.survived else math.nan


def oriented_run(q: float, horizon: int, seed: int) -> OrientedRun:
    _check_prob(q, "q")
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    edge = np.zeros(horizon + 1, dtype=np.int64)
    survived, last = _oriented_run(np.uint64(seed), float(q), int(horizon), edge)
    return OrientedRun(q, horizon, bool(survived), edge[: last + 1] if survived else edge[:last])


def survives(q: float, horizon: int, seed: int) -> bool:
    edge = np.zeros(horizon + 1, dtype=np.int64)
    return bool(_oriented_run(np.uint64(seed), float(q), int(horizon), edge)[0])


@dataclass(frozen=True)
class SpeedEstimate:
    q: float
    horizon: int
    replicas: int
    survivors: int
    speed: float
    ci_low: float
    ci_high: float
    convention: str = "durrett"

    @property
    def survival(self) -> float:
        return self.survivors / self.replicas

    @property
    def extinct(self) -> bool:
        return self.survivors == 0


def oriented_speed(q: float, horizon: int, replicas: int, seed: int, workers: int | None = None) -> SpeedEstimate:
    """Right-edge speed r_horizon / horizon averaged over surviving replicas."""
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    runs = replica_map(lambda r: oriented_run(q, horizon, derive_seed(seed, "oriented", r)),
                       range(replicas), workers)
    speeds = np.array([r.speed for r in runs if r.survived])
    if speeds.size == 0:
        return SpeedEstimate(q, horizon, replicas, 0, math.nan, math.nan, math.nan)
    m = float(speeds.mean())
    hw = t_halfwidth(speeds)
    return SpeedEstimate(q, horizon, replicas, int(speeds.size), m, m - hw, m + hw)


def survival_probability(q: float, horizon: int, replicas: int, seed: int,
                         workers: int | None = None) -> tuple[float, float, float]:
    """(fraction surviving to horizon, Wilson low, Wilson high)."""
    alive = replica_map(lambda r: survives(q, horizon, derive_seed(seed, "oriented", r)),
                        range(replicas), workers)
    k = int(sum(alive))
    lo, hi = wilson(k, replicas)
    return k / replicas, lo, hi


def survival_threshold(horizon: int, seed: int) -> float:
    """Smallest q (to bisection precision) at which the coupled run survives."""
    if not survives(1.0, horizon, seed):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if survives(mid, horizon, seed):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class VecPcEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    horizon: int
    replicas: int
    half_horizon_estimate: float
    stable: bool
    thresholds: np.ndarray = field(repr=False)


def _median_with_ci(th: np.ndarray):
    n = th.size
    est = _bisect_half(lambda q: np.mean(th <= q))
    lo = _bisect_half(lambda q: wilson(int(np.sum(th <= q)), n)[1])
    hi = _bisect_half(lambda q: wilson(int(np.sum(th <= q)), n)[0])
    return est, lo, hi


def estimate_vec_pc(horizon: int, replicas: int, seed: int, workers: int | None = None) -> VecPcEstimate:
    """q where survival to `horizon` crosses 1/2, with a halved-horizon check.

    The estimate is called stable when halving the horizon moves it by less
    than the CI width at the full horizon.
    """
    if replicas < 1 or horizon < 2:
        raise DomainError("need replicas >= 1 and horizon >= 2")

    def thresholds(h):
        return np.array(replica_map(lambda r: survival_threshold(h, derive_seed(seed, "oriented", r)),
                                    range(replicas), workers))

    th = thresholds(horizon)
    est, lo, hi = _median_with_ci(th)
    half, _, _ = _median_with_ci(thresholds(horizon // 2))
    return VecPcEstimate(est, lo, hi, horizon, replicas, half, abs(est - half) < hi - lo, th)


# ---------------------------------------------------------------------------
# Flat edge geometry


_MAX_EUCLIDEAN_SPEED = 1 / math.sqrt(2.0) + 1e-12


@dataclass(frozen=True)
class FlatEdgeGeometry:
    q: float | None
    alpha_q: float
    N_q: tuple[float, float]
    theta_q: float


def flat_edge_geometry(q: float | None, alpha_q: float) -> FlatEdgeGeometry:
    """N_q = (1/2 + alpha/sqrt 2, 1/2 - alpha/sqrt 2) and its angle to the x-axis.

    alpha_q is the edge speed measured along the diagonal in Euclidean
    units; see euclidean_speed for converting Durrett's speed.
    """
    if not 0.0 <= alpha_q <= _MAX_EUCLIDEAN_SPEED:
        raise DomainError(f"alpha_q must lie in [0, 1/sqrt 2], got {alpha_q}")
    s = alpha_q / math.sqrt(2.0)
    nq = (0.5 + s, 0.5 - s)
    return FlatEdgeGeometry(q, alpha_q, nq, math.atan2(nq[1], nq[0]))


def euclidean_speed(durrett_speed: float) -> float:
    """Durrett's speed (1 at q = 1) rescaled so the diagonal step has unit length."""
    return durrett_speed / math.sqrt(2.0)


def flat_edge_from_speed(est: SpeedEstimate) -> FlatEdgeGeometry:
    if est.extinct:
        raise DomainError("no surviving replica: edge speed undefined")
    return flat_edge_geometry(est.q, euclidean_speed(est.speed))
