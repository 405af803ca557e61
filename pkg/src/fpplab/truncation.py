"""Truncated weights: kappa selection, bad/unhealthy clusters and sigma.

An edge is bad when its weight is below kappa; a site is unhealthy when an
incident edge weighs more than 1/kappa. Bad clusters connect sites through
bad edges (axis neighbours); unhealthy clusters connect unhealthy sites
through *-adjacency (all 3^d - 1 neighbours). sigma keeps the weight of an
edge unless it is extreme and attached to a cluster with at least n^delta
vertices, in which case it becomes 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from . import _kernels
from ._rng import derive_seed
from .errors import AssumptionViolation, DomainError
from .lattice import PC_BOND_2D, LatticeSpec, WeightDistribution, WeightField
from .parallel import replica_map
from .passage import box_pair, check_direction, pair_search_box, set_time
from .stats import linear_fit, t_halfwidth, wilson

KAPPA_GRID = np.logspace(-3, 0, 10_000, endpoint=False)
REL_TOL = 1e-9


def default_delta(d: int) -> Fraction:
    return Fraction(1, d + 4)


@dataclass(frozen=True)
class KappaChoice:
    kappa: float
    p_low: float
    p_high: float
    margin: float
    pc_value: float


def kappa_probabilities(dist: WeightDistribution, kappa: float) -> tuple[float, float]:
    """(P(w < kappa), P(w > 1/kappa))."""
    return dist.prob_below(kappa), dist.prob_above(1.0 / kappa)


def choose_kappa(dist: WeightDistribution, pc_value: float = PC_BOND_2D,
                 grid: Sequence[float] = KAPPA_GRID) -> KappaChoice:
    """Grid point maximising p_c - max(P(w < k), P(w > 1/k)).

    Ties go to the largest kappa, which keeps the D_n boxes smallest.
    """
    best = None
    worst_low = worst_high = 1.0
    for k in grid:
        lo, hi = kappa_probabilities(dist, float(k))
        worst_low, worst_high = min(worst_low, lo), min(worst_high, hi)
        margin = pc_value - max(lo, hi)
        if best is None or margin >= best.margin:
            best = KappaChoice(float(k), lo, hi, margin, pc_value)
    if best is None or best.margin <= 0:
        side = "P(w < kappa)" if worst_low >= pc_value else "P(w > 1/kappa)"
        if worst_low >= pc_value and worst_high >= pc_value:
            side = "both P(w < kappa) and P(w > 1/kappa)"
        raise AssumptionViolation(f"no kappa in (0, 1) keeps {side} below p_c = {pc_value}")
    return best


# ---------------------------------------------------------------------------
# Classification and clusters


def _weights(fld) -> np.ndarray:
    return fld.dense


def bad_edges(fld, kappa: float) -> np.ndarray:
    """(d, *shape) mask of edges with weight < kappa."""
    return _weights(fld) < kappa


def heavy_edges(fld, kappa: float) -> np.ndarray:
    w = _weights(fld)
    return np.isfinite(w) & (w > 1.0 / kappa)


def heavy_incidence(fld, kappa: float) -> np.ndarray:
    """Per-site count of incident edges heavier than 1/kappa."""
    heavy = heavy_edges(fld, kappa)
    count = np.zeros(fld.spec.shape, dtype=np.int64)
    for axis in range(fld.spec.d):
        h = heavy[axis].astype(np.int64)
        count += h
        shifted = np.zeros_like(h)
        dst = [slice(None)] * h.ndim
        src = [slice(None)] * h.ndim
        dst[axis] = slice(1, None)
        src[axis] = slice(0, -1)
        shifted[tuple(dst)] = h[tuple(src)]
        count += shifted
    return count


def classify(fld, kappa: float, min_heavy_edges: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(bad edge mask, unhealthy site mask).

    A site is unhealthy when at least `min_heavy_edges` incident edges
    exceed 1/kappa; the default reads "some weights" as "at least one".
    """
    if not 0 < kappa < 1:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    return bad_edges(fld, kappa), heavy_incidence(fld, kappa) >= min_heavy_edges


def _strides(shape) -> np.ndarray:
    out = np.ones(len(shape), dtype=np.int64)
    for k in range(len(shape) - 2, -1, -1):
        out[k] = out[k + 1] * shape[k + 1]
    return out


def _bad_edge_pairs(spec: LatticeSpec, bad: np.ndarray):
    stride = _strides(spec.shape)
    us, vs = [], []
    for axis in range(spec.d):
        u = np.flatnonzero(bad[axis].reshape(-1))
        us.append(u)
        vs.append(u + stride[axis])
    return np.concatenate(us).astype(np.int64), np.concatenate(vs).astype(np.int64)


def star_offsets(d: int) -> list[tuple[int, ...]]:
    """Half of the 3^d - 1 *-neighbour offsets (lexicographically positive)."""
    return [o for o in product((-1, 0, 1), repeat=d) if any(o) and next(v for v in o if v) > 0]


def _star_pairs(spec: LatticeSpec, sites: np.ndarray):
    flat = np.arange(spec.num_sites, dtype=np.int64).reshape(spec.shape)
    us, vs = [], []
    for off in star_offsets(spec.d):
        a = [slice(max(0, -o), s - max(0, o)) for o, s in zip(off, spec.shape)]
        b = [slice(max(0, o), s - max(0, -o)) for o, s in zip(off, spec.shape)]
        both = sites[tuple(a)] & sites[tuple(b)]
        us.append(flat[tuple(a)][both])
        vs.append(flat[tuple(b)][both])
    return np.concatenate(us).astype(np.int64), np.concatenate(vs).astype(np.int64)


def _compact(roots: np.ndarray, member: np.ndarray):
    """Relabel roots of member sites as 0..k-1 by first appearance."""
    labels = np.full(roots.shape, -1, dtype=np.int64)
    idx = np.flatnonzero(member)
    if idx.size == 0:
        return labels, np.zeros(0, dtype=np.int64)
    uniq, first, inv = np.unique(roots[idx], return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    labels[idx] = rank[inv]
    sizes = np.bincount(labels[idx], minlength=order.size).astype(np.int64)
    return labels, sizes


@dataclass(frozen=True)
class ClusterLabeling:
    """Bad (axis-connected) and unhealthy (*-connected) clusters of a box.

    Site label arrays have the box shape and hold -1 for sites outside any
    cluster; edge labels have shape (d, *box shape).
    """

    spec: LatticeSpec
    bad_edge_labels: np.ndarray = field(repr=False)
    bad_site_labels: np.ndarray = field(repr=False)
    bad_cluster_sizes: np.ndarray
    unhealthy_site_labels: np.ndarray = field(repr=False)
    unhealthy_cluster_sizes: np.ndarray

    def bad_size_at(self) -> np.ndarray:
        """#C_-(x) per site (1 for a site with no bad edge)."""
        lab = self.bad_site_labels
        out = np.ones(lab.shape, dtype=np.int64)
        m = lab >= 0
        out[m] = self.bad_cluster_sizes[lab[m]]
        return out

    def unhealthy_size_at(self) -> np.ndarray:
        """#C_+(x) per site (0 for a healthy site)."""
        lab = self.unhealthy_site_labels
        out = np.zeros(lab.shape, dtype=np.int64)
        m = lab >= 0
        out[m] = self.unhealthy_cluster_sizes[lab[m]]
        return out


def label_clusters(fld, kappa: float, min_heavy_edges: int = 1) -> ClusterLabeling:
    spec = fld.spec
    bad, unhealthy = classify(fld, kappa, min_heavy_edges)
    n = spec.num_sites

    u, v = _bad_edge_pairs(spec, bad)
    roots, _ = _kernels.union_find(n, u, v)
    on_bad = np.zeros(n, dtype=bool)
    on_bad[u] = True
    on_bad[v] = True
    bad_sites, bad_sizes = _compact(roots, on_bad)
    edge_labels = np.full(bad.shape, -1, dtype=np.int64)
    for axis in range(spec.d):
        ids = np.flatnonzero(bad[axis].reshape(-1))
        edge_labels[axis].reshape(-1)[ids] = bad_sites[ids]

    su, sv = _star_pairs(spec, unhealthy)
    sroots, _ = _kernels.union_find(n, su, sv)
    un_sites, un_sizes = _compact(sroots, unhealthy.reshape(-1))

    return ClusterLabeling(
        spec=spec,
        bad_edge_labels=edge_labels,
        bad_site_labels=bad_sites.reshape(spec.shape),
        bad_cluster_sizes=bad_sizes,
        unhealthy_site_labels=un_sites.reshape(spec.shape),
        unhealthy_cluster_sizes=un_sizes,
    )


# ---------------------------------------------------------------------------
# sigma

RULE_DEFAULT, RULE_MODERATE, RULE_SMALL_BAD, RULE_SMALL_UNHEALTHY = 0, 1, 2, 3


def _upper_endpoint(a: np.ndarray, axis: int) -> np.ndarray:
    """Per-edge value at x + e_axis for a per-site array (last slab padded)."""
    out = np.empty_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    src[axis] = slice(1, None)
    dst[axis] = slice(0, -1)
    out[tuple(dst)] = a[tuple(src)]
    last = [slice(None)] * a.ndim
    last[axis] = -1
    out[tuple(last)] = a[tuple(last)]
    return out


@dataclass(frozen=True)
class TruncatedField:
    base: object
    kappa: float
    n: float
    delta: float
    dense: np.ndarray = field(repr=False)
    rule: np.ndarray = field(repr=False)

    @property
    def spec(self) -> LatticeSpec:
        return self.base.spec

    @property
    def threshold(self) -> float:
        return float(self.n) ** float(self.delta)

    def weights(self) -> np.ndarray:
        return self.dense.copy()

    def weight(self, site: Sequence[int], axis: int) -> float:
        if not self.spec.has_edge(site, axis):
            raise DomainError(f"({tuple(site)}, axis {axis}) is not an edge of the box")
        return float(self.dense[(axis, *(s - lo for s, lo in zip(site, self.spec.lower)))])


def truncate(fld, kappa: float, n: float, delta: float, labels: ClusterLabeling | None = None,
             min_heavy_edges: int = 1) -> TruncatedField:
    """sigma(e) = w(e) under rules (1)-(3), else 1.

    A rule (2)/(3) edge keeps its weight when every relevant cluster that
    meets one of its endpoints has fewer than n^delta vertices.
    """
    if not 0 < kappa < 1:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    if n < 1 or delta <= 0:
        raise DomainError("need n >= 1 and delta > 0")
    labels = labels or label_clusters(fld, kappa, min_heavy_edges)
    thr = float(n) ** float(delta)
    w = fld.dense
    bad_size = labels.bad_size_at()
    un_size = labels.unhealthy_size_at()
    rule = np.zeros(w.shape, dtype=np.int8)
    for axis in range(fld.spec.d):
        wa = w[axis]
        small_bad = (bad_size < thr) & (_upper_endpoint(bad_size, axis) < thr)
        small_un = (un_size < thr) & (_upper_endpoint(un_size, axis) < thr)
        r = rule[axis]
        r[(wa >= kappa) & (wa <= 1.0 / kappa)] = RULE_MODERATE
        r[(wa < kappa) & small_bad] = RULE_SMALL_BAD
        r[np.isfinite(wa) & (wa > 1.0 / kappa) & small_un] = RULE_SMALL_UNHEALTHY
    sigma = np.where(rule > 0, w, 1.0)
    sigma[~fld.spec.edge_mask()] = np.inf
    sigma.setflags(write=False)
    rule.setflags(write=False)
    return TruncatedField(fld, kappa, n, delta, sigma, rule)


# ---------------------------------------------------------------------------
# Monte Carlo diagnostics on T(D_n(0), D_n(n xi)) versus its sigma version


@dataclass(frozen=True)
class PairedSetTimes:
    n: float
    delta: float
    kappa: float
    half_width: float
    boxes_overlap: bool
    t: np.ndarray = field(repr=False)
    t_sigma: np.ndarray = field(repr=False)

    @property
    def replicas(self) -> int:
        return int(self.t.size)

    def differs(self) -> np.ndarray:
        scale = np.maximum(np.maximum(np.abs(self.t), np.abs(self.t_sigma)), 1.0)
        return np.abs(self.t - self.t_sigma) > REL_TOL * scale


def paired_set_times(dist: WeightDistribution, xi: Sequence[float], n: float, delta: float | None,
                     replicas: int, master_seed: int, pc_value: float = PC_BOND_2D,
                     kappa: float | None = None, half_width: float | None = None,
                     workers: int | None = None) -> PairedSetTimes:
    """Per-replica T and T_sigma between D_n(0) and D_n(n xi) on one field each."""
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    xi = check_direction(xi)
    d = len(xi)
    delta = float(default_delta(d) if delta is None else delta)
    if kappa is None:
        kappa = choose_kappa(dist, pc_value).kappa
    first, second = box_pair(xi, n, delta, kappa, half_width)
    hw = first.half_width
    overlap = first.intersects(second)
    if overlap:
        zeros = np.zeros(replicas)
        return PairedSetTimes(n, delta, kappa, hw, True, zeros, zeros.copy())
    spec = pair_search_box(xi, n, hw)

    def one(r: int) -> tuple[float, float]:
        fld = WeightField(spec, dist, derive_seed(master_seed, "truncation", n, r))
        sig = truncate(fld, kappa, n, delta)
        return set_time(fld, first, second), set_time(sig, first, second)

    out = replica_map(one, range(replicas), workers)
    t = np.array([a for a, _ in out])
    ts = np.array([b for _, b in out])
    return PairedSetTimes(n, delta, kappa, hw, False, t, ts)


@dataclass(frozen=True)
class CouplingEstimate:
    n: float
    delta: float
    kappa: float
    replicas: int
    count: int
    p_neq: float
    ci_low: float
    ci_high: float
    half_width: float
    boxes_overlap: bool


def coupling_from(paired: PairedSetTimes) -> CouplingEstimate:
    k = int(paired.differs().sum())
    lo, hi = wilson(k, paired.replicas)
    return CouplingEstimate(paired.n, paired.delta, paired.kappa, paired.replicas, k,
                            k / paired.replicas, lo, hi, paired.half_width, paired.boxes_overlap)


def coupling_probability(dist, xi, n, delta=None, replicas=100, master_seed=0, **kw) -> CouplingEstimate:
    """Fraction of replicas with T(D_n(0), D_n(n xi)) != T_sigma(...), Wilson 95% CI."""
    return coupling_from(paired_set_times(dist, xi, n, delta, replicas, master_seed, **kw))


def concentration_tails(t_sigma: np.ndarray, n: float, delta: float, u_grid: Sequence[float]) -> list[tuple[float, float]]:
    """(u, fraction with |T_sigma - mean| >= u n^{1/2 + 3 delta})."""
    t_sigma = np.asarray(t_sigma, dtype=np.float64)
    dev = np.abs(t_sigma - t_sigma.mean())
    scale = float(n) ** (0.5 + 3 * float(delta))
    return [(float(u), float(np.mean(dev >= u * scale))) for u in u_grid]


def concentration_scan(dist, xi, n, delta=None, u_grid=(0.0, 0.01, 0.02, 0.05, 0.1), replicas=100,
                       master_seed=0, **kw) -> list[tuple[float, float]]:
    paired = paired_set_times(dist, xi, n, delta, replicas, master_seed, **kw)
    return concentration_tails(paired.t_sigma, n, paired.delta, sorted(u_grid))


def fit_tail_constants(pairs: Sequence[tuple[float, float]], n: float, delta: float) -> tuple[float, float] | None:
    """Fit tail ~ C1 exp(-C2 u^2 n^delta) on the positive tails; None if < 2 points."""
    pts = [(u, t) for u, t in pairs if t > 0]
    if len({u for u, _ in pts}) < 2:
        return None
    x = np.array([u * u * float(n) ** float(delta) for u, _ in pts])
    y = np.log([t for _, t in pts])
    fit = linear_fit(x, y)
    return math.exp(fit.intercept), -fit.slope


@dataclass(frozen=True)
class GapEstimate:
    n: float
    replicas: int
    gap: float
    gap_ci: float
    mean_diff: float
    mean_abs_diff: float


def gap_from(paired: PairedSetTimes) -> GapEstimate:
    diff = paired.t - paired.t_sigma
    hw = t_halfwidth(diff)
    return GapEstimate(paired.n, paired.replicas, abs(float(diff.mean())), hw,
                       float(diff.mean()), float(np.abs(diff).mean()))


def expectation_gap(dist, xi, n, delta=None, replicas=100, master_seed=0, **kw) -> GapEstimate:
    """|mean T - mean T_sigma| from paired replicas, with a t half-width."""
    return gap_from(paired_set_times(dist, xi, n, delta, replicas, master_seed, **kw))


def fit_gap_decay(ns: Sequence[float], gaps: Sequence[float], delta: float) -> tuple[float, float] | None:
    """Fit gap ~ C3 n exp(-C4 n^delta) on positive gaps; None if < 2 points."""
    pts = [(n, g) for n, g in zip(ns, gaps) if g > 0]
    if len(pts) < 2:
        return None
    x = np.array([float(n) ** float(delta) for n, _ in pts])
    y = np.log([g / n for n, g in pts])
    fit = linear_fit(x, y)
    return math.exp(fit.intercept), -fit.slope
