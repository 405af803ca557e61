"""First passage times, geodesics, the D_n boxes and the box sandwich bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError
from .lattice import LatticeSpec, linf, round_to_lattice

Site = tuple[int, ...]

SEARCH_MARGIN = 1.5


@dataclass(frozen=True)
class PassageResult:
    time: float
    geodesic: tuple[Site, ...] | None = None
    touched_boundary: bool = False
    relaxed_vertices: int = 0


def _flat(fld) -> np.ndarray:
    return np.ascontiguousarray(fld.dense).reshape(-1)


def _indices(spec: LatticeSpec, sites: Iterable[Sequence[int]]) -> np.ndarray:
    out = [spec.index(tuple(s)) for s in sites]
    if not out:
        raise DomainError("site set is empty")
    return np.unique(np.asarray(out, dtype=np.int64))


def _search(fld, sources: np.ndarray, targets: np.ndarray, want_path: bool) -> PassageResult:
    spec = fld.spec
    mask = np.zeros(spec.num_sites, dtype=np.bool_)
    mask[targets] = True
    shape = np.asarray(spec.shape, dtype=np.int64)
    dist, pred, settled, hit, touched = _kernels.grid_dijkstra(
        _flat(fld), shape, sources, mask, _kernels.STOP_FIRST)
    if hit < 0:
        raise DomainError("targets unreachable")  # cannot happen with finite weights in a box
    path = None
    if want_path:
        seq = [int(hit)]
        while pred[seq[-1]] >= 0:
            seq.append(int(pred[seq[-1]]))
        seq.reverse()
        path = tuple(spec.site(i) for i in seq)
        touched = any(spec.on_boundary(s) for s in path)
    return PassageResult(float(dist[hit]), path, bool(touched), int(settled.sum()))


def passage_time(fld, src: Sequence[int], dst: Sequence[int], want_path: bool = False) -> PassageResult:
    """T(src, dst) on the field's box.

    With want_path the geodesic is the one whose every vertex was reached
    from the lexicographically smallest predecessor among equal-time
    candidates.
    """
    spec = fld.spec
    s, t = spec.index(tuple(src)), spec.index(tuple(dst))
    return _search(fld, np.array([s], dtype=np.int64), np.array([t], dtype=np.int64), want_path)


def passage_time_sets(fld, A: Iterable[Sequence[int]], B: Iterable[Sequence[int]],
                      want_path: bool = False) -> PassageResult:
    """T(A, B) by one search from a virtual source joined to every site of A."""
    spec = fld.spec
    return _search(fld, _indices(spec, A), _indices(spec, B), want_path)


def check_direction(xi: Sequence[float]) -> tuple[float, ...]:
    xi = tuple(float(v) for v in xi)
    if abs(math.hypot(*xi) - 1.0) > 1e-12:
        raise DomainError(f"direction {xi} is not an l2-unit vector")
    return xi


def direction_from_angle(theta: float) -> tuple[float, float]:
    return (math.cos(theta), math.sin(theta))


def endpoint(xi: Sequence[float], n: float) -> Site:
    return round_to_lattice([n * v for v in xi])


def search_box(xi: Sequence[float], n: float, margin: float = SEARCH_MARGIN) -> LatticeSpec:
    """Box of radius ceil(margin * n) centred on the midpoint of [0, n xi]."""
    center = round_to_lattice([n * v / 2 for v in xi])
    return LatticeSpec.cube(len(xi), max(1, math.ceil(margin * n)), center)


def directional_passage(fld, xi: Sequence[float], n: float, want_path: bool = False) -> PassageResult:
    """a_{0,n}(xi) = T([0], [n xi])."""
    xi = check_direction(xi)
    if n < 0:
        raise DomainError("scale n must be >= 0")
    return passage_time(fld, (0,) * len(xi), endpoint(xi, n), want_path)


# ---------------------------------------------------------------------------
# D_n boxes


@dataclass(frozen=True)
class BoxRegion:
    """x + [-h, h]^d with h = 3^d kappa^{-1} n^delta unless overridden."""

    center: tuple[float, ...]
    n: float
    delta: float
    kappa: float
    half_width_override: float | None = None

    def __post_init__(self):
        if not 0 < self.kappa < 1:
            raise DomainError(f"kappa must lie in (0, 1), got {self.kappa}")
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        d = len(self.center)
        if not 0 < self.delta < 1 / d:
            raise DomainError(f"delta must lie in (0, 1/d), got {self.delta}")

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def half_width(self) -> float:
        if self.half_width_override is not None:
            return float(self.half_width_override)
        return 3**self.d / self.kappa * self.n**self.delta

    def contains(self, site: Sequence[float]) -> bool:
        return linf([s - c for s, c in zip(site, self.center)]) <= self.half_width

    def bounds(self) -> tuple[tuple[int, int], ...]:
        h = self.half_width
        return tuple((math.ceil(c - h), math.floor(c + h)) for c in self.center)

    def sites(self, within: LatticeSpec | None = None) -> list[Site]:
        bounds = self.bounds()
        if within is not None:
            bounds = tuple((max(lo, wl), min(hi, wu)) for (lo, hi), wl, wu in zip(bounds, within.lower, within.upper))
        return list(product(*(range(lo, hi + 1) for lo, hi in bounds)))

    def mask(self, spec: LatticeSpec) -> np.ndarray:
        """Boolean site mask of region ∩ box."""
        m = np.zeros(spec.shape, dtype=bool)
        sl = []
        for (lo, hi), wl, wu in zip(self.bounds(), spec.lower, spec.upper):
            lo, hi = max(lo, wl), min(hi, wu)
            if lo > hi:
                return m
            sl.append(slice(lo - wl, hi - wl + 1))
        m[tuple(sl)] = True
        return m

    def intersects(self, other: "BoxRegion") -> bool:
        """Whether the two regions share a lattice site."""
        return all(max(a[0], b[0]) <= min(a[1], b[1]) for a, b in zip(self.bounds(), other.bounds()))


def box_region(center: Sequence[float], n: float, delta: float, kappa: float,
               half_width: float | None = None) -> BoxRegion:
    return BoxRegion(tuple(float(c) for c in center), n, delta, kappa, half_width)


def box_pair(xi: Sequence[float], n: float, delta: float, kappa: float,
             half_width: float | None = None) -> tuple[BoxRegion, BoxRegion]:
    """D_n(0) and D_n(n xi)."""
    d = len(xi)
    return (box_region((0.0,) * d, n, delta, kappa, half_width),
            box_region([n * v for v in xi], n, delta, kappa, half_width))


def pair_search_box(xi: Sequence[float], n: float, half_width: float, margin: float = SEARCH_MARGIN) -> LatticeSpec:
    """Search box that holds both D_n boxes with `margin * n` to spare."""
    center = round_to_lattice([n * v / 2 for v in xi])
    return LatticeSpec.cube(len(xi), max(1, math.ceil(margin * n + half_width) + 1), center)


def set_time(fld, first: BoxRegion, second: BoxRegion) -> float:
    """T(first ∩ box, second ∩ box); zero when the regions share a site."""
    if first.intersects(second):
        return 0.0
    spec = fld.spec
    a = np.flatnonzero(first.mask(spec).reshape(-1))
    b = np.flatnonzero(second.mask(spec).reshape(-1))
    if a.size == 0 or b.size == 0:
        raise DomainError("a D_n box misses the field's box entirely")
    return _search(fld, a.astype(np.int64), b.astype(np.int64), False).time


def edge_sum_within(fld, site_mask: np.ndarray) -> float:
    """Sum of weights over edges with both endpoints in site_mask."""
    w = fld.dense
    total = 0.0
    for axis in range(fld.spec.d):
        both = site_mask.copy()
        lo = [slice(None)] * site_mask.ndim
        hi = [slice(None)] * site_mask.ndim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        both[tuple(lo)] &= site_mask[tuple(hi)]
        last = [slice(None)] * site_mask.ndim
        last[axis] = -1
        both[tuple(last)] = False
        total += float(w[axis][both].sum())
    return total


@dataclass(frozen=True)
class SandwichReport:
    set_time: float
    point_time: float
    j_n: float
    lower_ok: bool
    upper_ok: bool

    @property
    def holds(self) -> bool:
        return self.lower_ok and self.upper_ok


def sandwich_check(fld, xi: Sequence[float], n: float, delta: float, kappa: float,
                   x: Sequence[int], y: Sequence[int], half_width: float | None = None) -> SandwichReport:
    """Check T(D0, Dn) <= T(x, y) <= T(D0, Dn) + J_n for x in D0, y in Dn.

    D0 and Dn are clipped to the field's box; J_n sums the weights of edges
    lying inside D0 ∪ Dn.
    """
    xi = check_direction(xi)
    first, second = box_pair(xi, n, delta, kappa, half_width)
    if not first.contains(x) or not second.contains(y):
        raise DomainError("x must lie in D_n(0) and y in D_n(n xi)")
    spec = fld.spec
    t_set = set_time(fld, first, second)
    t_xy = passage_time(fld, x, y).time
    j_n = edge_sum_within(fld, first.mask(spec) | second.mask(spec))
    slack = 1e-9 * max(1.0, t_xy)
    return SandwichReport(t_set, t_xy, j_n, t_set <= t_xy + slack, t_xy <= t_set + j_n + slack)
