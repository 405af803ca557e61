"""Experiments on passage-time growth: time constant, convergence gap,
the Lambda(M, n) integer program, path skeletons and variance scans."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from . import _kernels
from ._rng import derive_seed
from .errors import AssumptionViolation, DomainError, ResourceRefusal
from .lattice import PC_BOND_2D, LatticeSpec, WeightDistribution, WeightField, linf, validate_assumptions
from .parallel import replica_map
from .passage import check_direction, direction_from_angle, directional_passage, search_box
from .stats import LinearFit, linear_fit, t_halfwidth

MAX_LAMBDA_STATES = 10**7


def theorem_exponent(d: int) -> Fraction:
    """Exponent 1 - 1/(6d + 12) of the correction term in the rate bound."""
    return 1 - Fraction(1, 6 * d + 12)


COROLLARY_BETA = Fraction(47, 48)


def default_parameters(d: int, n: int) -> tuple[Fraction, int]:
    """delta = 1/(d+4) and M = floor(n^{1/(d delta + 1)}), M computed exactly."""
    if n < 1:
        raise DomainError("n must be >= 1")
    delta = Fraction(1, d + 4)
    expo = 1 / (d * delta + 1)
    return delta, integer_power_floor(n, expo)


def integer_power_floor(n: int, expo: Fraction) -> int:
    """floor(n ** expo) for a positive rational exponent, without rounding error."""
    num, den = expo.numerator, expo.denominator
    target = n**num
    m = int(math.floor(n ** float(expo)))
    while m > 0 and m**den > target:
        m -= 1
    while (m + 1) ** den <= target:
        m += 1
    return m


# ---------------------------------------------------------------------------
# Directional passage-time sampling


def resolve_pc(d: int, pc_value: float | None) -> float:
    if pc_value is not None:
        return pc_value
    if d == 2:
        return PC_BOND_2D
    from .percolation import estimate_pc

    return estimate_pc(d, 8, 20, 0).estimate


def require_assumptions(dist: WeightDistribution, d: int, pc_value: float | None = None) -> None:
    rep = validate_assumptions(dist, d, resolve_pc(d, pc_value))
    if not rep.a1_holds:
        raise AssumptionViolation(f"(A1) fails: nu({{0}}) = {rep.zero_mass} >= p_c = {rep.pc_value}")
    if not rep.a2_holds:
        raise AssumptionViolation(f"(A2) fails: moment of order {rep.alpha} diverges")


def sample_directional(dist: WeightDistribution, xi: Sequence[float], n: int, replicas: int,
                       master_seed: int, tag: str = "directional", workers: int | None = None):
    """Replica values of a_{0,n}(xi) and their boundary-contact flags."""
    xi = check_direction(xi)
    if n == 0:
        return np.zeros(replicas), np.zeros(replicas, dtype=bool)
    spec = search_box(xi, n)

    def one(r):
        fld = WeightField(spec, dist, derive_seed(master_seed, tag, n, r))
        res = directional_passage(fld, xi, n, want_path=True)
        return res.time, res.touched_boundary

    out = replica_map(one, range(replicas), workers)
    return np.array([t for t, _ in out]), np.array([b for _, b in out], dtype=bool)


@dataclass(frozen=True)
class EstimateSeries:
    n_grid: tuple[int, ...]
    mean: tuple[float, ...]
    var: tuple[float, ...]
    replicas: tuple[int, ...]
    ci: tuple[float, ...]
    touched: tuple[int, ...]
    dist: str
    xi: tuple[float, ...]
    master_seed: int
    samples: tuple[np.ndarray, ...] = field(repr=False, default=())

    def se(self, i: int) -> float:
        return math.sqrt(self.var[i] / self.replicas[i])

    def rows(self):
        for i, n in enumerate(self.n_grid):
            yield n, self.replicas[i], self.mean[i], self.var[i], self.ci[i], self.touched[i]


def estimate_series(dist: WeightDistribution, xi: Sequence[float], n_grid: Sequence[int], replicas: int,
                    master_seed: int, tag: str = "directional", workers: int | None = None) -> EstimateSeries:
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    xi = check_direction(xi)
    n_grid = tuple(int(n) for n in n_grid)
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise DomainError("n_grid must be strictly increasing")
    means, vars_, cis, touched, samples = [], [], [], [], []
    for n in n_grid:
        t, hit = sample_directional(dist, xi, n, replicas, master_seed, tag, workers)
        means.append(float(t.mean()))
        vars_.append(float(t.var(ddof=1)) if replicas > 1 else 0.0)
        cis.append(t_halfwidth(t) if replicas > 1 else math.inf)
        touched.append(int(hit.sum()))
        samples.append(t)
    return EstimateSeries(n_grid, tuple(means), tuple(vars_), (replicas,) * len(n_grid), tuple(cis),
                          tuple(touched), dist.literal(), xi, master_seed, tuple(samples))


@dataclass(frozen=True)
class TimeConstantEstimate:
    series: EstimateSeries
    mu_hat: float
    mu_hat_ci: float
    mu_hat_n: int
    mu_last: float
    mu_last_ci: float


def estimate_time_constant(dist: WeightDistribution, xi: Sequence[float], n_grid: Sequence[int], replicas: int,
                           master_seed: int, pc_value: float | None = None, check_assumptions: bool = True,
                           workers: int | None = None) -> TimeConstantEstimate:
    """min over n of mean(a_{0,n})/n, plus the largest-n ratio as an alternative."""
    xi = check_direction(xi)
    if check_assumptions:
        require_assumptions(dist, len(xi), pc_value)
    if any(n < 1 for n in n_grid):
        raise DomainError("time-constant scales must be >= 1")
    s = estimate_series(dist, xi, n_grid, replicas, master_seed, "directional", workers)
    ratios = [m / n for m, n in zip(s.mean, s.n_grid)]
    i = int(np.argmin(ratios))
    return TimeConstantEstimate(s, ratios[i], s.ci[i] / s.n_grid[i], s.n_grid[i],
                                ratios[-1], s.ci[-1] / s.n_grid[-1])


def subadditivity_violations(series: EstimateSeries, k: float = 3.0) -> list[tuple[int, int]]:
    """Pairs (a, b) with mean(a+b) > mean(a) + mean(b) + k combined standard errors."""
    idx = {n: i for i, n in enumerate(series.n_grid)}
    bad = []
    for a, b in product(series.n_grid, repeat=2):
        if a > b or a + b not in idx:
            continue
        i, j, s = idx[a], idx[b], idx[a + b]
        se = math.sqrt(series.se(i) ** 2 + series.se(j) ** 2 + series.se(s) ** 2)
        if series.mean[s] > series.mean[i] + series.mean[j] + k * se:
            bad.append((a, b))
    return bad


# ---------------------------------------------------------------------------
# Convergence gap


@dataclass(frozen=True)
class GapAnalysis:
    n_grid: tuple[int, ...]
    gaps: tuple[float, ...]
    gap_ci: tuple[float, ...]
    mu_reference: float
    fit: LinearFit | None
    excluded: int
    theorem_exponent: Fraction
    corollary_beta: Fraction
    sensitivity: tuple[float | None, float | None]

    @property
    def exponent(self) -> float | None:
        return None if self.fit is None else self.fit.slope


def _loglog_fit(ns, gaps):
    pts = [(n, g) for n, g in zip(ns, gaps) if g > 0 and n > 0]
    if len(pts) < 2:
        return None, len(ns) - len(pts)
    x = np.log([n for n, _ in pts])
    y = np.log([g for _, g in pts])
    return linear_fit(x, y), len(ns) - len(pts)


def gap_analysis(series: EstimateSeries, mu_reference: float, mu_reference_ci: float = 0.0) -> GapAnalysis:
    """Gaps mean(a_{0,n}) - n mu_ref and the log-log slope of the positive ones.

    sensitivity holds the fitted exponent with mu_ref shifted by -/+ its CI.
    """
    ns = series.n_grid
    gaps = tuple(m - n * mu_reference for m, n in zip(series.mean, ns))
    fit, excluded = _loglog_fit(ns, gaps)
    sens = []
    for shift in (-mu_reference_ci, mu_reference_ci):
        if mu_reference_ci == 0:
            sens.append(None if fit is None else fit.slope)
            continue
        f, _ = _loglog_fit(ns, [m - n * (mu_reference + shift) for m, n in zip(series.mean, ns)])
        sens.append(None if f is None else f.slope)
    d = len(series.xi)
    return GapAnalysis(ns, gaps, series.ci, mu_reference, fit, excluded,
                       theorem_exponent(d), COROLLARY_BETA, tuple(sens))


def convergence_gap(dist: WeightDistribution, xi: Sequence[float], n_grid: Sequence[int], replicas: int,
                    master_seed: int, mu_reference: float, mu_reference_ci: float = 0.0,
                    workers: int | None = None) -> GapAnalysis:
    s = estimate_series(dist, xi, n_grid, replicas, master_seed, "directional", workers)
    return gap_analysis(s, mu_reference, mu_reference_ci)


# ---------------------------------------------------------------------------
# Lambda(M, n)


def generate_U_vectors(M: int, d: int) -> list[tuple[int, ...]]:
    """All integer vectors with max-norm exactly M, lexicographic order."""
    if M < 1:
        raise DomainError("M must be >= 1")
    return [v for v in product(range(-M, M + 1), repeat=d) if max(abs(c) for c in v) == M]


def estimate_U_costs(dist: WeightDistribution, U: Sequence[Sequence[int]], replicas: int, master_seed: int,
                     workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo E[T(0, U_k)], all K costs from one field per replica.

    Returns (means, t half-widths).
    """
    d = len(U[0])
    M = max(max(abs(c) for c in u) for u in U)
    spec = LatticeSpec.cube(d, max(2, math.ceil(2.5 * M)))
    targets = np.array([spec.index(tuple(u)) for u in U], dtype=np.int64)
    mask = np.zeros(spec.num_sites, dtype=np.bool_)
    mask[targets] = True
    src = np.array([spec.index((0,) * d)], dtype=np.int64)
    shape = np.asarray(spec.shape, dtype=np.int64)

    def one(r):
        fld = WeightField(spec, dist, derive_seed(master_seed, "lambda-costs", M, r))
        dist_arr, *_ = _kernels.grid_dijkstra(np.ascontiguousarray(fld.dense).reshape(-1), shape, src, mask,
                                              _kernels.STOP_ALL)
        return dist_arr[targets]

    samples = np.array(replica_map(one, range(replicas), workers))
    hw = np.array([t_halfwidth(samples[:, k]) for k in range(len(U))])
    return samples.mean(axis=0), hw


@dataclass(frozen=True)
class LambdaProblem:
    M: int
    n: int
    xi: tuple[float, ...]
    U: tuple[tuple[int, ...], ...]
    costs: tuple[float, ...]
    mu_hat: float

    def __post_init__(self):
        d = len(self.xi)
        if self.M < 1:
            raise DomainError("M must be >= 1")
        if len(self.U) != (2 * self.M + 1) ** d - (2 * self.M - 1) ** d:
            raise DomainError("U must be the full max-norm sphere of radius M")
        if any(linf(u) != self.M for u in self.U):
            raise DomainError("every U_k must have max-norm M")
        if len(self.costs) != len(self.U):
            raise DomainError("one cost per U_k required")
        if any(c < 0 or not math.isfinite(c) for c in self.costs):
            raise DomainError("costs must be finite and nonnegative")

    @classmethod
    def build(cls, M: int, n: int, xi: Sequence[float], costs, mu_hat: float) -> "LambdaProblem":
        """Problem over generate_U_vectors(M, d); `costs` is a sequence or a callable on U_k."""
        U = generate_U_vectors(M, len(xi))
        c = [costs(u) for u in U] if callable(costs) else list(costs)
        return cls(M, n, tuple(float(v) for v in xi), tuple(U), tuple(float(v) for v in c), float(mu_hat))

    @property
    def target(self) -> tuple[float, ...]:
        return tuple(self.n * v for v in self.xi)

    def feasible(self, displacement: Sequence[int]) -> bool:
        return linf([s - t for s, t in zip(displacement, self.target)]) <= self.M


@dataclass(frozen=True)
class LambdaSolution:
    value: float
    min_cost: float
    counts: dict[tuple[int, ...], int]
    displacement: tuple[int, ...]
    states_settled: int


def _greedy_cost(problem: LambdaProblem) -> float:
    """Cost of a simple feasible combination, used as the initial incumbent."""
    M, t = problem.M, problem.target
    lookup = dict(zip(problem.U, problem.costs))
    s = [0] * len(t)
    total = 0.0
    while not problem.feasible(s):
        step = tuple(max(-M, min(M, round(ti - si))) for ti, si in zip(t, s))
        total += lookup[step]
        s = [a + b for a, b in zip(s, step)]
    return total


def solve_lambda(problem: LambdaProblem, max_states: int = MAX_LAMBDA_STATES) -> LambdaSolution:
    """Exact minimum of sum p(k) cost_k over p >= 0 with |sum p(k) U_k - n xi|_inf <= M.

    Shortest paths over partial sums inside a box around [0, n xi] padded
    by (d + 2) M, pruned at the greedy incumbent. Reordering the steps of
    any combination keeps its partial sums within d M of that segment, so
    the padding loses no optimum.
    """
    M, d, t = problem.M, len(problem.xi), problem.target
    if problem.feasible((0,) * d):
        return LambdaSolution(-problem.n * problem.mu_hat, 0.0, {}, (0,) * d, 0)
    pad = (d + 2) * M
    lower = [math.floor(min(0.0, v)) - pad for v in t]
    upper = [math.ceil(max(0.0, v)) + pad for v in t]
    shape = [hi - lo + 1 for lo, hi in zip(lower, upper)]
    size = math.prod(shape)
    if size > max_states:
        axis = int(np.argmax(shape))
        raise ResourceRefusal(f"Lambda state space has {size} states (> {max_states}); "
                              f"axis {axis} spans {shape[axis]} values")
    spec = LatticeSpec(tuple(lower), tuple(upper))
    grids = np.meshgrid(*(np.arange(lo, hi + 1) for lo, hi in zip(lower, upper)), indexing="ij")
    feas = np.ones(shape, dtype=bool)
    for g, tv in zip(grids, t):
        feas &= np.abs(g - tv) <= M
    incumbent = _greedy_cost(problem)
    cutoff = incumbent * (1 + 1e-12) + 1e-12
    moves = np.array(problem.U, dtype=np.int64)
    costs = np.array(problem.costs, dtype=np.float64)
    start = spec.index((0,) * d)
    best, end, pred, pred_move, settled = _kernels.stencil_dijkstra(
        np.asarray(shape, dtype=np.int64), moves, costs, start, feas.reshape(-1), cutoff)
    if end < 0:
        raise RuntimeError("Lambda search found no feasible combination")
    counts: dict[tuple[int, ...], int] = {}
    node = end
    while node != start:
        u = problem.U[pred_move[node]]
        counts[u] = counts.get(u, 0) + 1
        node = pred[node]
    counts = dict(sorted(counts.items()))
    return LambdaSolution(float(best) - problem.n * problem.mu_hat, float(best), counts,
                          spec.site(end), int(settled))


@dataclass(frozen=True)
class KestenReport:
    l: int
    lambda_n: float
    lambda_ln: float
    c1_needed_lower: float
    c1_needed_upper: float
    c1_min: float
    m1: float
    lower_holds: bool
    upper_holds: bool

    @property
    def c1_exceeds_m1(self) -> bool:
        return self.c1_min > self.m1


def kesten_window_check(lambda_n: float, lambda_ln: float, l: int, n: int, M: int, d: int, m1: float,
                        c1: float | None = None) -> KestenReport:
    """Smallest C1 (at least m_{nu,1}) with
    l Lambda(M,n) - C1 l M^{1/d} n^{(d-1)/d} <= Lambda(M, l n) <= C1 l n.

    With `c1` given, the two inequalities are checked at that value instead.
    """
    if l < 1:
        raise DomainError("l must be >= 1")
    window = l * M ** (1 / d) * n ** ((d - 1) / d)
    need_lo = (l * lambda_n - lambda_ln) / window
    need_hi = lambda_ln / (l * n)
    c_min = max(need_lo, need_hi, m1)
    c = c_min if c1 is None else c1
    tol = 1e-12 * max(1.0, abs(lambda_ln), abs(l * lambda_n))
    lower_ok = l * lambda_n - c * window <= lambda_ln + tol
    upper_ok = lambda_ln <= c * l * n + tol
    return KestenReport(l, lambda_n, lambda_ln, need_lo, need_hi, c_min, m1, lower_ok, upper_ok)


# ---------------------------------------------------------------------------
# Skeletons of paths


@dataclass(frozen=True)
class SkeletonDecomposition:
    """Successive exits of a path from max-norm balls of radius M.

    anchors[i] = path[tau[i]] for 0 <= i <= Q, so anchors[0] is the start.
    """

    path: tuple[tuple[int, ...], ...]
    M: int
    tau: tuple[int, ...]
    anchors: tuple[tuple[int, ...], ...]

    @property
    def Q(self) -> int:
        return len(self.tau) - 1

    def steps(self) -> list[tuple[int, ...]]:
        return [tuple(b - a for a, b in zip(p, q)) for p, q in zip(self.anchors, self.anchors[1:])]

    def verify(self) -> bool:
        steps_ok = all(linf(s) == self.M for s in self.steps())
        last = self.anchors[-1]
        tail_ok = all(linf([a - b for a, b in zip(v, last)]) < self.M for v in self.path[self.tau[-1] + 1:])
        return steps_ok and tail_ok


def skeleton_lower_bound(n: float, d: int, M: int, l: int = 1) -> float:
    """l n / (d M) - 1."""
    return l * n / (d * M) - 1


def skeletonize(path: Sequence[Sequence[int]], M: int) -> SkeletonDecomposition:
    if M < 1:
        raise DomainError("M must be >= 1")
    path = tuple(tuple(int(c) for c in v) for v in path)
    if not path:
        raise DomainError("path must contain at least one vertex")
    for a, b in zip(path, path[1:]):
        if sum(abs(x - y) for x, y in zip(a, b)) != 1:
            raise DomainError(f"{a} -> {b} is not a nearest-neighbour step")
    tau = [0]
    for k in range(1, len(path)):
        anchor = path[tau[-1]]
        if max(abs(x - y) for x, y in zip(path[k], anchor)) == M:
            tau.append(k)
    return SkeletonDecomposition(path, M, tuple(tau), tuple(path[i] for i in tau))


# ---------------------------------------------------------------------------
# Variance scan


def reduce_angle(theta: float) -> float:
    """Map an angle to [0, pi/4] using the symmetries of Z^2."""
    t = math.fmod(theta, math.pi / 2)
    if t < 0:
        t += math.pi / 2
    return min(t, math.pi / 2 - t)


@dataclass(frozen=True)
class ThetaScan:
    theta: float
    n_grid: tuple[int, ...]
    mean: tuple[float, ...]
    var: tuple[float, ...]
    fit: LinearFit
    inside_flat_edge: bool | None


def _variance_slope(n_grid, samples) -> LinearFit:
    """Regress per-replica squared deviations on log n (HC3 errors).

    With equal replica counts the slope equals OLS of the unbiased sample
    variances on log n; the per-replica form gives the robust interval.
    """
    x, y = [], []
    for n, t in zip(n_grid, samples):
        r = t.size
        dev = (t - t.mean()) ** 2 * (r / (r - 1))
        x.append(np.full(r, math.log(n)))
        y.append(dev)
    return linear_fit(np.concatenate(x), np.concatenate(y), robust=True)


def variance_scan(dist: WeightDistribution, theta_list: Sequence[float], n_grid: Sequence[int], replicas: int,
                  master_seed: int, theta_q: float | None = None, vec_pc: float | None = None,
                  workers: int | None = None) -> list[ThetaScan]:
    """Var(T(0, n xi_theta)) per (theta, n) and its slope against log n."""
    rep = validate_assumptions(dist, 2)
    if not rep.b1_holds:
        raise AssumptionViolation("(B1) fails: support of nu is not inside [1, inf)")
    if not rep.b2_q:
        raise AssumptionViolation("(B2) fails: nu has no atom at 1")
    if vec_pc is not None and rep.b2_q < vec_pc:
        raise AssumptionViolation(f"(B2) q = {rep.b2_q} is below the oriented critical value {vec_pc}")
    if replicas < 2:
        raise DomainError("variance needs replicas >= 2")
    if any(n < 1 for n in n_grid) or len(set(n_grid)) < 2:
        raise DomainError("need at least two distinct scales n >= 1")
    out = []
    for theta in theta_list:
        th = reduce_angle(theta)
        s = estimate_series(dist, direction_from_angle(th), n_grid, replicas, master_seed,
                            f"variance:{th!r}", workers)
        inside = None if theta_q is None else theta_q < th < math.pi / 2 - theta_q
        out.append(ThetaScan(th, s.n_grid, s.mean, s.var, _variance_slope(s.n_grid, s.samples), inside))
    return out
