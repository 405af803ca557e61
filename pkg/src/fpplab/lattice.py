"""Lattice boxes, edge-weight laws, seeded weight fields and lattice rounding."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy import special

from ._rng import box_edge_uniforms, edge_uniform
from .errors import ConfigurationError, DomainError

PC_BOND_2D = 0.5


# ---------------------------------------------------------------------------
# Lattice geometry


@dataclass(frozen=True)
class LatticeSpec:
    """A finite box of Z^d given by inclusive integer corners.

    Edges are all nearest-neighbour pairs with both endpoints in the box;
    the edge {x, x + e_axis} is keyed by (x, axis).
    """

    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def __post_init__(self):
        lower = tuple(int(v) for v in self.lower)
        upper = tuple(int(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper):
            raise DomainError("lower and upper corners differ in dimension")
        if len(lower) < 2:
            raise DomainError(f"dimension must be >= 2, got {len(lower)}")
        if any(hi - lo < 1 for lo, hi in zip(lower, upper)):
            raise DomainError("box must span at least two sites per axis")

    @classmethod
    def cube(cls, d: int, radius: int, center: Sequence[int] | None = None) -> "LatticeSpec":
        """Sites Z^d ∩ (center + [-radius, radius]^d)."""
        if d < 2:
            raise DomainError(f"dimension must be >= 2, got {d}")
        if radius < 1:
            raise DomainError(f"box radius must be >= 1, got {radius}")
        c = tuple(int(v) for v in center) if center is not None else (0,) * d
        if len(c) != d:
            raise DomainError("center has wrong dimension")
        return cls(tuple(v - radius for v in c), tuple(v + radius for v in c))

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in zip(self.lower, self.upper))

    @property
    def box_radius(self) -> int:
        return max((hi - lo + 1) // 2 for lo, hi in zip(self.lower, self.upper))

    @property
    def num_sites(self) -> int:
        return math.prod(self.shape)

    @property
    def num_edges(self) -> int:
        shape = self.shape
        return sum(math.prod(s - (k == a) for k, s in enumerate(shape)) for a in range(self.d))

    def contains(self, site: Sequence[int]) -> bool:
        return len(site) == self.d and all(lo <= v <= hi for v, lo, hi in zip(site, self.lower, self.upper))

    def on_boundary(self, site: Sequence[int]) -> bool:
        return any(v == lo or v == hi for v, lo, hi in zip(site, self.lower, self.upper))

    def index(self, site: Sequence[int]) -> int:
        """Flat C-order index; monotone in the lexicographic order of sites."""
        if not self.contains(site):
            raise DomainError(f"site {tuple(site)} outside box {self.lower}..{self.upper}")
        return int(np.ravel_multi_index(tuple(v - lo for v, lo in zip(site, self.lower)), self.shape))

    def site(self, flat: int) -> tuple[int, ...]:
        idx = np.unravel_index(int(flat), self.shape)
        return tuple(int(i) + lo for i, lo in zip(idx, self.lower))

    def sites(self) -> Iterator[tuple[int, ...]]:
        yield from product(*(range(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)))

    def has_edge(self, site: Sequence[int], axis: int) -> bool:
        return self.contains(site) and 0 <= axis < self.d and site[axis] < self.upper[axis]

    def edges(self) -> Iterator[tuple[tuple[int, ...], int]]:
        for x in self.sites():
            for axis in range(self.d):
                if x[axis] < self.upper[axis]:
                    yield x, axis

    def edge_mask(self) -> np.ndarray:
        """Boolean (d, *shape) array: True where (x, axis) is an edge of the box."""
        mask = np.ones((self.d, *self.shape), dtype=bool)
        for axis in range(self.d):
            sl = [axis] + [slice(None)] * self.d
            sl[axis + 1] = -1
            mask[tuple(sl)] = False
        return mask


def round_to_lattice(x: Sequence[float]) -> tuple[int, ...]:
    """Nearest lattice site in the max norm; half-integers go toward -inf."""
    return tuple(int(math.ceil(float(v) - 0.5)) for v in x)


def linf(v: Sequence[float]) -> float:
    return max(abs(float(t)) for t in v)


def l1(v: Sequence[float]) -> float:
    return sum(abs(float(t)) for t in v)


# ---------------------------------------------------------------------------
# Weight laws


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if not (0 <= self.a < self.b) or not math.isfinite(self.b):
            raise ConfigurationError(f"uniform needs 0 <= a < b < inf, got [{self.a}, {self.b}]")

    @property
    def lo(self) -> float:
        return self.a

    @property
    def hi(self) -> float:
        return self.b

    def cdf(self, x: float) -> float:
        return min(1.0, max(0.0, (x - self.a) / (self.b - self.a)))

    def ppf(self, u):
        return self.a + (self.b - self.a) * u

    def moment(self, order: float) -> float:
        k = order + 1.0
        return (self.b**k - self.a**k) / (k * (self.b - self.a))

    def shifted(self, s: float) -> "Uniform":
        return Uniform(self.a + s, self.b + s)

    def literal(self) -> str:
        return f"uniform:{_num(self.a)}:{_num(self.b)}"


@dataclass(frozen=True)
class Exponential:
    rate: float
    shift: float = 0.0

    def __post_init__(self):
        if not self.rate > 0 or self.shift < 0:
            raise ConfigurationError(f"exponential needs rate > 0 and shift >= 0, got {self}")

    @property
    def lo(self) -> float:
        return self.shift

    @property
    def hi(self) -> float:
        return math.inf

    def cdf(self, x: float) -> float:
        return 0.0 if x <= self.shift else -math.expm1(-self.rate * (x - self.shift))

    def ppf(self, u):
        return self.shift - np.log1p(-u) / self.rate

    def moment(self, order: float) -> float:
        lam, s = self.rate, self.shift
        if s == 0:
            return math.gamma(order + 1.0) / lam**order
        # E[(s+X)^a] = e^{lam s} lam^{-a} Gamma(a+1, lam s)
        upper = special.gammaincc(order + 1.0, lam * s) * special.gamma(order + 1.0)
        return float(math.exp(lam * s) * upper / lam**order)

    def shifted(self, s: float) -> "Exponential":
        return Exponential(self.rate, self.shift + s)

    def literal(self) -> str:
        base = f"exp:{_num(self.rate)}"
        return base if self.shift == 0 else f"shift:{_num(self.shift)}+{base}"


@dataclass(frozen=True)
class Pareto:
    """Heavy-tailed law, mainly to exercise moment-condition failures."""

    scale: float
    shape: float

    def __post_init__(self):
        if not (self.scale > 0 and self.shape > 0):
            raise ConfigurationError(f"pareto needs scale, shape > 0, got {self}")

    @property
    def lo(self) -> float:
        return self.scale

    @property
    def hi(self) -> float:
        return math.inf

    def cdf(self, x: float) -> float:
        return 0.0 if x <= self.scale else 1.0 - (self.scale / x) ** self.shape

    def ppf(self, u):
        return self.scale * (1.0 - u) ** (-1.0 / self.shape)

    def moment(self, order: float) -> float:
        if self.shape <= order:
            return math.inf
        return self.scale**order * self.shape / (self.shape - order)

    def shifted(self, s: float) -> "Pareto":
        raise ConfigurationError("shifted pareto is not a supported family")

    def literal(self) -> str:
        return f"pareto:{_num(self.scale)}:{_num(self.shape)}"


Family = Uniform | Exponential | Pareto


@dataclass(frozen=True)
class WeightDistribution:
    """Law of a single edge weight: atoms plus weighted continuous parts.

    Sampling uses the composition method: the unit interval is cut into one
    segment per component (atoms first, in declared order), and a uniform in
    a continuous segment is rescaled and pushed through that family's
    inverse CDF.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    continuous: tuple[tuple[float, Family], ...] = ()
    alpha: float = 2.0

    def __post_init__(self):
        atoms = tuple((float(v), float(p)) for v, p in self.atoms if p > 0)
        cont = tuple((float(m), f) for m, f in self.continuous if m > 0)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "continuous", cont)
        if any(v < 0 or not math.isfinite(v) for v, _ in atoms):
            raise ConfigurationError("atom values must be finite and >= 0")
        if any(p < 0 for p in [p for _, p in self.atoms] + [m for m, _ in self.continuous]):
            raise ConfigurationError("negative probability mass")
        total = sum(p for _, p in atoms) + sum(m for m, _ in cont)
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"probability masses sum to {total}, not 1")
        if not self.alpha > 1:
            raise ConfigurationError(f"moment order alpha must exceed 1, got {self.alpha}")

    @classmethod
    def point_mass(cls, value: float = 1.0) -> "WeightDistribution":
        return cls(atoms=((value, 1.0),))

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0) -> "WeightDistribution":
        return cls(continuous=((1.0, Uniform(a, b)),))

    @classmethod
    def exponential(cls, rate: float = 1.0, shift: float = 0.0) -> "WeightDistribution":
        return cls(continuous=((1.0, Exponential(rate, shift)),))

    @property
    def is_deterministic(self) -> bool:
        return not self.continuous and len(self.atoms) == 1

    def atom_mass(self, value: float) -> float:
        return sum(p for v, p in self.atoms if v == value)

    def cdf(self, x: float) -> float:
        """P(w <= x)."""
        s = sum(p for v, p in self.atoms if v <= x)
        s += sum(m * f.cdf(x) for m, f in self.continuous)
        return min(1.0, s)

    def prob_below(self, x: float) -> float:
        """P(w < x); differs from cdf only at atoms."""
        s = sum(p for v, p in self.atoms if v < x)
        s += sum(m * f.cdf(x) for m, f in self.continuous)
        return min(1.0, s)

    def prob_above(self, x: float) -> float:
        """P(w > x)."""
        return max(0.0, 1.0 - self.cdf(x))

    @property
    def support_min(self) -> float:
        return min([v for v, _ in self.atoms] + [f.lo for _, f in self.continuous])

    @property
    def support_max(self) -> float:
        return max([v for v, _ in self.atoms] + [f.hi for _, f in self.continuous])

    def moment(self, order: float) -> float:
        """E[w^order] in closed form; inf when it diverges."""
        if order < 1:
            raise DomainError(f"moment order must be >= 1, got {order}")
        s = sum(p * v**order for v, p in self.atoms)
        for m, f in self.continuous:
            s += m * f.moment(order)
        return s

    @property
    def mean(self) -> float:
        return self.moment(1.0)

    def sample(self, u) -> np.ndarray:
        """Map uniforms in (0, 1) to weights with this law."""
        u = np.asarray(u, dtype=np.float64)
        out = np.empty_like(u)
        start = 0.0
        parts = [(p, v) for v, p in self.atoms] + list(self.continuous)
        for i, (mass, comp) in enumerate(parts):
            stop = 1.0 if i == len(parts) - 1 else start + mass
            sel = (u >= start) & (u < stop) if i < len(parts) - 1 else u >= start
            if isinstance(comp, float):
                out[sel] = comp
            else:
                v = (u[sel] - start) / (stop - start)
                out[sel] = comp.ppf(np.clip(v, 0.0, np.nextafter(1.0, 0.0)))
            start = stop
        return out

    def literal(self) -> str:
        pieces = []
        if self.atoms:
            pieces.append((sum(p for _, p in self.atoms),
                           "atoms:" + ",".join(f"{_num(v)}:{_num(p / sum(q for _, q in self.atoms))}"
                                               for v, p in self.atoms)))
        pieces += [(m, f.literal()) for m, f in self.continuous]
        if len(pieces) == 1:
            return pieces[0][1]
        return "mix:" + "+".join(f"{_num(m)}*{lit}" for m, lit in pieces)


def _num(x: float) -> str:
    return repr(float(x)) if not float(x).is_integer() else str(int(x))


_MIX_SPLIT = re.compile(r"\+(?=[0-9.eE]+\*)")


def parse_distribution(text: str, alpha: float = 2.0) -> WeightDistribution:
    """Parse the distribution literal syntax used by configs and the CLI.

    >>> parse_distribution("atoms:0:0.1,1:0.9").atoms
    ((0.0, 0.1), (1.0, 0.9))
    """
    text = text.strip()
    atoms, cont = _parse_term(text)
    return WeightDistribution(atoms=tuple(atoms), continuous=tuple(cont), alpha=alpha)


def _parse_term(text: str):
    head, _, rest = text.partition(":")
    try:
        if head == "mix":
            atoms, cont = [], []
            for term in _MIX_SPLIT.split(rest):
                w, star, lit = term.partition("*")
                if not star:
                    raise ConfigurationError(f"mix term {term!r} lacks a weight")
                a, c = _parse_term(lit)
                atoms += [(v, float(w) * p) for v, p in a]
                cont += [(float(w) * m, f) for m, f in c]
            return atoms, cont
        if head == "atoms":
            pairs = [item.split(":") for item in rest.split(",")]
            return [(float(v), float(p)) for v, p in pairs], []
        if head == "point":
            return [(float(rest), 1.0)], []
        if head == "uniform":
            a, b = rest.split(":")
            return [], [(1.0, Uniform(float(a), float(b)))]
        if head == "exp":
            return [], [(1.0, Exponential(float(rest)))]
        if head == "pareto":
            xm, k = rest.split(":")
            return [], [(1.0, Pareto(float(xm), float(k)))]
        if head == "shift":
            s, plus, inner = rest.partition("+")
            if not plus:
                raise ConfigurationError(f"shift literal {text!r} needs '+family'")
            s = float(s)
            a, c = _parse_term(inner)
            return [(v + s, p) for v, p in a], [(m, f.shifted(s)) for m, f in c]
    except ValueError as exc:
        raise ConfigurationError(f"malformed distribution literal {text!r}: {exc}") from None
    raise ConfigurationError(f"unsupported distribution family {head!r} in {text!r}")


# ---------------------------------------------------------------------------
# Weight fields


@dataclass(frozen=True)
class WeightField:
    """I.i.d. weights on the edges of a box, derived lazily from a seed.

    The weight of (x, axis) is a pure function of (seed, x, axis); boxes
    that overlap see the same weights on shared edges.
    """

    spec: LatticeSpec
    dist: WeightDistribution
    seed: int

    def weight(self, site: Sequence[int], axis: int) -> float:
        if not self.spec.has_edge(site, axis):
            raise DomainError(f"({tuple(site)}, axis {axis}) is not an edge of the box")
        u = edge_uniform(np.uint64(self.seed), np.asarray(site, dtype=np.int64), axis)
        return float(self.dist.sample(np.array([u]))[0])

    @cached_property
    def _uniforms(self) -> np.ndarray:
        flat = box_edge_uniforms(np.uint64(self.seed), np.asarray(self.spec.lower, dtype=np.int64),
                                 np.asarray(self.spec.shape, dtype=np.int64))
        return flat.reshape((self.spec.d, *self.spec.shape))

    def weights(self) -> np.ndarray:
        """Dense (d, *shape) weight array; entries that leave the box are inf."""
        return self.dense.copy()

    @cached_property
    def dense(self) -> np.ndarray:
        w = self.dist.sample(self._uniforms)
        w[~self.spec.edge_mask()] = np.inf
        w.setflags(write=False)
        return w


@dataclass(frozen=True)
class ArrayField:
    """Explicit weights, for fixtures and hand-built configurations."""

    spec: LatticeSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.spec.d, *self.spec.shape):
            raise DomainError(f"weight array shape {v.shape} does not match box {self.spec.shape}")
        mask = self.spec.edge_mask()
        if np.any(v[mask] < 0) or np.any(np.isnan(v[mask])):
            raise DomainError("weights must be nonnegative")
        v[~mask] = np.inf
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, spec: LatticeSpec, value: float = 1.0) -> "ArrayField":
        return cls(spec, np.full((spec.d, *spec.shape), float(value)))

    def weight(self, site: Sequence[int], axis: int) -> float:
        if not self.spec.has_edge(site, axis):
            raise DomainError(f"({tuple(site)}, axis {axis}) is not an edge of the box")
        idx = tuple(v - lo for v, lo in zip(site, self.spec.lower))
        return float(self.values[(axis, *idx)])

    def weights(self) -> np.ndarray:
        return self.values.copy()

    @property
    def dense(self) -> np.ndarray:
        return self.values

    def with_weight(self, site: Sequence[int], axis: int, value: float) -> "ArrayField":
        v = self.values.copy()
        v[(axis, *(s - lo for s, lo in zip(site, self.spec.lower)))] = value
        return ArrayField(self.spec, v)


def materialize(fld) -> ArrayField:
    return fld if isinstance(fld, ArrayField) else ArrayField(fld.spec, fld.weights())


def read_fixture(path: str | Path) -> ArrayField:
    """Read `d R` then one `x1 .. xd axis weight` line per edge."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    d, radius = int(lines[0][0]), int(lines[0][1])
    spec = LatticeSpec.cube(d, radius)
    values = np.full((d, *spec.shape), np.nan)
    for parts in lines[1:]:
        if len(parts) != d + 2:
            raise ConfigurationError(f"fixture line {' '.join(parts)!r} has {len(parts)} fields, want {d + 2}")
        site = tuple(int(t) for t in parts[:d])
        axis = int(parts[d])
        if not spec.has_edge(site, axis):
            raise ConfigurationError(f"fixture edge {site} axis {axis} not in box")
        values[(axis, *(s + radius for s in site))] = float(parts[d + 1])
    if np.isnan(values[spec.edge_mask()]).any():
        raise ConfigurationError("fixture does not list every edge of the box")
    return ArrayField(spec, values)


def write_fixture(path: str | Path, fld) -> None:
    spec = fld.spec
    if spec.lower != tuple(-v for v in spec.upper) or len(set(spec.upper)) != 1:
        raise DomainError("fixture format only describes centred cubes")
    w = fld.weights()
    rows = [f"{spec.d} {spec.upper[0]}"]
    for x, axis in spec.edges():
        val = w[(axis, *(s - lo for s, lo in zip(x, spec.lower)))]
        rows.append(" ".join(str(v) for v in x) + f" {axis} {float(val)!r}")
    Path(path).write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# Assumption checks


@dataclass(frozen=True)
class AssumptionReport:
    pc_value: float
    zero_mass: float
    a1_holds: bool
    a1_margin: float
    alpha: float
    a2_value: float
    a2_holds: bool
    b1_holds: bool
    b2_q: float | None

    def in_flat_edge_class(self, vec_pc: float) -> bool:
        """nu lies in M_q for some q >= vec_pc."""
        return self.b1_holds and self.b2_q is not None and self.b2_q >= vec_pc


def validate_assumptions(dist: WeightDistribution, d: int, pc_value: float | None = None) -> AssumptionReport:
    if pc_value is None:
        if d != 2:
            raise DomainError("p_c must be supplied for d >= 3")
        pc_value = PC_BOND_2D
    if not 0 < pc_value < 1:
        raise DomainError(f"p_c must lie in (0, 1), got {pc_value}")
    zero = dist.atom_mass(0.0)
    a2 = dist.moment(dist.alpha)
    b1 = dist.support_min >= 1.0
    return AssumptionReport(
        pc_value=pc_value,
        zero_mass=zero,
        a1_holds=zero < pc_value,
        a1_margin=pc_value - zero,
        alpha=dist.alpha,
        a2_value=a2,
        a2_holds=math.isfinite(a2),
        b1_holds=b1,
        b2_q=dist.atom_mass(1.0) if b1 else None,
    )
