"""Experiment runner: RunConfig, result tables, manifests and plot data."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import subprocess
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .errors import ConfigurationError, FormatError
from .lattice import parse_distribution, validate_assumptions
from .passage import direction_from_angle

EXPERIMENTS = (
    "estimate-mu", "convergence-gap", "coupling", "concentration", "expectation-gap", "variance-scan",
    "lambda", "oriented-speed", "vec-pc", "pc", "skeleton-demo", "validate",
)

SCALING_COLUMNS = ["experiment", "d", "dist", "xi_or_theta", "n", "replicas", "mean", "var", "ci", "extra"]
COUPLING_COLUMNS = ["n", "delta", "kappa", "replicas", "p_neq", "ci_low", "ci_high", "gap", "gap_ci"]


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).split(",") if v.strip())


@dataclass
class RunConfig:
    experiment: str
    dist: str = "uniform:0.5:1.5"
    d: int = 2
    n_grid: tuple[int, ...] = (16, 32, 64)
    xi: tuple[float, ...] | None = None
    theta: tuple[float, ...] | None = None
    replicas: int = 100
    master_seed: int = 0
    delta: float | None = None
    M: int | None = None
    out: str | None = None
    workers: int = 1
    pc: float | None = None
    kappa: float | None = None
    half_width: float | None = None
    u_grid: tuple[float, ...] = (0.0, 0.005, 0.01, 0.02, 0.05, 0.1)
    q: tuple[float, ...] = (0.8,)
    horizon: int = 2000
    radius: int = 64
    l: int = 1
    mu_ref: float | None = None
    alpha: float = 2.0

    _converters: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}")
        conv = {
            "d": int, "replicas": int, "master_seed": int, "workers": int, "horizon": int, "radius": int,
            "l": int, "M": int, "delta": float, "pc": float, "kappa": float, "half_width": float,
            "mu_ref": float, "alpha": float, "n_grid": _ints, "xi": _floats, "theta": _floats,
            "u_grid": _floats, "q": _floats,
        }
        for name, fn in conv.items():
            v = getattr(self, name)
            if v is not None and v != "":
                try:
                    setattr(self, name, fn(v))
                except ValueError as exc:
                    raise ConfigurationError(f"bad value for {name}: {v!r}") from exc
            elif v == "":
                setattr(self, name, None)
        if self.replicas < 1:
            raise ConfigurationError("replicas must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def direction(self) -> tuple[float, ...]:
        if self.xi is not None:
            norm = math.hypot(*self.xi)
            if norm == 0:
                raise ConfigurationError("xi must be nonzero")
            return tuple(v / norm for v in self.xi)
        return (1.0,) + (0.0,) * (self.d - 1)

    def distribution(self):
        return parse_distribution(self.dist, self.alpha)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_text(self) -> str:
        """Flat key=value form (the config-file format)."""
        lines = []
        for k, v in self.to_dict().items():
            if v is None:
                continue
            if isinstance(v, list):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"


def read_config_file(path: str | Path) -> dict:
    """Flat key=value lines; '#' starts a comment; dashes in keys become underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigurationError(f"config line {raw!r} is not key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def read_manifest_config(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read manifest {path}: {exc}") from exc
    cfg = dict(data["config"])
    cfg.pop("out", None)
    return cfg


# ---------------------------------------------------------------------------
# Results


@dataclass
class RunResult:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    lines: list[str] = field(default_factory=list)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def to_csv(result: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _extra(**kw) -> str:
    return ";".join(f"{k}={_fmt(v)}" for k, v in kw.items())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "numerator") and hasattr(obj, "denominator") and not isinstance(obj, int):
        return f"{obj.numerator}/{obj.denominator}"
    return obj


def _git_describe() -> str | None:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             timeout=5, cwd=Path(__file__).resolve().parent)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


# ---------------------------------------------------------------------------
# Experiments


def _exp_validate(cfg: RunConfig) -> RunResult:
    dist = cfg.distribution()
    rep = validate_assumptions(dist, cfg.d, cfg.pc if cfg.pc is not None else (0.5 if cfg.d == 2 else None))
    res = RunResult(["key", "value"])
    items = asdict(rep)
    res.rows = [[k, v] for k, v in items.items()]
    res.summary = items
    res.lines = [
        f"(A1) {'true' if rep.a1_holds else 'false'}: nu({{0}}) = {rep.zero_mass!r}, p_c = {rep.pc_value!r}, "
        f"margin {rep.a1_margin:.12g}",
        f"(A2) {'true' if rep.a2_holds else 'false'}: m_(nu,{rep.alpha:g}) = {rep.a2_value!r}",
        f"(B1) {'true' if rep.b1_holds else 'false'}",
        f"(B2) q = {rep.b2_q!r}",
    ]
    return res


def _exp_estimate_mu(cfg: RunConfig) -> RunResult:
    from .scaling import estimate_time_constant

    dist, xi = cfg.distribution(), cfg.direction()
    est = estimate_time_constant(dist, xi, cfg.n_grid, cfg.replicas, cfg.master_seed, cfg.pc,
                                 workers=cfg.workers)
    res = RunResult(SCALING_COLUMNS)
    for n, r, mean, var, ci, touched in est.series.rows():
        res.rows.append(["estimate-mu", cfg.d, cfg.dist, xi, n, r, mean, var, ci,
                         _extra(mean_over_n=mean / n, touched_boundary=touched)])
    res.summary = {"mu_hat": est.mu_hat, "mu_hat_ci": est.mu_hat_ci, "mu_hat_n": est.mu_hat_n,
                   "mu_last": est.mu_last, "mu_last_ci": est.mu_last_ci}
    res.lines = [f"mu_hat = {est.mu_hat!r} (n = {est.mu_hat_n}), largest-n mean/n = {est.mu_last!r}"]
    return res


def _exp_convergence_gap(cfg: RunConfig) -> RunResult:
    from .scaling import estimate_series, estimate_time_constant, gap_analysis

    dist, xi = cfg.distribution(), cfg.direction()
    if cfg.mu_ref is not None:
        mu_ref, mu_ci, ref_n = cfg.mu_ref, 0.0, None
    else:
        ref_n = 2 * max(cfg.n_grid)
        ref = estimate_time_constant(dist, xi, [ref_n], cfg.replicas, cfg.master_seed, cfg.pc,
                                     workers=cfg.workers)
        mu_ref, mu_ci = ref.mu_last, ref.mu_last_ci
    series = estimate_series(dist, xi, cfg.n_grid, cfg.replicas, cfg.master_seed, workers=cfg.workers)
    gap = gap_analysis(series, mu_ref, mu_ci)
    res = RunResult(SCALING_COLUMNS)
    for (n, r, mean, var, ci, touched), g in zip(series.rows(), gap.gaps):
        res.rows.append(["convergence-gap", cfg.d, cfg.dist, xi, n, r, mean, var, ci,
                         _extra(gap=g, mu_ref=mu_ref, touched_boundary=touched)])
    fit = gap.fit
    res.summary = {
        "mu_reference": mu_ref, "mu_reference_ci": mu_ci, "mu_reference_n": ref_n,
        "exponent": None if fit is None else fit.slope,
        "exponent_ci": None if fit is None else [fit.ci_low, fit.ci_high],
        "excluded_nonpositive": gap.excluded,
        "theorem_exponent": gap.theorem_exponent, "theorem_exponent_value": float(gap.theorem_exponent),
        "corollary_beta": gap.corollary_beta, "sensitivity": list(gap.sensitivity),
    }
    if fit is None:
        res.lines = ["no positive gaps; fit skipped"]
    else:
        res.lines = [f"fitted exponent {fit.slope:.4f} [{fit.ci_low:.4f}, {fit.ci_high:.4f}] "
                     f"vs theorem exponent {gap.theorem_exponent} = {float(gap.theorem_exponent):.6f} "
                     f"(corollary beta {gap.corollary_beta})"]
    return res


def _coupling_rows(cfg: RunConfig, tag: str) -> RunResult:
    from .truncation import coupling_from, gap_from, paired_set_times

    dist, xi = cfg.distribution(), cfg.direction()
    res = RunResult(COUPLING_COLUMNS)
    for n in cfg.n_grid:
        paired = paired_set_times(dist, xi, n, cfg.delta, cfg.replicas, cfg.master_seed,
                                  pc_value=cfg.pc if cfg.pc is not None else 0.5, kappa=cfg.kappa,
                                  half_width=cfg.half_width, workers=cfg.workers)
        c, g = coupling_from(paired), gap_from(paired)
        res.rows.append([n, c.delta, c.kappa, c.replicas, c.p_neq, c.ci_low, c.ci_high, g.gap, g.gap_ci])
        res.lines.append(f"n={n}: P(T != T_sigma) = {c.p_neq:.4f} [{c.ci_low:.4f}, {c.ci_high:.4f}], "
                         f"gap {g.gap:.6g} +/- {g.gap_ci:.3g}" + (" (D_n boxes overlap)" if c.boxes_overlap else ""))
    res.summary = {"experiment_view": tag}
    return res


def _exp_concentration(cfg: RunConfig) -> RunResult:
    from .truncation import concentration_tails, fit_tail_constants, paired_set_times

    dist, xi = cfg.distribution(), cfg.direction()
    n = cfg.n_grid[-1]
    paired = paired_set_times(dist, xi, n, cfg.delta, cfg.replicas, cfg.master_seed,
                              pc_value=cfg.pc if cfg.pc is not None else 0.5, kappa=cfg.kappa,
                              half_width=cfg.half_width, workers=cfg.workers)
    pairs = concentration_tails(paired.t_sigma, n, paired.delta, cfg.u_grid)
    res = RunResult(["u", "tail"], [[u, t] for u, t in pairs])
    fit = fit_tail_constants(pairs, n, paired.delta)
    res.summary = {"n": n, "delta": paired.delta, "kappa": paired.kappa,
                   "fitted_C1_C2": None if fit is None else list(fit)}
    res.lines = [f"n={n}: " + ", ".join(f"u={u:g}: {t:.4f}" for u, t in pairs)]
    return res


def _exp_variance_scan(cfg: RunConfig) -> RunResult:
    from .scaling import variance_scan

    dist = cfg.distribution()
    thetas = cfg.theta if cfg.theta is not None else (0.0,)
    scans = variance_scan(dist, thetas, cfg.n_grid, cfg.replicas, cfg.master_seed, workers=cfg.workers)
    res = RunResult(SCALING_COLUMNS)
    slopes = {}
    for s in scans:
        for n, mean, var in zip(s.n_grid, s.mean, s.var):
            res.rows.append(["variance-scan", 2, cfg.dist, s.theta, n, cfg.replicas, mean, var,
                             "", _extra(slope=s.fit.slope, slope_ci_low=s.fit.ci_low, slope_ci_high=s.fit.ci_high)])
        slopes[repr(s.theta)] = {"slope": s.fit.slope, "ci": [s.fit.ci_low, s.fit.ci_high]}
        res.lines.append(f"theta={s.theta:.6g}: slope of Var vs log n = {s.fit.slope:.4f} "
                         f"[{s.fit.ci_low:.4f}, {s.fit.ci_high:.4f}]")
    res.summary = {"slopes": slopes}
    return res


def _exp_lambda(cfg: RunConfig) -> RunResult:
    from .scaling import (LambdaProblem, default_parameters, estimate_time_constant, estimate_U_costs,
                          generate_U_vectors, kesten_window_check, solve_lambda)

    dist, xi = cfg.distribution(), cfg.direction()
    n = cfg.n_grid[0]
    M = cfg.M if cfg.M is not None else default_parameters(len(xi), n)[1]
    U = generate_U_vectors(M, len(xi))
    if dist.is_deterministic:
        costs = [dist.atoms[0][0] * sum(abs(c) for c in u) for u in U]
    else:
        costs, _ = estimate_U_costs(dist, U, cfg.replicas, cfg.master_seed, cfg.workers)
    if cfg.mu_ref is not None:
        mu = cfg.mu_ref
    else:
        mu = estimate_time_constant(dist, xi, [max(n, 2 * M)], cfg.replicas, cfg.master_seed, cfg.pc,
                                    workers=cfg.workers).mu_last
    res = RunResult(SCALING_COLUMNS)
    sols = {}
    for scale in sorted({n, cfg.l * n}):
        sol = solve_lambda(LambdaProblem.build(M, scale, xi, list(costs), mu))
        sols[scale] = sol
        combo = " ".join(f"{','.join(map(str, u))}x{k}" for u, k in sol.counts.items())
        res.rows.append(["lambda", len(xi), cfg.dist, xi, scale, cfg.replicas, sol.min_cost, "", "",
                         _extra(M=M, mu_hat=mu, Lambda=sol.value, p=combo, states=sol.states_settled)])
        res.lines.append(f"Lambda(M={M}, n={scale}) = {sol.value!r} (min cost {sol.min_cost!r})")
    res.summary = {"M": M, "mu_hat": mu, "Lambda": {str(k): v.value for k, v in sols.items()}}
    if cfg.l > 1:
        rep = kesten_window_check(sols[n].value, sols[cfg.l * n].value, cfg.l, n, M, len(xi), dist.mean)
        res.summary["kesten"] = asdict(rep)
        res.lines.append(f"smallest C1 for the window: {rep.c1_min!r} (m_nu,1 = {dist.mean!r})")
    return res


def _exp_oriented_speed(cfg: RunConfig) -> RunResult:
    from .percolation import flat_edge_from_speed, oriented_speed

    res = RunResult(["q", "survival", "speed", "ci_low", "ci_high"])
    geo = {}
    for q in cfg.q:
        est = oriented_speed(q, cfg.horizon, cfg.replicas, cfg.master_seed, cfg.workers)
        res.rows.append([q, est.survival, est.speed, est.ci_low, est.ci_high])
        if est.extinct:
            res.lines.append(f"q={q:g}: extinct in all {est.replicas} replicas, speed undefined")
            continue
        g = flat_edge_from_speed(est)
        geo[repr(q)] = {"alpha_durrett": est.speed, "alpha_euclidean": g.alpha_q, "N_q": list(g.N_q),
                        "theta_q": g.theta_q}
        res.lines.append(f"q={q:g}: speed {est.speed:.5f} [{est.ci_low:.5f}, {est.ci_high:.5f}], "
                         f"survival {est.survival:.3f}, theta_q = {g.theta_q:.6f}")
    res.summary = {"speed_convention": "durrett (right edge / generation; 1 at q=1); "
                                      "theta_q uses speed / sqrt(2)", "flat_edge": geo}
    return res


def _exp_vec_pc(cfg: RunConfig) -> RunResult:
    from .percolation import estimate_vec_pc

    est = estimate_vec_pc(cfg.horizon, cfg.replicas, cfg.master_seed, cfg.workers)
    res = RunResult(["horizon", "estimate", "ci_low", "ci_high", "half_horizon_estimate", "stable"])
    res.rows.append([est.horizon, est.estimate, est.ci_low, est.ci_high, est.half_horizon_estimate, est.stable])
    res.summary = {"estimate": est.estimate, "ci": [est.ci_low, est.ci_high], "stable": est.stable}
    res.lines = [f"vec p_c ~ {est.estimate:.5f} [{est.ci_low:.5f}, {est.ci_high:.5f}] at horizon {est.horizon}; "
                 f"half horizon gives {est.half_horizon_estimate:.5f} ({'stable' if est.stable else 'not stable'})"]
    return res


def _exp_pc(cfg: RunConfig) -> RunResult:
    from .percolation import estimate_pc

    est = estimate_pc(cfg.d, cfg.radius, cfg.replicas, cfg.master_seed, cfg.workers)
    grid = np.round(np.linspace(0.0, 1.0, 101), 10)
    res = RunResult(["p", "crossing_prob", "ci"], [list(r) for r in est.curve(grid)])
    res.summary = {"estimate": est.estimate, "ci": [est.ci_low, est.ci_high]}
    res.lines = [f"p_c ~ {est.estimate:.5f} [{est.ci_low:.5f}, {est.ci_high:.5f}] (d={cfg.d}, radius {cfg.radius})"]
    return res


def _exp_skeleton_demo(cfg: RunConfig) -> RunResult:
    from ._rng import derive_seed
    from .lattice import WeightField
    from .passage import directional_passage, search_box
    from .scaling import default_parameters, skeleton_lower_bound, skeletonize

    dist, xi = cfg.distribution(), cfg.direction()
    n = cfg.n_grid[0]
    M = cfg.M if cfg.M is not None else default_parameters(len(xi), n)[1]
    spec = search_box(xi, n)
    bound = skeleton_lower_bound(n, len(xi), M)
    res = RunResult(["replica", "time", "path_edges", "M", "Q", "bound", "anchors_ok"])
    worst = math.inf
    for r in range(cfg.replicas):
        fld = WeightField(spec, dist, derive_seed(cfg.master_seed, "skeleton", n, r))
        path = directional_passage(fld, xi, n, want_path=True)
        sk = skeletonize(path.geodesic, M)
        worst = min(worst, sk.Q - bound)
        res.rows.append([r, path.time, len(path.geodesic) - 1, M, sk.Q, bound, sk.verify()])
    res.summary = {"M": M, "bound": bound, "min_Q_minus_bound": worst}
    res.lines = [f"n={n}, M={M}: Q - (n/(dM) - 1) >= {worst:g} over {cfg.replicas} geodesics"]
    return res


RUNNERS: dict[str, Callable[[RunConfig], RunResult]] = {
    "validate": _exp_validate,
    "estimate-mu": _exp_estimate_mu,
    "convergence-gap": _exp_convergence_gap,
    "coupling": lambda c: _coupling_rows(c, "coupling"),
    "expectation-gap": lambda c: _coupling_rows(c, "expectation-gap"),
    "concentration": _exp_concentration,
    "variance-scan": _exp_variance_scan,
    "lambda": _exp_lambda,
    "oriented-speed": _exp_oriented_speed,
    "vec-pc": _exp_vec_pc,
    "pc": _exp_pc,
    "skeleton-demo": _exp_skeleton_demo,
}


def execute(cfg: RunConfig) -> RunResult:
    return RUNNERS[cfg.experiment](cfg)


def run(cfg: RunConfig, out_dir: str | Path | None = None) -> tuple[RunResult, Path]:
    """Execute an experiment and write results.csv and manifest.json."""
    out = Path(out_dir or cfg.out or Path("fpp-runs") / cfg.experiment)
    started = time.time()
    result = execute(cfg)
    wall = time.time() - started
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "config_text": cfg.to_text(),
        "master_seed": cfg.master_seed,
        "version": __version__,
        "git_describe": _git_describe(),
        "python": platform.python_version(),
        "summary": _jsonable(result.summary),
        "columns": result.columns,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "wall_time_s": wall,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(to_csv(result), newline="")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return result, out


# ---------------------------------------------------------------------------
# Plot data


def _read_csv(path: Path, required: list[str]) -> list[dict]:
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            cols = reader.fieldnames or []
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    missing = [c for c in required if c not in cols]
    if missing:
        raise FormatError(f"{path} lacks columns {missing}")
    return rows


def _parse_extra(text: str) -> dict:
    return dict(item.split("=", 1) for item in text.split(";") if "=" in item)


def _write_dat(path: Path, header: str, rows) -> None:
    lines = [f"# {header}"] + [" ".join(repr(float(v)) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def emit_plotdata(run_dir: str | Path) -> list[Path]:
    """Gnuplot-ready .dat files and summary.txt next to a run's results.csv."""
    from .stats import linear_fit

    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text())
        experiment = manifest["experiment"]
    except (OSError, ValueError, KeyError) as exc:
        raise FormatError(f"{run_dir} has no readable manifest: {exc}") from exc
    csv_path = run_dir / "results.csv"
    written: list[Path] = []
    summary: list[str] = [f"experiment: {experiment}"]

    if experiment == "convergence-gap":
        rows = _read_csv(csv_path, ["n", "extra"])
        pts = [(float(r["n"]), float(_parse_extra(r["extra"])["gap"])) for r in rows]
        pos = [(n, g) for n, g in pts if g > 0]
        _write_dat(run_dir / "gap_loglog.dat", "log_n log_gap", [(math.log(n), math.log(g)) for n, g in pos])
        written.append(run_dir / "gap_loglog.dat")
        if len(pos) < 2:
            summary.append("no positive gaps; fit skipped")
        else:
            fit = linear_fit([math.log(n) for n, _ in pos], [math.log(g) for _, g in pos])
            summary.append(f"fitted exponent {fit.slope!r} CI [{fit.ci_low!r}, {fit.ci_high!r}] "
                           f"from {len(pos)} positive gaps")
    elif experiment == "variance-scan":
        rows = _read_csv(csv_path, ["xi_or_theta", "n", "var"])
        by_theta: dict[str, list] = {}
        for r in rows:
            by_theta.setdefault(r["xi_or_theta"], []).append((math.log(float(r["n"])), float(r["var"])))
        for i, (theta, pts) in enumerate(by_theta.items()):
            p = run_dir / f"variance_theta{i}.dat"
            _write_dat(p, f"theta={theta} log_n variance", pts)
            written.append(p)
            fit = linear_fit([a for a, _ in pts], [b for _, b in pts])
            summary.append(f"theta={theta}: slope of variance vs log n {fit.slope!r}")
    elif experiment == "concentration":
        rows = _read_csv(csv_path, ["u", "tail"])
        _write_dat(run_dir / "tail.dat", "u tail", [(float(r["u"]), float(r["tail"])) for r in rows])
        written.append(run_dir / "tail.dat")
        tails = [float(r["tail"]) for r in rows]
        summary.append("tail nonincreasing in u: " + ("yes" if all(b <= a for a, b in zip(tails, tails[1:])) else "no"))
    elif experiment in ("coupling", "expectation-gap"):
        rows = _read_csv(csv_path, COUPLING_COLUMNS)
        pts = [(float(r["n"]), float(r["p_neq"]), float(r["ci_low"]), float(r["ci_high"]),
                float(r["gap"]), float(r["gap_ci"])) for r in rows]
        _write_dat(run_dir / "coupling.dat", "n p_neq ci_low ci_high gap gap_ci", pts)
        written.append(run_dir / "coupling.dat")
        p = [x[1] for x in pts]
        mono = all(b <= a for a, b in zip(p, p[1:]))
        within = all(pts[i + 1][2] <= pts[i][3] for i in range(len(pts) - 1))
        summary.append(f"p_neq nonincreasing in n: {'yes' if mono else 'no'}; "
                       f"consistent within CI overlap: {'yes' if within else 'no'}")
    elif experiment == "estimate-mu":
        rows = _read_csv(csv_path, ["n", "mean"])
        pts = [(float(r["n"]), float(r["mean"]) / float(r["n"])) for r in rows]
        _write_dat(run_dir / "mean_over_n.dat", "n mean_over_n", pts)
        written.append(run_dir / "mean_over_n.dat")
        summary.append(f"min mean/n {min(v for _, v in pts)!r}")
    elif experiment == "oriented-speed":
        rows = _read_csv(csv_path, ["q", "speed", "ci_low", "ci_high"])
        pts = [(float(r["q"]), float(r["speed"]), float(r["ci_low"]), float(r["ci_high"])) for r in rows]
        _write_dat(run_dir / "speed.dat", "q speed ci_low ci_high", pts)
        written.append(run_dir / "speed.dat")
    elif experiment == "pc":
        rows = _read_csv(csv_path, ["p", "crossing_prob", "ci"])
        pts = [(float(r["p"]), float(r["crossing_prob"]), float(r["ci"])) for r in rows]
        _write_dat(run_dir / "crossing.dat", "p crossing_prob ci", pts)
        written.append(run_dir / "crossing.dat")
    else:
        _read_csv(csv_path, [])
        summary.append("no plot projection for this experiment")

    for k, v in manifest.get("summary", {}).items():
        summary.append(f"{k}: {json.dumps(v, sort_keys=True)}")
    (run_dir / "summary.txt").write_text("\n".join(summary) + "\n")
    written.append(run_dir / "summary.txt")
    return written
