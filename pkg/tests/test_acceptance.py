"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py` (the lines appear in the
"acceptance criteria" section of the summary) or directly with
`python tests/test_acceptance.py`.
"""

import contextlib
import math
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from oracles import layered_lambda, saw_passage  # noqa: E402

from fpplab import LatticeSpec, WeightDistribution, WeightField, directional_passage, passage_time  # noqa: E402
from fpplab.cli import main as cli_main  # noqa: E402
from fpplab.lattice import parse_distribution  # noqa: E402
from fpplab.passage import search_box  # noqa: E402
from fpplab.percolation import flat_edge_geometry, oriented_speed  # noqa: E402
from fpplab.scaling import (LambdaProblem, estimate_series, estimate_time_constant, gap_analysis,  # noqa: E402
                            generate_U_vectors, skeleton_lower_bound, skeletonize, solve_lambda, variance_scan)
from fpplab.truncation import (choose_kappa, coupling_from, label_clusters, paired_set_times,  # noqa: E402
                               truncate)

SEED = 20261016


@contextlib.contextmanager
def criterion(k, title):
    info = {}
    start = time.perf_counter()
    try:
        yield info
    except BaseException:
        status = "FAIL"
        raise
    else:
        status = "PASS"
    finally:
        detail = "; ".join(f"{a}={b}" for a, b in info.items())
        line = f"criterion {k}: {status} {title} ({time.perf_counter() - start:.1f}s) {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)


def test_criterion_01_shortest_path_oracle():
    with criterion(1, "passage_time equals self-avoiding-path enumeration on 4x4 boxes") as info:
        spec = LatticeSpec((0, 0), (3, 3))
        dist = parse_distribution("exp:1")
        rng = random.Random(SEED)
        sites = list(spec.sites())
        ours = 0.0
        worst = 0.0
        for f in range(200):
            fld = WeightField(spec, dist, SEED + f)
            for src, dst in [((0, 0), (3, 3)), (rng.choice(sites), rng.choice(sites))]:
                t0 = time.perf_counter()
                got = passage_time(fld, src, dst).time
                ours += time.perf_counter() - t0
                want = saw_passage(fld, src, dst)
                worst = max(worst, abs(got - want) / max(want, 1e-300))
                assert abs(got - want) <= 1e-9 * max(abs(want), 1.0), (f, src, dst, got, want)
        info["max_rel_err"] = f"{worst:.1e}"
        info["passage_time_s"] = f"{ours:.3f}"
        assert ours < 10.0


def test_criterion_02_deterministic_closed_forms():
    with criterion(2, "point mass: a_n(e1) = n and a_n(diag) = |[n xi]|_1 for n <= 64") as info:
        unit = WeightDistribution.point_mass(1.0)
        diag = (1 / math.sqrt(2), 1 / math.sqrt(2))
        for n in range(1, 65):
            e1 = (1.0, 0.0)
            assert directional_passage(WeightField(search_box(e1, n), unit, 0), e1, n).time == n
            end = tuple(math.ceil(n * v - 0.5) for v in diag)
            got = directional_passage(WeightField(search_box(diag, n), unit, 0), diag, n).time
            assert got == abs(end[0]) + abs(end[1]), (n, got, end)
        info["checked"] = "n=1..64, both directions"


def test_criterion_03_truncation_identity():
    with criterion(3, "T = T_sigma when all clusters are below n^delta; sigma <= w + 1") as info:
        n, delta = 16, 1 / 6
        dist = WeightDistribution.uniform()
        kappa = choose_kappa(dist).kappa
        xi = (1.0, 0.0)
        spec = search_box(xi, n)
        thr = n**delta
        small = 0
        for f in range(100):
            fld = WeightField(spec, dist, SEED + f)
            lab = label_clusters(fld, kappa)
            sig = truncate(fld, kappa, n, delta, labels=lab)
            m = spec.edge_mask()
            assert np.all(sig.dense[m] <= fld.dense[m] + 1)
            all_small = (lab.bad_cluster_sizes < thr).all() and (lab.unhealthy_cluster_sizes < thr).all()
            if all_small:
                small += 1
                assert directional_passage(sig, xi, n).time == directional_passage(fld, xi, n).time
        info["kappa"] = f"{kappa:g}"
        info["fields_with_only_small_clusters"] = f"{small}/100"
        # the condition is rare at this kappa, so also exercise the identity on further seeds
        extra = 0
        for f in range(100, 2000):
            fld = WeightField(spec, dist, SEED + f)
            lab = label_clusters(fld, kappa)
            if (lab.bad_cluster_sizes < thr).all() and (lab.unhealthy_cluster_sizes < thr).all():
                sig = truncate(fld, kappa, n, delta, labels=lab)
                assert directional_passage(sig, xi, n).time == directional_passage(fld, xi, n).time
                extra += 1
                if extra == 5:
                    break
        info["identity_checked_on_extra_fields"] = f"{extra} (seeds up to +{f})"
        assert extra == 5


def test_criterion_04_coupling_decay():
    with criterion(4, "P(T != T_sigma) at n=32 not above n=8 beyond CI overlap") as info:
        dist = WeightDistribution.uniform()
        est = {}
        for n in (8, 16, 32):
            est[n] = coupling_from(paired_set_times(dist, (1.0, 0.0), n, None, 300, SEED))
        info["p_neq"] = " ".join(f"n{n}:{e.p_neq:.3f}[{e.ci_low:.3f},{e.ci_high:.3f}]" for n, e in est.items())
        info["boxes_overlap"] = all(e.boxes_overlap for e in est.values())
        assert est[32].ci_low <= est[8].ci_high


def test_criterion_05_lambda_exactness():
    with criterion(5, "solve_lambda matches exhaustive enumeration; worked instance") as info:
        t0 = time.perf_counter()
        sol = solve_lambda(LambdaProblem.build(1, 3, (1.0, 0.0), lambda u: float(sum(map(abs, u))), 1.0))
        assert sol.min_cost == 2.0 and sol.value == -1.0
        angles = (0.0, math.pi / 8, 0.3, math.pi / 4, 3 * math.pi / 8, math.pi / 2)
        instances = []
        for M in (1, 2):
            for n in range(1, 7):
                for th in angles:
                    instances.append((M, n, (math.cos(th), math.sin(th)), None))
        rng = random.Random(SEED)
        for _ in range(20):
            M, n, th = rng.choice((1, 2)), rng.randint(1, 6), rng.uniform(0, math.pi / 2)
            costs = [M * rng.uniform(0.5, 1.5) for _ in generate_U_vectors(M, 2)]
            instances.append((M, n, (math.cos(th), math.sin(th)), costs))
        for M, n, xi, costs in instances:
            U = generate_U_vectors(M, 2)
            c = costs or [float(sum(map(abs, u))) for u in U]
            prob = LambdaProblem.build(M, n, xi, c, 1.0)
            got = solve_lambda(prob)
            # no optimum uses more terms than its cost divided by the cheapest step
            cap = int(got.min_cost / min(c) + 1e-9) + 1
            want = layered_lambda(U, c, prob.target, M, cap)
            assert abs(got.min_cost - want) <= 1e-9 * max(1.0, want), (M, n, xi, got.min_cost, want)
        info["instances"] = len(instances)
        assert time.perf_counter() - t0 < 30


def test_criterion_06_skeleton_bound():
    with criterion(6, "skeletons of 100 geodesics at n=64, M=8") as info:
        n, M, xi = 64, 8, (1.0, 0.0)
        dist = parse_distribution("uniform:0.5:1.5")
        spec = search_box(xi, n)
        bound = skeleton_lower_bound(n, 2, M)
        worst = math.inf
        for f in range(100):
            path = directional_passage(WeightField(spec, dist, SEED + f), xi, n, want_path=True).geodesic
            sk = skeletonize(path, M)
            assert sk.Q >= bound
            assert all(max(map(abs, s)) == M for s in sk.steps())
            worst = min(worst, sk.Q)
        info["bound"] = bound
        info["min_Q"] = worst


def test_criterion_07_flat_edge_geometry():
    with criterion(7, "flat-edge limits and oriented speed at q=1") as info:
        a = flat_edge_geometry(None, 1 / math.sqrt(2)).theta_q
        b = flat_edge_geometry(None, 0.0).theta_q
        assert abs(a) <= 1e-12 and abs(b - math.pi / 4) <= 1e-12
        s = oriented_speed(1.0, 500, 4, SEED).speed
        assert s == 1.0
        info["theta(1/sqrt2)"] = f"{a:.1e}"
        info["theta(0)-pi/4"] = f"{b - math.pi / 4:.1e}"
        info["speed(q=1)"] = s


@pytest.mark.slow
def test_criterion_08_variance_divergence():
    with criterion(8, "Var(a_n) slope vs log n positive, CI excludes 0") as info:
        (scan,) = variance_scan(parse_distribution("atoms:1:0.8,2:0.2"), [0.0], [16, 32, 64, 128], 400, SEED)
        info["var"] = " ".join(f"{v:.3f}" for v in scan.var)
        info["slope"] = f"{scan.fit.slope:.3f}[{scan.fit.ci_low:.3f},{scan.fit.ci_high:.3f}]"
        assert scan.fit.slope > 0 and scan.fit.ci_low > 0


@pytest.mark.slow
def test_criterion_09_convergence_gap():
    with criterion(9, "log-log exponent of positive gaps < 1") as info:
        dist = parse_distribution("uniform:0.5:1.5")
        xi = (1.0, 0.0)
        ref = estimate_time_constant(dist, xi, [512], 100, SEED + 1)
        series = estimate_series(dist, xi, [16, 32, 64, 128, 256], 100, SEED)
        gap = gap_analysis(series, ref.mu_last, ref.mu_last_ci)
        info["mu_ref(n=512)"] = f"{ref.mu_last:.5f}+-{ref.mu_last_ci:.5f}"
        info["gaps"] = " ".join(f"{g:.3f}" for g in gap.gaps)
        assert gap.fit is not None
        info["exponent"] = f"{gap.fit.slope:.3f}[{gap.fit.ci_low:.3f},{gap.fit.ci_high:.3f}]"
        info["theorem_exponent"] = str(gap.theorem_exponent)
        assert str(gap.theorem_exponent) == "23/24"
        assert gap.fit.slope < 1 and gap.fit.ci_high < 1


def test_criterion_10_reproducibility(tmp_path):
    with criterion(10, "byte-identical CSV for workers 1 vs 4 and manifest re-runs") as info:
        runs = [
            ["estimate-mu", "--dist", "uniform:0.5:1.5", "--n", "8,16,32", "--replicas", "12", "--xi", "3,4"],
            ["coupling", "--dist", "atoms:0.05:0.3,1:0.4,30:0.3", "--n", "8,12", "--replicas", "12",
             "--kappa", "0.1", "--half-width", "1"],
            ["variance-scan", "--dist", "atoms:1:0.8,2:0.2", "--n", "8,16", "--replicas", "12", "--theta", "0,0.4"],
            ["oriented-speed", "--q", "0.7,0.8", "--horizon", "100", "--replicas", "12"],
            ["pc", "--radius", "8", "--replicas", "12"],
            ["validate", "--dist", "uniform:0:1"],
            ["convergence-gap", "--dist", "uniform:0.5:1.5", "--n", "8,16", "--replicas", "12", "--mu-ref", "1"],
            ["concentration", "--dist", "uniform:0:1", "--n", "8", "--replicas", "12", "--half-width", "1",
             "--u", "0,0.2"],
            ["expectation-gap", "--dist", "uniform:0:1", "--n", "8", "--replicas", "12"],
            ["lambda", "--dist", "uniform:0.5:1.5", "--n", "4", "--M", "1", "--replicas", "6", "--l", "2"],
            ["vec-pc", "--horizon", "40", "--replicas", "12"],
            ["skeleton-demo", "--dist", "uniform:0.5:1.5", "--n", "16", "--M", "2", "--replicas", "6"],
        ]
        for i, argv in enumerate(runs):
            outs = []
            for workers in (1, 4):
                out = tmp_path / f"r{i}w{workers}"
                assert cli_main([*argv, "--seed", "3", "--workers", str(workers), "--out", str(out)]) == 0
                outs.append((out / "results.csv").read_bytes())
            again = tmp_path / f"r{i}m"
            assert cli_main([argv[0], "--manifest", str(tmp_path / f"r{i}w1" / "manifest.json"),
                             "--workers", "2", "--out", str(again)]) == 0
            outs.append((again / "results.csv").read_bytes())
            assert outs[0] == outs[1] == outs[2], argv[0]
        info["experiments"] = len(runs)


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
