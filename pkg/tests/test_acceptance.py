"""Acceptance criteria 1-8; each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear inline) or
``python3 -m pytest tests/test_acceptance.py -s`` for plain output.
"""

import math
import statistics

import numpy as np
import pytest
from scipy import stats

from conftest import speckled
from glaaseg.cli import main
from glaaseg.energy import delta_eps, gcs_objective, heaviside_eps
from glaaseg.grid import adjoint_diff, forward_diff
from glaaseg.metrics import dsc, uniformity_pp
from glaaseg.solvers import (
    SolverConfig,
    check_stability,
    default_config,
    ensure_compiled,
    preset_config,
    segment,
    shrink,
)
from glaaseg.speckle import SpeckleSpec, sample_speckle
from oracles import count_holes, lp_minimum, projected_subgradient


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def test_criterion_1_phantom_accuracy(report):
    ok, parts = True, []
    for name in ("phantom1", "phantom2"):
        f, gt = speckled(name, looks=2, seed=0)
        for solver in ("model2", "model3", "model4"):
            res = segment(f, solver)
            d, p = dsc(res.mask, gt), uniformity_pp(f, res.mask)
            ok &= d >= 0.95 and p >= 0.99
            parts.append(f"{name}/{solver} dsc={d:.4f} pp={p:.4f}")
    report(1, ok, "; ".join(parts))


def test_criterion_2_interior_boundary(report):
    f, _ = speckled("annulus", looks=2, seed=0)
    cfg = preset_config("interior")
    holes = {s: count_holes(segment(f, s, cfg).mask) for s in ("model1", "model3")}
    report(2, all(h == 1 for h in holes.values()), f"holes {holes}")


def test_criterion_3_speed_ordering(report):
    ensure_compiled()
    f, _ = speckled("phantom1", looks=2, seed=0)
    iters = 300
    med = {}
    for solver in ("model1", "model2", "model3"):
        cfg = default_config(solver, max_iters=iters, tol=0)
        segment(f, solver, cfg)  # warm caches
        times = []
        for _ in range(5):
            res = segment(f, solver, cfg)
            assert res.iterations == iters
            times.append(res.wall_time)
        med[solver] = statistics.median(times)
    m1, m2, m3 = med["model1"], med["model2"], med["model3"]
    ok = m2 < m1 and m3 < m1 and m3 <= 0.6 * m1 and m3 <= 1.05 * m2
    report(3, ok, f"median s over {iters} iterations: model1={m1:.4f} model2={m2:.4f} model3={m3:.4f} "
                  f"(model3/model1={m3 / m1:.3f}, model3/model2={m3 / m2:.3f})")


def test_criterion_4_oracle_equivalence(report):
    mu = 20.0
    etas = np.random.default_rng(2024).uniform(-0.15, 0.15, (20, 4, 4))
    oracle = projected_subgradient(etas, mu, iters=100_000)
    exact = np.array([lp_minimum(e, mu) for e in etas])
    cfg = SolverConfig(mu=mu, max_iters=20000, tol=1e-10)
    worst = {}
    for solver in ("model2", "model3", "model4"):
        J = np.array([gcs_objective(segment(np.ones((4, 4)), solver, cfg, eta=e).phi, e, mu) for e in etas])
        worst[solver] = float(np.max(J - oracle))
    ok = all(w <= 1e-3 for w in worst.values())
    report(4, ok, f"max(J_solver - J_oracle) {({k: f'{v:.2e}' for k, v in worst.items()})}; "
                  f"oracle gap to LP {np.max(oracle - exact):.2e}")


def test_criterion_5_operator_properties(report):
    r = np.random.default_rng(5)
    checks = {}

    worst = 0.0
    for h, w in ((1, 1), (3, 7), (16, 5), (32, 32)):
        u, v = r.standard_normal((h, w)), r.standard_normal((h, w))
        for axis in "xy":
            gap = abs(np.vdot(forward_diff(u, axis), v) - np.vdot(u, adjoint_diff(v, axis)))
            worst = max(worst, gap / (np.linalg.norm(u) * np.linalg.norm(v)))
    checks["adjointness"] = worst <= 1e-10

    a, b, th = r.normal(0, 10, 10000), r.normal(0, 10, 10000), r.uniform(0, 5, 10000)
    checks["shrink nonexpansive"] = bool(np.all(np.abs(shrink(a, th) - shrink(b, th)) <= np.abs(a - b) + 1e-12))
    checks["residual clamp"] = bool(np.allclose(a - shrink(a, 50.0), np.clip(a, -50, 50), atol=1e-12))

    phi, hh = r.uniform(-5, 5, 100), 1e-5
    fd = (heaviside_eps(phi + hh, 1.0) - heaviside_eps(phi - hh, 1.0)) / (2 * hh)
    checks["delta = dH/dphi"] = bool(np.allclose(fd, delta_eps(phi, 1.0), rtol=1e-6, atol=0))

    f, _ = speckled("phantom2", looks=2, seed=0)
    inside = True
    for solver in ("model2", "model3", "model4"):
        def cb(k, phi, mask, eta):
            nonlocal inside
            inside &= bool(phi.min() >= 0 and phi.max() <= 1)
        segment(f, solver, default_config(solver, max_iters=100, tol=0), callback=cb)
    checks["phi in [0,1]"] = inside

    convex = True
    for _ in range(200):
        x, y, e = r.random((5, 5)), r.random((5, 5)), r.standard_normal((5, 5))
        t = r.random()
        lhs = gcs_objective(t * x + (1 - t) * y, e, 20.0)
        convex &= lhs <= t * gcs_objective(x, e, 20.0) + (1 - t) * gcs_objective(y, e, 20.0) + 1e-10
    checks["objective convexity"] = bool(convex)

    m1, m2, img = r.random((6, 6)) > 0.5, r.random((6, 6)) > 0.5, r.uniform(0, 255, (6, 6))
    sq = np.array([[0.0, 255.0], [0.0, 255.0]])
    checks["pp/dsc identities"] = (
        dsc(m1, m2) == dsc(m2, m1) and dsc(m1, m1) == 1.0
        and uniformity_pp(img, m1) <= 1.0
        and math.isclose(uniformity_pp(3 * img + 7, m1), uniformity_pp(img, m1), abs_tol=1e-12)
        and uniformity_pp(sq, np.array([[1, 0], [1, 0]], bool)) == 1.0
        and math.isclose(uniformity_pp(sq, np.array([[1, 1], [0, 0]], bool)), 0.75)
    )
    failed = [k for k, v in checks.items() if not v]
    report(5, not failed, f"{len(checks) - len(failed)}/{len(checks)} properties hold"
                          + (f"; failed: {failed}" if failed else ""))


def test_criterion_6_speckle_statistics(report):
    ok, parts = True, []
    for looks in (1, 2, 4):
        n = sample_speckle(256, 256, SpeckleSpec(looks, seed=6))
        mean, var = float(n.mean()), float(n.var())
        p = stats.kstest(n.ravel(), stats.gamma(a=looks, scale=1.0 / looks).cdf).pvalue
        ok &= 0.97 <= mean <= 1.03 and abs(var - 1 / looks) <= 0.1 / looks and p > 0.01
        parts.append(f"L={looks} mean={mean:.4f} var={var:.4f} ks_p={p:.3f}")
    report(6, ok, "; ".join(parts))


def test_criterion_7_stability_gate(report):
    gate = check_stability(0.02, 0.2, 76) == "ok" and check_stability(0.3, 1.0, 76) == "warning"
    ok, parts = gate, [f"gate={'ok' if gate else 'wrong'}"]
    for name in ("phantom1", "phantom2"):
        f, _ = speckled(name, looks=2, seed=0)
        bound = math.sqrt(f.size)
        for solver in ("model3", "model4"):
            masks, steps, prev = [], [], [None]

            def cb(k, phi, mask, eta):
                masks.append(mask)
                if prev[0] is not None:
                    steps.append(float(np.linalg.norm(phi - prev[0])))
                prev[0] = phi

            res = segment(f, solver, default_config(solver, max_iters=400, tol=0), callback=cb)
            stable = all(np.array_equal(m, masks[-1]) for m in masks[-50:])
            bounded = all(math.isfinite(s) and s <= bound for s in steps) and max(steps[-50:]) <= max(steps[:10])
            ok &= stable and bounded and not res.warnings
            parts.append(f"{name}/{solver} stable={stable} max_step={max(steps):.3g} tail_step={max(steps[-50:]):.3g}")
    report(7, ok, "; ".join(parts))


def test_criterion_8_determinism(report, tmp_path):
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert main(["synth", "--phantom", "phantom1", "--seed", "3", "--out", str(d)]) == 0
        for solver in ("model1", "model2", "model3", "model4"):
            assert main(["segment", str(d / "phantom1.pgm"), "--solver", solver,
                         "--gt", str(d / "phantom1_gt.pgm"), "--out", str(d / solver)]) == 0
        files = ["phantom1.pgm"] + [f"{s}/{n}" for s in ("model1", "model2", "model3", "model4")
                                    for n in ("mask.pgm", "overlay.pgm", "trace.csv")]
        outputs.append({n: (d / n).read_bytes() for n in files})
    same = [n for n in outputs[0] if outputs[0][n] == outputs[1][n]]
    report(8, len(same) == len(outputs[0]), f"{len(same)}/{len(outputs[0])} artifacts byte-identical")
