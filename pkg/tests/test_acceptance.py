"""One test per acceptance criterion, each at its stated tolerance and time
budget. Every test prints a single PASS/FAIL line."""

import math
import os
import time

import numpy as np
import pytest

from bowenlab.cli import run
from bowenlab.cocycle import Repeller, check_subadditivity, log_singular_values, lyapunov_spectrum, phi_from_logs, philox, psi_from_logs
from bowenlab.dimension import admissible_radius, bowen_root, box_dimension, caratheodory_dim, mcmullen_dim
from bowenlab.exceptional import theorem_a_series, theorem_b_series
from bowenlab.models import LinearToral, PerturbedDoubling, carpet_model, diagonal_torus, doubling, load_model
from bowenlab.pressure import limit_pressure, pressure_separated, variational_gap
from bowenlab.symbolic import golden_mean_shift, random_markov_measure

from conftest import ACCEPTANCE_LINES, CONFIGS, GOLDEN_DIM, LOG_PHI

pytestmark = pytest.mark.acceptance

LOG2 = math.log(2)
SHEAR = LinearToral(np.array([[2, 1], [0, 3]]))
UNIFORM_FIBRE_CARPETS = (
    [(0, 0), (1, 2)],
    [(0, 0), (0, 2), (1, 1), (1, 2)],
    [(0, 0), (0, 2)],
)


def report(n, ok, detail):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def monotone(values, tol=1e-9, strict=False):
    steps = np.diff(values)
    return bool(np.all(steps > 0)) if strict else bool(np.all(steps >= -tol))


def test_criterion_01_doubling_roots():
    t0 = time.perf_counter()
    rep = Repeller.full(doubling())
    roots = [bowen_root(rep, f).root for f in ("sub", "super")]
    dt = time.perf_counter() - t0
    err = max(abs(r - 1) for r in roots)
    report(1, err <= 1e-9 and dt < 1, f"doubling roots {roots}, error {err:.1e}, {dt:.3f}s")


def test_criterion_02_diag23_roots():
    t0 = time.perf_counter()
    rep = Repeller.full(diagonal_torus(2, 3))
    a0, s_star = bowen_root(rep, "sub").root, bowen_root(rep, "super").root
    dt = time.perf_counter() - t0
    err = max(abs(a0 - 2), abs(s_star - 2))
    report(2, err <= 1e-9 and dt < 1, f"alpha0 {a0:.12f}, s* {s_star:.12f}, {dt:.3f}s")


def test_criterion_03_theorem_a_doubling():
    t0 = time.perf_counter()
    series = theorem_a_series(Repeller.full(doubling()), ("0",), range(2, 13))
    dt = time.perf_counter() - t0
    rows = series.rows
    s = np.array([r.s_star for r in rows])
    bounds_ok = all(r.s_star >= 1 - 2 * r.eps_n / (LOG2 + r.eps_n) - 1e-6 for r in rows)
    ok = (abs(s[0] - GOLDEN_DIM) <= 1e-6 and monotone(s, strict=True) and s[-1] >= 0.999
          and bounds_ok and dt < 10)
    report(3, ok, f"s*(2) {s[0]:.9f}, s*(12) {s[-1]:.6f}, strict increase {monotone(s, strict=True)}, "
                  f"bounds {bounds_ok}, {dt:.2f}s")


def test_criterion_04_theorem_a_diag23():
    t0 = time.perf_counter()
    series = theorem_a_series(Repeller.full(diagonal_torus(2, 3)), (0, 0), range(2, 9))
    dt = time.perf_counter() - t0
    s = np.array([r.s_star for r in series.rows])
    bounds_ok = all(r.s_star >= 2 - 5 * r.eps_n / (LOG2 + r.eps_n) - 1e-6 for r in series.rows)
    ok = monotone(s) and s[-1] >= 1.95 and bounds_ok and dt < 60
    report(4, ok, f"s* {s[0]:.4f} -> {s[-1]:.7f}, bounds {bounds_ok}, {dt:.2f}s")


def test_criterion_05_theorem_b():
    t0 = time.perf_counter()
    cases = [
        ("diag23", theorem_b_series(Repeller.full(diagonal_torus(2, 3)), (0, 0), range(2, 9))),
        ("golden", theorem_b_series(Repeller(doubling(), golden_mean_shift()), ("1",), range(2, 13))),
    ]
    dt = time.perf_counter() - t0
    parts, ok = [], dt < 60
    for name, series in cases:
        live = [r for r in series.rows if not r.degenerate]
        a = np.array([r.alpha0 for r in live])
        gap = series.alpha0 - a[-1]
        below = all(r.alpha0 <= series.alpha0 + 1e-9 for r in live)
        bounds = all(r.alpha0 >= r.thm_b_bound - 1e-6 for r in live)
        ok &= monotone(a) and below and bounds and 0 <= gap < 0.05
        parts.append(f"{name} alpha0 {series.alpha0:.6f} gap {gap:.2e} bounds {bounds}")
    report(5, ok, "; ".join(parts) + f", {dt:.2f}s")


def _locally_constant_models():
    out = {p.stem: load_model(p) for p in sorted(CONFIGS.glob("*.json"))}
    out = {k: Repeller.full(m) for k, m in out.items() if m.locally_constant}
    out["golden_sub"] = Repeller(doubling(), golden_mean_shift())
    return out


def test_criterion_06_caratheodory():
    t0 = time.perf_counter()
    worst, spread, names = 0.0, 0.0, []
    for name, rep in _locally_constant_models().items():
        root = bowen_root(rep, "sub").root
        r_max = admissible_radius(rep)
        for N in (4, 8, 12):
            alphas = [caratheodory_dim(rep, f * r_max, N).alpha for f in (0.9, 0.5, 0.1)]
            worst = max(worst, max(abs(a - root) for a in alphas))
            spread = max(spread, max(alphas) - min(alphas))
        names.append(name)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and spread == 0 and dt < 30
    report(6, ok, f"{len(names)} models ({', '.join(names)}), max |dim_C - alpha0| {worst:.1e}, "
                  f"r-spread {spread:.1e}, {dt:.2f}s")


def test_criterion_07_carpets():
    t0 = time.perf_counter()
    rng = philox(7)
    cells = [(c, r) for c in range(2) for r in range(3)]
    violations = 0
    for _ in range(20):
        mask = rng.random(6) < 0.5
        if not mask.any():
            mask[rng.integers(6)] = True
        digits = [cell for cell, keep in zip(cells, mask) if keep]
        rep = Repeller.full(carpet_model(3, 2, digits))
        mc = mcmullen_dim(3, 2, digits)
        s_star, a0 = bowen_root(rep, "super").root, bowen_root(rep, "sub").root
        violations += not (s_star <= mc + 1e-9 and mc <= a0 + 1e-9)
    box_err = []
    for digits in UNIFORM_FIBRE_CARPETS:
        rep = Repeller.full(carpet_model(3, 2, digits))
        box_err.append(abs(box_dimension(rep, 12).dimension - mcmullen_dim(3, 2, digits)))
    dt = time.perf_counter() - t0
    ok = violations == 0 and max(box_err) < 0.05 and dt < 120
    report(7, ok, f"sandwich violations {violations}/20, box errors {[round(e, 4) for e in box_err]}, {dt:.2f}s")


def test_criterion_08_pressure_properties():
    t0 = time.perf_counter()
    rng = philox(8)
    reps = [Repeller(doubling(), golden_mean_shift()), Repeller.full(diagonal_torus(2, 3)),
            Repeller.full(SHEAR), Repeller.full(carpet_model(3, 2, UNIFORM_FIBRE_CARPETS[1]))]
    worst_gap = math.inf
    for i in range(100):
        rep = reps[i % len(reps)]
        mu = random_markov_measure(rep.sft, rng)
        s = float(rng.uniform(0, rep.d))
        for fam in ("sub", "super"):
            worst_gap = min(worst_gap, variational_gap(rep, fam, s, mu))
    decreasing, ordered = True, True
    for rep in reps:
        grid = np.linspace(0, rep.d, 101)
        sub = np.array([limit_pressure(rep, "sub", s) for s in grid])
        sup = np.array([limit_pressure(rep, "super", s) for s in grid])
        decreasing &= monotone(-sub, strict=True) and monotone(-sup, strict=True)
        ordered &= bool(np.all(sub >= sup - 1e-12))
    sep_err = max(abs(pressure_separated(reps[0], "sub", s, 14, 0.01).value - (LOG_PHI - s * LOG2))
                  for s in (1.0, 0.5))
    dt = time.perf_counter() - t0
    ok = worst_gap >= -1e-10 and decreasing and ordered and sep_err < 0.05
    report(8, ok, f"min variational gap {worst_gap:.2e}, strictly decreasing {decreasing}, Phi >= Psi {ordered}, "
                  f"separated error {sep_err:.4f}, {dt:.2f}s")


def test_criterion_09_potentials():
    t0 = time.perf_counter()
    models = [SHEAR, LinearToral(np.array([[2, 1, 0], [0, 3, 1], [0, 0, 2]])), PerturbedDoubling(0.05)]
    margin = math.inf
    for k, model in enumerate(models):
        for s in np.linspace(0, model.d, 4):
            rep = check_subadditivity(model, float(s), trials=1000, seed=k)
            margin = min(margin, rep.worst_phi_margin, rep.worst_psi_margin)
    rng = philox(9)
    det_err, jump = 0.0, 0.0
    for d in (2, 3):
        J = rng.normal(size=(1000, d, d))
        L = log_singular_values(J)
        det_err = max(det_err, float(np.max(np.abs(L.sum(axis=1) - np.log(np.abs(np.linalg.det(J)))))))
        for k in range(1, d + 1):
            for pot in (phi_from_logs, psi_from_logs):
                jump = max(jump, float(np.max(np.abs(pot(L, k - 1e-13) - pot(L, k)))))
                if k < d:
                    jump = max(jump, float(np.max(np.abs(pot(L, k + 1e-13) - pot(L, k)))))
    dt = time.perf_counter() - t0
    ok = margin >= -1e-9 and det_err <= 1e-9 and jump <= 1e-9
    report(9, ok, f"worst sub/super-additivity margin {margin:.2e}, log|det| error {det_err:.1e}, "
                  f"integer-s jump {jump:.1e}, {dt:.2f}s")


def test_criterion_10_pesin():
    t0 = time.perf_counter()
    worst = 0.0
    for model in (doubling(), diagonal_torus(2, 3), SHEAR, diagonal_torus(2, 3, 5)):
        rep = Repeller.full(model)
        h = math.log(rep.sft.spectral_radius)
        worst = max(worst, abs(h - lyapunov_spectrum(rep, "lebesgue").exponents.sum()))
    lam = lyapunov_spectrum(Repeller.full(diagonal_torus(2, 3)), "lebesgue").exponents
    exact = lam[0] == math.log(3) and lam[1] == math.log(2)
    dt = time.perf_counter() - t0
    report(10, worst <= 1e-9 and exact, f"max |h_top - sum lambda| {worst:.1e}, diag(2,3) exact {exact}, {dt:.2f}s")


def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    many = str(max(2, os.cpu_count() or 2))
    same = []
    for cfg, target, depths in (("doubling.json", "0", "2:12"), ("diag23.json", "0,0", "2:7")):
        outs = []
        for threads in ("1", many):
            out = tmp_path / f"{cfg}.{threads}.csv"
            code = run(["--threads", threads, "avoid", "--model", str(CONFIGS / cfg), "--target", target,
                        "--depths", depths, "--out", str(out)])
            assert code == 0
            outs.append(out.read_bytes())
        same.append(outs[0] == outs[1])
    dt = time.perf_counter() - t0
    report(11, all(same), f"byte-identical CSV with 1 vs {many} threads: {same}, {dt:.2f}s")
