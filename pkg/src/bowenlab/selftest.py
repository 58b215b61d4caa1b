"""Quick invariant suite behind ``bowenlab selftest``.

Each check returns a short detail string and raises on failure; the runner
prints one PASS/FAIL line per check.
"""

from __future__ import annotations

import math
import sys

import numpy as np

from .cocycle import Repeller, check_subadditivity, log_singular_values, lyapunov_spectrum, phi_from_logs, philox
from .dimension import bowen_root, caratheodory_dim, box_dimension, mcmullen_dim
from .exceptional import AvoidSpec, avoid_series, build_avoid_sft, verify_avoidance
from .models import LinearToral, carpet_model, diagonal_torus, doubling, validate_expanding
from .pressure import limit_pressure, pressure_separated, variational_gap
from .symbolic import golden_mean_shift, markov_entropy, parry_measure, random_markov_measure

GOLDEN = math.log((1 + math.sqrt(5)) / 2)


def _require(ok: bool, detail: str) -> str:
    if not ok:
        raise AssertionError(detail)
    return detail


def check_models():
    for m in (doubling(), diagonal_torus(2, 3), carpet_model(3, 2, [(0, 0), (1, 2)])):
        validate_expanding(m)
    return "expansion constants > 1"


def check_symbolic():
    g = golden_mean_shift()
    mu = parry_measure(g)
    err = abs(markov_entropy(mu) - GOLDEN)
    return _require(err < 1e-12, f"Parry entropy error {err:.1e}")


def check_potentials(threads=None):
    shear = LinearToral(np.array([[2, 1], [0, 3]]))
    for s in (0.3, 1.0, 1.7):
        check_subadditivity(shear, s, trials=200)
    rng = philox(1)
    J = rng.normal(size=(50, 3, 3))
    gap = np.max(np.abs(log_singular_values(J).sum(axis=1) - np.log(np.abs(np.linalg.det(J)))))
    L = log_singular_values(J[0])
    jump = max(abs(phi_from_logs(L, k - 1e-12) - phi_from_logs(L, k)) for k in (1, 2))
    return _require(gap < 1e-9 and jump < 1e-9, f"log|det| gap {gap:.1e}, continuity {jump:.1e}")


def check_pressure():
    rep = Repeller(doubling(), golden_mean_shift())
    grid = np.linspace(0, 1, 21)
    sub = np.array([limit_pressure(rep, "sub", s) for s in grid])
    sup = np.array([limit_pressure(rep, "super", s) for s in grid])
    _require(np.all(np.diff(sub) < 0) and np.all(sub >= sup - 1e-12), "pressure monotone and sub >= super")
    rng = philox(2)
    worst = min(variational_gap(rep, "sub", 0.5, random_markov_measure(rep.sft, rng)) for _ in range(10))
    sep = pressure_separated(rep, "sub", 0.5, 14, 0.01).value
    diff = abs(sep - limit_pressure(rep, "sub", 0.5))
    return _require(worst >= -1e-10 and diff < 0.05, f"variational gap >= {worst:.1e}, separated off by {diff:.3f}")


def check_dimension():
    r1 = bowen_root(Repeller.full(doubling()), "sub").root
    r2 = bowen_root(Repeller.full(diagonal_torus(2, 3)), "super").root
    g = Repeller(doubling(), golden_mean_shift())
    root = bowen_root(g, "sub").root
    cara = caratheodory_dim(g, 0.1, 8).alpha
    carpet = Repeller.full(carpet_model(3, 2, [(0, 0), (0, 2), (1, 1), (1, 2)]))
    box = box_dimension(carpet, 10).dimension
    mc = mcmullen_dim(3, 2, [(0, 0), (0, 2), (1, 1), (1, 2)])
    _require(abs(r1 - 1) < 1e-9 and abs(r2 - 2) < 1e-9, "full-shift roots")
    _require(abs(cara - root) < 1e-6, "Caratheodory = Bowen root")
    return _require(abs(box - mc) < 0.05, f"roots exact, box {box:.3f} vs McMullen {mc:.3f}")


def check_exceptional(threads=None):
    rep = Repeller.full(doubling())
    series = avoid_series(rep, ("0",), range(2, 9), theorem="a", threads=threads)
    s = [r.s_star for r in series.rows]
    _require(abs(s[0] - GOLDEN / math.log(2)) < 1e-6, "golden-mean row")
    sft, words = build_avoid_sft(rep, AvoidSpec(("1/3",), 6))
    verify_avoidance(rep.restrict(sft), words, orbits=200, length=500)
    return f"s* rises from {s[0]:.4f} to {s[-1]:.4f}"


def check_lyapunov():
    lam = lyapunov_spectrum(Repeller.full(diagonal_torus(2, 3)), "lebesgue").exponents
    return _require(np.array_equal(lam, [math.log(3), math.log(2)]), "diag(2,3) exponents exact")


CHECKS = (
    ("models", check_models),
    ("symbolic", check_symbolic),
    ("potentials", check_potentials),
    ("pressure", check_pressure),
    ("dimension", check_dimension),
    ("lyapunov", check_lyapunov),
    ("exceptional", check_exceptional),
)


def run_selftest(threads=None, stream=None) -> bool:
    stream = stream or sys.stdout
    ok = True
    for name, fn in CHECKS:
        try:
            detail = fn(threads) if name in ("potentials", "exceptional") else fn()
            stream.write(f"PASS {name}: {detail}\n")
        except Exception as exc:  # report every failure, keep going
            ok = False
            stream.write(f"FAIL {name}: {type(exc).__name__}: {exc}\n")
    return ok
