"""Sub-repellers avoiding a target point and the dimension series built on them.

Λ_n is the sub-SFT of a repeller Λ that never visits the depth-n cylinders
around y. Its points have forward orbits staying away from y, so Λ_n lies in
the exceptional set E+(y). Along n the sets grow, and their dimension roots
approach those of Λ; the series functions measure ε_n (entropy deficit and
exponent deviation from a reference measure) and check the explicit lower
bounds in terms of ε_n row by row.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .cocycle import Repeller, birkhoff_lyapunov, constant_exponents, lyapunov_spectrum, philox
from .dimension import bowen_root
from .errors import DomainError, InputError, PropertyFailure, TheoremCheckFailure
from .models import LinearToral, ModelSpec, PerturbedDoubling, SftAffine
from .pressure import Family, equilibrium_state
from .symbolic import Sft, forbid_words, markov_entropy, maximal_component

CONVENTIONS = ("itinerary", "closure")
BOUND_TOL = 1e-6
MONOTONE_TOL = 1e-9
WINDOW = 60
MC_SLACK = 3.0


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except ValueError as exc:
            raise InputError(f"cannot parse coordinate {v!r}") from exc
    return Fraction(float(v)).limit_denominator(10**12)


@dataclass(frozen=True)
class AvoidSpec:
    """Target point y and the cylinder depth n of the avoided neighbourhood."""

    target: tuple
    depth: int
    convention: str = "itinerary"

    def __post_init__(self):
        if self.depth < 2:
            raise InputError("avoid depth must be >= 2")
        if self.convention not in CONVENTIONS:
            raise InputError(f"convention must be one of {CONVENTIONS}")
        object.__setattr__(self, "target", tuple(_frac(v) for v in self.target))

    @classmethod
    def parse(cls, text: str, depth: int, convention: str = "itinerary") -> "AvoidSpec":
        return cls(tuple(p for p in text.split(",") if p.strip()), depth, convention)


def _check_target(model: ModelSpec, y):
    if len(y) != model.d:
        raise InputError(f"target has {len(y)} coordinates, model has d = {model.d}")
    if not all(0 <= v <= 1 for v in y):
        raise InputError("target point lies outside the model domain")


def _boxes_exact(model: SftAffine):
    """Per-letter (scale, offset) of the inverse branches as fractions."""
    L = model.diagonal_scales()
    C = np.array([model.branch(a, np.zeros((1, model.d)))[0] for a in range(model.alphabet)])
    return [[_frac(v) for v in row] for row in L], [[_frac(v) for v in row] for row in C]


def _in_box(y, scale, offset) -> bool:
    for v, s, c in zip(y, scale, offset):
        lo, hi = (c, c + s) if s > 0 else (c + s, c)
        if not (lo <= v <= hi):
            return False
    return True


def _itinerary(model: ModelSpec, y, n: int):
    """First n letters of y's coding, or None when the orbit leaves the domain."""
    if isinstance(model, LinearToral):
        if not model.is_diagonal or np.any(np.diag(model.matrix) <= 0):
            raise DomainError("coding is implemented for positive diagonal toral maps")
        e = [int(v) for v in np.diag(model.matrix)]
        x = list(y)
        word = []
        for _ in range(n):
            # a coordinate equal to 1 is the left limit 1- (top digit forever)
            digits = [ei - 1 if xi == 1 else math.floor(ei * xi) for ei, xi in zip(e, x)]
            word.append(int(model.symbol(digits)))
            x = [ei * xi - di for ei, xi, di in zip(e, x, digits)]
        return tuple(word)
    if isinstance(model, SftAffine):
        if not model.axis_aligned:
            raise DomainError("coding of a target needs axis-aligned cells")
        L, C = _boxes_exact(model)
        T = model.transitions
        x = list(y)
        word = []
        for _ in range(n):
            cells = [a for a in range(model.alphabet) if _in_box(x, L[a], C[a])]
            if word:
                cells = [a for a in cells if T[word[-1], a]]
            if not cells:
                return None
            a = cells[0]
            word.append(a)
            x = [(xi - c) / s for xi, s, c in zip(x, L[a], C[a])]
        return tuple(word)
    if isinstance(model, PerturbedDoubling):
        x = np.array([float(y[0])])
        word = []
        for _ in range(n):
            word.append(int(model.cell_of(x)))
            x = np.mod(model.evaluate(x), 1.0)
        return tuple(word)
    raise DomainError(f"no coding for {type(model).__name__}")


def _closure_words(model: ModelSpec, y, n: int, T: np.ndarray):
    """Every admissible n-word whose closed cylinder box contains y."""
    if isinstance(model, LinearToral):
        if not model.is_diagonal or np.any(np.diag(model.matrix) <= 0):
            raise DomainError("coding is implemented for positive diagonal toral maps")
        e = [int(v) for v in np.diag(model.matrix)]
        per_axis = []
        for ei, yi in zip(e, y):
            size = ei**n
            k0 = math.floor(yi * size)
            ks = {k0 % size}
            if yi * size == k0:
                ks.add((k0 - 1) % size)
            seqs = []
            for k in sorted(ks):
                seqs.append([(k // ei ** (n - 1 - j)) % ei for j in range(n)])
            per_axis.append(seqs)
        words = []
        for combo in product(*per_axis):
            words.append(tuple(int(model.symbol([axis[j] for axis in combo])) for j in range(n)))
        return sorted(set(words))
    if isinstance(model, SftAffine):
        if not model.axis_aligned:
            raise DomainError("cylinder boxes need axis-aligned cells")
        L, C = _boxes_exact(model)
        pieces = []
        for a in range(model.alphabet):
            if _in_box(y, L[a], C[a]):
                pieces.append(((a,), L[a], C[a]))
        for _ in range(n - 1):
            nxt = []
            for word, s, c in pieces:
                for b in np.flatnonzero(T[word[-1]]):
                    s2 = [si * li for si, li in zip(s, L[b])]
                    c2 = [ci + si * cb for ci, si, cb in zip(c, s, C[b])]
                    if _in_box(y, s2, c2):
                        nxt.append((word + (int(b),), s2, c2))
            pieces = nxt
        return sorted(w for w, _, _ in pieces)
    if isinstance(model, PerturbedDoubling):
        words = np.array(list(product(range(2), repeat=n)))
        lo, hi = word_boxes(model, words)
        v = float(y[0])
        tol = 1e-12
        hit = ((lo[:, 0] - tol <= v) & (v <= hi[:, 0] + tol)) | ((v == 0.0) & (hi[:, 0] >= 1.0 - tol))
        return [tuple(int(a) for a in w) for w in words[hit]]
    raise DomainError(f"no coding for {type(model).__name__}")


def cylinders_containing(model: ModelSpec, spec: AvoidSpec) -> list:
    """Depth-n words to forbid for the target.

    ``itinerary``: the single word read off y's forward orbit (y's own
    cylinder). ``closure``: every cylinder whose closed box contains y, so up
    to 2^d words when y sits on cell boundaries.
    """
    y = spec.target
    _check_target(model, y)
    T = model.transitions
    if spec.convention == "itinerary":
        w = _itinerary(model, y, spec.depth)
        if w is None or any(not T[a, b] for a, b in zip(w, w[1:])):
            return []
        return [w]
    return _closure_words(model, y, spec.depth, T)


def word_boxes(model: ModelSpec, words) -> tuple:
    """Closed boxes (lo, hi), each (W, d), of the given base words."""
    words = np.atleast_2d(np.asarray(words, dtype=np.int64))
    W, n = words.shape
    d = model.d
    lo = np.zeros((W, d))
    hi = np.ones((W, d))
    for i in range(n - 1, -1, -1):
        lo = model.branch(words[:, i], lo)
        hi = model.branch(words[:, i], hi)
    return np.minimum(lo, hi), np.maximum(lo, hi)


def _letter_states(sft: Sft) -> dict:
    if sft.block_length != 1:
        raise DomainError("avoid sets are built on a one-block base SFT")
    return {int(a): q for q, a in enumerate(sft.labels[:, 0])}


def build_avoid_sft(rep: Repeller, spec: AvoidSpec) -> tuple:
    """Sub-SFT of ``rep.sft`` avoiding the depth-n cylinders of the target.

    Returns ``(sft, words)``. The SFT has states = admissible (n-1)-paths and
    is pruned but may be reducible; empty results raise
    :class:`EmptySubshiftError`.
    """
    states = _letter_states(rep.sft)
    words = cylinders_containing(rep.model, spec)
    coded = [tuple(states[a] for a in w) for w in words if all(a in states for a in w)]
    return forbid_words(rep.sft, coded, spec.depth), words


def verify_avoidance(rep_n: Repeller, words, orbits: int = 1000, length: int = 1000, seed: int = 0, tol: float = 1e-9) -> int:
    """Simulate orbits in Λ_n and check none enters the open forbidden cores.

    Orbits are random walks on the sub-SFT, ``WINDOW`` letters longer than
    the checked stretch, so every checked point is pinned to a 60-letter
    cylinder. Returns the number of points
    checked; raises :class:`PropertyFailure` on a hit.
    """
    if not words:
        return 0
    lo, hi = word_boxes(rep_n.model, words)
    sft = rep_n.sft
    M = sft.matrix
    outdeg = np.diff(M.indptr)
    rng = philox(seed)
    walk = np.empty((orbits, length + WINDOW), dtype=np.int64)
    walk[:, 0] = rng.integers(0, sft.n_states, orbits)
    for t in range(1, walk.shape[1]):
        q = walk[:, t - 1]
        pick = (rng.random(orbits) * outdeg[q]).astype(np.int64)
        walk[:, t] = M.indices[M.indptr[q] + pick]
    # one backward pass gives f^t x for every t; the last WINDOW letters only
    # pin down the points that are checked
    step = max(1, (1 << 18) // walk.shape[1])
    for o0 in range(0, orbits, step):
        pts = rep_n.orbit_points(walk[o0:o0 + step])[:, :length]
        inside = np.all((pts[:, :, None, :] > lo + tol) & (pts[:, :, None, :] < hi - tol), axis=3)
        if inside.any():
            o, t, w = np.argwhere(inside)[0]
            raise PropertyFailure(
                "orbit entered a forbidden cylinder core",
                witness={"orbit": o0 + int(o), "time": int(t), "point": pts[o, t].tolist(), "word": list(words[w])},
            )
    return orbits * length


# -- series -----------------------------------------------------------------------

@dataclass(frozen=True)
class AvoidResult:
    depth: int
    n_states: int
    h_top: float
    lyapunov: tuple
    s_star: float
    alpha0: float
    eps_n: float
    thm_a_bound: float
    thm_b_bound: float
    degenerate: bool = False
    elapsed: float = field(default=0.0, compare=False)

    def as_row(self) -> dict:
        row = {"depth": self.depth, "n_states": self.n_states, "h_top": self.h_top}
        for i, v in enumerate(self.lyapunov, 1):
            row[f"lyap_{i}"] = v
        row.update(s_star=self.s_star, alpha0=self.alpha0, eps_n=self.eps_n,
                   thmA_bound=self.thm_a_bound, thmB_bound=self.thm_b_bound)
        return row


@dataclass(frozen=True)
class Reference:
    """Entropy and exponents the sub-repellers are compared against."""

    entropy: float
    exponents: np.ndarray
    slack: float = 0.0


def theorem_a_reference(rep: Repeller) -> Reference | None:
    """Lebesgue (or the a.c. invariant measure) on the full model, if defined.

    For a linear toral map the exponents are log|eigenvalues| and the
    entropy is their sum; for the perturbed doubling map the exponent is a
    Birkhoff estimate and its standard error widens ε_n.
    """
    model = rep.model
    full = rep.sft.n_states == model.alphabet and rep.sft.matrix.nnz == int(np.count_nonzero(model.transitions))
    if not full:
        return None
    if isinstance(model, LinearToral):
        lam = constant_exponents(model.matrix)
        return Reference(float(lam.sum()), lam)
    if isinstance(model, PerturbedDoubling):
        est = birkhoff_lyapunov(model)
        return Reference(float(est.exponents.sum()), est.exponents, MC_SLACK * float(est.stderr.max()))
    return None


def theorem_b_reference(rep: Repeller) -> tuple:
    """(α0(Λ), reference at the Φ-equilibrium measure μ*)."""
    if not rep.additive:
        raise DomainError("μ* is computed for constant diagonal or additive cocycles")
    a0 = bowen_root(rep, Family.SUB).root
    mu = equilibrium_state(rep, Family.SUB, a0)
    lam = lyapunov_spectrum(rep, mu).exponents
    return a0, Reference(markov_entropy(mu), lam)


def _eps(ref: Reference, h: float, lam: np.ndarray) -> float:
    return max(0.0, ref.entropy - h, float(np.max(np.abs(ref.exponents - lam)))) + ref.slack


def bound_a(d: int, eps: float, lam_d: float) -> float:
    return d - (3 * d - 1) * eps / (lam_d + eps)


def bound_b(alpha0: float, eps: float, lam: np.ndarray) -> float:
    """Lower bound for α0(Λ_ε); ``lam`` are the exponents of μ*, descending."""
    d = len(lam)
    k = round(alpha0)
    if abs(alpha0 - k) <= 1e-9 and k >= 1:
        return alpha0 - (3 * k - 1) * eps / (lam[d - k] + eps)
    k = math.floor(alpha0)
    return alpha0 - (alpha0 + 2 * k + 1) * eps / (lam[d - k - 1] + eps)


def _row(rep: Repeller, spec: AvoidSpec, ref_a, ref_b, alpha0_full, depth_lyap: int) -> AvoidResult:
    t0 = time.perf_counter()
    sft, _ = build_avoid_sft(rep, spec)
    sub = rep.restrict(sft)
    rho = sft.spectral_radius
    h = math.log(rho) if rho > 0 else 0.0
    core = rep.restrict(maximal_component(sft))
    lam = np.asarray(lyapunov_spectrum(core, "parry", depth=depth_lyap).exponents, dtype=float)
    s_star = bowen_root(sub, Family.SUPER)
    a0 = bowen_root(sub, Family.SUB)
    nan = float("nan")
    eps_a = _eps(ref_a, h, lam) if ref_a is not None else nan
    eps_b = _eps(ref_b, h, lam) if ref_b is not None else nan
    ta = bound_a(rep.d, eps_a, float(ref_a.exponents[-1])) if ref_a is not None else nan
    tb = bound_b(alpha0_full, eps_b, ref_b.exponents) if ref_b is not None else nan
    return AvoidResult(
        depth=spec.depth,
        n_states=sft.n_states,
        h_top=h,
        lyapunov=tuple(float(v) for v in lam),
        s_star=s_star.root,
        alpha0=a0.root,
        eps_n=eps_a if ref_a is not None else eps_b,
        thm_a_bound=ta,
        thm_b_bound=tb,
        degenerate=s_star.degenerate or a0.degenerate,
        elapsed=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class AvoidSeries:
    rows: tuple
    theorem: str
    alpha0: float
    pesin_gap: float

    @property
    def final(self) -> AvoidResult:
        return self.rows[-1]


def avoid_series(
    rep: Repeller,
    target,
    depths,
    theorem: str = "both",
    convention: str = "itinerary",
    threads: int | None = None,
    check: bool = True,
    lyapunov_depth: int = 8,
) -> AvoidSeries:
    """Rows for every depth, with the Theorem A and/or B checks applied.

    ``theorem`` is ``"a"``, ``"b"`` or ``"both"``; with ``"both"`` a check is
    skipped when its reference measure is unavailable for the model. Rows
    are computed in parallel and returned sorted by depth.
    """
    if theorem not in ("a", "b", "both"):
        raise InputError("theorem must be a, b or both")
    depths = sorted(set(int(n) for n in depths))
    if not depths:
        raise InputError("no depths given")
    specs = [AvoidSpec(tuple(target), n, convention) for n in depths]
    ref_a = theorem_a_reference(rep) if theorem in ("a", "both") else None
    if theorem == "a" and ref_a is None:
        raise DomainError("Theorem A needs a full linear toral or perturbed doubling model")
    ref_b, alpha0_full = None, float("nan")
    if theorem in ("b", "both"):
        try:
            alpha0_full, ref_b = theorem_b_reference(rep)
        except DomainError:
            if theorem == "b":
                raise
    pesin_gap = float("nan")
    if isinstance(rep.model, LinearToral) and ref_a is not None:
        pesin_gap = abs(math.log(rep.sft.spectral_radius) - ref_a.entropy)

    def work(spec):
        return _row(rep, spec, ref_a, ref_b, alpha0_full, lyapunov_depth)

    if threads == 1 or len(specs) == 1:
        rows = [work(s) for s in specs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, specs))
    rows = tuple(sorted(rows, key=lambda r: r.depth))
    series = AvoidSeries(rows, theorem, alpha0_full, pesin_gap)
    if check:
        check_series(series)
    return series


def check_series(series: AvoidSeries) -> None:
    """Row bounds and monotonicity in n; raises :class:`TheoremCheckFailure`."""
    if not math.isnan(series.pesin_gap) and series.pesin_gap > 1e-9:
        raise TheoremCheckFailure(f"Pesin identity off by {series.pesin_gap:.3g}", row=None)
    live = [r for r in series.rows if not r.degenerate]
    for r in live:
        if not math.isnan(r.thm_a_bound) and r.s_star < r.thm_a_bound - BOUND_TOL:
            raise TheoremCheckFailure(f"s* = {r.s_star:.9g} below the Theorem A bound {r.thm_a_bound:.9g}", row=r)
        if not math.isnan(r.thm_b_bound):
            if r.alpha0 > series.alpha0 + MONOTONE_TOL:
                raise TheoremCheckFailure(f"α0(Λ_n) = {r.alpha0:.12g} exceeds α0(Λ) = {series.alpha0:.12g}", row=r)
            if r.alpha0 < r.thm_b_bound - BOUND_TOL:
                raise TheoremCheckFailure(f"α0 = {r.alpha0:.9g} below the Theorem B bound {r.thm_b_bound:.9g}", row=r)
    for prev, cur in zip(series.rows, series.rows[1:]):
        for name in ("h_top", "s_star", "alpha0"):
            if getattr(cur, name) < getattr(prev, name) - MONOTONE_TOL:
                raise TheoremCheckFailure(f"{name} decreased from depth {prev.depth} to {cur.depth}", row=cur)


def theorem_a_series(rep: Repeller, target, depths, **kw) -> AvoidSeries:
    return avoid_series(rep, target, depths, theorem="a", **kw)


def theorem_b_series(rep: Repeller, target, depths, **kw) -> AvoidSeries:
    return avoid_series(rep, target, depths, theorem="b", **kw)
