"""Bowen roots, the Caratheodory singular dimension, box counting and the
Bedford-McMullen oracle."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cocycle import Repeller, log_singular_values
from .errors import DomainError, InputError, PreconditionError
from .pressure import Family, limit_pressure
from .symbolic import Sft, _expand, perron_vectors

ROOT_TOL = 1e-10
ZERO_PRESSURE = 1e-10


# -- Bowen equation ------------------------------------------------------------

@dataclass(frozen=True)
class BowenRoot:
    root: float
    family: Family
    bracket: tuple
    tolerance: float
    iterations: int
    pressure_at_root: float
    degenerate: bool = False


def bowen_root(rep: Repeller, family, tol: float = ROOT_TOL, depth: int | None = None) -> BowenRoot:
    """Root of s -> P(s) on [0, d] by bisection with a certified bracket.

    A subshift with zero entropy has no positive-pressure side; the result
    is then flagged ``degenerate`` with root 0.
    """
    family = Family.parse(family)
    if tol < 1e-12:
        raise InputError("tolerance must be >= 1e-12")
    d = rep.d
    if rep.sft.is_empty or rep.sft.spectral_radius <= 1.0 + 1e-12:
        return BowenRoot(0.0, family, (0.0, 0.0), tol, 0, 0.0, degenerate=True)

    def P(s):
        return limit_pressure(rep, family, s, depth)

    p_hi = P(float(d))
    if p_hi >= -ZERO_PRESSURE:
        return BowenRoot(float(d), family, (float(d), float(d)), tol, 0, p_hi)
    lo, hi = 0.0, float(d)
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        pm = P(mid)
        it += 1
        if pm > 0:
            lo = mid
        elif pm < 0:
            hi = mid
        else:
            lo = hi = mid
    root = 0.5 * (lo + hi)
    return BowenRoot(root, family, (lo, hi), tol, it, P(root))


# -- Caratheodory singular dimension ---------------------------------------------

@dataclass(frozen=True)
class CaratheodoryEstimate:
    alpha: float
    r: float
    N: int
    raw_alpha: float
    curve: tuple = field(repr=False)
    degenerate: bool = False


def _boxes(rep: Repeller):
    letters = np.unique(rep.sft.first_letters)
    return letters, [rep.model.cell_box(int(a)) for a in letters]


def cell_gap(rep: Repeller) -> float:
    """Smallest distance between two distinct cells used by the repeller."""
    if not rep.model.axis_aligned:
        raise DomainError("cell gaps are computed for axis-aligned models")
    letters, boxes = _boxes(rep)
    gap = math.inf
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            lo_i, hi_i = boxes[i]
            lo_j, hi_j = boxes[j]
            sep = np.maximum(0.0, np.maximum(lo_j - hi_i, lo_i - hi_j))
            if rep.model.torus:
                sep = np.minimum(sep, np.maximum(0.0, 1.0 - (np.maximum(hi_i, hi_j) - np.minimum(lo_i, lo_j))))
            gap = min(gap, float(np.sqrt(np.sum(sep * sep))))
    return gap


def admissible_radius(rep: Repeller) -> float:
    """Bound below which Bowen balls are identified with cylinders.

    Separated cells give their gap. Adjacent cells (full-shift tori, carpets
    with touching rectangles) give half the smallest cell side; the
    cylinder-ball identification then holds for the representatives, which
    are cell corners.
    """
    gap = cell_gap(rep)
    if gap > 0:
        return gap
    letters, boxes = _boxes(rep)
    return 0.5 * min(float(np.min(hi - lo)) for lo, hi in boxes)


def _additive_weights(rep: Repeller, alpha: float) -> np.ndarray:
    return np.exp(-Family.SUB.potential(rep.state_log_sv, alpha))


def _cylinder_sum(rep: Repeller, alpha: float, N: int, boundary: bool) -> float:
    """log of the depth-N cylinder sum of exp(-phi^alpha), by dynamic programming.

    With ``boundary`` the first and next states carry the left and right
    Perron weights of the one-step matrix, which removes the boundary term
    from (1/N) log Z_N; otherwise every cylinder counts with weight one.
    """
    if rep.uniform and not rep.additive:
        J = rep.letter_jacobians[rep._used_letters[0]]
        logw = -float(Family.SUB.potential(log_singular_values(np.linalg.matrix_power(J, N)), alpha))
        w = np.ones(rep.sft.n_states)
    else:
        logw = 0.0
        w = _additive_weights(rep, alpha)
    T = rep.sft.matrix
    W = sp.diags(w) @ T
    if boundary:
        _, right, left = perron_vectors(W)
        vec = right.copy()
        log_scale = 0.0
        for _ in range(N):
            vec = W @ vec
            top = vec.max()
            log_scale += math.log(top)
            vec /= top
        return logw + log_scale + math.log(left @ vec) - math.log(left @ right)
    vec = w.copy()
    log_scale = 0.0
    for _ in range(N - 1):
        vec = w * (T @ vec)
        top = vec.max()
        log_scale += math.log(top)
        vec /= top
    return logw + log_scale + math.log(vec.sum())


def _crossing(f, d: float, tol: float = 1e-12) -> float:
    lo, hi = 0.0, d
    if f(hi) >= 0:
        return d
    if f(lo) <= 0:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def caratheodory_dim(rep: Repeller, r: float, N: int = 8, Z: Sft | None = None, curve_points: int = 21) -> CaratheodoryEstimate:
    """Finite-N Caratheodory singular dimension of Z (default: the whole repeller).

    For r below :func:`admissible_radius` the Bowen balls B_N(x, r) around
    representatives are the depth-N cylinders, and the sup of -phi^alpha on
    a ball is its value on the cylinder. ``alpha`` is the zero of
    (1/N) log Z_N(alpha) with Perron boundary weights; ``raw_alpha`` uses the
    plain cylinder sum.
    """
    if N < 4:
        raise InputError("N must be >= 4")
    if r <= 0:
        raise InputError("r must be positive")
    if not rep.locally_constant:
        raise PreconditionError("Bowen balls match cylinders only for locally constant models")
    if Z is not None:
        rep = rep.restrict(Z)
    if rep.sft.is_empty or rep.sft.spectral_radius <= 1.0 + 1e-12:
        return CaratheodoryEstimate(0.0, r, N, 0.0, (), degenerate=True)
    if not (rep.uniform or rep.additive):
        raise PreconditionError("Caratheodory sums are implemented for constant or additive cocycles")
    r_max = admissible_radius(rep)
    if r >= r_max:
        raise PreconditionError(f"r = {r} is not below the admissible radius {r_max:.6g}")
    d = float(rep.d)
    alpha = _crossing(lambda a: _cylinder_sum(rep, a, N, True) / N, d)
    raw = _crossing(lambda a: _cylinder_sum(rep, a, N, False) / N, d)
    grid = np.linspace(0.0, d, curve_points)
    curve = tuple((float(a), _cylinder_sum(rep, float(a), N, True) / N) for a in grid)
    return CaratheodoryEstimate(alpha, r, N, raw, curve)


# -- box counting -------------------------------------------------------------------

@dataclass(frozen=True)
class BoxDimEstimate:
    dimension: float
    log_inv_delta: np.ndarray
    log_counts: np.ndarray
    residual: float
    scales: tuple


def _axis_bases(rep: Repeller) -> np.ndarray:
    """Grid base per axis: 1/scale when all cells share that integer scale, else 2."""
    scales = np.abs(rep.model.diagonal_scales()[np.unique(rep.sft.first_letters)])
    bases = np.full(rep.d, 2.0)
    for i in range(rep.d):
        col = scales[:, i]
        inv = 1.0 / col[0]
        if np.allclose(col, col[0], rtol=0, atol=1e-12) and abs(inv - round(inv)) < 1e-9 and round(inv) >= 2:
            bases[i] = round(inv)
    return bases


def _row_hash(rows: np.ndarray) -> np.ndarray:
    """64-bit hash of each float row (splitmix-style mixing of the raw bits)."""
    bits = np.ascontiguousarray(rows).view(np.uint64).reshape(rows.shape)
    h = np.zeros(rows.shape[0], dtype=np.uint64)
    with np.errstate(over="ignore"):
        for col in bits.T:
            h = (h ^ col) * np.uint64(0x9E3779B97F4A7C15)
            h ^= h >> np.uint64(31)
    return h


def _count_cells(rep: Repeller, ks: np.ndarray, bases: np.ndarray, max_pieces: int = 1 << 22) -> int:
    """Number of grid cells of side bases^-ks (per axis) meeting the repeller."""
    model = rep.model
    d = rep.d
    L = model.diagonal_scales()
    C = np.array([model.branch(a, np.zeros((1, d)))[0] for a in range(model.alphabet)])
    ncell = bases ** ks
    tiny = 2.0 ** -20
    T = rep.sft.matrix
    letters = rep.sft.first_letters
    state = np.arange(rep.sft.n_states)
    scale = L[letters].copy()
    offset = C[letters].copy()
    radix = np.cumprod(np.concatenate([[1], ncell[:0:-1]]))[::-1].astype(np.int64)
    hits = []
    while state.size:
        lo = np.minimum(offset, offset + scale) * ncell
        hi = np.maximum(offset, offset + scale) * ncell
        i_lo = np.floor(lo + 1e-9).astype(np.int64)
        i_hi = np.ceil(hi - 1e-9).astype(np.int64) - 1
        i_hi = np.maximum(i_hi, i_lo)
        resolved = i_lo == i_hi
        done = resolved.all(axis=1)
        stuck = ~done & np.all(resolved | (np.abs(scale) * ncell < tiny), axis=1)
        hits.append(i_lo[done] @ radix)
        for idx in np.flatnonzero(stuck):
            ranges = [np.arange(i_lo[idx, a], i_hi[idx, a] + 1) for a in range(d)]
            cells = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(d, -1).T
            hits.append(cells @ radix)
        keep = ~done & ~stuck
        state, scale, offset = state[keep], scale[keep], offset[keep]
        res = resolved[keep]
        if not state.size:
            break
        # pieces that agree on state, resolved indices and unresolved maps
        # generate the same cells: keep one of each
        key = np.concatenate(
            [state[:, None].astype(float), np.where(res, i_lo[keep], -1.0),
             np.where(res, 0.0, np.round(scale, 15)), np.where(res, 0.0, np.round(offset, 15))],
            axis=1,
        )
        _, first = np.unique(_row_hash(key + 0.0), return_index=True)
        first.sort()
        state, scale, offset = state[first], scale[first], offset[first]
        src, _, succ = _expand(np.zeros(state.size, dtype=np.int64), state, T, 1)
        if src.size > max_pieces:
            raise DomainError("box counting exceeded the piece budget; lower max_depth")
        a = letters[succ]
        offset = offset[src] + scale[src] * C[a]
        scale = scale[src] * L[a]
        state = succ
    return int(np.unique(np.concatenate(hits)).size)


def box_dimension(rep: Repeller, max_depth: int = 10, Z: Sft | None = None, min_depth: int = 2) -> BoxDimEstimate:
    """Least-squares box-counting dimension of an axis-aligned repeller.

    At level j axis i uses cells of side b_i^-k_i with k_i = round(j log 2 / log b_i),
    so the boxes are close to squares of side 2^-j even for self-affine
    models; the regression uses the geometric-mean side.
    """
    if Z is not None:
        rep = rep.restrict(Z)
    if not rep.model.axis_aligned:
        raise DomainError("box counting needs axis-aligned cells")
    if rep.sft.is_empty:
        raise InputError("empty repeller")
    bases = _axis_bases(rep)
    seen = set()
    xs, ys, scales = [], [], []
    for j in range(min_depth, max_depth + 1):
        ks = np.rint(j * math.log(2.0) / np.log(bases)).astype(np.int64)
        if tuple(ks) in seen or np.any(ks < 1):
            continue
        seen.add(tuple(ks))
        n_cells = _count_cells(rep, ks, bases)
        xs.append(float(np.mean(ks * np.log(bases))))
        ys.append(math.log(n_cells))
        scales.append(tuple(int(k) for k in ks))
    if len(xs) < 3:
        raise InputError("fewer than 3 usable scales; raise max_depth")
    xs, ys = np.array(xs), np.array(ys)
    A = np.vstack([xs, np.ones_like(xs)]).T
    coef, res, *_ = np.linalg.lstsq(A, ys, rcond=None)
    residual = float(np.sqrt(res[0] / len(xs))) if res.size else 0.0
    dim = float(np.clip(coef[0], 0.0, rep.d))
    return BoxDimEstimate(dim, xs, ys, residual, tuple(scales))


# -- Bedford-McMullen oracle ----------------------------------------------------------

def mcmullen_dim(m: int, n: int, digits) -> float:
    """Hausdorff dimension log_n sum_j t_j^(log_m n) of a Bedford-McMullen carpet.

    The grid has n columns and m rows (2 <= n < m); ``digits`` are
    (col, row) pairs and t_j counts the chosen digits in column j.
    """
    if not (2 <= n < m):
        raise InputError("need 2 <= n < m")
    digits = {tuple(map(int, t)) for t in digits}
    if not digits:
        raise InputError("digit set is empty")
    for col, row in digits:
        if not (0 <= col < n and 0 <= row < m):
            raise InputError(f"digit {(col, row)} outside the {n} x {m} grid")
    t = Counter(col for col, _ in digits)
    total = sum(c ** (math.log(n) / math.log(m)) for c in t.values())
    return math.log(total) / math.log(n)
