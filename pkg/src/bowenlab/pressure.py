"""Topological pressure of the singular-valued potential families.

``Family.SUB`` is the sub-additive family {-phi^s(., f^n)} and
``Family.SUPER`` the super-additive family {-psi^s(., f^n)}.

Two estimators are provided:

* ``pressure_spectral``: (1/m) log of the spectral radius of the depth-m
  weighted transfer matrix. It is exact for locally constant cocycles;
  constant and additive cocycles are exact already at m = 1.
* ``pressure_separated``: the (n, eps)-separated-set sum over a greedy
  maximal separated set of cylinder representatives.

For the nonlinear circle map the depth-m weights use the infimum (SUB) or
supremum (SUPER) of log f' over each depth-m cylinder. Both are pressures
of potentials that depend on m coordinates, monotone under refinement, so
the SUB sequence is nonincreasing, the SUPER sequence nondecreasing, and
together they bracket the true value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from .cocycle import Repeller, _iter_paths, constant_exponents, log_singular_values, lyapunov_spectrum, phi_from_logs, psi_from_logs
from .errors import BudgetError, ConsistencyError, DomainError, EmptySubshiftError, InputError
from .symbolic import (
    STATE_BUDGET,
    MarkovMeasure,
    equilibrium_measure,
    enumerate_words,
    higher_block,
    markov_entropy,
    spectral_radius,
    word_array,
)

MONOTONE_TOL = 1e-6
EPS_SCHEDULE = (0.2, 0.1, 0.05, 0.02, 0.01)
NONLINEAR_DEPTH = 12


class Family(enum.Enum):
    SUB = "sub"
    SUPER = "super"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, Family):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as exc:
            raise InputError(f"family must be 'sub' or 'super', got {value!r}") from exc

    def potential(self, logsv, s: float):
        """phi^s for SUB, psi^s for SUPER, from descending log singular values."""
        return phi_from_logs(logsv, s) if self is Family.SUB else psi_from_logs(logsv, s)


@dataclass(frozen=True)
class PressureEstimate:
    value: float
    method: str
    depth: int
    family: Family
    s: float
    eps: float | None = None
    bracket: tuple | None = None
    sequence: tuple = field(default=(), repr=False)


def _check_s(rep: Repeller, s: float):
    if not (0.0 <= s <= rep.d):
        raise InputError(f"s = {s} outside [0, {rep.d}]")


def _nonempty(rep: Repeller):
    if rep.sft.is_empty:
        raise EmptySubshiftError("pressure of an empty subshift")


@lru_cache(maxsize=64)
def _nonlinear_blocks(rep: Repeller, m: int):
    """Block graph of base words of length max(m, L) (L the SFT's block
    length) for a nonlinear d = 1 repeller, with log f' ranges."""
    blocks = higher_block(rep.sft, max(1, m - rep.sft.block_length + 1))
    lo, hi = Repeller(rep.model, blocks).cylinder_intervals(np.arange(blocks.n_states)[:, None])
    return blocks, rep.model.log_derivative_range(lo, hi)


def _general_block_matrix(rep: Repeller, family: Family, s: float, m: int) -> np.ndarray:
    """k x k matrix T G with G[r, q] the weighted sum over m-paths r -> q.

    Its spectral radius equals that of the depth-m cylinder matrix
    (states = m-paths, u -> v allowed when T[u_last, v_first]).
    """
    k = rep.sft.n_states
    G = np.zeros((k, k))
    for paths in _iter_paths(rep.sft, m):
        w = np.exp(-family.potential(rep.path_log_sv(paths), s))
        np.add.at(G, (paths[:, 0], paths[:, -1]), w)
    return rep.sft.matrix @ G


def pressure_spectral(rep: Repeller, family, s: float, m: int = 1) -> PressureEstimate:
    """Depth-m weighted transfer-matrix pressure (nats)."""
    family = Family.parse(family)
    _check_s(rep, s)
    _nonempty(rep)
    if m < 1:
        raise InputError("depth m must be >= 1")
    log_rho_T = math.log(rep.sft.spectral_radius)
    if rep.uniform:
        J = rep.letter_jacobians[rep._used_letters[0]]
        val = log_rho_T - float(family.potential(log_singular_values(np.linalg.matrix_power(J, m)), s)) / m
        return PressureEstimate(val, "spectral", m, family, s)
    if rep.additive:
        w = np.exp(-family.potential(rep.state_log_sv, s))
        W = sp.diags(w) @ rep.sft.matrix
        return PressureEstimate(math.log(spectral_radius(W)), "spectral", m, family, s)
    if rep.locally_constant:
        W = _general_block_matrix(rep, family, s, m)
        return PressureEstimate(math.log(spectral_radius(W)) / m, "spectral", m, family, s)
    if rep.d != 1:
        raise DomainError("nonlinear pressure is implemented for d = 1")
    blocks, (lmin, lmax) = _nonlinear_blocks(rep, m)
    upper = math.log(spectral_radius(sp.diags(np.exp(-s * lmin)) @ blocks.matrix))
    lower = math.log(spectral_radius(sp.diags(np.exp(-s * lmax)) @ blocks.matrix))
    val = upper if family is Family.SUB else lower
    return PressureEstimate(val, "spectral", m, family, s, bracket=(lower, upper))


def exact_at_depth_one(rep: Repeller) -> bool:
    """Additive cocycles: the m = 1 pressure is already the limit.

    A constant non-diagonal Jacobian J is not: (1/m) log a_i(J^m) still
    moves with m.
    """
    return rep.additive


def limit_pressure(rep: Repeller, family, s: float, depth: int | None = None) -> float:
    """Pressure in the depth limit where it is known exactly, else at ``depth``.

    Constant cocycles use the exponents log|eig J| (the limit of
    (1/m) log a_i(J^m)); additive ones are exact at depth 1; everything else
    is evaluated at the given depth.
    """
    family = Family.parse(family)
    if rep.uniform and not rep.additive:
        lam = constant_exponents(rep.letter_jacobians[rep._used_letters[0]])
        return math.log(rep.sft.spectral_radius) - float(family.potential(lam, s))
    if exact_at_depth_one(rep):
        return pressure_spectral(rep, family, s, 1).value
    return pressure_spectral(rep, family, s, depth or NONLINEAR_DEPTH).value


def pressure_limit(rep: Repeller, family, s: float, m_max: int = 4) -> PressureEstimate:
    """Run the depth sequence m = 1..m_max and check its monotone structure.

    SUB pressures must be nonincreasing and SUPER pressures nondecreasing in
    m (tolerance 1e-6); a violation signals a potential-evaluation bug and
    raises :class:`ConsistencyError`.
    """
    family = Family.parse(family)
    if m_max < 2:
        raise InputError("m_max must be >= 2")
    seq = [pressure_spectral(rep, family, s, m) for m in range(1, m_max + 1)]
    vals = np.array([e.value for e in seq])
    steps = np.diff(vals)
    bad = steps > MONOTONE_TOL if family is Family.SUB else steps < -MONOTONE_TOL
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ConsistencyError(
            f"{family.value} pressure not monotone in depth at s={s}: "
            f"m={i + 1} -> {vals[i]:.12g}, m={i + 2} -> {vals[i + 1]:.12g}"
        )
    last = seq[-1]
    bracket = last.bracket if last.bracket is not None else (float(vals.min()), float(vals.max()))
    return PressureEstimate(float(vals[-1]), "spectral", m_max, family, s, bracket=bracket, sequence=tuple(vals))


# -- separated sets -------------------------------------------------------------

@dataclass(frozen=True)
class SeparatedSet:
    paths: np.ndarray
    points: np.ndarray
    n: int
    eps: float

    def __len__(self):
        return self.paths.shape[0]

    def min_distance(self, rep: Repeller, exhaustive_limit: int = 2000, seed: int = 0) -> float:
        """Smallest pairwise d_n distance (all pairs up to the limit, else sampled)."""
        K = len(self)
        if K < 2:
            return math.inf
        if K <= exhaustive_limit:
            i, j = np.triu_indices(K, 1)
        else:
            rng = np.random.Generator(np.random.Philox(seed))
            i = rng.integers(0, K, 200_000)
            j = rng.integers(0, K, 200_000)
            keep = i != j
            i, j = i[keep], j[keep]
        dist = rep.model.distance(self.points[i], self.points[j]).max(axis=1)
        return float(dist.min())


def _bowen_distance(model, a, b):
    return model.distance(a, b).max(axis=-1)


PAIR_LIMIT = 20_000_000


def _flat_orbits(rep: Repeller, pts: np.ndarray) -> np.ndarray:
    """First and last orbit points as rows of coordinates, wrapped into [0, 1) on the torus."""
    flat = pts[:, sorted({0, pts.shape[1] - 1})].reshape(pts.shape[0], -1)
    if rep.model.torus:
        flat = np.mod(flat, 1.0)
        flat[flat >= 1.0] = 0.0
    return flat


def _greedy_pairs(rep: Repeller, pts: np.ndarray, eps: float, tree) -> np.ndarray:
    """Greedy selection over the conflict graph {d_n < eps}.

    Every coordinate difference is at most the Euclidean distance, so pairs
    with d_n < eps lie within eps in the max-norm on the stacked first and
    last orbit points; the KD-tree finds those and d_n filters them exactly.
    """
    N = pts.shape[0]
    pairs = tree.query_pairs(eps, p=np.inf, output_type="ndarray")
    chunks = []
    for lo in range(0, pairs.shape[0], 1 << 20):
        pr = pairs[lo:lo + (1 << 20)]
        close = _bowen_distance(rep.model, pts[pr[:, 0]], pts[pr[:, 1]]) < eps
        chunks.append(pr[close])
    pr = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    pr = np.sort(pr, axis=1)
    order = np.argsort(pr[:, 1], kind="stable")
    earlier, later = pr[order, 0], pr[order, 1]
    ptr = np.searchsorted(later, np.arange(N + 1))
    kept = np.zeros(N, dtype=bool)
    for idx in range(N):
        a, b = ptr[idx], ptr[idx + 1]
        if a == b or not kept[earlier[a:b]].any():
            kept[idx] = True
    return np.flatnonzero(kept)


def _greedy_grid(rep: Repeller, pts: np.ndarray, eps: float) -> np.ndarray:
    """Greedy selection comparing each candidate with kept points in nearby grid cells.

    Cells have side >= eps in the key coordinates (first and last orbit
    point, or the last one alone in d = 3), so conflicts sit in adjacent cells.
    """
    model = rep.model
    key = _flat_orbits(rep, pts)
    if key.shape[1] > 4:
        key = key[:, -rep.d:]
    D = key.shape[1]
    ncell = max(1, int(math.floor(1.0 / eps)))
    cells = np.minimum(np.floor(key * ncell).astype(np.int64), ncell - 1)
    offsets = np.array(np.meshgrid(*[[-1, 0, 1]] * D, indexing="ij")).reshape(D, -1).T
    neigh = cells[:, None, :] + offsets[None, :, :]
    if model.torus:
        neigh = np.mod(neigh, ncell)
    valid = np.all((neigh >= 0) & (neigh < ncell), axis=2)
    radix = ncell ** np.arange(D)
    codes = np.where(valid, neigh @ radix, -1)
    own = cells @ radix
    grid: dict = {}
    kept: list = []
    for idx in range(pts.shape[0]):
        near = [j for c in set(codes[idx].tolist()) for j in grid.get(c, ())]
        if near and _bowen_distance(model, pts[near], pts[idx][None]).min() < eps:
            continue
        kept.append(idx)
        grid.setdefault(int(own[idx]), []).append(idx)
    return np.asarray(kept, dtype=np.int64)


def build_separated_set(rep: Repeller, n: int, eps: float, budget: int = STATE_BUDGET) -> SeparatedSet:
    """Greedy maximal (n, eps)-separated set of depth-n cylinder representatives.

    Candidates are taken in lexicographic order and kept when their d_n
    distance to every kept point is at least eps. Conflicts come from a
    KD-tree on the first and last orbit points, or from a grid hash on the
    time-0 point when eps is so coarse that close pairs abound.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    if n < 1:
        raise InputError("n must be >= 1")
    _nonempty(rep)
    count = enumerate_words(rep.sft, n).count
    if count is None or count > budget:
        shown = "more than 2^62" if count is None else str(count)
        raise BudgetError(f"{shown} cylinders of length {n} exceed the budget {budget}; use a smaller n")
    paths = word_array(rep.sft, n, budget)
    pts = rep.orbit_points(paths)
    flat = _flat_orbits(rep, pts)
    # expected close pairs if the key points were spread uniformly
    expected = 0.5 * flat.shape[0] ** 2 * min(1.0, 2.0 * eps) ** flat.shape[1]
    if expected <= PAIR_LIMIT:
        tree = cKDTree(flat, boxsize=1.0 if rep.model.torus else None)
        kept = _greedy_pairs(rep, pts, eps, tree)
    else:
        kept = _greedy_grid(rep, pts, eps)
    return SeparatedSet(paths[kept], pts[kept], n, eps)


def pressure_separated(rep: Repeller, family, s: float, n: int, eps: float) -> PressureEstimate:
    """(1/n) log sum over a greedy separated set of exp(-phi^s) (or -psi^s).

    A greedy set is one admissible set, so this is a lower estimate of the
    supremum in the definition.
    """
    family = Family.parse(family)
    _check_s(rep, s)
    E = build_separated_set(rep, n, eps)
    pot = family.potential(rep.path_log_sv(E.paths), s)
    val = float(logsumexp(-pot)) / n
    return PressureEstimate(val, "separated", n, family, s, eps=eps)


def pressure_eps_schedule(rep: Repeller, family, s: float, n: int, schedule=EPS_SCHEDULE):
    """Per-eps separated-set values; no extrapolation beyond the smallest eps."""
    return [pressure_separated(rep, family, s, n, eps) for eps in schedule]


# -- variational principle --------------------------------------------------------

def free_energy(rep: Repeller, family, s: float, measure: MarkovMeasure, depth: int = 8) -> float:
    """F_*(family, mu) = lim (1/n) integral of -phi^s(., f^n) d mu.

    The potentials are fixed linear combinations of log singular values, so
    the limit is the same combination of the Lyapunov exponents of mu.
    """
    family = Family.parse(family)
    lam = lyapunov_spectrum(rep, measure, depth=depth).exponents
    return -float(family.potential(lam, s))


def variational_gap(rep: Repeller, family, s: float, measure: MarkovMeasure, depth: int = 8) -> float:
    """P(s) - [h_mu + F_*(family, mu)]; the variational principle makes it >= 0."""
    family = Family.parse(family)
    if measure.n_states != rep.sft.n_states:
        raise InputError("measure lives on a different SFT")
    P = limit_pressure(rep, family, s, depth)
    return P - (markov_entropy(measure) + free_energy(rep, family, s, measure, depth))


def equilibrium_state(rep: Repeller, family, s: float) -> MarkovMeasure:
    """Equilibrium Markov measure of a constant or additive cocycle at s."""
    family = Family.parse(family)
    _check_s(rep, s)
    if rep.uniform:
        w = np.ones(rep.sft.n_states)
    elif rep.additive:
        w = np.exp(-family.potential(rep.state_log_sv, s))
    else:
        raise DomainError("equilibrium states are computed for constant or additive cocycles only")
    return equilibrium_measure(sp.diags(w) @ rep.sft.matrix)
