"""Subshifts of finite type.

An :class:`Sft` is a 0/1 transition matrix on states together with a
label for every state: the word over the model's base alphabet that the
state stands for. States of a plain SFT are labelled by single letters;
states of a higher-block recoding are labelled by blocks, and an allowed
transition ``u -> v`` always shifts the label by one letter. This lets the
geometric code recover the base-alphabet cylinder of any path of states.

Entropies are in nats throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import BudgetError, DomainError, EmptySubshiftError, InputError, ReducibleError

RHO_TOL = 1e-12
MAX_POWER_ITER = 1_000_000
STATE_BUDGET = 1 << 24


def _csr(T) -> sp.csr_matrix:
    if sp.issparse(T):
        M = sp.csr_matrix(T, dtype=float)
    else:
        M = sp.csr_matrix(np.atleast_2d(np.asarray(T, dtype=float)))
    M.eliminate_zeros()
    M.sort_indices()
    return M


@dataclass(frozen=True, eq=False)
class Sft:
    """Transition matrix plus base-alphabet labels of the states."""

    matrix: sp.csr_matrix
    labels: np.ndarray

    def __post_init__(self):
        M = _csr(self.matrix)
        if M.shape[0] != M.shape[1]:
            raise InputError("transition matrix must be square")
        if M.nnz and not np.all(M.data == 1.0):
            raise InputError("transition matrix must be 0/1")
        labels = np.asarray(self.labels)
        if labels.ndim == 1:
            labels = labels.reshape(-1, 1)
        if labels.shape[0] != M.shape[0]:
            raise InputError("one label per state required")
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "labels", labels.astype(np.int32))

    @classmethod
    def from_matrix(cls, T) -> "Sft":
        M = _csr(T)
        return cls(M, np.arange(M.shape[0]))

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    @property
    def block_length(self) -> int:
        return self.labels.shape[1]

    @property
    def first_letters(self) -> np.ndarray:
        """Base letter of the cell each state sits in."""
        return self.labels[:, 0]

    @property
    def last_letters(self) -> np.ndarray:
        """Base letter appended when a path enters the state."""
        return self.labels[:, -1]

    @property
    def is_empty(self) -> bool:
        return self.n_states == 0 or self.matrix.nnz == 0

    def dense(self) -> np.ndarray:
        return self.matrix.toarray().astype(np.int64)

    @cached_property
    def spectral_radius(self) -> float:
        if self.is_empty:
            return 0.0
        return spectral_radius(self.matrix)

    @cached_property
    def irreducible(self) -> bool:
        return is_irreducible(self.matrix)

    def base_word(self, path: Sequence[int]) -> list:
        """Base-alphabet word spelled by a path of states."""
        path = list(path)
        if not path:
            return []
        return list(self.labels[path[0]]) + [int(self.labels[q, -1]) for q in path[1:]]

    def successors(self, q: int) -> np.ndarray:
        M = self.matrix
        return M.indices[M.indptr[q]:M.indptr[q + 1]]

    def __repr__(self):
        return f"Sft(n_states={self.n_states}, block_length={self.block_length}, edges={self.matrix.nnz})"


def full_shift(k: int) -> Sft:
    if k < 1:
        raise InputError("alphabet size must be positive")
    return Sft.from_matrix(np.ones((k, k)))


def golden_mean_shift() -> Sft:
    """Binary sequences without two consecutive zeros."""
    return Sft.from_matrix([[0, 1], [1, 1]])


# -- Perron-Frobenius -------------------------------------------------------

def _components(M: sp.csr_matrix):
    n_comp, comp = connected_components(M, directed=True, connection="strong")
    return n_comp, comp


def is_irreducible(T) -> bool:
    M = _csr(T)
    if M.shape[0] == 0 or M.nnz == 0:
        return False
    n_comp, _ = _components(M)
    return n_comp == 1


def _power_iteration(M: sp.csr_matrix, tol: float, max_iter: int):
    """Perron root and right vector of an irreducible nonnegative matrix.

    Iterates on M + c I (c = mean row sum) so periodic matrices converge,
    stopping on the Collatz-Wielandt bracket min(Mx/x) <= rho <= max(Mx/x).
    """
    n = M.shape[0]
    if n == 1:
        return float(M[0, 0]), np.ones(1)
    c = float(M.sum()) / n
    x = np.ones(n)
    rho = 0.0
    for _ in range(max_iter):
        y = M @ x + c * x
        ratios = y / x
        lo, hi = float(ratios.min()), float(ratios.max())
        rho = 0.5 * (lo + hi) - c
        x = y / y.max()
        if hi - lo <= 2.0 * tol * max(rho, 1e-300):
            return rho, x
    return rho, x


def spectral_radius(T, tol: float = RHO_TOL, max_iter: int = MAX_POWER_ITER) -> float:
    """Perron root of a square nonnegative matrix (dense or sparse).

    Reducible matrices are split into strongly connected components and
    the largest component root is returned.
    """
    M = _csr(T)
    if M.shape[0] != M.shape[1]:
        raise InputError("spectral_radius needs a square matrix")
    if M.nnz == 0:
        raise DomainError("spectral radius of the zero matrix is not defined here")
    if M.data.min() < 0:
        raise DomainError("matrix has negative entries")
    n_comp, comp = _components(M)
    if n_comp == 1:
        return _power_iteration(M, tol, max_iter)[0]
    best = 0.0
    for c in range(n_comp):
        idx = np.flatnonzero(comp == c)
        sub = M[idx][:, idx]
        if sub.nnz == 0:
            continue
        best = max(best, _power_iteration(sub, tol, max_iter)[0])
    return best


def perron_vectors(W, tol: float = RHO_TOL):
    """Perron root with right and left eigenvectors of an irreducible matrix.

    The right vector is scaled to max 1; the left vector so that u.v = 1.
    """
    M = _csr(W)
    if not is_irreducible(M):
        raise ReducibleError("Perron vectors need an irreducible matrix")
    rho, v = _power_iteration(M, tol, MAX_POWER_ITER)
    _, u = _power_iteration(_csr(M.T), tol, MAX_POWER_ITER)
    u = u / float(u @ v)
    return rho, v, u


# -- higher-block recoding --------------------------------------------------

def parse_word(word) -> tuple:
    """Accept ``(0, 0)``, ``"0.0"`` or ``"00"`` (single-digit letters)."""
    if isinstance(word, str):
        word = word.strip()
        if not word:
            raise InputError("empty word")
        parts = word.split(".") if "." in word else list(word)
        try:
            return tuple(int(p) for p in parts)
        except ValueError as exc:
            raise InputError(f"cannot parse word {word!r}") from exc
    return tuple(int(a) for a in word)


def _expand(codes, last, M: sp.csr_matrix, k: int):
    """Append every allowed next letter to each path code (keeps sort order)."""
    outdeg = np.diff(M.indptr)
    counts = outdeg[last]
    total = int(counts.sum())
    src = np.repeat(np.arange(codes.size), counts)
    starts = M.indptr[last]
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    succ = M.indices[np.repeat(starts, counts) + offsets].astype(np.int64)
    return src, codes[src] * k + succ, succ


def prune(matrix: sp.csr_matrix) -> np.ndarray:
    """Mask of states lying on a bi-infinite path (in- and out-degree > 0)."""
    M = _csr(matrix)
    keep = np.ones(M.shape[0], dtype=bool)
    MT = _csr(M.T)
    while True:
        kf = keep.astype(float)
        new = keep & ((M @ kf) > 0) & ((MT @ kf) > 0)
        if np.array_equal(new, keep):
            return keep
        keep = new


def restrict(sft: Sft, mask) -> Sft:
    idx = np.flatnonzero(mask)
    return Sft(sft.matrix[idx][:, idx], sft.labels[idx])


def forbid_words(base: Sft, words, n: int) -> Sft:
    """Higher-block SFT of ``base`` with the given words forbidden.

    States are the admissible (n-1)-paths of ``base``; ``u -> v`` is allowed
    when the paths overlap in n-2 states and the n-path they spell contains
    none of ``words`` as a factor. Dead states are pruned.
    """
    if n < 2:
        raise InputError("block depth n must be >= 2")
    k = base.n_states
    parsed = [parse_word(w) for w in words]
    for w in parsed:
        if len(w) > n:
            raise InputError(f"word {w} is longer than the block depth {n}")
        if min(w) < 0 or max(w) >= k:
            raise InputError(f"word {w} uses a letter outside the alphabet 0..{k - 1}")
    if n * math.log2(max(k, 2)) >= 62:
        raise BudgetError(f"depth {n} over {k} letters overflows the path encoding")
    M = base.matrix
    codes = np.arange(k, dtype=np.int64)
    last = codes.copy()
    for _ in range(n - 2):
        _, codes, last = _expand(codes, last, M, k)
        if codes.size > STATE_BUDGET:
            raise BudgetError(f"{codes.size} states at depth {n}; use a smaller depth")
    src, nwords, _ = _expand(codes, last, M, k)
    bad = np.zeros(nwords.size, dtype=bool)
    for w in parsed:
        ell = len(w)
        wcode = 0
        for a in w:
            wcode = wcode * k + a
        for p in range(n - ell + 1):
            bad |= (nwords // k ** (n - ell - p)) % k ** ell == wcode
    src, nwords = src[~bad], nwords[~bad]
    dst = np.searchsorted(codes, nwords % k ** (n - 1))
    N = codes.size
    T = sp.csr_matrix((np.ones(src.size), (src, dst)), shape=(N, N))
    path = np.empty((N, n - 1), dtype=np.int64)
    rest = codes.copy()
    for i in range(n - 2, -1, -1):
        path[:, i] = rest % k
        rest //= k
    labels = np.concatenate([base.labels[path[:, 0]], base.labels[path[:, 1:], -1]], axis=1)
    result = restrict(Sft(T, labels), prune(T))
    if result.is_empty:
        raise EmptySubshiftError("every admissible sequence contains a forbidden word")
    return result


def higher_block(sft: Sft, m: int) -> Sft:
    """SFT whose states are the admissible m-paths of ``sft`` (iterated line graph).

    Unlike :func:`forbid_words` this never encodes paths as integers, so it
    works on top of any higher-block SFT.
    """
    if m < 1:
        raise InputError("block depth must be >= 1")
    cur = sft
    for _ in range(m - 1):
        M = cur.matrix.tocsr()
        M.sort_indices()
        src = np.repeat(np.arange(cur.n_states), np.diff(M.indptr))
        dst = M.indices.astype(np.int64)
        E = dst.size
        if E > STATE_BUDGET:
            raise BudgetError(f"{E} states in the block graph; use a smaller depth")
        counts = np.diff(M.indptr)[dst]
        rows = np.repeat(np.arange(E), counts)
        starts = np.repeat(M.indptr[dst], counts)
        cols = starts + np.arange(rows.size) - np.repeat(np.cumsum(counts) - counts, counts)
        T = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(E, E))
        labels = np.concatenate([cur.labels[src], cur.labels[dst, -1:]], axis=1)
        cur = Sft(T, labels)
    return cur


def maximal_component(sft: Sft) -> Sft:
    """Restriction to the strongly connected component of largest entropy."""
    if sft.is_empty:
        raise EmptySubshiftError("empty subshift has no components")
    n_comp, comp = _components(sft.matrix)
    if n_comp == 1:
        return sft
    best, best_rho = None, -1.0
    for c in range(n_comp):
        idx = comp == c
        sub = sft.matrix[np.flatnonzero(idx)][:, np.flatnonzero(idx)]
        if sub.nnz == 0:
            continue
        rho = spectral_radius(sub)
        if rho > best_rho + 1e-12:
            best, best_rho = idx, rho
    return restrict(sft, best)


# -- entropy and Markov measures ---------------------------------------------

def topological_entropy(sft: Sft) -> float:
    if sft.is_empty:
        raise EmptySubshiftError("topological entropy of an empty subshift")
    rho = sft.spectral_radius
    if rho <= 0.0:
        raise EmptySubshiftError("nilpotent transition matrix")
    return math.log(rho)


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """Stationary Markov measure: stochastic P and its stationary vector."""

    P: sp.csr_matrix
    pi: np.ndarray

    def __post_init__(self):
        P = _csr(self.P)
        pi = np.asarray(self.pi, dtype=float)
        if P.shape[0] != pi.size:
            raise InputError("P and pi sizes differ")
        if P.nnz and P.data.min() < 0 or pi.min(initial=0.0) < 0:
            raise InputError("negative probabilities")
        if not np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-9):
            raise InputError("rows of P must sum to 1")
        if not np.allclose(P.T @ pi, pi, atol=1e-10, rtol=0):
            raise InputError("pi is not stationary for P")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)

    @property
    def n_states(self) -> int:
        return self.pi.size

    def sample_paths(self, length: int, count: int, rng) -> np.ndarray:
        """Stationary sample paths, shape (count, length)."""
        P = self.P
        cum_pi = np.cumsum(self.pi)
        paths = np.empty((count, length), dtype=np.int64)
        paths[:, 0] = np.minimum(np.searchsorted(cum_pi, rng.random(count) * cum_pi[-1]), self.n_states - 1)
        # one global cumulative array; row q occupies [indptr[q], indptr[q+1])
        cum = np.concatenate([[0.0], np.cumsum(P.data)])
        for t in range(1, length):
            lo, hi = P.indptr[paths[:, t - 1]], P.indptr[paths[:, t - 1] + 1]
            target = cum[lo] + rng.random(count) * (cum[hi] - cum[lo])
            j = np.clip(np.searchsorted(cum, target, side="right") - 1, lo, hi - 1)
            paths[:, t] = P.indices[j]
        return paths


def equilibrium_measure(W) -> MarkovMeasure:
    """Markov measure maximising h + integral of log-weights for a weighted matrix.

    For W = T the result is the Parry measure. P_ij = W_ij v_j / (rho v_i),
    pi_i proportional to u_i v_i with (u, v) the Perron vectors.
    """
    M = _csr(W)
    rho, v, u = perron_vectors(M)
    coo = M.tocoo()
    data = coo.data * v[coo.col] / (rho * v[coo.row])
    P = sp.csr_matrix((data, (coo.row, coo.col)), shape=M.shape)
    row = np.asarray(P.sum(axis=1)).ravel()
    P = sp.diags(1.0 / row) @ P
    pi = u * v
    pi = pi / pi.sum()
    # one stationarity sweep removes the residual of the iterative eigensolve
    pi = P.T @ pi
    return MarkovMeasure(P, pi / pi.sum())


def parry_measure(sft: Sft) -> MarkovMeasure:
    if not sft.irreducible:
        raise ReducibleError("Parry measure needs an irreducible SFT; restrict to a component first")
    return equilibrium_measure(sft.matrix)


def markov_entropy(m: MarkovMeasure) -> float:
    """-sum_i pi_i sum_j P_ij log P_ij in nats."""
    coo = m.P.tocoo()
    p = coo.data
    nz = p > 0
    return float(-np.sum(m.pi[coo.row[nz]] * p[nz] * np.log(p[nz])))


def random_markov_measure(sft: Sft, rng) -> MarkovMeasure:
    """Random Markov measure supported on the allowed transitions."""
    if not sft.irreducible:
        raise ReducibleError("random Markov measures are drawn on irreducible SFTs")
    coo = sft.matrix.tocoo()
    w = 0.05 + rng.random(coo.nnz)
    P = sp.csr_matrix((w, (coo.row, coo.col)), shape=sft.matrix.shape)
    P = sp.diags(1.0 / np.asarray(P.sum(axis=1)).ravel()) @ P
    _, _, u = perron_vectors(P)
    pi = P.T @ (u / u.sum())
    return MarkovMeasure(P, pi / pi.sum())


# -- word enumeration -------------------------------------------------------

class WordCount(NamedTuple):
    """Exact count when it fits in 62 bits, otherwise ``None``; log-count always."""

    count: int | None
    log_count: float


def enumerate_words(sft: Sft, length: int) -> WordCount:
    """Number of admissible state words of the given length (dynamic programming)."""
    if length < 1:
        raise InputError("word length must be >= 1")
    if sft.n_states == 0:
        return WordCount(0, -math.inf)
    M = _csr(sft.matrix)
    counts = np.ones(sft.n_states, dtype=np.int64)
    exact = True
    log_scale = 0.0
    fcounts = np.ones(sft.n_states)
    max_out = max(int(np.diff(M.indptr).max()), 1)
    for _ in range(length - 1):
        if exact and int(counts.max()) * max_out >= (1 << 62):
            exact = False
        if exact:
            counts = (M.astype(np.int64) @ counts).astype(np.int64)
        fcounts = M @ fcounts
        top = fcounts.max()
        if top == 0:
            return WordCount(0, -math.inf)
        log_scale += math.log(top)
        fcounts = fcounts / top
    log_count = log_scale + math.log(fcounts.sum()) if fcounts.sum() > 0 else -math.inf
    if exact:
        total = int(counts.sum())
        if total < (1 << 62):
            return WordCount(total, math.log(total) if total else -math.inf)
    return WordCount(None, log_count)


def iter_words(sft: Sft, length: int) -> Iterator[tuple]:
    """Admissible state words of the given length in lexicographic order."""
    if length < 1:
        raise InputError("word length must be >= 1")
    stack = [(q,) for q in range(sft.n_states - 1, -1, -1)]
    while stack:
        w = stack.pop()
        if len(w) == length:
            yield w
            continue
        for q in sft.successors(w[-1])[::-1]:
            stack.append(w + (int(q),))


def word_array(sft: Sft, length: int, budget: int = STATE_BUDGET) -> np.ndarray:
    """All admissible state words as an array (lexicographic rows)."""
    n = sft.n_states
    words = np.arange(n, dtype=np.int64).reshape(-1, 1)
    M = sft.matrix
    for _ in range(length - 1):
        last = words[:, -1]
        src, _, succ = _expand(np.zeros(words.shape[0], dtype=np.int64), last, M, 1)
        if src.size > budget:
            raise BudgetError(f"more than {budget} cylinders of length {length}")
        words = np.concatenate([words[src], succ.reshape(-1, 1)], axis=1)
    return words
