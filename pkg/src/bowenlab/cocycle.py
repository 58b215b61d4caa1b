"""Derivative cocycles, singular values and the singular-valued potentials.

For a d x d matrix with singular values a_1 >= ... >= a_d and 0 <= s <= d
(k = floor(s)):

    phi^s = log a_{d-k+1} + ... + log a_d + (s - k) log a_{d-k}
    psi^s = log a_1 + ... + log a_k + (s - k) log a_{k+1}

phi uses the smallest singular values and psi the largest; at s = d the
fractional term is dropped and both equal log |det|.

A :class:`Repeller` couples a model with an SFT over the model's alphabet
and evaluates these potentials on cylinders, at the canonical
representative of each cylinder: the point whose coding continues the
cylinder word with the greedy smallest-successor tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InputError, PropertyFailure
from .models import LinearToral, ModelSpec, PerturbedDoubling, SftAffine
from .symbolic import MarkovMeasure, Sft, _expand, enumerate_words, parry_measure, perron_vectors

TAIL_LENGTH = 128
EXHAUSTIVE_LIMIT = 1 << 24
MC_SAMPLES = 100_000


def philox(seed: int = 0) -> np.random.Generator:
    """Counter-based generator: streams do not depend on thread scheduling."""
    return np.random.Generator(np.random.Philox(seed))


# -- singular values ----------------------------------------------------------

@dataclass(frozen=True)
class SingularValueVector:
    values: np.ndarray
    steps: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v <= 0) or np.any(np.diff(v) > 1e-12 * v[0]):
            raise DomainError("singular values must be positive and sorted descending")
        object.__setattr__(self, "values", v)

    @property
    def logs(self) -> np.ndarray:
        return np.log(self.values)

    def __len__(self):
        return self.values.size


def log_singular_values(J) -> np.ndarray:
    """Descending log singular values of matrices ``J`` with shape (..., d, d).

    The largest value comes from LAPACK; the others from exterior powers
    (|det| and, for d = 3, the norm of the second compound), which keeps the
    small values relatively accurate for long, badly conditioned products.
    """
    J = np.asarray(J, dtype=float)
    d = J.shape[-1]
    if J.shape[-2] != d:
        raise InputError("singular values need square matrices")
    if d == 1:
        out = np.log(np.abs(J[..., 0, :]))
        if not np.all(np.isfinite(out)):
            raise DomainError("singular matrix")
        return out
    det = np.abs(np.linalg.det(J))
    if np.any(det == 0):
        raise DomainError("singular matrix")
    top = np.linalg.svd(J, compute_uv=False)[..., 0]
    if d == 2:
        return np.stack([np.log(top), np.log(det) - np.log(top)], axis=-1)
    c1, c2, c3 = J[..., :, 0], J[..., :, 1], J[..., :, 2]
    cof = np.stack([np.cross(c2, c3), np.cross(c3, c1), np.cross(c1, c2)], axis=-1)
    top2 = np.linalg.svd(cof, compute_uv=False)[..., 0]
    l1, l12, l123 = np.log(top), np.log(top2), np.log(det)
    return np.stack([l1, l12 - l1, l123 - l12], axis=-1)


def singular_values(J) -> SingularValueVector:
    J = np.atleast_2d(np.asarray(J, dtype=float))
    return SingularValueVector(np.exp(log_singular_values(J)))


# -- potentials ---------------------------------------------------------------

def _split(s: float, d: int):
    if not (0.0 <= s <= d):
        raise InputError(f"s = {s} outside [0, {d}]")
    k = int(math.floor(s))
    return k, s - k


def phi_from_logs(logsv, s: float):
    """phi^s from descending log singular values (last axis)."""
    logsv = np.asarray(logsv, dtype=float)
    d = logsv.shape[-1]
    k, frac = _split(s, d)
    out = logsv[..., d - k:].sum(axis=-1)
    if k < d:
        out = out + frac * logsv[..., d - k - 1]
    return out


def psi_from_logs(logsv, s: float):
    """psi^s from descending log singular values (last axis)."""
    logsv = np.asarray(logsv, dtype=float)
    d = logsv.shape[-1]
    k, frac = _split(s, d)
    out = logsv[..., :k].sum(axis=-1)
    if k < d:
        out = out + frac * logsv[..., k]
    return out


def cocycle_product(model: ModelSpec, x, n: int) -> np.ndarray:
    """D_x f^n = D f(f^{n-1} x) ... D f(x) along the float orbit of x."""
    if n < 1:
        raise InputError("n must be >= 1")
    x = np.asarray(x, dtype=float).reshape(-1)
    J = np.eye(model.d)
    for _ in range(n):
        J = model.jacobian(x) @ J
        x = model.evaluate(x)
    return J


@dataclass(frozen=True)
class Cylinder:
    """A word over the model's alphabet, evaluated at its canonical representative."""

    word: tuple

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(int(a) for a in self.word))


def _log_sv_at(model: ModelSpec, where, n: int) -> np.ndarray:
    if isinstance(where, Cylinder):
        rep = Repeller.full(model)
        word = np.asarray(where.word, dtype=np.int64)
        if word.size < n:
            word = np.concatenate([word, rep.greedy_extension(word, n - word.size)])
        if rep.locally_constant:
            return rep.path_log_sv(word[None, :n])[0]
        pts = rep.orbit_points(word[None, :])[0, :n, 0]
        return np.array([np.log(np.abs(model.derivative(pts))).sum()])
    return log_singular_values(cocycle_product(model, where, n))


def phi_s(model: ModelSpec, where, n: int, s: float) -> float:
    """phi^s(x, f^n) at a point, or at the representative of a :class:`Cylinder`."""
    return float(phi_from_logs(_log_sv_at(model, where, n), s))


def psi_s(model: ModelSpec, where, n: int, s: float) -> float:
    """psi^s(x, f^n) at a point, or at the representative of a :class:`Cylinder`."""
    return float(psi_from_logs(_log_sv_at(model, where, n), s))


# -- repellers ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Repeller:
    """An expanding model restricted to the points coded by an SFT."""

    model: ModelSpec
    sft: Sft

    def __post_init__(self):
        if self.sft.n_states and int(self.sft.labels.max()) >= self.model.alphabet:
            raise InputError("SFT labels exceed the model alphabet")
        if self.sft.block_length == 1 and self.sft.n_states == self.model.alphabet:
            T = self.model.transitions
            if np.any(self.sft.dense() > T):
                raise InputError("SFT allows transitions the model forbids")

    @classmethod
    def full(cls, model: ModelSpec) -> "Repeller":
        return cls(model, Sft.from_matrix(model.transitions))

    def restrict(self, sft: Sft) -> "Repeller":
        return Repeller(self.model, sft)

    @property
    def d(self) -> int:
        return self.model.d

    # Jacobian structure -------------------------------------------------------
    @cached_property
    def letter_jacobians(self):
        """Per-letter constant Jacobians, or None for nonlinear models."""
        if not self.model.locally_constant:
            return None
        return np.array([self.model.symbol_jacobian(a) for a in range(self.model.alphabet)])

    @cached_property
    def _used_letters(self) -> np.ndarray:
        return np.unique(self.sft.first_letters)

    @cached_property
    def uniform(self) -> bool:
        """Same Jacobian on every used cell (constant cocycle)."""
        J = self.letter_jacobians
        if J is None:
            return False
        used = J[self._used_letters]
        return bool(np.all(used == used[0]))

    @cached_property
    def _diag_order(self):
        J = self.letter_jacobians
        if J is None:
            return None
        used = J[self._used_letters]
        eye = np.eye(self.d, dtype=bool)
        if not np.all(used[:, ~eye] == 0):
            return None
        diag = np.abs(np.einsum("kii->ki", used))
        order = np.argsort(-diag[0], kind="stable")
        if np.all(np.diff(diag[:, order], axis=1) <= 0):
            return order
        return None

    @cached_property
    def additive(self) -> bool:
        """Singular values multiply along orbits: d = 1, or commuting diagonal
        Jacobians that all order their axes the same way."""
        if self.letter_jacobians is None:
            return False
        return self.d == 1 or self._diag_order is not None

    @property
    def locally_constant(self) -> bool:
        return self.letter_jacobians is not None

    @cached_property
    def state_log_sv(self) -> np.ndarray:
        """Descending log singular values of each state's one-step Jacobian."""
        J = self.letter_jacobians
        if J is None:
            raise DomainError("nonlinear model: no per-state constant Jacobian")
        return log_singular_values(J[self.sft.first_letters])

    # Representatives -----------------------------------------------------------
    @cached_property
    def _min_successor(self) -> np.ndarray:
        M = self.sft.matrix
        out = np.full(self.sft.n_states, -1, dtype=np.int64)
        has = np.diff(M.indptr) > 0
        out[has] = M.indices[M.indptr[:-1][has]]
        return out

    @cached_property
    def _tail_points(self) -> np.ndarray:
        """Point coded by the greedy tail after each state, shape (n_states, d)."""
        n = self.sft.n_states
        chain = np.empty((n, TAIL_LENGTH), dtype=np.int64)
        q = np.arange(n)
        succ = self._min_successor
        if np.any(succ < 0):
            raise DomainError("SFT has dead-end states; prune it first")
        for j in range(TAIL_LENGTH):
            q = succ[q]
            chain[:, j] = q
        letters = self.sft.first_letters[chain]
        y = np.full((n, self.d), 0.5)
        for j in range(TAIL_LENGTH - 1, -1, -1):
            y = self.model.branch(letters[:, j], y)
        return y

    def greedy_extension(self, word, length: int) -> np.ndarray:
        """Letters of the greedy tail continuing a base word (full-shift coding)."""
        q = int(word[-1]) if len(word) else 0
        out = []
        succ = Sft.from_matrix(self.model.transitions)
        for _ in range(length):
            q = int(succ.successors(q)[0])
            out.append(q)
        return np.asarray(out, dtype=np.int64)

    def representatives(self, paths) -> np.ndarray:
        """Canonical representative of each path of states, shape (N, d)."""
        paths = np.atleast_2d(np.asarray(paths, dtype=np.int64))
        letters = self.sft.first_letters[paths]
        y = self._tail_points[paths[:, -1]]
        for i in range(paths.shape[1] - 1, -1, -1):
            y = self.model.branch(letters[:, i], y)
        return y

    def orbit_points(self, paths) -> np.ndarray:
        """Representatives of every suffix: f^i x for 0 <= i < n, shape (N, n, d)."""
        paths = np.atleast_2d(np.asarray(paths, dtype=np.int64))
        N, n = paths.shape
        letters = self.sft.first_letters[paths]
        out = np.empty((N, n, self.d))
        y = self._tail_points[paths[:, -1]]
        for i in range(n - 1, -1, -1):
            y = self.model.branch(letters[:, i], y)
            out[:, i] = y
        return out

    def cylinder_intervals(self, paths):
        """Closed interval of each path's base-word cylinder (d = 1 full-shift models)."""
        if self.d != 1:
            raise DomainError("cylinder intervals are defined for d = 1")
        paths = np.atleast_2d(np.asarray(paths, dtype=np.int64))
        words = np.concatenate(
            [self.sft.labels[paths[:, 0]], self.sft.last_letters[paths[:, 1:]]], axis=1
        )
        lo = np.zeros((paths.shape[0], 1))
        hi = np.ones((paths.shape[0], 1))
        for i in range(words.shape[1] - 1, -1, -1):
            lo = self.model.branch(words[:, i], lo)
            hi = self.model.branch(words[:, i], hi)
        return lo[:, 0], hi[:, 0]

    # Cocycle along paths -------------------------------------------------------
    def path_products(self, paths) -> np.ndarray:
        """J_{a_{n-1}} ... J_{a_0} for each path (locally constant models)."""
        J = self.letter_jacobians
        if J is None:
            raise DomainError("nonlinear model: use path_log_sv")
        paths = np.atleast_2d(np.asarray(paths, dtype=np.int64))
        letters = self.sft.first_letters[paths]
        out = J[letters[:, 0]]
        for i in range(1, paths.shape[1]):
            out = J[letters[:, i]] @ out
        return out

    def path_log_sv(self, paths) -> np.ndarray:
        """Descending log singular values of D f^n at each path's representative."""
        paths = np.atleast_2d(np.asarray(paths, dtype=np.int64))
        if self.additive:
            return self.state_log_sv[paths].sum(axis=1)
        if self.locally_constant:
            return log_singular_values(self.path_products(paths))
        if self.d != 1:
            raise DomainError("nonlinear cocycles are supported in d = 1 only")
        pts = self.orbit_points(paths)[..., 0]
        deriv = self.model.derivative(pts)
        return np.log(np.abs(deriv)).sum(axis=1, keepdims=True)


# -- Lyapunov spectra -----------------------------------------------------------

@dataclass(frozen=True)
class LyapunovSpectrum:
    exponents: np.ndarray
    measure: str
    depth: int
    stderr: np.ndarray
    method: str

    @property
    def total(self) -> float:
        return float(np.sum(self.exponents))

    @property
    def smallest(self) -> float:
        return float(self.exponents[-1])


def _iter_paths(sft: Sft, length: int, chunk: int = 1 << 18):
    """Admissible state paths in lexicographic order, in chunks."""
    starts = np.arange(sft.n_states)
    counts = enumerate_words(sft, length)
    per_start = max(1, int(chunk * sft.n_states / max(counts.count or EXHAUSTIVE_LIMIT, 1)))
    for lo in range(0, sft.n_states, per_start):
        words = starts[lo:lo + per_start].reshape(-1, 1).astype(np.int64)
        for _ in range(length - 1):
            src, _, succ = _expand(np.zeros(words.shape[0], dtype=np.int64), words[:, -1], sft.matrix, 1)
            words = np.concatenate([words[src], succ.reshape(-1, 1)], axis=1)
        yield words


def _path_weights(m: MarkovMeasure, paths) -> np.ndarray:
    w = m.pi[paths[:, 0]].copy()
    for i in range(1, paths.shape[1]):
        w *= np.asarray(m.P[paths[:, i - 1], paths[:, i]]).ravel()
    return w


def constant_exponents(J) -> np.ndarray:
    """Exponents of a constant cocycle: lim (1/n) log a_i(J^n) = log|eig_i(J)|."""
    J = np.asarray(J, dtype=float)
    if np.count_nonzero(J - np.diag(np.diagonal(J))) == 0:
        vals = np.abs(np.diagonal(J))
    else:
        vals = np.abs(np.linalg.eigvals(J))
    return np.sort(np.log(vals))[::-1]


def lyapunov_spectrum(
    rep: Repeller,
    measure="parry",
    depth: int = 8,
    seed: int = 0,
    samples: int = MC_SAMPLES,
) -> LyapunovSpectrum:
    """Lyapunov exponents (1/n) E[log a_i(x, f^n)] at n = depth.

    ``measure`` is a :class:`MarkovMeasure` on ``rep.sft``, ``"parry"`` or
    ``"lebesgue"``. Constant and additive cocycles are evaluated in closed
    form; otherwise the cylinder sum is exhaustive when there are at most
    2^24 cylinders and Monte Carlo (Philox stream ``seed``) beyond.
    """
    if depth < 1:
        raise InputError("depth must be >= 1")
    d = rep.d
    zero = np.zeros(d)
    if isinstance(measure, str) and measure == "lebesgue":
        model = rep.model
        if isinstance(model, LinearToral):
            return LyapunovSpectrum(constant_exponents(model.matrix), "lebesgue", depth, zero, "exact")
        if isinstance(model, PerturbedDoubling):
            return birkhoff_lyapunov(model, seed=seed, samples=samples)
        raise InputError("the Lebesgue reference is available for toral models only")
    tag = "markov"
    if isinstance(measure, str):
        if measure != "parry":
            raise InputError(f"unknown measure {measure!r}")
        tag = "parry"
        if rep.uniform:
            measure = None
        else:
            measure = parry_measure(rep.sft)
    elif not isinstance(measure, MarkovMeasure):
        raise InputError("measure must be a MarkovMeasure, 'parry' or 'lebesgue'")
    if measure is not None and measure.n_states != rep.sft.n_states:
        raise InputError("measure and SFT have different state counts")

    if rep.uniform:
        lam = constant_exponents(rep.letter_jacobians[rep._used_letters[0]])
        return LyapunovSpectrum(lam, tag, depth, zero, "exact")
    if rep.additive:
        lam = measure.pi @ rep.state_log_sv
        return LyapunovSpectrum(lam, tag, depth, zero, "exact")

    if rep.locally_constant:
        def stat(paths):
            return rep.path_log_sv(paths) / paths.shape[1]
        length = depth
    else:
        # invariance: E log f'(x) at the depth-n representative
        def stat(paths):
            return np.log(np.abs(rep.model.derivative(rep.representatives(paths)[:, 0])))[:, None]
        length = depth
    count = enumerate_words(rep.sft, length).count
    if count is not None and count <= EXHAUSTIVE_LIMIT:
        acc = np.zeros(d)
        for paths in _iter_paths(rep.sft, length):
            acc += _path_weights(measure, paths) @ stat(paths)
        return LyapunovSpectrum(acc, tag, depth, zero, "exhaustive")
    rng = philox(seed)
    paths = measure.sample_paths(length, samples, rng)
    vals = stat(paths)
    return LyapunovSpectrum(
        vals.mean(axis=0), tag, depth, vals.std(axis=0, ddof=1) / math.sqrt(samples), "monte-carlo"
    )


def birkhoff_lyapunov(
    model: PerturbedDoubling, seed: int = 0, samples: int = MC_SAMPLES, burn_in: int = 32, steps: int = 100
) -> LyapunovSpectrum:
    """Exponent of the a.c. invariant measure from Birkhoff averages of log f'.

    ``samples / steps`` Lebesgue-random starts each contribute ``steps``
    terms after a burn-in; the standard error comes from the per-start means.
    """
    starts = max(2, samples // steps)
    x = philox(seed).random(starts)
    for _ in range(burn_in):
        x = np.mod(2.0 * x + model.epsilon * np.sin(2.0 * math.pi * x), 1.0)
    acc = np.zeros(starts)
    for _ in range(steps):
        acc += np.log(model.derivative(x))
        x = np.mod(2.0 * x + model.epsilon * np.sin(2.0 * math.pi * x), 1.0)
    means = acc / steps
    err = means.std(ddof=1) / math.sqrt(starts)
    return LyapunovSpectrum(np.array([means.mean()]), "lebesgue", steps, np.array([err]), "birkhoff")


def ulam_lyapunov(model: PerturbedDoubling, bins: int = 4096, per_bin: int = 32) -> float:
    """Independent estimate of the a.c.i.m. exponent via Ulam's method.

    The transfer operator is discretised on ``bins`` equal intervals; the
    exponent is the stationary density integrated against log f'.
    """
    offsets = (np.arange(per_bin) + 0.5) / per_bin
    pts = (np.arange(bins)[:, None] + offsets[None, :]) / bins
    img = np.minimum((np.mod(2.0 * pts + model.epsilon * np.sin(2.0 * math.pi * pts), 1.0) * bins).astype(int), bins - 1)
    rows = np.repeat(np.arange(bins), per_bin)
    P = sp.csr_matrix((np.full(rows.size, 1.0 / per_bin), (rows, img.ravel())), shape=(bins, bins))
    _, _, u = perron_vectors(P)
    density = u / u.sum()
    return float(density @ np.log(model.derivative(pts)).mean(axis=1))


# -- sub-additivity -------------------------------------------------------------

@dataclass(frozen=True)
class SubadditivityReport:
    s: float
    trials: int
    worst_phi_margin: float
    worst_psi_margin: float
    witness: tuple | None
    passed: bool


def check_subadditivity(model: ModelSpec, s: float, trials: int = 1000, seed: int = 0,
                        max_len: int = 20, tol: float = 1e-9) -> SubadditivityReport:
    """Sample phi^s(x, f^{m+n}) >= phi^s(x, f^n) + phi^s(f^n x, f^m) and the
    reverse inequality for psi^s.

    Locally constant cocycles are sampled along random admissible words
    (exact products); nonlinear ones along float orbits of random points.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    _split(s, model.d)
    rng = philox(seed)
    full = Repeller.full(model) if model.locally_constant else None
    worst_phi, worst_psi, witness = math.inf, math.inf, None
    T = np.asarray(model.transitions)
    for t in range(trials):
        n = int(rng.integers(1, max_len + 1))
        m = int(rng.integers(1, max_len + 1))
        if full is not None:
            word = [int(rng.integers(model.alphabet))]
            for _ in range(n + m - 1):
                word.append(int(rng.choice(np.flatnonzero(T[word[-1]]))))
            word = np.asarray(word)
            J = full.letter_jacobians
            prod = [np.eye(model.d)]
            for a in word:
                prod.append(J[a] @ prod[-1])
            Jn, Jmn = prod[n], prod[n + m]
            Jm = np.eye(model.d)
            for a in word[n:]:
                Jm = J[a] @ Jm
            where = tuple(word.tolist())
        else:
            x = rng.random(model.d)
            Jn = cocycle_product(model, x, n)
            Jmn = cocycle_product(model, x, n + m)
            y = x
            for _ in range(n):
                y = model.evaluate(y)
            Jm = cocycle_product(model, y, m)
            where = tuple(x.tolist())
        L = log_singular_values(np.stack([Jmn, Jn, Jm]))
        mphi = phi_from_logs(L[0], s) - phi_from_logs(L[1], s) - phi_from_logs(L[2], s)
        mpsi = psi_from_logs(L[1], s) + psi_from_logs(L[2], s) - psi_from_logs(L[0], s)
        if min(mphi, mpsi) < min(worst_phi, worst_psi):
            witness = (where, n, m)
        worst_phi, worst_psi = min(worst_phi, float(mphi)), min(worst_psi, float(mpsi))
    passed = worst_phi >= -tol and worst_psi >= -tol
    report = SubadditivityReport(s, trials, worst_phi, worst_psi, witness, passed)
    if not passed:
        raise PropertyFailure(
            f"sub-additivity violated at s={s}: margins phi {worst_phi:.3g}, psi {worst_psi:.3g}",
            witness=witness,
        )
    return report
