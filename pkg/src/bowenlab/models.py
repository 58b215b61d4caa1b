"""Concrete expanding maps with a Markov coding.

Three model kinds are supported:

``LinearToral``
    x -> A x mod 1 on the d-torus for an integer matrix A. The coding by
    inverse branches is implemented for positive diagonal A (the digit
    expansion in each axis); other matrices still support evaluation,
    Jacobians and every pressure computation, since their cocycle is constant.
``SftAffine``
    A finite family of affine contractions g_a(x) = L_a x + c_a of the unit
    cube, restricted by a 0/1 transition matrix. The expanding map is
    f = g_a^{-1} on the cell g_a([0,1]^d).
``PerturbedDoubling``
    x -> 2x + eps sin(2 pi x) mod 1, the nonlinear circle exemplar.

All models are immutable; every method is pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DomainError, InputError, ModelRejected

_CELL_TOL = 1e-12
EXPANSION_MARGIN = 1e-9


def _as_point(x, d):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (d,):
        raise InputError(f"expected a point with {d} coordinates, got shape {arr.shape}")
    return arr


class ModelSpec:
    """Common interface of the expanding-map models.

    Subclasses provide ``d``, ``alphabet``, ``transitions`` and the
    geometric hooks used by the symbolic machinery: ``branch`` (inverse
    branches), ``cell_of`` and, for affine models, ``symbol_jacobian``.
    """

    kind: str = ""
    d: int
    #: True when the Jacobian is constant on every cell.
    locally_constant: bool = True
    #: True when distances wrap around (torus metric).
    torus: bool = True

    # -- evaluation -----------------------------------------------------
    def evaluate(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    # -- coding ---------------------------------------------------------
    @property
    def alphabet(self) -> int:
        raise NotImplementedError

    @property
    def transitions(self) -> np.ndarray:
        return np.ones((self.alphabet, self.alphabet), dtype=np.int8)

    @property
    def has_coding(self) -> bool:
        return True

    def symbol_jacobian(self, a: int) -> np.ndarray:
        raise DomainError(f"{self.kind} has no per-symbol constant Jacobian")

    def branch(self, a, x):
        """Apply inverse branch ``a`` to points ``x`` of shape (N, d)."""
        raise NotImplementedError

    def cell_of(self, x) -> int:
        raise NotImplementedError

    def cell_box(self, a: int):
        """Closed axis-aligned box ``(lo, hi)`` of cell ``a``."""
        raise DomainError(f"{self.kind} cells are not axis-aligned boxes")

    @property
    def axis_aligned(self) -> bool:
        """True when every branch has a diagonal linear part."""
        return False

    def diagonal_scales(self) -> np.ndarray:
        """Per-symbol diagonal of the inverse-branch linear parts, shape (k, d)."""
        raise DomainError(f"{self.kind} branches are not diagonal")

    def distance(self, x, y):
        """Riemannian distance between rows of ``x`` and ``y`` (broadcasting)."""
        diff = np.abs(np.asarray(x, float) - np.asarray(y, float))
        if self.torus:
            diff = np.minimum(diff, 1.0 - diff)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def validation_points(self, sample_count: int, rng) -> np.ndarray:
        return rng.random((sample_count, self.d))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class LinearToral(ModelSpec):
    matrix: np.ndarray
    kind = "linear_toral"
    locally_constant = True
    torus = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError("linear_toral matrix must be square")
        if A.shape[0] > 3:
            raise InputError("models are limited to d <= 3")
        if not np.all(A == np.round(A)):
            raise InputError("linear_toral matrix must have integer entries")
        det = round(abs(np.linalg.det(A)))
        if det < 2:
            raise InputError(f"|det A| must be >= 2, got {det}")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "_det", det)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def alphabet(self) -> int:
        return self._det

    @property
    def is_diagonal(self) -> bool:
        A = self.matrix
        return bool(np.all(A == np.diag(np.diag(A))) and np.all(np.diag(A) >= 2))

    @property
    def has_coding(self) -> bool:
        return self.is_diagonal

    @property
    def axis_aligned(self) -> bool:
        return self.is_diagonal

    def _require_coding(self):
        if not self.is_diagonal:
            raise DomainError("inverse-branch coding is implemented for positive diagonal matrices only")

    @property
    def radices(self) -> np.ndarray:
        self._require_coding()
        return np.diag(self.matrix).astype(np.int64)

    def digits(self, a):
        """Per-axis digits of symbol(s) ``a``; axis 0 is the most significant."""
        a = np.asarray(a, dtype=np.int64)
        out = np.empty(a.shape + (self.d,), dtype=np.int64)
        rest = a.copy()
        for i in range(self.d - 1, -1, -1):
            out[..., i] = rest % self.radices[i]
            rest = rest // self.radices[i]
        return out

    def symbol(self, digits) -> int:
        idx = 0
        for i, dig in enumerate(digits):
            idx = idx * int(self.radices[i]) + int(dig)
        return idx

    def evaluate(self, x):
        x = _as_point(x, self.d)
        return np.mod(self.matrix @ x, 1.0)

    def jacobian(self, x=None):
        if x is not None:
            _as_point(x, self.d)
        return self.matrix.copy()

    def symbol_jacobian(self, a: int) -> np.ndarray:
        return self.matrix.copy()

    def branch(self, a, x):
        x = np.asarray(x, dtype=float)
        return (x + self.digits(a)) / self.radices

    def cell_of(self, x) -> int:
        self._require_coding()
        x = np.mod(_as_point(x, self.d), 1.0)
        dig = np.minimum(np.floor(x * self.radices).astype(np.int64), self.radices - 1)
        return self.symbol(dig)

    def cell_box(self, a: int):
        dig = self.digits(a)
        return dig / self.radices, (dig + 1) / self.radices

    def diagonal_scales(self) -> np.ndarray:
        self._require_coding()
        return np.tile(1.0 / self.radices, (self.alphabet, 1))

    def validation_points(self, sample_count, rng):
        return np.zeros((1, self.d))

    def to_dict(self):
        return {"kind": self.kind, "matrix": self.matrix.astype(int).tolist()}


@dataclass(frozen=True, eq=False)
class SftAffine(ModelSpec):
    transitions_matrix: np.ndarray
    linear: np.ndarray
    offset: np.ndarray
    kind = "sft_affine"
    locally_constant = True
    torus = False

    def __post_init__(self):
        T = np.asarray(self.transitions_matrix)
        L = np.asarray(self.linear, dtype=float)
        c = np.asarray(self.offset, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise InputError("transition matrix must be square")
        if not np.all((T == 0) | (T == 1)):
            raise InputError("transition matrix must be 0/1")
        k = T.shape[0]
        if L.ndim == 1:
            L = L.reshape(k, 1, 1)
        if c.ndim == 1:
            c = c.reshape(k, 1)
        if L.shape[0] != k or c.shape[0] != k:
            raise InputError(f"need exactly {k} branches, got {L.shape[0]}")
        d = L.shape[1]
        if L.shape != (k, d, d) or c.shape != (k, d):
            raise InputError("branch linear parts must be d x d and offsets length d")
        if d > 3:
            raise InputError("models are limited to d <= 3")
        for a in range(k):
            if abs(np.linalg.det(L[a])) == 0.0:
                raise InputError(f"branch {a} has a singular linear part")
            corners = self._corners(L[a], c[a])
            if corners.min() < -_CELL_TOL or corners.max() > 1 + _CELL_TOL:
                raise InputError(f"branch {a} does not map the unit cube into itself")
        if max(abs(np.linalg.eigvals(T.astype(float)))) < 0.5:
            raise InputError("transition matrix is nilpotent (empty subshift)")
        for arr in (T, L, c):
            arr.setflags(write=False)
        object.__setattr__(self, "transitions_matrix", T.astype(np.int8))
        object.__setattr__(self, "linear", L)
        object.__setattr__(self, "offset", c)
        object.__setattr__(self, "_inv", np.linalg.inv(L))
        if self.axis_aligned:
            self._check_disjoint_cells()

    @staticmethod
    def _corners(L, c):
        d = L.shape[0]
        cube = np.array(np.meshgrid(*[[0.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
        return cube @ L.T + c

    def _check_disjoint_cells(self):
        boxes = [self.cell_box(a) for a in range(self.alphabet)]
        for a in range(self.alphabet):
            for b in range(a + 1, self.alphabet):
                overlap = np.minimum(boxes[a][1], boxes[b][1]) - np.maximum(boxes[a][0], boxes[b][0])
                if np.all(overlap > _CELL_TOL):
                    raise InputError(f"cells {a} and {b} overlap; the coding would be ambiguous")

    @property
    def d(self) -> int:
        return self.linear.shape[1]

    @property
    def alphabet(self) -> int:
        return self.transitions_matrix.shape[0]

    @property
    def transitions(self) -> np.ndarray:
        return self.transitions_matrix.copy()

    @property
    def axis_aligned(self) -> bool:
        off = self.linear - np.einsum("kii->ki", self.linear)[:, :, None] * np.eye(self.d)
        return bool(np.all(off == 0))

    def diagonal_scales(self) -> np.ndarray:
        if not self.axis_aligned:
            raise DomainError("branches are not diagonal")
        return np.einsum("kii->ki", self.linear).copy()

    def cell_box(self, a: int):
        corners = self._corners(self.linear[a], self.offset[a])
        return corners.min(axis=0), corners.max(axis=0)

    def _contains(self, a, x, tol=_CELL_TOL):
        y = self._inv[a] @ (x - self.offset[a])
        return bool(np.all(y >= -tol) and np.all(y <= 1 + tol))

    def cell_of(self, x) -> int:
        x = _as_point(x, self.d)
        for a in range(self.alphabet):
            if self._contains(a, x):
                return a
        raise DomainError(f"point {x.tolist()} lies outside every cell")

    def evaluate(self, x):
        x = _as_point(x, self.d)
        a = self.cell_of(x)
        return np.clip(self._inv[a] @ (x - self.offset[a]), 0.0, 1.0)

    def jacobian(self, x):
        return self._inv[self.cell_of(x)].copy()

    def symbol_jacobian(self, a: int) -> np.ndarray:
        return self._inv[a].copy()

    def branch(self, a, x):
        x = np.asarray(x, dtype=float)
        a = np.asarray(a)
        if a.ndim == 0:
            return x @ self.linear[a].T + self.offset[a]
        return np.einsum("nij,nj->ni", self.linear[a], x) + self.offset[a]

    def validation_points(self, sample_count, rng):
        # constant Jacobian per cell: one interior point per cell is exact
        return np.array([self.branch(a, np.full(self.d, 0.5)) for a in range(self.alphabet)])

    def to_dict(self):
        return {
            "kind": self.kind,
            "alphabet": self.alphabet,
            "transitions": self.transitions_matrix.astype(int).tolist(),
            "branches": [
                {"linear": self.linear[a].tolist(), "offset": self.offset[a].tolist()}
                for a in range(self.alphabet)
            ],
        }


@dataclass(frozen=True, eq=False)
class PerturbedDoubling(ModelSpec):
    epsilon: float
    kind = "perturbed_doubling"
    locally_constant = False
    torus = True
    d: int = field(default=1, init=False)

    @property
    def alphabet(self) -> int:
        return 2

    def derivative(self, x):
        return 2.0 + 2.0 * math.pi * self.epsilon * np.cos(2.0 * math.pi * np.asarray(x, dtype=float))

    def evaluate(self, x):
        x = _as_point(x, 1)
        return np.mod(2.0 * x + self.epsilon * np.sin(2.0 * math.pi * x), 1.0)

    def jacobian(self, x):
        x = _as_point(x, 1)
        return np.array([[float(self.derivative(x[0]))]])

    def branch(self, a, x):
        """Solve 2y + eps sin(2 pi y) = x + a for y in [a/2, (a+1)/2] by Newton."""
        x = np.asarray(x, dtype=float)
        a = np.asarray(a, dtype=float)
        if a.ndim:
            a = a.reshape(-1, 1)
        target = x + a
        y = target / 2.0
        for _ in range(60):
            g = 2.0 * y + self.epsilon * np.sin(2.0 * math.pi * y) - target
            y_new = y - g / self.derivative(y)
            if np.max(np.abs(y_new - y), initial=0.0) < 1e-16:
                y = y_new
                break
            y = y_new
        return y

    def log_derivative_range(self, lo, hi):
        """Min and max of log f' over intervals [lo, hi] inside [0, 1].

        f' is extremal at 0, 1/2 and 1 only, so the endpoints plus an
        interior 1/2 decide both.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        a, b = np.log(self.derivative(lo)), np.log(self.derivative(hi))
        mid = math.log(2.0 - 2.0 * math.pi * self.epsilon)
        inside = (lo < 0.5) & (hi > 0.5)
        lo_val, hi_val = np.minimum(a, b), np.maximum(a, b)
        if self.epsilon > 0:
            lo_val = np.where(inside, np.minimum(lo_val, mid), lo_val)
        else:
            hi_val = np.where(inside, np.maximum(hi_val, mid), hi_val)
        return lo_val, hi_val

    def cell_of(self, x) -> int:
        x = float(np.mod(_as_point(x, 1)[0], 1.0))
        return 0 if x < 0.5 else 1

    def validation_points(self, sample_count, rng):
        grid = (np.arange(sample_count) + 0.5) / sample_count
        return np.concatenate([[0.0, 0.5], grid]).reshape(-1, 1)

    def to_dict(self):
        return {"kind": self.kind, "epsilon": self.epsilon}


@dataclass(frozen=True)
class ExpansionReport:
    min_singular_value: float
    expansion_constant: float
    witness: tuple
    passed: bool


def validate_expanding(model: ModelSpec, sample_count: int = 1000, seed: int = 0) -> ExpansionReport:
    """Infimum over sample points of the smallest singular value of D_x f.

    Raises :class:`ModelRejected` naming the witness point when the
    expansion constant does not exceed 1.
    """
    if sample_count < 1:
        raise InputError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    best, witness = math.inf, None
    for x in model.validation_points(sample_count, rng):
        sv = np.linalg.svd(model.jacobian(x), compute_uv=False)
        if sv[-1] < best:
            best, witness = float(sv[-1]), tuple(float(v) for v in x)
    passed = best > 1.0 + EXPANSION_MARGIN
    report = ExpansionReport(best, best, witness, passed)
    if not passed:
        raise ModelRejected(
            f"{model.kind} is not expanding: smallest singular value {best:.6g} at x={witness}",
            witness=witness,
        )
    return report


# -- convenience constructors ----------------------------------------------

def doubling() -> LinearToral:
    return LinearToral(np.array([[2]]))


def diagonal_torus(*entries) -> LinearToral:
    return LinearToral(np.diag(entries))


def carpet_model(rows: int, cols: int, digits) -> SftAffine:
    """Bedford-McMullen carpet: columns of width 1/cols, rows of height 1/rows.

    ``digits`` are ``(col, row)`` pairs; the expanding map is
    ``(x, y) -> (cols x, rows y)`` restricted to the chosen rectangles.
    """
    digits = sorted(set(tuple(map(int, t)) for t in digits))
    if not digits:
        raise InputError("a carpet needs at least one digit")
    for col, row in digits:
        if not (0 <= col < cols and 0 <= row < rows):
            raise InputError(f"digit {(col, row)} outside the {cols}x{rows} grid")
    k = len(digits)
    L = np.tile(np.diag([1.0 / cols, 1.0 / rows]), (k, 1, 1))
    c = np.array([[col / cols, row / rows] for col, row in digits])
    return SftAffine(np.ones((k, k), dtype=np.int8), L, c)


def interval_sft(transitions, ratios, offsets) -> SftAffine:
    """One-dimensional SftAffine model from contraction ratios and offsets."""
    ratios = np.asarray(ratios, dtype=float)
    return SftAffine(
        np.asarray(transitions),
        ratios.reshape(-1, 1, 1),
        np.asarray(offsets, dtype=float).reshape(-1, 1),
    )


# -- config files -----------------------------------------------------------

def _num(v):
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"cannot parse number {v!r}") from exc
    if isinstance(v, list):
        return [_num(u) for u in v]
    return float(v)


def model_from_dict(cfg: dict) -> ModelSpec:
    """Build a model from its JSON-style description."""
    try:
        kind = cfg["kind"]
        if kind == "linear_toral":
            return LinearToral(np.array(_num(cfg["matrix"])))
        if kind == "sft_affine":
            branches = cfg["branches"]
            T = np.array(cfg["transitions"])
            if "alphabet" in cfg and cfg["alphabet"] != len(branches):
                raise InputError("alphabet size does not match the number of branches")
            L = np.array([_num(b["linear"]) for b in branches], dtype=float)
            c = np.array([_num(b["offset"]) for b in branches], dtype=float)
            return SftAffine(T, L, c)
        if kind == "perturbed_doubling":
            return PerturbedDoubling(_num(cfg["epsilon"]))
        if kind == "carpet":
            return carpet_model(cfg["rows"], cfg["cols"], cfg["digits"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed model config: {exc}") from exc
    raise InputError(f"unknown model kind {cfg.get('kind')!r}")


def load_model(path, validate: bool = True) -> ModelSpec:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"model file {path} is not valid JSON: {exc}") from exc
    model = model_from_dict(cfg)
    if validate:
        validate_expanding(model)
    return model
