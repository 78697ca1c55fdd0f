"""Predictable matrix-valued integrands and frame fields.

An integrand is evaluated on a *window*: a batch of paths restricted to left
grid endpoints ``t_0 .. t_{L-1}``. Evaluators return one ``n x d`` matrix per
(path, step) and may only use the window they are handed, so an evaluator
called for step ``i`` never sees driver values after ``t_i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from martdim.errors import DimensionMismatch, IndexOutOfRange, InvalidArgument
from martdim.paths import BrownianPaths


@dataclass(frozen=True)
class Window:
    """Left-endpoint slice of a path set handed to evaluators.

    ``z`` is ``(B, L, d)``; ``paths`` and ``steps`` give the absolute path and
    step indices so that sample-backed integrands can look themselves up.
    """

    z: np.ndarray
    t: np.ndarray
    paths: np.ndarray
    steps: np.ndarray


Evaluator = Callable[[Window], np.ndarray]


class MatrixIntegrand:
    """An ``n x d`` predictable matrix process.

    ``constant`` marks integrands that do not depend on the driver (used for the
    sign convention of the Gram-Schmidt factorization). ``markovian`` marks
    integrands depending on ``Z(t_i)`` only.
    """

    def __init__(self, n: int, d: int, evaluator: Evaluator, name: str = "integrand",
                 constant: bool = False, markovian: bool = True):
        if n < 1 or d < 1:
            raise InvalidArgument(f"integrand shape must be positive, got {n}x{d}")
        self.n = int(n)
        self.d = int(d)
        self._evaluator = evaluator
        self.name = name
        self.constant = constant
        self.markovian = markovian

    def __repr__(self):
        return f"MatrixIntegrand({self.name}, {self.n}x{self.d})"

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.d)

    def on_window(self, window: Window) -> np.ndarray:
        out = np.asarray(self._evaluator(window), dtype=np.float64)
        expected = (window.z.shape[0], window.z.shape[1], self.n, self.d)
        if out.shape != expected:
            out = np.broadcast_to(out, expected)
        return out

    def sample(self, paths: BrownianPaths, path_slice: slice = slice(None)) -> np.ndarray:
        """Samples at every left endpoint, shape ``(B, N, n, d)``."""
        self._check_driver(paths)
        idx = np.arange(paths.M)[path_slice]
        z = paths.values[path_slice, :-1, :]
        steps = np.arange(paths.grid.N)
        return np.array(self.on_window(Window(z, paths.grid.times[:-1], idx, steps)))

    def evaluate(self, paths: BrownianPaths, m: int, i: int) -> np.ndarray:
        """The ``n x d`` matrix at path ``m``, step ``i`` (uses ``Z`` up to ``t_i`` only)."""
        self._check_driver(paths)
        if not 0 <= i < paths.grid.N:
            raise IndexOutOfRange(f"step index {i} outside [0, {paths.grid.N - 1}]")
        if not 0 <= m < paths.M:
            raise IndexOutOfRange(f"path index {m} outside [0, {paths.M - 1}]")
        z = paths.values[m:m + 1, :i + 1, :]
        window = Window(z, paths.grid.times[:i + 1], np.array([m]), np.arange(i + 1))
        return np.array(self.on_window(window)[0, -1])

    def _check_driver(self, paths: BrownianPaths) -> None:
        if paths.d != self.d:
            raise DimensionMismatch(
                f"integrand {self.name} expects driver dimension {self.d}, got {paths.d}")

    # composition helpers
    def __add__(self, other: "MatrixIntegrand") -> "MatrixIntegrand":
        return sum_of(self, other)

    def __rmul__(self, c: float) -> "MatrixIntegrand":
        return scaled(float(c), self)


def _pointwise(n: int, d: int, fn: Callable[[np.ndarray], np.ndarray], name: str) -> MatrixIntegrand:
    """Markovian integrand from ``fn(z) -> (..., n, d)`` where ``z`` is ``(..., d)``."""
    return MatrixIntegrand(n, d, lambda w: fn(w.z), name=name, markovian=True)


# -- built-ins ----------------------------------------------------------------

def constant(matrix) -> MatrixIntegrand:
    A = np.array(matrix, dtype=np.float64)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2 or not np.all(np.isfinite(A)):
        raise InvalidArgument("constant integrand needs a finite 2-D matrix")
    A.setflags(write=False)
    n, d = A.shape

    def ev(w: Window):
        return np.broadcast_to(A, w.z.shape[:2] + (n, d))

    return MatrixIntegrand(n, d, ev, name="constant", constant=True)


def coordinate_row(j: int, d: int) -> MatrixIntegrand:
    """The ``1 x d`` row ``e_j`` (``j`` is 1-based)."""
    if not 1 <= j <= d:
        raise InvalidArgument(f"coordinate index {j} outside 1..{d}")
    row = np.zeros((1, d))
    row[0, j - 1] = 1.0
    out = constant(row)
    out.name = f"coordinate_row({j})"
    return out


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _require_d(d: int, at_least: int, name: str) -> None:
    if d < at_least:
        raise DimensionMismatch(f"{name} needs driver dimension >= {at_least}, got {d}")


def z2_dz1(d: int = 2) -> MatrixIntegrand:
    """``H = (Z_2, 0, ..., 0)``, so that ``int H dZ = int Z_2 dZ_1``."""
    _require_d(d, 2, "z2_dz1")

    def fn(z):
        out = np.zeros(z.shape[:-1] + (1, d))
        out[..., 0, 0] = z[..., 1]
        return out

    return _pointwise(1, d, fn, "z2_dz1")


def swap_row(d: int = 2) -> MatrixIntegrand:
    """``H = (Z_2, Z_1)``."""
    _require_d(d, 2, "swap")

    def fn(z):
        out = np.zeros(z.shape[:-1] + (1, d))
        out[..., 0, 0] = z[..., 1]
        out[..., 0, 1] = z[..., 0]
        return out

    return _pointwise(1, d, fn, "swap")


def sign_z2(d: int = 2) -> MatrixIntegrand:
    """``H = (sgn Z_2, 0, ...)``: discontinuous but predictable."""
    _require_d(d, 2, "sign_z2")

    def fn(z):
        out = np.zeros(z.shape[:-1] + (1, d))
        out[..., 0, 0] = np.sign(z[..., 1])
        return out

    return _pointwise(1, d, fn, "sign_z2")


def sigmoid(weights) -> MatrixIntegrand:
    """``H_ab = A_ab * logistic(Z_b)`` for an ``n x d`` weight matrix ``A``."""
    A = np.array(weights, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidArgument("sigmoid weights must be an n x d matrix")
    n, d = A.shape
    return _pointwise(n, d, lambda z: A * _logistic(z)[..., None, :], "sigmoid")


def polynomial(coefficients) -> MatrixIntegrand:
    """``H_ab = sum_p C_p[a, b] * Z_b ** p`` for coefficient matrices ``C_0, C_1, ...``."""
    C = np.array(coefficients, dtype=np.float64)
    if C.ndim != 3 or C.shape[0] < 1:
        raise InvalidArgument("polynomial coefficients must be a list of n x d matrices")
    _, n, d = C.shape

    def fn(z):
        zb = z[..., None, :]
        out = np.zeros(z.shape[:-1] + (n, d))
        for p in range(C.shape[0] - 1, -1, -1):  # Horner
            out = out * zb + C[p]
        return out

    return _pointwise(n, d, fn, "polynomial")


def running_max_row(d: int) -> MatrixIntegrand:
    """History-dependent example: ``H_j = max_{s <= t} Z_j(s)`` as a ``1 x d`` row."""

    def ev(w: Window):
        return np.maximum.accumulate(w.z, axis=1)[:, :, None, :]

    return MatrixIntegrand(1, d, ev, name="running_max", markovian=False)


def history(n: int, d: int, fn: Callable[[Window], np.ndarray], name: str = "history") -> MatrixIntegrand:
    """Hook for path-dependent integrands.

    ``fn`` receives the whole left-endpoint window and must return values that
    at position ``l`` depend only on ``window.z[:, :l + 1]``.
    """
    return MatrixIntegrand(n, d, fn, name=name, markovian=False)


def from_samples(samples: np.ndarray, name: str = "sampled") -> MatrixIntegrand:
    """Integrand backed by precomputed ``(M, N, n, d)`` samples on a fixed path set."""
    S = np.asarray(samples, dtype=np.float64)
    if S.ndim != 4:
        raise InvalidArgument(f"samples must be (M, N, n, d), got shape {S.shape}")

    def ev(w: Window):
        return S[w.paths[:, None], w.steps[None, :]]

    out = MatrixIntegrand(S.shape[2], S.shape[3], ev, name=name, markovian=False)
    out.samples = S
    return out


# -- composition --------------------------------------------------------------

def sum_of(*terms: MatrixIntegrand) -> MatrixIntegrand:
    if not terms:
        raise InvalidArgument("sum needs at least one term")
    n, d = terms[0].shape
    for h in terms[1:]:
        if h.shape != (n, d):
            raise DimensionMismatch(f"cannot add {h.shape} to {(n, d)}")

    def ev(w: Window):
        out = terms[0].on_window(w).copy()
        for h in terms[1:]:
            out += h.on_window(w)
        return out

    return MatrixIntegrand(n, d, ev, name="sum(" + ", ".join(h.name for h in terms) + ")",
                           constant=all(h.constant for h in terms),
                           markovian=all(h.markovian for h in terms))


def scaled(c: float, h: MatrixIntegrand) -> MatrixIntegrand:
    return MatrixIntegrand(h.n, h.d, lambda w: c * h.on_window(w), name=f"{c}*{h.name}",
                           constant=h.constant, markovian=h.markovian)


def left_multiply(A, h: MatrixIntegrand) -> MatrixIntegrand:
    """``A . H`` for a constant ``m x n`` matrix ``A``."""
    A = np.atleast_2d(np.array(A, dtype=np.float64))
    if A.shape[1] != h.n:
        raise DimensionMismatch(f"left factor has {A.shape[1]} columns, integrand has {h.n} rows")
    return MatrixIntegrand(A.shape[0], h.d, lambda w: np.matmul(A, h.on_window(w)),
                           name=f"A*{h.name}", constant=h.constant, markovian=h.markovian)


def right_multiply(h: MatrixIntegrand, B) -> MatrixIntegrand:
    """``H . B`` for a constant ``d x d'`` matrix ``B``; the result runs on a ``d'``-driver."""
    B = np.atleast_2d(np.array(B, dtype=np.float64))
    if B.shape[0] != h.d:
        raise DimensionMismatch(f"right factor has {B.shape[0]} rows, integrand has {h.d} columns")
    return MatrixIntegrand(h.n, B.shape[1], lambda w: np.matmul(h.on_window(w), B),
                           name=f"{h.name}*B", constant=h.constant, markovian=h.markovian)


def stack(*blocks: MatrixIntegrand) -> MatrixIntegrand:
    """Vertical stacking ``(H^1; ...; H^m)``."""
    if not blocks:
        raise InvalidArgument("stack needs at least one block")
    d = blocks[0].d
    for h in blocks:
        if h.d != d:
            raise DimensionMismatch(f"stacked blocks must share driver dimension {d}, got {h.d}")
    n = sum(h.n for h in blocks)

    def ev(w: Window):
        return np.concatenate([h.on_window(w) for h in blocks], axis=-2)

    return MatrixIntegrand(n, d, ev, name="stack(" + ", ".join(h.name for h in blocks) + ")",
                           constant=all(h.constant for h in blocks),
                           markovian=all(h.markovian for h in blocks))


def graph_of(h: MatrixIntegrand) -> MatrixIntegrand:
    """Integrand of ``(Z, X)``: ``I_d`` stacked over ``H``. Its rank is ``d`` everywhere."""
    top = constant(np.eye(h.d))
    top.name = "I"
    out = stack(top, h)
    out.name = f"graph({h.name})"
    return out


# -- frame fields ---------------------------------------------------------------

class FrameField:
    """Predictable field of orthonormal bases; rows of each ``d x d`` sample are the frame vectors."""

    def __init__(self, d: int, evaluator: Evaluator, name: str = "frame", constant: bool = False):
        self.d = int(d)
        self._evaluator = evaluator
        self.name = name
        self.constant = constant

    def __repr__(self):
        return f"FrameField({self.name}, d={self.d})"

    def on_window(self, window: Window) -> np.ndarray:
        out = np.asarray(self._evaluator(window), dtype=np.float64)
        return np.broadcast_to(out, window.z.shape[:2] + (self.d, self.d))

    def sample(self, paths: BrownianPaths) -> np.ndarray:
        if paths.d != self.d:
            raise DimensionMismatch(f"frame dimension {self.d} != driver dimension {paths.d}")
        window = Window(paths.values[:, :-1, :], paths.grid.times[:-1],
                        np.arange(paths.M), np.arange(paths.grid.N))
        return np.array(self.on_window(window))

    def vector(self, i: int) -> "FrameVector":
        if not 1 <= i <= self.d:
            raise IndexOutOfRange(f"frame index {i} outside 1..{self.d}")
        return FrameVector(self, i)

    def orthogonality_error(self, paths: BrownianPaths) -> float:
        Q = self.sample(paths)
        eye = np.eye(self.d)
        return float(np.max(np.abs(Q @ np.swapaxes(Q, -1, -2) - eye))) if Q.size else 0.0


@dataclass(frozen=True)
class FrameVector:
    frame: FrameField
    index: int  # 1-based


def standard_frame(d: int) -> FrameField:
    return constant_frame(np.eye(d), name="standard")


def constant_frame(Q, name: str = "constant", atol: float = 1e-12) -> FrameField:
    Q = np.array(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InvalidArgument("frame matrix must be square")
    if np.max(np.abs(Q @ Q.T - np.eye(Q.shape[0]))) > atol:
        raise InvalidArgument("frame matrix rows are not orthonormal")
    Q.setflags(write=False)
    return FrameField(Q.shape[0], lambda w: Q, name=name, constant=True)


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix)."""
    G = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(G)
    return Q * np.sign(np.diag(R))


def random_frame(d: int, seed: int) -> FrameField:
    Q = random_orthogonal(d, np.random.default_rng(seed))
    return constant_frame(Q, name=f"random(seed={seed})")


def sampled_frame(samples: np.ndarray, name: str = "sampled") -> FrameField:
    """Frame field backed by ``(M, N, d, d)`` samples on a fixed path set."""
    S = np.asarray(samples, dtype=np.float64)
    if S.ndim != 4 or S.shape[2] != S.shape[3]:
        raise InvalidArgument(f"frame samples must be (M, N, d, d), got {S.shape}")

    def ev(w: Window):
        return S[w.paths[:, None], w.steps[None, :]]

    out = FrameField(S.shape[2], ev, name=name)
    out.samples = S
    return out


def frame_projection(i: int, frame: FrameField) -> MatrixIntegrand:
    """``u_i^tr u_i``: the ``d x d`` rank-one projector onto frame vector ``i`` (1-based)."""
    frame.vector(i)

    def ev(w: Window):
        u = frame.on_window(w)[..., i - 1, :]
        return u[..., :, None] * u[..., None, :]

    return MatrixIntegrand(frame.d, frame.d, ev, name=f"proj({i}, {frame.name})",
                           constant=frame.constant, markovian=False)


def block_projection(indices, frame: FrameField, scale: float = 1.0) -> MatrixIntegrand:
    """``scale * sum_{i in indices} u_i^tr u_i`` (indices 1-based)."""
    idx = [int(i) - 1 for i in indices]
    for i in idx:
        frame.vector(i + 1)

    def ev(w: Window):
        V = frame.on_window(w)[..., idx, :]
        return scale * np.matmul(np.swapaxes(V, -1, -2), V)

    return MatrixIntegrand(frame.d, frame.d, ev,
                           name=f"block({[i + 1 for i in idx]}, {frame.name})",
                           constant=frame.constant, markovian=False)
