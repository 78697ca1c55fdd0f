"""Left and right martingale transforms, the Beurling-Ahlfors annihilation demo, homotopies.

Complex processes are stored as real pairs: a complex ``n``-vector process
becomes ``2n`` real rows ``(Re; Im)`` and a complex integrand ``H = Hr + i Hi``
becomes the stacked ``[Hr; Hi]``. Products follow the usual real-block rule
``(Ar + i Ai)(Hr + i Hi) = (Ar Hr - Ai Hi) + i (Ar Hi + Ai Hr)``.

The right transform ``H . B`` treats ``H`` as a row-vector integrand; the
Beurling-Ahlfors literature usually writes the same operation as a left
multiplication on a column vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from martdim.errors import DimensionMismatch, InvalidArgument
from martdim.integrand import constant, left_multiply, right_multiply
from martdim.ito import MartingaleProcess, accumulate, integrate_samples, ito_integrate
from martdim.paths import BrownianPaths
from martdim.rank_dim import DEFAULT_TOLERANCE, DimensionReport, RankTolerance, estimate_dimension


@dataclass(frozen=True)
class TransformMatrix:
    real: np.ndarray
    imag: np.ndarray | None = None

    def __post_init__(self):
        r = np.atleast_2d(np.array(self.real, dtype=np.float64))
        if not np.all(np.isfinite(r)):
            raise InvalidArgument("transform matrix has non-finite entries")
        object.__setattr__(self, "real", r)
        if self.imag is not None:
            i = np.atleast_2d(np.array(self.imag, dtype=np.float64))
            if i.shape != r.shape or not np.all(np.isfinite(i)):
                raise InvalidArgument("imaginary part must be finite and match the real part's shape")
            object.__setattr__(self, "imag", i)

    @classmethod
    def from_complex(cls, matrix) -> "TransformMatrix":
        c = np.atleast_2d(np.asarray(matrix, dtype=np.complex128))
        return cls(c.real, c.imag if np.any(c.imag) else None)

    @property
    def is_complex(self) -> bool:
        return self.imag is not None

    @property
    def shape(self) -> tuple[int, int]:
        return self.real.shape

    @property
    def imag_or_zero(self) -> np.ndarray:
        return self.imag if self.imag is not None else np.zeros_like(self.real)


BEURLING = TransformMatrix(np.array([[1.0, 0.0], [0.0, -1.0]]), np.array([[0.0, 1.0], [1.0, 0.0]]))


def _halves(X: MartingaleProcess, H: np.ndarray):
    if X.complex_pair:
        n = H.shape[-2] // 2
        return H[..., :n, :], H[..., n:, :]
    return H, None


def _as_matrix(A) -> TransformMatrix:
    return A if isinstance(A, TransformMatrix) else TransformMatrix(A)


def left_transform(A, X: MartingaleProcess) -> MartingaleProcess:
    """``A * X = int A . H . dZ``; the path is ``A`` applied to the increments of ``X``, accumulated."""
    A = _as_matrix(A)
    n_complex = X.n // 2 if X.complex_pair else X.n
    if A.shape[1] != n_complex:
        raise DimensionMismatch(f"left factor has {A.shape[1]} columns, process has {n_complex} rows")
    dX = X.increments
    if not A.is_complex and not X.complex_pair:
        dY = dX @ A.real.T
        H = X.H_samples
        Hs = None if H is None else A.real @ H
        h = left_multiply(A.real, X.integrand) if X.integrand is not None else None
        return MartingaleProcess(X.driver, h, accumulate(dY), Hs, label=f"A*{X.label}")

    Ar, Ai = A.real, A.imag_or_zero
    if X.complex_pair:
        xr, xi = dX[..., :n_complex], dX[..., n_complex:]
    else:
        xr, xi = dX, np.zeros_like(dX)
    dY = np.concatenate([xr @ Ar.T - xi @ Ai.T, xi @ Ar.T + xr @ Ai.T], axis=-1)
    Hs = None
    if X.H_samples is not None or X.integrand is not None:
        Hr, Hi = _halves(X, X.integrand_samples())
        Hi = np.zeros_like(Hr) if Hi is None else Hi
        Hs = np.concatenate([Ar @ Hr - Ai @ Hi, Ar @ Hi + Ai @ Hr], axis=-2)
    return MartingaleProcess(X.driver, None, accumulate(dY), Hs, complex_pair=True,
                             label=f"A*{X.label}")


def right_transform(X: MartingaleProcess, B) -> MartingaleProcess:
    """``X * B = int H . B . dZ`` for a constant ``d x d`` matrix ``B``."""
    B = _as_matrix(B)
    if B.shape != (X.d, X.d):
        raise DimensionMismatch(f"right factor must be {X.d}x{X.d}, got {B.shape}")
    if not B.is_complex and not X.complex_pair and X.integrand is not None and X.H_samples is None:
        return ito_integrate(right_multiply(X.integrand, B.real), X.driver, label=f"{X.label}*B")
    H = X.integrand_samples()
    Hr, Hi = _halves(X, H)
    if not B.is_complex and Hi is None:
        Hs = H @ B.real
        pair = False
    else:
        Br, Bi = B.real, B.imag_or_zero
        Hi = np.zeros_like(Hr) if Hi is None else Hi
        Hs = np.concatenate([Hr @ Br - Hi @ Bi, Hr @ Bi + Hi @ Br], axis=-2)
        pair = True
    out = integrate_samples(Hs, X.driver, label=f"{X.label}*B")
    out.complex_pair = pair
    return out


def complex_process(h_row, Z: BrownianPaths, label: str = "X") -> MartingaleProcess:
    """``X = int h . dZ`` for a constant complex row ``h``, stored as a real pair."""
    h = np.atleast_2d(np.asarray(h_row, dtype=np.complex128))
    if h.shape[1] != Z.d:
        raise DimensionMismatch(f"row has {h.shape[1]} entries, driver dimension is {Z.d}")
    H = constant(np.concatenate([h.real, h.imag], axis=0))
    X = ito_integrate(H, Z, label=label)
    X.complex_pair = True
    return X


@dataclass
class BeurlingReport:
    """Errors of the conformal/anticonformal split under the Beurling-Ahlfors matrix."""

    x2_transform_max: float
    x_vs_x1_error: float
    decomposition_error: float
    x_transform_max: float
    x1_transform_max: float
    scale: float
    bound: float = 1e-12

    @property
    def annihilated(self) -> bool:
        return self.x2_transform_max <= self.bound * self.scale

    @property
    def fully_annihilated(self) -> bool:
        return self.x_transform_max <= self.bound * self.scale

    @property
    def passed(self) -> bool:
        return (self.annihilated and self.x_vs_x1_error <= self.bound
                and self.decomposition_error <= self.bound * self.scale)

    def to_json(self) -> dict:
        return {"x2_transform_max": self.x2_transform_max, "x_vs_x1_error": self.x_vs_x1_error,
                "decomposition_error": self.decomposition_error,
                "x_transform_max": self.x_transform_max, "x1_transform_max": self.x1_transform_max,
                "scale": self.scale, "annihilated": self.annihilated,
                "fully_annihilated": self.fully_annihilated, "passed": self.passed}


def beurling_annihilation_demo(h, Z: BrownianPaths, bound: float = 1e-12,
                               chunk: int = 256) -> BeurlingReport:
    """Split ``X = int h . dZ`` (``Z_1 + i Z_2`` as the complex driver) into

    ``X^1 = int (h1 + i h2)/2 d(Z_1 - i Z_2)`` and ``X^2 = int (h1 - i h2)/2 d(Z_1 + i Z_2)``,

    then apply the right transform by ``[[1, i], [i, -1]]``. The conformal part
    ``X^2`` lies in the left kernel and must vanish. ``h`` is a complex
    2-vector (constant) or a complex-pair process on a 2-dimensional driver.
    Work is done in path chunks; only running maxima are kept.
    """
    if Z.d != 2:
        raise DimensionMismatch(f"the demo needs a 2-dimensional driver, got d={Z.d}")
    if isinstance(h, MartingaleProcess):
        if not h.complex_pair or h.n != 2:
            raise InvalidArgument("expected a scalar complex process stored as a real pair")
        X = h
    else:
        X = complex_process(h, Z)
    H = X.integrand_samples()
    dZ = Z.increments
    B = BEURLING.real + 1j * BEURLING.imag
    anti = np.array([1.0, -1.0j])
    conf = np.array([1.0, 1.0j])

    def right(rows):  # rows . B, written out so every product is exact
        return rows[..., 0:1] * B[0] + rows[..., 1:2] * B[1]

    def path(rows, dz):
        return np.cumsum(np.sum(rows * dz, axis=-1), axis=1)

    def rows_of(Hblock):
        Hr, Hi = _halves(X, Hblock)
        hc = Hr[..., 0, :] + 1j * Hi[..., 0, :]
        rows1 = (0.5 * (hc[..., 0] + 1j * hc[..., 1]))[..., None] * anti
        rows2 = (0.5 * (hc[..., 0] - 1j * hc[..., 1]))[..., None] * conf
        return rows1, rows2, right(hc), right(rows1), right(rows2)

    constant = X.integrand is not None and X.integrand.constant
    if constant:  # one sample, broadcast against every chunk
        fixed = rows_of(H[:1, :1])
    worst = dict.fromkeys(("x", "xb", "x1b", "x2b", "gap", "dec"), 0.0)
    for a in range(0, Z.M, chunk):
        sl = slice(a, min(a + chunk, Z.M))
        rows1, rows2, hb, rows1b, rows2b = fixed if constant else rows_of(H[sl])
        dz = dZ[sl]
        x = X.X[sl, 1:, 0] + 1j * X.X[sl, 1:, 1]
        x1, x2 = path(rows1, dz), path(rows2, dz)
        xb, x1b, x2b = path(hb, dz), path(rows1b, dz), path(rows2b, dz)
        for key, val in (("x", x), ("xb", xb), ("x1b", x1b), ("x2b", x2b),
                         ("gap", xb - x1b), ("dec", x1 + x2 - x)):
            worst[key] = max(worst[key], float(np.max(np.abs(val))) if val.size else 0.0)
    scale = max(1.0, worst["x"])
    return BeurlingReport(
        x2_transform_max=worst["x2b"],
        x_vs_x1_error=worst["gap"] / max(1.0, worst["xb"]),
        decomposition_error=worst["dec"],
        x_transform_max=worst["xb"],
        x1_transform_max=worst["x1b"],
        scale=scale, bound=bound)


def homotopy_family(s: float, Z: BrownianPaths, tol: RankTolerance = DEFAULT_TOLERANCE,
                    threshold: float = 0.999) -> tuple[MartingaleProcess, DimensionReport]:
    """``(sqrt(s) Z_1, sqrt(1 - s) Z_2)`` and its Dimension report."""
    if not 0.0 <= s <= 1.0:
        raise InvalidArgument(f"homotopy parameter must lie in [0, 1], got {s}")
    if Z.d != 2:
        raise DimensionMismatch(f"homotopy needs a 2-dimensional driver, got d={Z.d}")
    H = constant(np.diag([np.sqrt(s), np.sqrt(1.0 - s)]))
    X = ito_integrate(H, Z, label=f"homotopy(s={s:g})")
    return X, estimate_dimension(X, tol, threshold=threshold)
