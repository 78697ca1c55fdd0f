"""Left-endpoint Ito integration and covariation estimates."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from martdim.errors import DimensionMismatch, InvalidArgument
from martdim.integrand import MatrixIntegrand
from martdim.paths import BrownianPaths


@dataclass
class MartingaleProcess:
    """Discrete ``X = int H dZ`` with ``X[:, 0] = 0``.

    ``X`` has shape ``(M, N + 1, n)``. ``H_samples`` (``(M, N, n, d)``) is kept
    when the integral was computed with ``cache=True`` or built from samples.
    ``complex_pair`` marks processes whose rows are ``(Re; Im)`` halves of a
    complex process.
    """

    driver: BrownianPaths
    integrand: MatrixIntegrand | None
    X: np.ndarray
    H_samples: np.ndarray | None = None
    complex_pair: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[2]

    @property
    def d(self) -> int:
        return self.driver.d

    @property
    def grid(self):
        return self.driver.grid

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.X, axis=1)

    def integrand_samples(self) -> np.ndarray:
        """``H`` at every (path, step); recomputed from the integrand when not cached."""
        if self.H_samples is None:
            if self.integrand is None:
                raise InvalidArgument(f"process {self.label!r} has no integrand to sample")
            self.H_samples = self.integrand.sample(self.driver)
        return self.H_samples


def _increments(H: np.ndarray, dZ: np.ndarray) -> np.ndarray:
    # (B, N, n, d) x (B, N, d) -> (B, N, n)
    return np.matmul(H, dZ[..., None])[..., 0]


def accumulate(dX: np.ndarray) -> np.ndarray:
    """Prefix sums with a leading zero: ``X[0] = 0, X[i+1] = X[i] + dX[i]``."""
    M, N = dX.shape[:2]
    X = np.zeros((M, N + 1) + dX.shape[2:])
    np.cumsum(dX, axis=1, out=X[:, 1:])
    return X


def ito_integrate(H: MatrixIntegrand, Z: BrownianPaths, cache: bool = True,
                  chunk: int = 256, label: str = "") -> MartingaleProcess:
    """``X = int H . dZ`` with the left-endpoint rule, computed in path chunks."""
    if H.d != Z.d:
        raise DimensionMismatch(f"integrand driver dimension {H.d} != path dimension {Z.d}")
    dZ = Z.increments
    if H.constant:
        A = H.evaluate(Z, 0, 0)
        dX = np.matmul(dZ, A.T)
        samples = np.broadcast_to(A, (Z.M, Z.grid.N, H.n, H.d)) if cache else None
        return MartingaleProcess(Z, H, accumulate(dX), samples, label=label or H.name)
    dX = np.empty((Z.M, Z.grid.N, H.n))
    samples = np.empty((Z.M, Z.grid.N, H.n, H.d)) if cache else None
    for a in range(0, Z.M, chunk):
        sl = slice(a, min(a + chunk, Z.M))
        Hs = H.sample(Z, sl)
        dX[sl] = _increments(Hs, dZ[sl])
        if cache:
            samples[sl] = Hs
    return MartingaleProcess(Z, H, accumulate(dX), samples, label=label or H.name)


def integrate_samples(H_samples: np.ndarray, Z: BrownianPaths, label: str = "",
                      integrand: MatrixIntegrand | None = None) -> MartingaleProcess:
    """Integrate precomputed ``(M, N, n, d)`` integrand samples against ``Z``."""
    H_samples = np.asarray(H_samples, dtype=np.float64)
    if H_samples.shape[:2] != (Z.M, Z.grid.N) or H_samples.shape[3] != Z.d:
        raise DimensionMismatch(
            f"samples of shape {H_samples.shape} do not match driver (M={Z.M}, N={Z.grid.N}, d={Z.d})")
    dX = _increments(H_samples, Z.increments)
    return MartingaleProcess(Z, integrand, accumulate(dX), H_samples, label=label)


# -- covariation ----------------------------------------------------------------

@dataclass
class CovariationEstimate:
    """Per-path, per-step (or per-window) ``n x n`` covariation density.

    ``B`` has shape ``(M, L, n, n)``; ``L = N`` for instantaneous estimates and
    ``N / window`` for realized ones.
    """

    kind: str
    B: np.ndarray
    dt: float
    window: int = 1

    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.B - np.swapaxes(self.B, -1, -2)))) if self.B.size else 0.0

    def min_eigenvalue_ratio(self) -> float:
        """Most negative eigenvalue relative to the trace scale (should be >= -1e-12)."""
        ev = np.linalg.eigvalsh(self.B)
        scale = np.maximum(np.trace(self.B, axis1=-2, axis2=-1), np.finfo(float).tiny)
        return float(np.min(ev[..., 0] / scale))


def _symmetrize(B: np.ndarray) -> np.ndarray:
    return 0.5 * (B + np.swapaxes(B, -1, -2))


def instantaneous_covariation(X: MartingaleProcess) -> CovariationEstimate:
    """``B = H H^tr`` at every (path, step)."""
    H = X.integrand_samples()
    return CovariationEstimate("instantaneous", _symmetrize(H @ np.swapaxes(H, -1, -2)),
                               X.grid.dt)


def realized_covariation(X: MartingaleProcess, window: int) -> CovariationEstimate:
    """Windowed realized density ``(1 / (window * dt)) * sum dX dX^tr``."""
    N = X.grid.N
    if window < 1 or N % window:
        raise InvalidArgument(f"window {window} must be a positive divisor of N={N}")
    dX = X.increments.reshape(X.M, N // window, window, X.n)
    B = np.einsum("mwki,mwkj->mwij", dX, dX) / (window * X.grid.dt)
    return CovariationEstimate("realized", _symmetrize(B), X.grid.dt, window)


def realized_bracket(X: np.ndarray, Y: np.ndarray | None = None) -> np.ndarray:
    """Cumulative ``sum dX^i dY^j`` for path arrays ``(M, N + 1, n)``; shape ``(M, N + 1, n, n')``."""
    dX = np.diff(X, axis=1)
    dY = dX if Y is None else np.diff(Y, axis=1)
    return accumulate(dX[..., :, None] * dY[..., None, :])


def total_qv(X: MartingaleProcess | np.ndarray) -> np.ndarray:
    """Cumulative realized ``sum |dX|^2`` per path, shape ``(M, N + 1)``; starts at 0, nondecreasing."""
    arr = X.X if isinstance(X, MartingaleProcess) else np.asarray(X)
    dX = np.diff(arr, axis=1)
    return accumulate(np.sum(dX * dX, axis=-1))


# -- CSV export -----------------------------------------------------------------

def process_to_csv(X: MartingaleProcess, max_paths: int | None = None) -> str:
    """Header ``t,path,i,j,value``; path values use ``j = 0``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "path", "i", "j", "value"])
    times = X.grid.times
    count = X.M if max_paths is None else min(max_paths, X.M)
    for m in range(count):
        for s, t in enumerate(times):
            for i in range(X.n):
                w.writerow([repr(float(t)), m, i + 1, 0, repr(float(X.X[m, s, i]))])
    return buf.getvalue()


def covariation_to_csv(est: CovariationEstimate, max_paths: int | None = None) -> str:
    """Header ``t,path,i,j,value`` with ``t`` the left end of the step or window."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "path", "i", "j", "value"])
    M, L, n, _ = est.B.shape
    count = M if max_paths is None else min(max_paths, M)
    span = est.dt * est.window
    for m in range(count):
        for s in range(L):
            t = repr(float(s * span))
            for i in range(n):
                for j in range(n):
                    w.writerow([t, m, i + 1, j + 1, repr(float(est.B[m, s, i, j]))])
    return buf.getvalue()
