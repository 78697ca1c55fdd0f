"""Gram-Schmidt factorization ``H = K V`` and reduction to a ``k``-dimensional driver.

Rows of ``H`` are scanned in index order; a row is kept when its residual after
projecting out the rows already kept exceeds the rank threshold. Kept residuals
are normalized into the rows of ``V`` (modified Gram-Schmidt, two passes), and
``K = H V^tr``. The reduced driver is ``dW = V dZ``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from martdim.errors import InvalidArgument, OrthonormalityError, RankMismatch
from martdim.ito import MartingaleProcess, accumulate, total_qv
from martdim.paths import BrownianPaths, paths_from_values
from martdim.rank_dim import (DEFAULT_TOLERANCE, DimensionReport, RankTolerance,
                              report_from_ranks, singular_values)

_CHUNK = 1 << 18
# residual below which a standard basis vector counts as dependent in extend_frame
EXTENSION_CUTOFF = 1e-6


def _canonical_signs(V: np.ndarray) -> np.ndarray:
    """Flip rows of ``(..., k, d)`` so each row's first nonzero entry is positive."""
    scale = np.max(np.abs(V), axis=-1, keepdims=True)
    nonzero = np.abs(V) > 1e-12 * scale
    first = np.argmax(nonzero, axis=-1)
    lead = np.take_along_axis(V, first[..., None], axis=-1)
    return V * np.where(lead < 0, -1.0, 1.0)


def gram_schmidt_rows(H: np.ndarray, k_max: int, tau: np.ndarray,
                      passes: int = 2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched greedy row Gram-Schmidt.

    ``H`` is ``(B, n, d)``, ``tau`` the per-matrix acceptance threshold ``(B,)``.
    Returns ``V`` ``(B, k_max, d)`` (unused rows zero), the accepted count
    ``(B,)`` and pivot row indices ``(B, k_max)`` (``-1`` where unused).
    """
    B, n, d = H.shape
    V = np.zeros((B, k_max, d))
    count = np.zeros(B, dtype=np.int64)
    pivots = np.full((B, k_max), -1, dtype=np.int64)
    rows = np.arange(B)
    for r in range(n):
        v = H[:, r, :].copy()
        for _ in range(passes):
            for j in range(k_max):
                active = j < count
                if not active.any():
                    break
                coef = np.einsum("bi,bi->b", V[:, j], v) * active
                v -= coef[:, None] * V[:, j]
        norm = np.linalg.norm(v, axis=-1)
        accept = (norm > tau) & (count < k_max)
        if accept.any():
            b = rows[accept]
            slot = count[accept]
            V[b, slot] = v[accept] / norm[accept, None]
            pivots[b, slot] = r
            count[accept] += 1
    return V, count, pivots


def _thresholds(H: np.ndarray, tol: RankTolerance) -> np.ndarray:
    s = singular_values(H)
    n, d = H.shape[-2:]
    smax = s[..., 0] if s.shape[-1] else np.zeros(H.shape[:-2])
    return tol.threshold(smax, n, d)


@dataclass
class Factorization:
    K: np.ndarray
    V: np.ndarray
    pivots: tuple[int, ...]

    @property
    def k(self) -> int:
        return self.V.shape[0]


def gram_schmidt_factor(Hmat, k_expected: int | None = None,
                        tol: RankTolerance = DEFAULT_TOLERANCE,
                        canonical_sign: bool = False) -> Factorization:
    """Factor one ``n x d`` matrix as ``K V`` with orthonormal-rowed ``V``.

    ``canonical_sign`` makes the first nonzero entry of each row of ``V``
    positive; leave it off for driver-dependent rows so the raw sign survives.
    """
    H = np.atleast_2d(np.asarray(Hmat, dtype=np.float64))
    if H.ndim != 2:
        raise InvalidArgument(f"expected a matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise InvalidArgument("matrix has non-finite entries")
    n, d = H.shape
    tau = _thresholds(H[None], tol)
    V, count, piv = gram_schmidt_rows(H[None], min(n, d), tau)
    k = int(count[0])
    if k_expected is not None and k != k_expected:
        raise RankMismatch(k_expected, k)
    V = V[0, :k]
    if canonical_sign:
        V = _canonical_signs(V)
    return Factorization(H @ V.T, V, tuple(int(p) for p in piv[0, :k]))


def extend_frames(V: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Complete orthonormal rows ``(..., k, d)`` to orthogonal ``(..., d, d)``.

    Standard basis vectors are tried in index order; each is orthogonalized
    against the rows so far (two passes) and skipped when its residual falls
    below ``EXTENSION_CUTOFF``.
    """
    V = np.asarray(V, dtype=np.float64)
    k, d = V.shape[-2:]
    lead = V.shape[:-2]
    flat = V.reshape(-1, k, d)
    gram = flat @ np.swapaxes(flat, -1, -2)
    err = np.max(np.abs(gram - np.eye(k))) if flat.size else 0.0
    if err > atol:
        raise OrthonormalityError(f"rows are not orthonormal (max |V V^tr - I| = {err:.3e})")
    B = flat.shape[0]
    Q = np.zeros((B, d, d))
    Q[:, :k] = flat
    count = np.full(B, k, dtype=np.int64)
    rows = np.arange(B)
    for j in range(d):
        if np.all(count == d):
            break
        v = np.zeros((B, d))
        v[:, j] = 1.0
        for _ in range(2):
            for r in range(d):
                active = r < count
                coef = np.einsum("bi,bi->b", Q[:, r], v) * active
                v -= coef[:, None] * Q[:, r]
        norm = np.linalg.norm(v, axis=-1)
        accept = (norm > EXTENSION_CUTOFF) & (count < d)
        b = rows[accept]
        Q[b, count[accept]] = v[accept] / norm[accept, None]
        count[accept] += 1
    if np.any(count != d):
        raise OrthonormalityError("could not complete the frame")
    return Q.reshape(lead + (d, d))


def extend_frame(V) -> np.ndarray:
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    return extend_frames(V)


@dataclass
class FactorizationResult:
    """Per-(path, step) factors of a reduction.

    ``K_samples`` ``(M, N, n, k)``, ``V_samples`` ``(M, N, k, d)``,
    ``pivot_rows`` ``(M, N, k)`` (``-1`` at rank-deficient steps),
    ``W`` the reduced driver (``M x (N+1) x k``), ``residual`` ``(M, N)`` with
    ``||H - K V||_F``, ``carried`` marking steps whose ``V`` was held over.
    """

    k: int
    K_samples: np.ndarray
    V_samples: np.ndarray
    pivot_rows: np.ndarray
    W: BrownianPaths
    residual: np.ndarray
    carried: np.ndarray
    report: DimensionReport
    process: MartingaleProcess
    reconstruction_error: np.ndarray
    empty_paths: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def flagged(self) -> bool:
        return self.report.flagged or bool(self.empty_paths.any())

    def orthonormality_error(self) -> float:
        V = self.V_samples
        if V.size == 0:
            return 0.0
        worst = 0.0
        for a in range(0, V.shape[0], 256):
            blk = V[a:a + 256]
            G = blk @ np.swapaxes(blk, -1, -2)
            worst = max(worst, float(np.max(np.abs(G - np.eye(self.k)))))
        return worst

    def relative_residual(self) -> np.ndarray:
        H = self.process.integrand_samples()
        norm = np.linalg.norm(H, axis=(-2, -1))
        return self.residual / np.maximum(1.0, norm)

    def frame_samples(self) -> np.ndarray:
        """Extended ``d x d`` frames whose first ``k`` rows are ``V``."""
        return extend_frames(self.V_samples)

    def summary(self) -> dict:
        return {
            "k": self.k,
            "dimension": self.report.to_json() | {"per_step_histogram": None},
            "max_relative_residual": float(np.max(self.relative_residual())) if self.residual.size else 0.0,
            "max_orthonormality_error": self.orthonormality_error(),
            "max_reconstruction_error": float(np.max(self.reconstruction_error)) if self.reconstruction_error.size else 0.0,
            "carried_fraction": float(np.mean(self.carried)) if self.carried.size else 0.0,
            "empty_paths": int(np.sum(self.empty_paths)),
            "flagged": self.flagged,
        }


def relative_path_error(Y: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Per path ``max |Y - X| / max(max |X|, tiny)`` over the whole path."""
    diff = np.max(np.abs(Y - X), axis=tuple(range(1, X.ndim)))
    scale = np.max(np.abs(X), axis=tuple(range(1, X.ndim)))
    return diff / np.maximum(scale, np.finfo(float).tiny)


def reduce_to_kBM(X: MartingaleProcess, tol: RankTolerance = DEFAULT_TOLERANCE,
                  threshold: float = 0.999, canonical_sign: bool | None = None) -> FactorizationResult:
    """Factor ``H`` at every step and build ``W`` with ``dW = V dZ``.

    ``k`` is the modal rank. Where a step has rank below ``k``, ``V`` is held
    from the previous full-rank step of the same path; leading deficient steps
    take the first full-rank ``V``. Paths with no full-rank step at all use the
    first ``k`` standard basis vectors and are listed in ``empty_paths``.
    """
    if canonical_sign is None:
        canonical_sign = bool(X.integrand is not None and X.integrand.constant)
    if X.integrand is not None and X.integrand.constant:
        return _reduce_constant(X, tol, threshold, canonical_sign)
    H = X.integrand_samples()
    M, N, n, d = H.shape

    flat = H.reshape(M * N, n, d)
    tau = np.empty(M * N)
    for a in range(0, M * N, _CHUNK):
        tau[a:a + _CHUNK] = _thresholds(flat[a:a + _CHUNK], tol)
    s_ranks = np.empty(M * N, dtype=np.int64)
    for a in range(0, M * N, _CHUNK):
        s = singular_values(flat[a:a + _CHUNK])
        s_ranks[a:a + _CHUNK] = np.sum(s > tau[a:a + _CHUNK, None], axis=-1)
    report = report_from_ranks(s_ranks.reshape(M, N), tol, "integrand", threshold)
    k = report.k_hat

    V = np.zeros((M * N, k, d))
    count = np.zeros(M * N, dtype=np.int64)
    piv = np.full((M * N, k), -1, dtype=np.int64)
    for a in range(0, M * N, _CHUNK):
        V[a:a + _CHUNK], count[a:a + _CHUNK], piv[a:a + _CHUNK] = gram_schmidt_rows(
            flat[a:a + _CHUNK], k, tau[a:a + _CHUNK])
    V = V.reshape(M, N, k, d)
    piv = piv.reshape(M, N, k)
    full = (count == k).reshape(M, N)
    if canonical_sign:
        V = _canonical_signs(V)

    # carry-over: index of the most recent full-rank step, else the first one
    steps = np.arange(N)
    last = np.maximum.accumulate(np.where(full, steps, -1), axis=1)
    first = np.argmax(full, axis=1)
    empty = ~full.any(axis=1)
    src = np.where(last >= 0, last, first[:, None])
    carried = src != steps
    V = np.take_along_axis(V, src[:, :, None, None], axis=1)
    if empty.any():
        V[empty] = np.eye(k, d)
    piv = np.where(carried[..., None], -1, piv)

    K = H @ np.swapaxes(V, -1, -2)
    residual = np.linalg.norm(H - K @ V, axis=(-2, -1))
    dZ = X.driver.increments
    dW = (V @ dZ[..., None])[..., 0]
    W = paths_from_values(X.grid, accumulate(dW), seed=X.driver.seed, derived=True,
                          increments=dW)
    recon = accumulate((K @ dW[..., None])[..., 0])
    err = relative_path_error(recon, X.X)
    return FactorizationResult(k, K, V, piv, W, residual, carried, report, X, err, empty)


def _reduce_constant(X: MartingaleProcess, tol: RankTolerance, threshold: float,
                     canonical_sign: bool) -> FactorizationResult:
    """Same contract as the general path; one factorization broadcast over all samples."""
    A = X.integrand.evaluate(X.driver, 0, 0)
    M, N = X.M, X.grid.N
    n, d = A.shape
    fac = gram_schmidt_factor(A, tol=tol, canonical_sign=canonical_sign)
    k = fac.k
    report = report_from_ranks(np.full((M, N), k, dtype=np.int64), tol, "integrand", threshold)
    shape = (M, N)
    K = np.broadcast_to(fac.K, shape + fac.K.shape)
    V = np.broadcast_to(fac.V, shape + fac.V.shape)
    piv = np.broadcast_to(np.array(fac.pivots, dtype=np.int64), shape + (k,))
    res = float(np.linalg.norm(A - fac.K @ fac.V))
    residual = np.broadcast_to(res, shape)
    carried = np.broadcast_to(False, shape)
    dZ = X.driver.increments
    dW = dZ @ fac.V.T
    W = paths_from_values(X.grid, accumulate(dW), seed=X.driver.seed, derived=True,
                          increments=dW)
    recon = accumulate(dW @ fac.K.T)
    err = relative_path_error(recon, X.X)
    return FactorizationResult(k, K, V, piv, W, residual, carried, report, X, err,
                               np.zeros(M, dtype=bool))


# -- time change ----------------------------------------------------------------

@dataclass
class TimeChangedProcess:
    """``X`` read on its own quadratic-variation clock.

    ``Y[m, j]`` is ``X`` at the first grid time with ``A_t >= s_j`` for the kept
    paths (``valid``); ``hit_index`` holds those grid indices.
    """

    clock: np.ndarray
    Y: np.ndarray
    hit_index: np.ndarray
    hit_times: np.ndarray
    valid: np.ndarray
    stagnant: np.ndarray
    reached: np.ndarray | None = None

    def unit_clock_qv(self) -> np.ndarray:
        """Per kept path: realized ``sum |dY|^2`` divided by the clock span."""
        span = self.clock[-1] - self.clock[0]
        dY = np.diff(self.Y, axis=1)
        return np.sum(dY * dY, axis=(1, 2)) / span

    def clock_qv_gap(self) -> np.ndarray:
        """Per kept path: ``(sum |dY|^2 - A at the last hit) / span``.

        The clock value actually reached overshoots the nominal end by at most
        one step of ``A``; subtracting it leaves a mean-zero martingale term.
        """
        span = self.clock[-1] - self.clock[0]
        dY = np.diff(self.Y, axis=1)
        return (np.sum(dY * dY, axis=(1, 2)) - self.reached) / span

    def overshoot(self) -> np.ndarray:
        """Relative overshoot of the reached clock past the nominal end, per kept path."""
        span = self.clock[-1] - self.clock[0]
        return (self.reached - self.clock[-1]) / span


def stagnant_paths(A: np.ndarray, min_run: int = 2) -> np.ndarray:
    """Paths whose cumulative QV stays flat for ``min_run`` consecutive steps (or never grows)."""
    flat = np.diff(A, axis=1) <= 0
    if min_run <= 1:
        run_hit = flat.any(axis=1)
    else:
        windows = np.lib.stride_tricks.sliding_window_view(flat, min_run, axis=1)
        run_hit = windows.all(axis=-1).any(axis=1)
    return run_hit | (A[:, -1] <= 0)


def time_change_normalize(X: MartingaleProcess, clock_steps: int | None = None,
                          min_stagnant_run: int = 2) -> TimeChangedProcess:
    """Sample ``X`` on a uniform grid of its realized QV clock ``A_t``.

    The clock runs from 0 to the smallest terminal ``A_T`` among kept paths so
    every kept path reaches every clock point.
    """
    A = total_qv(X)
    stagnant = stagnant_paths(A, min_stagnant_run)
    valid = ~stagnant
    if not valid.any():
        raise InvalidArgument("every path is stagnant; no clock to normalize on")
    S = clock_steps or X.grid.N
    s_max = float(np.min(A[valid, -1]))
    clock = np.linspace(0.0, s_max, S + 1)
    kept = np.flatnonzero(valid)
    hits = np.empty((kept.size, S + 1), dtype=np.int64)
    for r, m in enumerate(kept):
        hits[r] = np.searchsorted(A[m], clock, side="left")
    hits = np.minimum(hits, X.grid.N)
    Y = np.take_along_axis(X.X[kept], hits[:, :, None], axis=1)
    reached = A[kept, hits[:, -1]] - A[kept, hits[:, 0]]
    return TimeChangedProcess(clock, Y, hits, X.grid.times[hits], valid, stagnant, reached)
