"""Numerical rank and the Dimension estimator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from martdim.errors import DimensionMismatch, InvalidArgument
from martdim.ito import MartingaleProcess

INTEGRAND = "integrand"
COVARIATION = "covariation"

_CHUNK = 1 << 20


@dataclass(frozen=True)
class RankTolerance:
    """Singular values above ``max(rows, cols) * sigma_max * eps_rel`` count toward the rank.

    Covariation matrices ``B = H H^tr`` carry the squares of the singular values
    of ``H``, so the same rule applies with ``eps_rel`` squared. Eigenvalues of a
    computed ``B`` are only accurate to about machine precision relative to its
    largest one, hence ``covariation_floor`` bounds the squared threshold from below.
    """

    eps_rel: float = 1e-10
    covariation_floor: float = 1e-13

    def __post_init__(self):
        if not 0 < self.eps_rel < 1:
            raise InvalidArgument(f"eps_rel must lie in (0, 1), got {self.eps_rel}")
        if not 0 <= self.covariation_floor < 1:
            raise InvalidArgument("covariation_floor must lie in [0, 1)")

    def threshold(self, sigma_max, rows: int, cols: int):
        return max(rows, cols) * np.asarray(sigma_max) * self.eps_rel

    def as_dict(self) -> dict:
        return {"eps_rel": self.eps_rel, "covariation_floor": self.covariation_floor,
                "rule": "sigma > max(rows, cols) * sigma_max * eps_rel"}


DEFAULT_TOLERANCE = RankTolerance()


def singular_values(A: np.ndarray) -> np.ndarray:
    """Descending singular values of a stack ``(..., r, c)``, shape ``(..., min(r, c))``."""
    A = np.asarray(A, dtype=np.float64)
    r, c = A.shape[-2:]
    if min(r, c) == 0:
        return np.zeros(A.shape[:-2] + (0,))
    if r == 1:
        return np.linalg.norm(A, axis=-1)
    if c == 1:
        return np.linalg.norm(A, axis=-2)
    flat = A.reshape(-1, r, c)
    out = np.empty((flat.shape[0], min(r, c)))
    for a in range(0, flat.shape[0], _CHUNK):
        out[a:a + _CHUNK] = np.linalg.svd(flat[a:a + _CHUNK], compute_uv=False)
    return out.reshape(A.shape[:-2] + (min(r, c),))


def batch_rank(A: np.ndarray, tol: RankTolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """Numerical rank of every matrix in a stack ``(..., r, c)``."""
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise InvalidArgument("matrix has non-finite entries")
    r, c = A.shape[-2:]
    s = singular_values(A)
    if s.shape[-1] == 0:
        return np.zeros(A.shape[:-2], dtype=np.int64)
    tau = tol.threshold(s[..., :1], r, c)
    return np.sum(s > tau, axis=-1)


def numerical_rank(matrix, tol: RankTolerance = DEFAULT_TOLERANCE) -> int:
    A = np.asarray(matrix, dtype=np.float64)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2:
        raise InvalidArgument(f"expected a matrix, got shape {A.shape}")
    return int(batch_rank(A, tol))


def covariation_rank(B: np.ndarray, tol: RankTolerance = DEFAULT_TOLERANCE,
                     source_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Rank of symmetric PSD stacks ``(..., n, n)`` under the squared threshold.

    ``source_shape`` is the shape of the factor ``H`` (``B = H H^tr``); it sets
    the ``max(rows, cols)`` factor so that ranks agree with :func:`batch_rank` on ``H``.
    """
    B = np.asarray(B, dtype=np.float64)
    if not np.all(np.isfinite(B)):
        raise InvalidArgument("matrix has non-finite entries")
    n = B.shape[-1]
    scale = max(source_shape) if source_shape else n
    flat = B.reshape(-1, n, n)
    lam = np.empty((flat.shape[0], n))
    for a in range(0, flat.shape[0], _CHUNK):
        lam[a:a + _CHUNK] = np.linalg.eigvalsh(flat[a:a + _CHUNK])
    lam = np.clip(lam, 0.0, None)
    lam_max = lam[:, -1:]
    rel = max((scale * tol.eps_rel) ** 2, tol.covariation_floor)
    ranks = np.sum(lam > rel * lam_max, axis=-1)
    return ranks.reshape(B.shape[:-2])


@dataclass
class DimensionReport:
    """Ranks at every (path, step) sample plus their modal value.

    ``per_step_histogram[i][r]`` counts paths with rank ``r`` at step ``i``.
    """

    ranks: np.ndarray
    k_hat: int
    fraction: float
    tolerance: RankTolerance
    basis: str
    threshold: float = 0.999
    histogram: dict = field(default_factory=dict)
    per_step_histogram: list = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return self.fraction < self.threshold

    @property
    def deficient_fraction(self) -> float:
        return 1.0 - self.fraction

    def to_json(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "fraction": self.fraction,
            "flagged": self.flagged,
            "threshold": self.threshold,
            "tolerance": self.tolerance.as_dict(),
            "basis": self.basis,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "per_step_histogram": self.per_step_histogram,
        }


def report_from_ranks(ranks: np.ndarray, tol: RankTolerance, basis: str,
                      threshold: float = 0.999) -> DimensionReport:
    ranks = np.asarray(ranks, dtype=np.int64)
    counts = np.bincount(ranks.ravel())
    k_hat = int(np.argmax(counts))
    fraction = float(counts[k_hat] / ranks.size)
    per_step = []
    if ranks.ndim == 2:
        width = len(counts)
        per_step = [np.bincount(col, minlength=width).tolist() for col in ranks.T]
    hist = {int(k): int(c) for k, c in enumerate(counts) if c}
    return DimensionReport(ranks, k_hat, fraction, tol, basis, threshold, hist, per_step)


def sample_ranks(X: MartingaleProcess, tol: RankTolerance = DEFAULT_TOLERANCE,
                 basis: str = INTEGRAND) -> np.ndarray:
    """Rank at every (path, step); ``(M, N)`` integer array."""
    if basis not in (INTEGRAND, COVARIATION):
        raise InvalidArgument(f"unknown basis {basis!r}")
    h = X.integrand
    if h is not None and h.constant:
        # one evaluation covers every sample
        one = h.evaluate(X.driver, 0, 0)[None]
        r = _rank_of(one, tol, basis)
        return np.full((X.M, X.grid.N), int(r[0]), dtype=np.int64)
    return _rank_of(X.integrand_samples(), tol, basis)


def _rank_of(H: np.ndarray, tol: RankTolerance, basis: str) -> np.ndarray:
    if basis == INTEGRAND:
        return batch_rank(H, tol)
    B = H @ np.swapaxes(H, -1, -2)
    B = 0.5 * (B + np.swapaxes(B, -1, -2))
    return covariation_rank(B, tol, source_shape=H.shape[-2:])


def estimate_dimension(X: MartingaleProcess, tol: RankTolerance = DEFAULT_TOLERANCE,
                       basis: str = INTEGRAND, threshold: float = 0.999) -> DimensionReport:
    """Modal rank over all (path, step) samples; flagged when its share is below ``threshold``."""
    return report_from_ranks(sample_ranks(X, tol, basis), tol, basis, threshold)


@dataclass
class RankEqualityReport:
    equal: np.ndarray
    fraction: float
    full_rank_fraction: float
    k_hat: int

    @property
    def flagged(self) -> bool:
        return self.fraction < 1.0

    def to_json(self) -> dict:
        return {"fraction": self.fraction, "full_rank_fraction": self.full_rank_fraction,
                "k_hat": self.k_hat, "flagged": self.flagged,
                "samples": int(self.equal.size)}


def rank_equality_check(H_samples: np.ndarray, K_samples: np.ndarray,
                        tol: RankTolerance = DEFAULT_TOLERANCE) -> RankEqualityReport:
    """Compare ``rank(H)`` and ``rank(K)`` sample by sample.

    ``full_rank_fraction`` restricts the comparison to samples where ``rank(H)``
    equals its modal value.
    """
    H = np.asarray(H_samples)
    K = np.asarray(K_samples)
    if H.shape[:-2] != K.shape[:-2]:
        raise DimensionMismatch(f"sample lattices differ: {H.shape[:-2]} vs {K.shape[:-2]}")
    rh = batch_rank(H, tol)
    rk = batch_rank(K, tol) if K.shape[-1] > 0 else np.zeros_like(rh)
    equal = rh == rk
    k_hat = int(np.argmax(np.bincount(rh.ravel())))
    full = rh == k_hat
    full_fraction = float(np.mean(equal[full])) if np.any(full) else 1.0
    return RankEqualityReport(equal, float(np.mean(equal)), full_fraction, k_hat)
