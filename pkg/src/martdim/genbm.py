"""Frame projections of a driver and general ``R^{n x m}_K`` Brownian motions."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from martdim.errors import DimensionMismatch, InvalidArgument
from martdim.factor import FactorizationResult, relative_path_error
from martdim.integrand import FrameField, block_projection, frame_projection
from martdim.ito import MartingaleProcess, accumulate, ito_integrate, realized_bracket, total_qv
from martdim.paths import BrownianPaths
from martdim.rank_dim import DEFAULT_TOLERANCE, RankTolerance, batch_rank, report_from_ranks
from martdim.stats import StatCheck, stat_check

MAX_REGULARITY_COMPONENTS = 8


@dataclass(frozen=True)
class BlockSpec:
    """Block sizes ``(k_1, ..., k_m)`` inside an ambient dimension ``n``."""

    K: tuple[int, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "K", tuple(int(k) for k in self.K))
        if not self.K or any(k < 1 for k in self.K):
            raise InvalidArgument(f"block sizes must be positive, got {self.K}")
        if sum(self.K) > self.n:
            raise InvalidArgument(f"blocks {self.K} exceed ambient dimension {self.n}")

    @property
    def m(self) -> int:
        return len(self.K)

    @property
    def partial_sums(self) -> tuple[int, ...]:
        return (0,) + tuple(int(x) for x in np.cumsum(self.K))

    def indices(self, r: int) -> list[int]:
        """1-based frame indices of block ``r`` (``r`` is 1-based)."""
        sums = self.partial_sums
        return list(range(sums[r - 1] + 1, sums[r] + 1))


@dataclass
class GeneralBM:
    """``m`` processes in ``R^n`` on one driver, with the block dimensions they should carry."""

    components: list[MartingaleProcess]
    blocks: BlockSpec
    provenance: str
    frame: FrameField | None = None
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.components)

    @classmethod
    def assembled(cls, components: list[MartingaleProcess], K) -> "GeneralBM":
        if not components:
            raise InvalidArgument("need at least one component")
        n = components[0].n
        driver = components[0].driver
        for c in components:
            if c.n != n or c.driver is not driver and c.driver != driver:
                raise DimensionMismatch("components must share ambient dimension and driver")
        return cls(list(components), BlockSpec(tuple(K), max(n, sum(K))), "assembled")


def project_onto_frame(Z: BrownianPaths, frame: FrameField, i: int,
                       cache: bool = True) -> MartingaleProcess:
    """``U^i = int u_i^tr (u_i . dZ)`` (``i`` is 1-based)."""
    if frame.d != Z.d:
        raise DimensionMismatch(f"frame dimension {frame.d} != driver dimension {Z.d}")
    return ito_integrate(frame_projection(i, frame), Z, cache=cache, label=f"U{i}")


def split_S(Z: BrownianPaths, frame: FrameField, k: int,
            cache: bool = True) -> tuple[MartingaleProcess, MartingaleProcess]:
    """``S^1 = (U^1 + ... + U^k) / sqrt(k)`` and ``S^2 = (U^{k+1} + ... + U^d) / sqrt(d - k)``."""
    d = Z.d
    if frame.d != d:
        raise DimensionMismatch(f"frame dimension {frame.d} != driver dimension {d}")
    if not 1 <= k < d:
        raise InvalidArgument(f"split index k must satisfy 1 <= k < d={d}, got {k}")
    S1 = ito_integrate(block_projection(range(1, k + 1), frame, 1 / np.sqrt(k)), Z,
                       cache=cache, label="S1")
    S2 = ito_integrate(block_projection(range(k + 1, d + 1), frame, 1 / np.sqrt(d - k)), Z,
                       cache=cache, label="S2")
    return S1, S2


def split_identity_error(Z: BrownianPaths, S1: MartingaleProcess, S2: MartingaleProcess,
                         k: int) -> float:
    """Max abs deviation of ``sqrt(k) S^1 + sqrt(d - k) S^2`` from ``Z`` over all paths and steps."""
    d = Z.d
    rebuilt = np.sqrt(k) * S1.X + np.sqrt(d - k) * S2.X
    return float(np.max(np.abs(rebuilt - Z.values)))


@dataclass
class S1Representation:
    """Comparison of ``int sqrt(k) H dS^1`` with ``int H dZ``."""

    k: int
    error: np.ndarray
    span_mismatch: float
    Y: np.ndarray

    def to_json(self) -> dict:
        return {"k": self.k, "max_relative_error": float(np.max(self.error)),
                "span_mismatch": self.span_mismatch}


def _leading_projector(frame, k: int, X: MartingaleProcess) -> np.ndarray:
    if isinstance(frame, FactorizationResult):
        V = frame.V_samples
        if V.shape[-2] != k:
            raise InvalidArgument(f"factorization has k={V.shape[-2]}, requested {k}")
        return np.swapaxes(V, -1, -2) @ V
    if isinstance(frame, FrameField):
        Q = frame.sample(X.driver)[..., :k, :]
        return np.swapaxes(Q, -1, -2) @ Q
    Q = np.asarray(frame, dtype=np.float64)
    if Q.ndim == 2:
        Q = Q[:k]
        return np.broadcast_to(Q.T @ Q, (X.M, X.grid.N, X.d, X.d))
    return np.swapaxes(Q[..., :k, :], -1, -2) @ Q[..., :k, :]


def represent_on_S1(X: MartingaleProcess, frame, k: int | None = None) -> S1Representation:
    """Rebuild ``X`` as ``int sqrt(k) H . dS^1`` with ``S^1`` from the frame's first ``k`` vectors.

    ``frame`` may be a reduction result (its ``V`` rows are used), a frame
    field, or an explicit frame array. Span mismatch (rows of ``H`` leaving the
    frame's leading ``k``-space) is reported, not raised.
    """
    if k is None:
        if not isinstance(frame, FactorizationResult):
            raise InvalidArgument("k is required unless the frame comes from a reduction")
        k = frame.k
    if not 1 <= k <= X.d:
        raise InvalidArgument(f"k must satisfy 1 <= k <= d={X.d}, got {k}")
    H = X.integrand_samples()
    P = _leading_projector(frame, k, X)
    dS1 = (P @ X.driver.increments[..., None])[..., 0] / np.sqrt(k)
    dY = (H @ (np.sqrt(k) * dS1)[..., None])[..., 0]
    Y = accumulate(dY)
    mismatch = np.linalg.norm(H - H @ P, axis=(-2, -1)) / np.maximum(
        1.0, np.linalg.norm(H, axis=(-2, -1)))
    return S1Representation(k, relative_path_error(Y, X.X), float(np.max(mismatch)), Y)


def exact_bm(B: BrownianPaths, frame: FrameField, blocks: BlockSpec,
             cache: bool = True) -> GeneralBM:
    """``T^r = (1 / sqrt(k_r)) * sum_{i in block r} int P_i^tr P_i dB``."""
    if not (frame.d == B.d == blocks.n):
        raise DimensionMismatch(
            f"frame dimension {frame.d}, driver dimension {B.d} and block ambient {blocks.n} must agree")
    comps = []
    for r in range(1, blocks.m + 1):
        kr = blocks.K[r - 1]
        h = block_projection(blocks.indices(r), frame, 1 / np.sqrt(kr))
        comps.append(ito_integrate(h, B, cache=cache, label=f"T{r}"))
    return GeneralBM(comps, blocks, "exact", frame)


# -- checks ----------------------------------------------------------------------

def _component_samples(c: MartingaleProcess) -> np.ndarray:
    h = c.integrand
    if h is not None and h.constant:
        return h.evaluate(c.driver, 0, 0)[None, None]
    return c.integrand_samples()


@dataclass
class RegularityReport:
    subsets: list[dict]

    @property
    def regular(self) -> bool:
        return all(s["passed"] for s in self.subsets)

    def to_json(self) -> dict:
        return {"regular": self.regular, "subsets": self.subsets}


def check_regular(W: GeneralBM, tol: RankTolerance = DEFAULT_TOLERANCE,
                  threshold: float = 0.999) -> RegularityReport:
    """Dimension of every nonempty sum of components against the sum of their block sizes."""
    if W.m > MAX_REGULARITY_COMPONENTS:
        raise InvalidArgument(
            f"refusing to enumerate {2 ** W.m - 1} subsets for m={W.m} > {MAX_REGULARITY_COMPONENTS}")
    samples = [_component_samples(c) for c in W.components]
    out = []
    for size in range(1, W.m + 1):
        for subset in combinations(range(W.m), size):
            total = samples[subset[0]]
            for j in subset[1:]:
                total = total + samples[j]
            rep = report_from_ranks(batch_rank(total, tol), tol, "integrand", threshold)
            expected = sum(W.blocks.K[j] for j in subset)
            out.append({"subset": [j + 1 for j in subset], "expected": expected,
                        "k_hat": rep.k_hat, "fraction": rep.fraction,
                        "passed": rep.k_hat == expected and not rep.flagged})
    return RegularityReport(out)


@dataclass
class OrthogonalityReport:
    mode: str
    max_cross: float = 0.0
    bound: float = 0.0
    checks: list[StatCheck] = field(default_factory=list)
    standard_diagnostic: float | None = None

    @property
    def orthogonal(self) -> bool:
        if self.mode == "instantaneous":
            return self.max_cross <= self.bound
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        out = {"mode": self.mode, "orthogonal": self.orthogonal}
        if self.mode == "instantaneous":
            out.update(max_cross=self.max_cross, bound=self.bound,
                       standard_orthogonality_diagnostic=self.standard_diagnostic)
        else:
            out["checks"] = [c.to_json() for c in self.checks]
        return out


def check_mutual_orthogonality(X: MartingaleProcess, Y: MartingaleProcess,
                               mode: str = "instantaneous", atol: float = 1e-12,
                               z_threshold: float = 3.0) -> OrthogonalityReport:
    """Covariation between every coordinate of ``X`` and every coordinate of ``Y``.

    Instantaneous mode reports ``max |H_X^i . H_Y^j|`` over samples (bound
    ``atol`` times the sample scale). Realized mode z-scores the terminal
    realized bracket of each coordinate pair against 0. The instantaneous
    report also carries ``max |trace(H_X H_Y^tr)|``, a diagnostic for the
    weaker inner-product notion of orthogonality (``X . Y`` a martingale).
    """
    if X.M != Y.M or X.grid != Y.grid:
        raise DimensionMismatch("processes live on different path lattices")
    if mode == "instantaneous":
        HX = _component_samples(X)
        HY = _component_samples(Y)
        C = HX @ np.swapaxes(HY, -1, -2)
        scale = max(float(np.max(np.abs(HX))) * float(np.max(np.abs(HY))), 1.0)
        diag = None
        if C.shape[-1] == C.shape[-2]:
            diag = float(np.max(np.abs(np.trace(C, axis1=-2, axis2=-1))))
        return OrthogonalityReport("instantaneous", float(np.max(np.abs(C))), atol * scale,
                                   standard_diagnostic=diag)
    if mode == "realized":
        br = realized_bracket(X.X, Y.X)[:, -1]
        checks = [stat_check(f"<X{i + 1},Y{j + 1}>_T", br[:, i, j], 0.0, z_threshold)
                  for i in range(X.n) for j in range(Y.n)]
        return OrthogonalityReport("realized", checks=checks)
    raise InvalidArgument(f"unknown mode {mode!r}")


def norm_drift_checks(T: MartingaleProcess, checkpoints, rate: float = 1.0,
                      z_threshold: float = 3.0) -> list[StatCheck]:
    """``|T_t|^2 - rate * t`` across paths against 0 at each checkpoint."""
    grid = T.grid
    out = []
    for t in checkpoints:
        i = grid.index_of(t)
        vals = np.sum(T.X[:, i] ** 2, axis=-1) - rate * grid.times[i]
        out.append(stat_check(f"|{T.label}|^2 - t @ t={grid.times[i]:g}", vals, 0.0, z_threshold))
    return out


def total_qv_check(X: MartingaleProcess, expected_rate: float, t: float | None = None,
                   z_threshold: float = 3.0, name: str | None = None) -> StatCheck:
    """Realized total QV at ``t`` (default the horizon) against ``expected_rate * t``."""
    grid = X.grid
    i = grid.N if t is None else grid.index_of(t)
    A = total_qv(X)[:, i]
    return stat_check(name or f"<{X.label}>_{grid.times[i]:g}", A, expected_rate * grid.times[i],
                      z_threshold)


def coordinate_brackets(X: MartingaleProcess) -> list[float]:
    """Across-path mean of each coordinate's realized bracket at the horizon (descriptive)."""
    dX = X.increments
    return [float(v) for v in np.mean(np.sum(dX * dX, axis=1), axis=0)]
