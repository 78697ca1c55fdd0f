"""Desk-scale verification: z-scored martingale checks, exact identities, theorem suites.

Each suite returns a :class:`TheoremReport`. The aggregation rule is:
a report fails if any exact check fails, if more than ``max_soft_failures``
statistical checks have ``|z|`` above ``z`` or if any has ``|z|`` above
``z_hard``. Exit codes are 0 (pass), 1 (statistical failure) and
2 (exact-identity failure).
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from martdim import integrand as itg
from martdim.errors import InvalidArgument
from martdim.factor import reduce_to_kBM, time_change_normalize
from martdim.genbm import (BlockSpec, GeneralBM, check_mutual_orthogonality, check_regular,
                           exact_bm, norm_drift_checks, represent_on_S1, split_identity_error,
                           split_S)
from martdim.ito import MartingaleProcess, ito_integrate, total_qv
from martdim.paths import BrownianPaths, TimeGrid, generate_brownian, make_grid
from martdim.rank_dim import batch_rank, estimate_dimension, rank_equality_check, report_from_ranks
from martdim.stats import ExactCheck, StatCheck, bool_check, exact_check, stat_check
from martdim.transforms import beurling_annihilation_demo, homotopy_family

MIN_PATHS = 30
DEFICIENT_FRACTION_BOUND = 1e-3


# -- elementary tests -------------------------------------------------------------

def _path_array(X, grid: TimeGrid | None = None) -> tuple[np.ndarray, TimeGrid]:
    if isinstance(X, BrownianPaths):
        return X.values, X.grid
    if isinstance(X, MartingaleProcess):
        return X.X, X.grid
    if grid is None:
        raise InvalidArgument("a bare path array needs its time grid")
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr, grid


def _require_paths(M: int) -> None:
    if M < MIN_PATHS:
        raise InvalidArgument(f"statistical tests need at least {MIN_PATHS} paths, got M={M}")


def martingale_test(X, checkpoints, z_threshold: float = 3.0,
                    grid: TimeGrid | None = None, label: str = "X") -> list[StatCheck]:
    """Across-path mean of each coordinate at each checkpoint against 0."""
    arr, grid = _path_array(X, grid)
    _require_paths(arr.shape[0])
    out = []
    for t in checkpoints:
        i = grid.index_of(t)
        for c in range(arr.shape[2]):
            out.append(stat_check(f"E[{label}{c + 1}(t={grid.times[i]:g})] = 0",
                                  arr[:, i, c], 0.0, z_threshold))
    return out


def levy_test(W, checkpoints, z_threshold: float = 3.0,
              grid: TimeGrid | None = None, label: str = "W") -> list[StatCheck]:
    """Realized ``<W_i, W_j>_t`` against ``delta_ij * t`` for ``i <= j`` at each checkpoint."""
    arr, grid = _path_array(W, grid)
    _require_paths(arr.shape[0])
    dW = np.diff(arr, axis=1)
    k = arr.shape[2]
    idx = [grid.index_of(t) for t in checkpoints]
    out = []
    for i in range(k):
        for j in range(i, k):
            br = np.concatenate([np.zeros((arr.shape[0], 1)),
                                 np.cumsum(dW[:, :, i] * dW[:, :, j], axis=1)], axis=1)
            for s in idx:
                t = grid.times[s]
                out.append(stat_check(f"<{label}{i + 1},{label}{j + 1}>_{t:g} = {float(i == j) * t:g}",
                                      br[:, s], float(i == j) * t, z_threshold))
    return out


# -- reports ----------------------------------------------------------------------

@dataclass(frozen=True)
class AggregationPolicy:
    z: float = 3.0
    z_hard: float = 5.0
    max_soft_failures: int = 1


@dataclass
class TheoremReport:
    theorem: str
    suite: str
    checks: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    policy: AggregationPolicy = AggregationPolicy()
    parts: list = field(default_factory=list)

    @property
    def exact_checks(self) -> list[ExactCheck]:
        return [c for c in self.checks if isinstance(c, ExactCheck)]

    @property
    def stat_checks(self) -> list[StatCheck]:
        return [c for c in self.checks if isinstance(c, StatCheck)]

    def _own_exact_ok(self) -> bool:
        return all(c.passed for c in self.exact_checks)

    def _own_stat_ok(self) -> bool:
        zs = np.array([abs(c.z) for c in self.stat_checks])
        if zs.size == 0:
            return True
        soft = int(np.sum(zs > self.policy.z))
        return soft <= self.policy.max_soft_failures and not np.any(zs > self.policy.z_hard)

    @property
    def exact_ok(self) -> bool:
        return self._own_exact_ok() and all(p.exact_ok for p in self.parts)

    @property
    def passed(self) -> bool:
        return (self._own_exact_ok() and self._own_stat_ok()
                and all(p.passed for p in self.parts))

    @property
    def exit_code(self) -> int:
        if self.passed:
            return 0
        return 1 if self.exact_ok else 2

    def to_json(self) -> dict:
        zs = [abs(c.z) for c in self.stat_checks]
        out = {
            "theorem": self.theorem,
            "suite": self.suite,
            "passed": self.passed,
            "exit_code": self.exit_code,
            "policy": {"z": self.policy.z, "z_hard": self.policy.z_hard,
                       "max_soft_failures": self.policy.max_soft_failures},
            "summary": {
                "exact": len(self.exact_checks),
                "exact_failed": sum(not c.passed for c in self.exact_checks),
                "statistical": len(zs),
                "above_z": sum(z > self.policy.z for z in zs),
                "above_z_hard": sum(z > self.policy.z_hard for z in zs),
            },
            "checks": [c.to_json() for c in self.checks],
            "notes": self.notes,
        }
        if self.parts:
            out["parts"] = [p.to_json() for p in self.parts]
        return out


def run_metadata(timestamp: str | None = None) -> dict:
    """Run-dependent provenance, kept apart from the deterministic payload."""
    from martdim import __version__
    stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return {"timestamp": stamp, "version": __version__}


def report_document(report: TheoremReport, config: dict | None = None,
                    timestamp: str | None = None) -> dict:
    """Report plus provenance; the timestamp only ever appears under ``metadata``."""
    return {"report": report.to_json(), "config": config, "metadata": run_metadata(timestamp)}


# -- suite machinery --------------------------------------------------------------

class SuiteContext:
    """Shared state for suites run from one config: drivers and memoized reductions."""

    def __init__(self, config):
        self.cfg = config
        tc = config.tolerance
        self.tol = tc.rank()
        self.threshold = tc.dimension_threshold
        self.exact = tc.exact
        self.residual = tc.residual
        self.z = tc.z
        self.policy = AggregationPolicy(tc.z, tc.z_hard, tc.max_soft_failures)
        self.grid = make_grid(config.grid.T, config.grid.N)
        self.checkpoints = [c * config.grid.T for c in config.suite.checkpoints]
        self._drivers: dict[int, BrownianPaths] = {}
        self._reductions: dict[str, dict] = {}

    @property
    def d(self) -> int:
        return self.cfg.driver.d

    @property
    def statistics(self) -> bool:
        """Statistical checks need ``MIN_PATHS`` paths; below that only exact checks run."""
        return self.cfg.driver.M >= MIN_PATHS

    def levy(self, W, label: str = "W") -> list[StatCheck]:
        return levy_test(W, self.checkpoints, self.z, label=label) if self.statistics else []

    def martingale(self, X, label: str = "X") -> list[StatCheck]:
        return martingale_test(X, self.checkpoints, self.z, label=label) if self.statistics else []

    def driver(self, d: int | None = None) -> BrownianPaths:
        d = self.d if d is None else d
        if d not in self._drivers:
            dc = self.cfg.driver
            self._drivers[d] = generate_brownian(self.grid, d, dc.M, dc.seed)
        return self._drivers[d]

    def test_integrands(self) -> list[tuple[str, itg.MatrixIntegrand]]:
        """The configured integrand plus a fixed family of reduction test cases."""
        from martdim.config import random_constant
        d = self.d
        seed = self.cfg.driver.seed
        cases = [("config", self.cfg.build_integrand())]
        if d >= 2:
            cases += [("z2_dz1", itg.z2_dz1(d)), ("swap", itg.swap_row(d))]
        cases.append(("random_constant", random_constant(d + 1, d, max(1, d - 1), seed % 2**32)))
        cases.append(("frame_projection",
                      itg.frame_projection(1, itg.random_frame(d, (seed + 1) % 2**32))))
        return cases

    def reduction(self, label: str, h: itg.MatrixIntegrand) -> dict:
        """Every check derived from reducing ``int h dZ``; computed once per label."""
        if label in self._reductions:
            return self._reductions[label]
        X = ito_integrate(h, self.driver())
        R = reduce_to_kBM(X, self.tol, self.threshold)
        H = X.integrand_samples()
        if h.constant:
            rank_eq = rank_equality_check(H[:1, :1], R.K_samples[:1, :1], self.tol)
        else:
            rank_eq = rank_equality_check(H, R.K_samples, self.tol)
        tag = f"{label} [{h.name}]"
        factor = [
            exact_check(f"{tag}: max ||H - K V||_F / max(1, ||H||_F)",
                        np.max(R.relative_residual()), self.residual),
            exact_check(f"{tag}: max |V V^tr - I|", R.orthonormality_error(), self.exact),
        ]
        rank = [bool_check(f"{tag}: rank K = rank H at every full-rank sample",
                           rank_eq.full_rank_fraction == 1.0,
                           f"full_rank_fraction={rank_eq.full_rank_fraction!r}")]
        recon = [exact_check(f"{tag}: max relative path error of int K dW vs int H dZ",
                             np.max(R.reconstruction_error), self.exact)]
        levy = self.levy(R.W, label=f"W[{label}]") if R.k else []
        s1 = []
        if 1 <= R.k <= X.d:
            rep = represent_on_S1(X, R)
            s1 = [exact_check(f"{tag}: max relative error of int sqrt(k) H dS1 vs int H dZ",
                              np.max(rep.error), self.exact),
                  exact_check(f"{tag}: rows of H outside the leading k-frame",
                              rep.span_mismatch, self.residual)]
        out = {"factor": factor, "rank": rank, "recon": recon, "levy": levy, "s1": s1,
               "summary": R.summary() | {"rank_equality": rank_eq.to_json()}}
        self._reductions[label] = out
        return out


def _dimension_checks(tag: str, rep, expected: int) -> list[ExactCheck]:
    return [bool_check(f"{tag}: k_hat = {expected}", rep.k_hat == expected, f"k_hat={rep.k_hat}"),
            exact_check(f"{tag}: deficient-sample fraction", rep.deficient_fraction,
                        DEFICIENT_FRACTION_BOUND)]


# -- suites -----------------------------------------------------------------------

def _suite_reductions(ctx: SuiteContext, keys) -> tuple[list, dict]:
    checks, notes = [], {}
    for label, h in ctx.test_integrands():
        r = ctx.reduction(label, h)
        for key in keys:
            checks += r[key]
        notes[label] = r["summary"]
    return checks, notes


def suite_rank_invariance(ctx: SuiteContext):
    """Factorization identities and rank(K) = rank(H) across the test integrands."""
    return _suite_reductions(ctx, ("factor", "rank"))


def suite_reduction(ctx: SuiteContext):
    """Reduction to a k-dimensional driver: factorization, path identity, Levy checks on W."""
    return _suite_reductions(ctx, ("factor", "rank", "recon", "levy"))


def suite_s1_representation(ctx: SuiteContext):
    """``int sqrt(k) H dS^1 = int H dZ`` with ``S^1`` built on the reduction's frame."""
    return _suite_reductions(ctx, ("s1",))


def suite_worked_example(ctx: SuiteContext):
    """``X = int Z_2 dZ_1`` reduces to ``K = |Z_2|`` and ``dW = sgn(Z_2) dZ_1``."""
    Z = ctx.driver(max(2, ctx.d))
    X = ito_integrate(itg.z2_dz1(Z.d), Z)
    R = reduce_to_kBM(X, ctx.tol, ctx.threshold)
    z2 = Z.values[:, :-1, 1]
    mask = (z2 != 0) & ~R.carried
    K = R.K_samples[..., 0, 0] if R.k == 1 else np.full_like(z2, np.nan)
    k_gap = np.abs(K - np.abs(z2)) / np.maximum(1.0, np.abs(z2))
    dW = R.W.increments[..., 0] if R.k == 1 else np.full_like(z2, np.nan)
    w_gap = np.abs(dW - np.sign(z2) * Z.increments[..., 0])
    checks = [
        bool_check("k_hat = 1", R.k == 1, f"k={R.k}"),
        exact_check("max |K - |Z2|| / max(1, |Z2|) where |Z2| > tau", np.max(k_gap[mask]), ctx.exact),
        exact_check("max |dW - sgn(Z2) dZ1| where |Z2| > tau", np.max(w_gap[mask]), ctx.exact),
        exact_check("max relative path error of int K dW", np.max(R.reconstruction_error), ctx.exact),
    ] + ctx.levy(R.W)
    notes = {"checked_samples": int(mask.sum()), "carried_samples": int(R.carried.sum())}
    return checks, notes


def suite_split(ctx: SuiteContext):
    """``sqrt(k) S^1 + sqrt(d - k) S^2 = Z`` and zero instantaneous cross-covariation."""
    d = ctx.d
    if d < 2:
        raise InvalidArgument("the split needs d >= 2")
    k = min(ctx.cfg.suite.split_k, d - 1)
    Z = ctx.driver()
    frame = ctx.cfg.suite.frame.build(d)
    S1, S2 = split_S(Z, frame, k)
    err = split_identity_error(Z, S1, S2, k)
    scale = max(1.0, float(np.max(np.abs(Z.values))))
    orth = check_mutual_orthogonality(S1, S2, "instantaneous", ctx.exact)
    checks = [exact_check(f"max |sqrt(k) S1 + sqrt(d-k) S2 - Z| / scale (k={k})", err / scale, ctx.exact),
              exact_check("max |H_S1 H_S2^tr| (instantaneous cross-covariation)",
                          orth.max_cross, orth.bound)]
    checks += total_qv_and_drift(ctx, S1, "S1") + total_qv_and_drift(ctx, S2, "S2")
    return checks, {"k": k, "orthogonality": orth.to_json()}


def total_qv_and_drift(ctx: SuiteContext, P: MartingaleProcess, label: str) -> list[StatCheck]:
    P.label = label
    return norm_drift_checks(P, ctx.checkpoints, 1.0, ctx.z)


def suite_basis_invariance(ctx: SuiteContext):
    """Two orthonormal bases of one subspace give the same projector and the same ``S^1`` path."""
    sc = ctx.cfg.suite
    rng = np.random.default_rng([ctx.cfg.driver.seed, 41])
    small = make_grid(ctx.cfg.grid.T, min(ctx.cfg.grid.N, 256))
    worst_proj, worst_path, pairs = 0.0, 0.0, []
    for p in range(sc.basis_pairs):
        d = 2 + p % (sc.basis_max_dim - 1)
        k = int(rng.integers(1, d))
        Q = itg.random_orthogonal(d, rng)
        R = itg.random_orthogonal(k, rng)
        A = Q[:k]
        B = R @ A
        proj = float(np.max(np.abs(A.T @ A - B.T @ B)))
        Qb = np.vstack([B, Q[k:]])
        Z = generate_brownian(small, d, sc.small_paths, (ctx.cfg.driver.seed + 1000 + p) % 2**64)
        SA, _ = split_S(Z, itg.constant_frame(Q), k, cache=False)
        SB, _ = split_S(Z, itg.constant_frame(Qb), k, cache=False)
        gap = float(np.max(np.abs(SA.X - SB.X)) / max(1.0, float(np.max(np.abs(SA.X)))))
        worst_proj, worst_path = max(worst_proj, proj), max(worst_path, gap)
        pairs.append({"d": d, "k": k, "projector_gap": proj, "path_gap": gap})
    checks = [exact_check(f"max |A^tr A - B^tr B| over {sc.basis_pairs} pairs", worst_proj, ctx.exact),
              exact_check(f"max relative S1 path gap over {sc.basis_pairs} pairs", worst_path, ctx.exact)]
    return checks, {"pairs": pairs}


def _exact_bm(ctx: SuiteContext) -> GeneralBM:
    blocks = BlockSpec(ctx.cfg.blocks(), ctx.d)
    return exact_bm(ctx.driver(), ctx.cfg.suite.frame.build(ctx.d), blocks)


def suite_exact_bm(ctx: SuiteContext):
    """Exact general BM: block dimensions, mutual orthogonality, ``|T^r|^2 - t`` and QV accounting."""
    W = _exact_bm(ctx)
    checks, notes = [], {"blocks": list(W.blocks.K)}
    total = None
    for r, T in enumerate(W.components, start=1):
        kr = W.blocks.K[r - 1]
        rep = estimate_dimension(T, ctx.tol, threshold=ctx.threshold)
        checks += _dimension_checks(f"T{r}", rep, kr)
        checks += norm_drift_checks(T, ctx.checkpoints, 1.0, ctx.z)
        # the unnormalized block sum W^r = sqrt(k_r) T^r has bracket k_r t
        checks.append(stat_check(f"<W{r}>_T = k_r T for W{r} = sqrt(k_r) T{r}",
                                 kr * total_qv(T)[:, -1], kr * ctx.grid.T, ctx.z))
        H = T.integrand.evaluate(T.driver, 0, 0) if T.integrand.constant else T.integrand_samples()
        total = H if total is None else total + H
    ranks = batch_rank(np.asarray(total)[None, None] if np.ndim(total) == 2 else total, ctx.tol)
    rep = report_from_ranks(ranks, ctx.tol, "integrand", ctx.threshold)
    checks += _dimension_checks("sum of components", rep, sum(W.blocks.K))
    for a in range(W.m):
        for b in range(a + 1, W.m):
            orth = check_mutual_orthogonality(W.components[a], W.components[b], "instantaneous",
                                              ctx.exact)
            checks.append(exact_check(f"max |H_T{a + 1} H_T{b + 1}^tr|", orth.max_cross, orth.bound))
    return checks, notes


def suite_regularity(ctx: SuiteContext):
    """Every sum of exact-BM components has the additive Dimension."""
    W = _exact_bm(ctx)
    rep = check_regular(W, ctx.tol, ctx.threshold)
    return [bool_check(f"subset {s['subset']}: k_hat = {s['expected']}", s["passed"],
                       f"k_hat={s['k_hat']}, fraction={s['fraction']!r}")
            for s in rep.subsets], rep.to_json()


def suite_regularity_counterexample(ctx: SuiteContext):
    """``((Z_1, 0), (Z_2, 0))`` has Dimension 1 + 1 per component but 1 for the sum."""
    Z = ctx.driver(2)
    X1 = ito_integrate(itg.constant([[1.0, 0.0], [0.0, 0.0]]), Z, label="(Z1,0)")
    X2 = ito_integrate(itg.constant([[0.0, 1.0], [0.0, 0.0]]), Z, label="(Z2,0)")
    rep = check_regular(GeneralBM.assembled([X1, X2], (1, 1)), ctx.tol, ctx.threshold)
    return [bool_check("reported not-regular", not rep.regular)], rep.to_json()


def _complex_state_process(Z: BrownianPaths) -> MartingaleProcess:
    im = itg.history(1, 2, lambda w: np.stack([np.zeros_like(w.z[..., 0]), w.z[..., 0]],
                                              axis=-1)[..., None, :], name="(0, Z1)")
    X = ito_integrate(itg.stack(itg.z2_dz1(2), im), Z, label="Z2 dZ1 + i Z1 dZ2")
    X.complex_pair = True
    return X


def suite_beurling(ctx: SuiteContext):
    """Conformal part of ``int h dZ`` is annihilated by the right Beurling-Ahlfors transform."""
    Z = ctx.driver(2)
    checks, notes = [], {}
    cases = [("h=(1,0)", (1, 0)), ("h=(0,1)", (0, 1)), ("h=(1,i)", (1, 1j)),
             ("h=(1,-i)", (1, -1j)), ("h=(Z2, i Z1)", None)]
    for tag, h in cases:
        rep = beurling_annihilation_demo(_complex_state_process(Z) if h is None else h, Z, ctx.exact)
        checks += [
            exact_check(f"{tag}: max |X2 * B| / scale", rep.x2_transform_max / rep.scale, ctx.exact),
            exact_check(f"{tag}: max |X * B - X1 * B| (relative)", rep.x_vs_x1_error, ctx.exact),
            exact_check(f"{tag}: max |X1 + X2 - X| / scale", rep.decomposition_error / rep.scale,
                        ctx.exact),
        ]
        if h == (1, 1j):
            checks.append(exact_check(f"{tag}: fully annihilated, max |X * B| / scale",
                                      rep.x_transform_max / rep.scale, ctx.exact))
        notes[tag] = rep.to_json()
    return checks, notes


def suite_homotopy(ctx: SuiteContext):
    """``(sqrt(s) Z_1, sqrt(1 - s) Z_2)`` has Dimension 1 at the ends and 2 inside."""
    Z = ctx.driver(2)
    checks, notes = [], {}
    for s in ctx.cfg.suite.homotopy_s:
        _, rep = homotopy_family(s, Z, ctx.tol, ctx.threshold)
        checks += _dimension_checks(f"s={s:g}", rep, 1 if s in (0.0, 1.0) else 2)
        notes[f"s={s:g}"] = rep.to_json() | {"per_step_histogram": None}
    return checks, notes


def suite_dimension(ctx: SuiteContext):
    """Dimension classification of the standard examples and of exact-BM blocks."""
    Z = ctx.driver(2)
    r2 = 1 / np.sqrt(2)
    cases = [
        ("(Z1, 0)", itg.constant([[1.0, 0.0], [0.0, 0.0]]), 1),
        ("(Z1, Z2)/sqrt2", itg.constant([[r2, 0.0], [0.0, r2]]), 2),
        ("int Z2 dZ1", itg.z2_dz1(2), 1),
        ("Graph(int Z2 dZ1)", itg.graph_of(itg.z2_dz1(2)), 2),
    ]
    checks, notes = [], {}
    for tag, h, k in cases:
        rep = estimate_dimension(ito_integrate(h, Z, cache=not h.constant), ctx.tol,
                                 threshold=ctx.threshold)
        checks += _dimension_checks(tag, rep, k)
        notes[tag] = rep.to_json() | {"per_step_histogram": None}
    hc, hn = suite_homotopy(ctx)
    bc, bn = suite_exact_bm(ctx)
    dims = [c for c in bc if isinstance(c, ExactCheck) and ("k_hat" in c.name or "deficient" in c.name)]
    checks += hc + dims
    notes["homotopy"] = hn
    notes["exact_bm"] = bn
    return checks, notes


def suite_martingale(ctx: SuiteContext):
    """The configured process and the driver have zero mean at every checkpoint."""
    Z = ctx.driver()
    X = ito_integrate(ctx.cfg.build_integrand(), Z, cache=False)
    return ctx.martingale(X, "X") + ctx.martingale(Z, "Z"), {}


def suite_time_change(ctx: SuiteContext):
    """Read on its own QV clock the configured process has unit QV rate."""
    X = ito_integrate(ctx.cfg.build_integrand(), ctx.driver(), cache=False)
    steps = max(1, ctx.grid.N // 16)
    tc = time_change_normalize(X, clock_steps=steps)
    checks = []
    if tc.valid.sum() >= 2:
        checks.append(stat_check("realized QV of Y minus reached clock = 0 (per unit clock)",
                                 tc.clock_qv_gap(), 0.0, ctx.z))
    notes = {"kept_paths": int(tc.valid.sum()), "stagnant_paths": int(tc.stagnant.sum()),
             "clock_span": float(tc.clock[-1]), "clock_steps": steps,
             "mean_unit_clock_qv": float(np.mean(tc.unit_clock_qv())),
             "mean_relative_overshoot": float(np.mean(tc.overshoot()))}
    return checks, notes


SuiteFn = Callable[[SuiteContext], tuple[list, dict]]

SUITES: dict[str, SuiteFn] = {
    "rank-invariance": suite_rank_invariance,
    "reduction": suite_reduction,
    "worked-example": suite_worked_example,
    "s1-representation": suite_s1_representation,
    "split": suite_split,
    "basis-invariance": suite_basis_invariance,
    "exact-bm": suite_exact_bm,
    "regularity": suite_regularity,
    "regularity-counterexample": suite_regularity_counterexample,
    "beurling": suite_beurling,
    "homotopy": suite_homotopy,
    "dimension": suite_dimension,
    "martingale": suite_martingale,
    "time-change": suite_time_change,
}

# the theorem identifiers used by CI configurations
ALIASES: dict[str, str] = {
    "Thm3.1": "rank-invariance",
    "Thm3.2": "reduction",
    "Thm3.3": "reduction",
    "Thm4.2": "s1-representation",
    "Prop4.1": "basis-invariance",
    "Prop4.2": "exact-bm",
    "Def4.1": "exact-bm",
    "Def4.2": "regularity",
    "Def4.2-counterexample": "regularity-counterexample",
    "Cor4.1": "time-change",
}

# "rank-invariance" is a subset of "reduction", so the full run skips it
ALL_ORDER = [s for s in SUITES if s != "rank-invariance"]


def suite_names() -> list[str]:
    return sorted(SUITES) + sorted(ALIASES) + ["all"]


def resolve_suite(name: str) -> str:
    key = name.replace(" ", "")
    if key in SUITES or key == "all":
        return key
    if key in ALIASES:
        return ALIASES[key]
    raise InvalidArgument(f"unknown theorem or suite id {name!r}; known: {', '.join(suite_names())}")


def run_theorem_suite(name: str, config=None, context: SuiteContext | None = None) -> TheoremReport:
    """Run one suite (or ``"all"``) and aggregate its checks."""
    from martdim.config import default_config
    canonical = resolve_suite(name)
    if context is None:
        context = SuiteContext(config if config is not None else default_config())
    if canonical == "all":
        parts = [run_theorem_suite(s, context=context) for s in ALL_ORDER]
        return TheoremReport(name, "all", [], {}, context.policy, parts)
    checks, notes = SUITES[canonical](context)
    if not context.statistics:
        checks = [c for c in checks if not isinstance(c, StatCheck)]
        notes = dict(notes, statistics_skipped=f"M={context.cfg.driver.M} < {MIN_PATHS} paths")
    return TheoremReport(name, canonical, checks, notes, context.policy)
