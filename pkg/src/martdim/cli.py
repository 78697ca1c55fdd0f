"""Command-line front end: ``martdim simulate|dimension|reduce|verify``.

Every command reads one YAML config (the packaged default when ``--config``
is omitted), applies command-line overrides, and writes its outputs
atomically into the output directory (``--out``, then ``output.directory``,
then ``$MARTDIM_OUT``, then ``./martdim-out``). JSON outputs echo the
effective config; the only run-dependent field is ``metadata.timestamp``.

Exit codes: 0 success, 1 statistical failure, 2 exact-identity failure (verify
only), 3 invalid input or configuration.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from martdim import __version__
from martdim.config import (ExperimentConfig, default_config, default_config_text, json_schema,
                            load_config, with_overrides)
from martdim.errors import MartdimError
from martdim.factor import reduce_to_kBM
from martdim.io import atomic_write_text, write_json
from martdim.ito import ito_integrate, process_to_csv
from martdim.paths import generate_brownian, make_grid, paths_to_csv, save_paths
from martdim.rank_dim import COVARIATION, INTEGRAND, estimate_dimension
from martdim.verify import (ALL_ORDER, SuiteContext, TheoremReport, levy_test, report_document,
                            run_metadata, run_theorem_suite)

EXIT_INPUT = 3


def _common(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False),
                     help="YAML experiment config (default: packaged default)."),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Driver seed (u64)."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
        click.option("--tolerance", type=click.FloatRange(0, 1, min_open=True, max_open=True),
                     help="Relative rank tolerance eps_rel."),
        click.option("--paths", type=click.IntRange(1), help="Number of paths M."),
        click.option("--steps", type=click.IntRange(1), help="Number of grid steps N."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


class _Run:
    def __init__(self, config_path, seed, out, tolerance, paths, steps):
        base = load_config(config_path) if config_path else default_config()
        self.cfg: ExperimentConfig = with_overrides(base, seed=seed, tolerance=tolerance,
                                                    paths=paths, steps=steps)
        self.out = self.cfg.out_dir(out)

    def driver(self):
        c = self.cfg
        return generate_brownian(make_grid(c.grid.T, c.grid.N), c.driver.d, c.driver.M, c.driver.seed)

    def document(self, command: str, payload: dict) -> dict:
        return {"command": command, "result": payload, "config": self.cfg.effective(),
                "metadata": run_metadata()}

    def write(self, name: str, doc: dict) -> Path:
        path = write_json(self.out / name, doc)
        click.echo(f"wrote {path}")
        return path


def _guard(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MartdimError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.version_option(__version__, prog_name="martdim")
def main():
    """Simulate Brownian-driven martingales, estimate their Dimension, reduce, and verify."""


@main.command()
@_common
@_guard
def simulate(config_path, seed, out, tolerance, paths, steps):
    """Generate driver paths and the configured process; write binary paths and CSVs."""
    run = _Run(config_path, seed, out, tolerance, paths, steps)
    Z = run.driver()
    X = ito_integrate(run.cfg.build_integrand(), Z, cache=False)
    rows = run.cfg.output.csv_paths
    save_paths(Z, run.out / "driver.mdbp")
    atomic_write_text(run.out / "driver.csv", paths_to_csv(Z, rows))
    atomic_write_text(run.out / "process.csv", process_to_csv(X, rows))
    terminal = X.X[:, -1]
    payload = {"files": ["driver.mdbp", "driver.csv", "process.csv"],
               "integrand": X.integrand.name, "n": X.n, "d": X.d, "M": X.M, "N": X.grid.N,
               "terminal_mean": terminal.mean(axis=0), "terminal_var": terminal.var(axis=0, ddof=1)}
    run.write("simulate.json", run.document("simulate", payload))


@main.command()
@_common
@_guard
def dimension(config_path, seed, out, tolerance, paths, steps):
    """Estimate the Dimension of the configured process in both bases."""
    run = _Run(config_path, seed, out, tolerance, paths, steps)
    X = ito_integrate(run.cfg.build_integrand(), run.driver())
    thr = run.cfg.tolerance.dimension_threshold
    tol = run.cfg.tolerance.rank()
    rep = estimate_dimension(X, tol, INTEGRAND, thr)
    cov = estimate_dimension(X, tol, COVARIATION, thr)
    payload = {"k_hat": rep.k_hat, "integrand": rep.to_json(),
               "covariation": cov.to_json() | {"per_step_histogram": None},
               "bases_agree": rep.k_hat == cov.k_hat}
    run.write("dimension.json", run.document("dimension", payload))
    click.echo(f"k_hat={rep.k_hat} fraction={rep.fraction:.6f}"
               + (" FLAGGED" if rep.flagged else ""))


@main.command()
@_common
@_guard
def reduce(config_path, seed, out, tolerance, paths, steps):
    """Reduce the configured process to a k-dimensional driver W and test W with Levy."""
    run = _Run(config_path, seed, out, tolerance, paths, steps)
    X = ito_integrate(run.cfg.build_integrand(), run.driver())
    R = reduce_to_kBM(X, run.cfg.tolerance.rank(), run.cfg.tolerance.dimension_threshold)
    ctx = SuiteContext(run.cfg)
    levy = levy_test(R.W, ctx.checkpoints, ctx.z) if R.k and R.W.M >= 30 else []
    report = TheoremReport("levy", "levy", levy, {}, ctx.policy)
    save_paths(R.W, run.out / "W.mdbp")
    atomic_write_text(run.out / "W.csv", paths_to_csv(R.W, run.cfg.output.csv_paths))
    payload = {"factorization": R.summary(), "levy": report.to_json(),
               "files": ["W.mdbp", "W.csv"]}
    run.write("reduce.json", run.document("reduce", payload))
    click.echo(f"k={R.k} max_reconstruction_error={np.max(R.reconstruction_error):.3e} "
               f"levy={'pass' if report.passed else 'FAIL'}")
    if not report.passed:
        sys.exit(report.exit_code)


@main.command()
@click.argument("suites", nargs=-1)
@_common
@_guard
def verify(suites, config_path, seed, out, tolerance, paths, steps):
    """Run theorem suites (ids like Thm3.2 or names like reduction; default from config)."""
    run = _Run(config_path, seed, out, tolerance, paths, steps)
    names = list(suites) or list(run.cfg.suite.names)
    ctx = SuiteContext(run.cfg)
    worst = 0
    for name in names:
        report = run_theorem_suite(name, context=ctx)
        doc = report_document(report, run.cfg.effective())
        safe = name.replace(" ", "").replace("/", "_")
        run.write(f"verify-{safe}.json", doc)
        for part in report.parts or [report]:
            click.echo(f"{'PASS' if part.passed else 'FAIL'} {part.suite} (exit {part.exit_code})")
        worst = max(worst, report.exit_code)
    sys.exit(worst)


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), help="Write to a file instead of stdout.")
def schema(out):
    """Print the JSON schema of the config file."""
    text = json.dumps(json_schema(), indent=2, sort_keys=True) + "\n"
    if out:
        atomic_write_text(out, text)
    else:
        click.echo(text, nl=False)


@main.command("default-config")
def default_config_cmd():
    """Print the packaged default config."""
    click.echo(default_config_text(), nl=False)


@main.command("suites")
def list_suites():
    """List suite names and theorem-id aliases."""
    from martdim.verify import ALIASES, SUITES
    for name, fn in SUITES.items():
        click.echo(f"{name:28s} {(fn.__doc__ or '').strip().splitlines()[0]}")
    for alias, target in ALIASES.items():
        click.echo(f"{alias:28s} -> {target}")
    click.echo(f"{'all':28s} every suite: {', '.join(ALL_ORDER)}")


if __name__ == "__main__":  # pragma: no cover
    main()
