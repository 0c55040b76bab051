"""Command-line entry points: run, sweep, analyze-h."""
from __future__ import annotations

import json
from pathlib import Path

import click

from .cases import CASE_IDS, make_case
from .datagen import nominal_config
from .harness import (
    LAMBDA_NOMINAL,
    StageError,
    SweepSpec,
    residual_distribution_report,
    run_identification,
    run_sweep,
)


def _resolve_deviation(case, deviation: str):
    """Map a state name (or 'none') to the campaign's deviation target."""
    if deviation == "none":
        return "none"
    names = case.system.state_names
    if deviation not in names:
        raise click.BadParameter(
            f"unknown state {deviation!r} for case {case.name!r}; "
            f"choose one of {', '.join(names)} or 'none'"
        )
    return names.index(deviation)


@click.group()
def main():
    """Locate and compensate model-equation mismatch from simulated batches."""


@main.command("run")
@click.option("--case", "case_id", type=click.Choice(CASE_IDS), required=True)
@click.option("--deviation", default="none", show_default=True,
              help="State name carrying the synthetic deviation, or 'none'.")
@click.option("--noise", type=float, default=0.1, show_default=True)
@click.option("--train", type=int, default=6, show_default=True)
@click.option("--test", type=int, default=2, show_default=True)
@click.option("--nt", type=int, default=15, show_default=True)
@click.option("--lambda", "lambda_user", type=float, default=LAMBDA_NOMINAL,
              show_default=True, help="Regularisation weight (sweep-scale units).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Run directory for all intermediates.")
def run_cmd(case_id, deviation, noise, train, test, nt, lambda_user, seed, out):
    """Run one identification end to end and print the outcome."""
    case = make_case(case_id)
    config = nominal_config(
        case, _resolve_deviation(case, deviation),
        n_train=train, n_test=test, n_t=nt, noise_level=noise, seed=seed,
    )
    try:
        hm, report, solution = run_identification(
            config, lambda_user=lambda_user, out_dir=out
        )
    except StageError as exc:
        raise click.ClickException(str(exc)) from exc

    names = case.system.state_names
    identified = ", ".join(names[j] for j in sorted(report.identified_states)) or "(none)"
    click.echo(f"case:        {case_id}")
    click.echo(f"deviation:   {deviation}")
    click.echo(f"identified:  {identified}")
    click.echo(f"success:     {report.identification_success}")
    click.echo(f"milp status: {solution.status}  (objective {solution.objective:.6g}, "
               f"{solution.nodes} nodes)")
    click.echo(f"test R2:     {report.r2_mean:.4f}   test MAE: {report.mae_mean:.4g}")
    click.echo(f"train R2:    {report.r2_train_mean:.4f}   train MAE: {report.mae_train_mean:.4g}")
    for line in hm.correction_text():
        click.echo(f"  {line}")
    if out is not None:
        click.echo(f"artifacts:   {out}")


@main.command("sweep")
@click.option("--spec", "spec_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Sweep specification JSON.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--workers", type=int, default=None,
              help="Parallel workers (default: SINDYBRID_WORKERS or 1).")
def sweep_cmd(spec_path, out, workers):
    """Run a sweep campaign from a JSON spec; writes results.csv."""
    spec = SweepSpec.from_json_dict(json.loads(spec_path.read_text()))
    rows = run_sweep(spec, out, workers=workers)
    n_ok = sum(1 for r in rows if r["success"])
    n_err = sum(1 for r in rows if str(r["status"]).startswith("error:"))
    click.echo(f"{len(rows)} cells -> {n_ok} successes, {n_err} errors")
    click.echo(f"results: {Path(out) / 'results.csv'}")


@main.command("analyze-h")
@click.option("--case", "case_id", type=click.Choice(CASE_IDS), required=True)
@click.option("--deviation", default="none", show_default=True)
@click.option("--noise", "noise_levels", type=float, multiple=True,
              default=(0.0, 0.1, 0.2, 0.3, 0.4), show_default=True)
@click.option("--seeds", type=int, default=8, show_default=True,
              help="Number of independent campaigns averaged per level.")
@click.option("--nt", type=int, default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Optional JSON output path.")
def analyze_h_cmd(case_id, deviation, noise_levels, seeds, nt, out):
    """Residual column statistics across noise levels."""
    case = make_case(case_id)
    target = _resolve_deviation(case, deviation)
    table = residual_distribution_report(
        case, target, noise_levels, seeds=range(seeds), n_t=nt
    )
    names = case.system.state_names
    header = "noise    " + "".join(f"{n:>14}" for n in names) + "    dominance"
    click.echo(header)
    for entry in table:
        means = "".join(f"{entry['means'][n]:>14.5g}" for n in names)
        click.echo(f"{entry['noise']:<9.3g}{means}    {entry['dominance']:.3g}")
        stds = "".join(f"{entry['stds'][n]:>14.5g}" for n in names)
        click.echo(f"  (std)  {stds}")
    if out is not None:
        Path(out).write_text(json.dumps(table, indent=2))
        click.echo(f"written: {out}")


if __name__ == "__main__":
    main()
