from pathlib import Path
from typing import Any, Callable, Dict, Optional

import typer

from evmanifold.app.cli.common import (
    build_config, echo_json, parse_float_list, parse_name_list, run_command
)
from evmanifold.app.core.pipeline import AnalysisPipeline
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("cli.analysis")


def _run_pipeline(ctx: typer.Context, command: str, with_manifold: bool, x_path: Path, y_path: Path,
                  out_dir: Path, flags: Callable[[], Dict[str, Any]]) -> None:
    def action():
        cfg = build_config(ctx, **flags())
        pipeline = AnalysisPipeline(cfg, out_dir, command=command)
        summary = pipeline.run(x_path, y_path, with_manifold=with_manifold)
        echo_json({
            "status": summary.status,
            "summary": str(out_dir / "summary.json"),
            "sigma_hat": summary.spectral.sigma_hat,
            "k_exceedances": summary.spectral.k_exceedances,
        })

    run_command(action)


def _flags(seed, threshold, block, fit_sample, fit_level, seasonality, no_seasonality, as_losses, w_years, wsn_days,
           posterior, mcmc_iters, mcmc_burnin, k, competitors, quad_nodes, sigma_lower, sigma_upper):
    return dict(
        seed=seed, threshold=threshold, block=block, fit_sample=fit_sample, fit_level=fit_level,
        seasonality="off" if no_seasonality else seasonality, as_losses=as_losses,
        w_years=w_years, wsn_days=wsn_days, posterior=posterior, mcmc_iters=mcmc_iters,
        mcmc_burnin=mcmc_burnin, k_params=k, competitors=parse_name_list(competitors),
        quad_nodes=quad_nodes, sigma_lower=sigma_lower, sigma_upper=sigma_upper,
    )


def cmd_fit(
    ctx: typer.Context,
    x_path: Path = typer.Option(..., "--x", help="first margin CSV"),
    y_path: Path = typer.Option(..., "--y", help="second margin CSV"),
    out_dir: Path = typer.Option(Path("."), "--out-dir"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    threshold: Optional[float] = typer.Option(None, "--threshold"),
    block: Optional[str] = typer.Option(None, "--block"),
    fit_sample: Optional[str] = typer.Option(None, "--fit-sample", help="auto | exceedances | all"),
    fit_level: Optional[float] = typer.Option(None, "--fit-level", help="covariate quantile for exceedance fits"),
    seasonality: Optional[str] = typer.Option(None, "--seasonality"),
    no_seasonality: bool = typer.Option(False, "--no-seasonality"),
    as_losses: Optional[bool] = typer.Option(None, "--as-losses/--no-as-losses"),
    w_years: Optional[float] = typer.Option(None, "--w-years"),
    wsn_days: Optional[float] = typer.Option(None, "--wsn-days"),
    posterior: Optional[bool] = typer.Option(None, "--posterior/--no-posterior"),
    mcmc_iters: Optional[int] = typer.Option(None, "--mcmc-iters"),
    mcmc_burnin: Optional[int] = typer.Option(None, "--mcmc-burnin"),
    k: Optional[int] = typer.Option(None, "--k", help="parameter count used for AIC/BIC"),
    competitors: Optional[str] = typer.Option(None, "--competitors", help="e.g. logistic,hr,ct"),
    quad_nodes: Optional[int] = typer.Option(None, "--quad-nodes"),
    sigma_lower: Optional[float] = typer.Option(None, "--sigma-lower"),
    sigma_upper: Optional[float] = typer.Option(None, "--sigma-upper"),
):
    """Fit the spectral sigma and score it; writes the run summary without manifolds."""
    _run_pipeline(ctx, "fit", False, x_path, y_path, out_dir,
                  lambda: _flags(seed, threshold, block, fit_sample, fit_level, seasonality, no_seasonality, as_losses,
                           w_years, wsn_days, posterior, mcmc_iters, mcmc_burnin, k, competitors,
                           quad_nodes, sigma_lower, sigma_upper))


def cmd_analyze(
    ctx: typer.Context,
    x_path: Path = typer.Option(..., "--x", help="first margin CSV"),
    y_path: Path = typer.Option(..., "--y", help="second margin CSV"),
    out_dir: Path = typer.Option(Path("."), "--out-dir"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    threshold: Optional[float] = typer.Option(None, "--threshold"),
    block: Optional[str] = typer.Option(None, "--block"),
    fit_sample: Optional[str] = typer.Option(None, "--fit-sample", help="auto | exceedances | all"),
    fit_level: Optional[float] = typer.Option(None, "--fit-level", help="covariate quantile for exceedance fits"),
    seasonality: Optional[str] = typer.Option(None, "--seasonality"),
    no_seasonality: bool = typer.Option(False, "--no-seasonality"),
    as_losses: Optional[bool] = typer.Option(None, "--as-losses/--no-as-losses"),
    w_years: Optional[float] = typer.Option(None, "--w-years"),
    wsn_days: Optional[float] = typer.Option(None, "--wsn-days"),
    posterior: Optional[bool] = typer.Option(None, "--posterior/--no-posterior"),
    mcmc_iters: Optional[int] = typer.Option(None, "--mcmc-iters"),
    mcmc_burnin: Optional[int] = typer.Option(None, "--mcmc-burnin"),
    manifold_mode: Optional[str] = typer.Option(None, "--manifold-mode", help="plugin | posterior_mean"),
    k: Optional[int] = typer.Option(None, "--k", help="parameter count used for AIC/BIC"),
    competitors: Optional[str] = typer.Option(None, "--competitors", help="e.g. logistic,hr,ct"),
    quad_nodes: Optional[int] = typer.Option(None, "--quad-nodes"),
    sigma_lower: Optional[float] = typer.Option(None, "--sigma-lower"),
    sigma_upper: Optional[float] = typer.Option(None, "--sigma-upper"),
    q_grid: Optional[str] = typer.Option(None, "--q-grid", help="comma-separated probabilities"),
    x_min: Optional[float] = typer.Option(None, "--x-min"),
    x_max: Optional[float] = typer.Option(None, "--x-max"),
    x_points: Optional[int] = typer.Option(None, "--x-points"),
    table_q: Optional[str] = typer.Option(None, "--table-q", help="quantile levels of the table"),
    table_levels: Optional[str] = typer.Option(None, "--table-levels", help="covariate levels, data scale"),
    table_probs: Optional[str] = typer.Option(None, "--table-probs", help="covariate levels as probabilities"),
):
    """Run the full analysis: decomposition, spectral fit, manifolds, quantile table and scores."""

    def flags():
        base = _flags(seed, threshold, block, fit_sample, fit_level, seasonality, no_seasonality, as_losses, w_years,
                      wsn_days, posterior, mcmc_iters, mcmc_burnin, k, competitors, quad_nodes,
                      sigma_lower, sigma_upper)
        base.update(
            manifold_mode=manifold_mode,
            q_grid=parse_float_list(q_grid, "--q-grid"),
            x_min=x_min, x_max=x_max, x_points=x_points,
            table_q_levels=parse_float_list(table_q, "--table-q"),
            table_covariate_levels=parse_float_list(table_levels, "--table-levels"),
            table_covariate_probs=parse_float_list(table_probs, "--table-probs"),
        )
        return base

    _run_pipeline(ctx, "analyze", True, x_path, y_path, out_dir, flags)
