from pathlib import Path
from typing import Optional

import pandas as pd
import typer

from evmanifold.app.cli.common import build_config, echo_json, model_params, parse_float_list, run_command
from evmanifold.app.core.evmodels import ModelKind, build_model
from evmanifold.app.core.manifold import approx_frame, build_manifold
from evmanifold.app.core.manifold_exceptions import ValidationError
from evmanifold.app.core.pipeline import solver_config
from evmanifold.app.core.spectral import GaussQuadRule
from evmanifold.app.schemas.summary import RunSummary
from evmanifold.app.utilities.converters import convert_spec_to_model
from evmanifold.app.utilities.io import read_json, write_frame, write_json


def cmd_manifold(
    ctx: typer.Context,
    model: Optional[str] = typer.Option(None, "--model", help="logistic | hr | ct | semiparam"),
    alpha: Optional[float] = typer.Option(None, "--alpha"),
    beta: Optional[float] = typer.Option(None, "--beta"),
    lam: Optional[float] = typer.Option(None, "--lambda"),
    sigma: Optional[float] = typer.Option(None, "--sigma"),
    summary_path: Optional[Path] = typer.Option(None, "--summary", help="fitted run summary to take the model from"),
    q_grid: Optional[str] = typer.Option(None, "--q-grid", help="comma-separated probabilities"),
    x_min: Optional[float] = typer.Option(None, "--x-min"),
    x_max: Optional[float] = typer.Option(None, "--x-max"),
    x_points: Optional[int] = typer.Option(None, "--x-points"),
    approx: bool = typer.Option(False, "--approx", help="add the closed-form logistic approximation"),
    quad_nodes: Optional[int] = typer.Option(None, "--quad-nodes"),
    out: Path = typer.Option(Path("manifold.csv"), "--out"),
):
    """Build a regression manifold on the Frechet scale."""
    if model is None and summary_path is None:
        raise typer.BadParameter("give --model with its parameters, or --summary", param_hint="--model")

    def action():
        cfg = build_config(ctx, q_grid=parse_float_list(q_grid, "--q-grid"), x_min=x_min, x_max=x_max,
                           x_points=x_points, quad_nodes=quad_nodes)
        rule = GaussQuadRule.hermite(cfg.quad_nodes)
        q_values, x_values = cfg.q_grid, list(cfg.x_grid())

        if summary_path is not None:
            summary = RunSummary.model_validate(read_json(summary_path))
            if summary.model is None:
                raise ValidationError(f"{summary_path} holds no fitted model")
            ev_model = convert_spec_to_model(summary.model, rule)
            if summary.grids is not None and q_grid is None and x_min is None and x_max is None and x_points is None:
                q_values, x_values = summary.grids.q_grid, summary.grids.x_grid
        else:
            ev_model = build_model(model, model_params(alpha, beta, lam, sigma), rule)

        if approx and ev_model.kind != ModelKind.LOGISTIC:
            raise ValidationError("--approx applies to the logistic model only")

        solver = solver_config(cfg)
        manifold = build_manifold(ev_model, q_values, x_values, solver)
        frame: pd.DataFrame = approx_frame(manifold, ev_model.alpha) if approx else manifold.to_frame()
        write_frame(out, frame)
        meta = manifold.metadata(solver)
        meta["approx"] = approx
        write_json(out.with_suffix(".json"), meta)
        echo_json({"manifold": str(out), "cells": int(manifold.y.size), "model": ev_model.label()})

    run_command(action)
