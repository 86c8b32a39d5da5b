from pathlib import Path
from typing import Optional

import typer

from evmanifold.app.cli.analysis import cmd_analyze, cmd_fit
from evmanifold.app.cli.common import cli_state
from evmanifold.app.cli.compare import cmd_compare
from evmanifold.app.cli.manifold import cmd_manifold
from evmanifold.app.cli.simulate import cmd_simulate
from evmanifold.app.cli.stationarize import cmd_stationarize
from evmanifold.app.config import settings
from evmanifold.app.utilities.telemetry import LogFormat, initialize_logging


def root_callback(
    ctx: typer.Context,
    log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG | INFO | WARNING | ERROR"),
    log_format: Optional[str] = typer.Option(
        None, "--log-format", help="json_compact | json_pretty | standard | detailed"
    ),
    log_file: Optional[Path] = typer.Option(None, "--log-file", help="Also write logs to this rotating file"),
    config: Optional[Path] = typer.Option(None, "--config", help="JSON or YAML run configuration"),
):
    """Non-stationary bivariate extremes: spectral fits and regression manifolds."""
    state = cli_state(ctx)
    state.config_file = str(config) if config is not None else None

    if log_format is not None and log_format not in {f.value for f in LogFormat}:
        raise typer.BadParameter(
            f"Unknown log format '{log_format}'. Available: {[f.value for f in LogFormat]}",
            param_hint="--log-format",
        )
    try:
        logging_config = settings.logging_config(
            level=log_level,
            format_type=log_format,
            log_file=str(log_file) if log_file is not None else None,
        )
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--log-level")
    initialize_logging(logging_config)


def include_commands(app: typer.Typer) -> typer.Typer:
    """Attach every command to ``app``"""
    app.callback()(root_callback)
    app.command("simulate")(cmd_simulate)
    app.command("stationarize")(cmd_stationarize)
    app.command("fit")(cmd_fit)
    app.command("manifold")(cmd_manifold)
    app.command("compare")(cmd_compare)
    app.command("analyze")(cmd_analyze)
    return app
