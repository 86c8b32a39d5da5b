"""
Helpers shared by the command modules: global state, config layering,
list parsing and the error boundary that maps failures to exit codes.
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import typer

from evmanifold.app.config import RunConfig, config_manager
from evmanifold.app.core.exceptions import report_error
from evmanifold.app.core.manifold_exceptions import ManifoldError, ValidationError
from evmanifold.app.utilities.io import dump_json


@dataclass
class CliState:
    config_file: Optional[str] = None


def cli_state(ctx: typer.Context) -> CliState:
    root = ctx.find_root()
    if not isinstance(root.obj, CliState):
        root.obj = CliState()
    return root.obj


def run_command(action: Callable[[], None]) -> None:
    """Run a command body; library failures become an ErrorDetail on stderr and a mapped exit code"""
    try:
        action()
    except (ManifoldError, FileNotFoundError, FloatingPointError) as e:
        raise typer.Exit(code=report_error(e))


def build_config(ctx: typer.Context, **overrides: Any) -> RunConfig:
    """Flags over --config file over environment over shipped defaults"""
    return config_manager.build_run_config(cli_state(ctx).config_file, overrides)


def parse_float_list(text: Optional[str], what: str) -> Optional[List[float]]:
    """'0.1,0.2' -> [0.1, 0.2]; None stays None so the layered config decides"""
    if text is None:
        return None
    items = [item.strip() for item in text.split(",") if item.strip()]
    try:
        return [float(item) for item in items]
    except ValueError:
        raise ValidationError(f"{what} must be a comma-separated list of numbers, got {text!r}")


def parse_name_list(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [item.strip().lower() for item in text.split(",") if item.strip()]


def model_params(alpha: Optional[float], beta: Optional[float],
                 lam: Optional[float], sigma: Optional[float]) -> Dict[str, float]:
    given = {"alpha": alpha, "beta": beta, "lambda": lam, "sigma": sigma}
    return {key: value for key, value in given.items() if value is not None}


def echo_json(data: Dict[str, Any]) -> None:
    typer.echo(dump_json(data), nl=False)
