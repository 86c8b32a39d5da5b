import typer

from evmanifold.app.cli.router import include_commands
from evmanifold.app.config import settings


def create_app() -> typer.Typer:
    """Create and configure the command-line application"""
    app = typer.Typer(
        name=settings.app_name,
        add_completion=False,
        no_args_is_help=True,
        pretty_exceptions_enable=False,
    )
    return include_commands(app)
