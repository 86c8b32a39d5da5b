"""
Shared fixtures: seeded generators, synthetic calendar series, the CLI
runner and the bundled yearly sample shipped under data/
"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from evmanifold.app.config import settings
from evmanifold.app.core.margins import UniSeries
from evmanifold.app.main import create_app
from evmanifold.app.utilities.telemetry import initialize_logging

SAMPLE_DIR = Path(__file__).resolve().parents[2] / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def make_series():
    """Factory: values on a regular calendar starting at ``start``"""

    def build(values, start: str = "2000-01-01", freq: str = "D") -> UniSeries:
        values = np.asarray(values, dtype=float)
        times = pd.date_range(start=start, periods=values.size, freq=freq)
        return UniSeries(times.to_numpy(), values)

    return build


@pytest.fixture
def cli_app():
    return create_app()


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="session")
def yearly_sample():
    """The bundled sample: 50 yearly maxima pairs, 1973-2022"""
    return SAMPLE_DIR / "sample_yearly_x.csv", SAMPLE_DIR / "sample_yearly_y.csv"


@pytest.fixture
def restore_logging():
    """Put the settings-driven logging setup back after a test reconfigures it"""
    yield
    initialize_logging(settings.logging_config())
