from pathlib import Path
from typing import Optional

import typer

from evmanifold.app.cli.common import build_config, echo_json, run_command
from evmanifold.app.core.margins import block_maxima, fit_gev, read_series_csv, to_losses
from evmanifold.app.core.pipeline import ts_config
from evmanifold.app.core.tstationary import YEARLY_SPACING_DAYS, destationarize_gev, stationarize
from evmanifold.app.utilities.io import write_frame, write_json
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("cli.stationarize")


def cmd_stationarize(
    ctx: typer.Context,
    input_path: Path = typer.Option(..., "--input", help="two-column date,value CSV"),
    out_dir: Path = typer.Option(Path("."), "--out-dir"),
    block: Optional[str] = typer.Option(None, "--block", help="none | week | month | year (GEV sample)"),
    w_years: Optional[float] = typer.Option(None, "--w-years"),
    wsn_days: Optional[float] = typer.Option(None, "--wsn-days"),
    smoothing_divisor: Optional[int] = typer.Option(None, "--smoothing-divisor"),
    extra_smoothing: Optional[bool] = typer.Option(None, "--extra-smoothing/--no-extra-smoothing"),
    seasonality: Optional[str] = typer.Option(None, "--seasonality", help="auto | on | off"),
    no_seasonality: bool = typer.Option(False, "--no-seasonality", help="same as --seasonality off"),
    as_losses: Optional[bool] = typer.Option(None, "--as-losses/--no-as-losses"),
):
    """Stationarize one series, fit a stationary GEV and map it back to time-varying parameters."""

    def action():
        cfg = build_config(
            ctx, block=block, w_years=w_years, wsn_days=wsn_days, smoothing_divisor=smoothing_divisor,
            extra_smoothing=extra_smoothing, seasonality="off" if no_seasonality else seasonality,
            as_losses=as_losses,
        )
        series = read_series_csv(input_path)
        if cfg.as_losses:
            series = to_losses(series)
        stationary, decomposition = stationarize(series, ts_config(cfg))

        gev_block = cfg.block
        if gev_block == "none" and series.median_spacing_days() < YEARLY_SPACING_DAYS:
            gev_block = "year"
        sample = stationary if gev_block == "none" else block_maxima(stationary, gev_block)
        params = fit_gev(sample.values)
        timevarying = destationarize_gev(params, decomposition)

        out_dir.mkdir(parents=True, exist_ok=True)
        write_frame(out_dir / "decomposition.csv", decomposition.to_frame())
        write_frame(out_dir / "gev_timevarying.csv", timevarying.to_frame())
        write_json(out_dir / "gev_fit.json", {
            "source": str(input_path),
            "block": gev_block,
            "n_maxima": len(sample),
            "season_enabled": bool(decomposition.season_enabled),
            "gev": params.as_dict(),
            "config": cfg.summary_dict(),
        })
        logger.info("Series stationarized", extra={"n": len(series), "block": gev_block})
        echo_json({"out_dir": str(out_dir), "gev": params.as_dict()})

    run_command(action)
