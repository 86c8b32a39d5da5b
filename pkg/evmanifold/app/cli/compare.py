from pathlib import Path
from typing import List, Optional

import typer

from evmanifold.app.cli.common import run_command
from evmanifold.app.core.manifold_exceptions import DataError, ValidationError
from evmanifold.app.core.selection import ModelScore, compare
from evmanifold.app.schemas.summary import RunSummary
from evmanifold.app.utilities.converters import convert_entry_to_score
from evmanifold.app.utilities.io import atomic_write_text, read_json, write_frame


def run_labels(paths: List[Path]) -> List[str]:
    """Name each run by its output directory; the full directory path when names collide"""
    names = [path.resolve().parent.name or path.stem for path in paths]
    if len(set(names)) < len(names):
        return [str(path.resolve().parent) for path in paths]
    return names


def load_scores(paths: List[Path]) -> List[ModelScore]:
    """Scores from fitted run summaries, which must all describe the same dataset"""
    if len(paths) < 2:
        raise ValidationError(f"compare needs at least two run summaries, got {len(paths)}")

    summaries = [(path, RunSummary.model_validate(read_json(path))) for path in paths]
    datasets = {summary.dataset for _, summary in summaries}
    sizes = {entry.n for _, summary in summaries for entry in summary.scores}
    if len(datasets) > 1 or None in datasets:
        raise DataError(f"run summaries describe different datasets (sample sizes {sorted(sizes)})",
                        stage="compare")

    scores = []
    for label, (path, summary) in zip(run_labels(paths), summaries):
        if not summary.scores:
            raise DataError(f"{path} holds no scores", stage="compare")
        for entry in summary.scores:
            score = convert_entry_to_score(entry)
            scores.append(ModelScore.from_loglik(f"{label}:{score.model_name}", score.k, score.n, score.loglik))
    return scores


def cmd_compare(
    summaries: List[Path] = typer.Option(..., "--summary", help="run summary JSON; repeat for each run"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir"),
):
    """Rank fitted runs on the same data by AIC, with AIC and BIC differences to the best."""

    def action():
        ranking = compare(load_scores(list(summaries)))
        text = ranking.render()
        if out_dir is not None:
            write_frame(out_dir / "comparison.csv", ranking.to_frame())
            atomic_write_text(out_dir / "comparison.txt", text)
        typer.echo(text, nl=False)

    run_command(action)
