"""Run outputs: EWM series CSV, claims table CSV, summary JSON."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .config import dump_config
from .monitor import SURROGATE_FIELDS, EwmRecord

CLAIMS_COLUMNS = (
    "Step", "sigma_k", "logdet", "N_t", "Regime", "ClaimA_rand", "ClaimA_swap", "ClaimB_rand", "ClaimB_swap",
)

SURROGATE_NOTES = {
    "necessity": "1 - second-largest possibility (necessity of the anchor singleton)",
    "w_ep": "exp((H_pi - H_ref) / n), geometric-mean axis ratio to the reference cloud",
    "alpha_c": "least-squares slope of log V_alpha against log(1/alpha)",
}


class OutputError(OSError):
    pass


def fmt(v) -> str:
    """Cell text: floats at 17 significant digits, booleans lower-case."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _claim_cell(c) -> str:
    if c is None:
        return "-"
    return "P" if c.passed else f"F({format(-c.gap, '.17g')})"


@dataclass(frozen=True)
class OutputPaths:
    ewm: Path
    claims: Path
    summary: Path
    config: Path
    plots: Path

    @classmethod
    def in_dir(cls, out_dir, stem: str) -> "OutputPaths":
        d = Path(out_dir)
        return cls(d / f"{stem}_ewm.csv", d / f"{stem}_claims.csv", d / f"{stem}_summary.json",
                   d / f"{stem}.cfg", d / f"{stem}_plots")


def write_ewm_csv(records, path) -> None:
    cols = EwmRecord.columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            d = r.as_dict()
            w.writerow([fmt(d[c]) for c in cols])


def write_claims_csv(claims, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLAIMS_COLUMNS)
        for step, sigma, logdet, n_t, regime, rep in claims:
            w.writerow([
                step, fmt(float(sigma)), fmt(float(logdet)), n_t, regime,
                _claim_cell(rep.claim_a_vs_random), _claim_cell(rep.claim_a_vs_swap),
                _claim_cell(rep.claim_b_vs_random), _claim_cell(rep.claim_b_vs_swap),
            ])


def read_ewm_csv(path) -> dict:
    """Columns of an EWM CSV as lists (numbers parsed, text kept)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {c: [] for c in EwmRecord.columns()}
    for row in rows:
        for c in cols:
            v = row[c]
            if v in ("true", "false"):
                cols[c].append(v == "true")
                continue
            try:
                cols[c].append(float(v))
            except ValueError:
                cols[c].append(v)
    return cols


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def summary_document(run) -> dict:
    doc = {k: _jsonable(v) for k, v in run.summary().items()}
    doc["columns"] = {
        c: ({"surrogate": True, "definition": SURROGATE_NOTES[c]} if c in SURROGATE_FIELDS else {"surrogate": False})
        for c in EwmRecord.columns()
    }
    return doc


def emit_outputs(run, out_dir, stem: str | None = None, plots: bool = False) -> OutputPaths:
    """Write every artifact of ``run`` under ``out_dir``; returns the paths."""
    paths = OutputPaths.in_dir(out_dir, stem or run.config.name)
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_ewm_csv(run.records, paths.ewm)
        write_claims_csv(run.claims, paths.claims)
        paths.summary.write_text(json.dumps(summary_document(run), indent=2, sort_keys=True) + "\n")
        paths.config.write_text(dump_config(run.config))
    except OSError as exc:
        raise OutputError(f"{exc.filename or out_dir}: {exc.strerror or exc}") from None
    if plots:
        from .plotting import plot_ewm

        plot_ewm(paths.ewm, paths.plots)
    return paths
