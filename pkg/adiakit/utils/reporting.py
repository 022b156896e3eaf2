"""Result files: CSV tables with provenance headers, JSON reports and plot scripts."""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from pydantic import BaseModel

from adiakit import __version__
from adiakit.config import get_settings
from adiakit.models.schemas import (
    BoundReport,
    BoundRow,
    ExperimentConfig,
    PowerLawFit,
    Provenance,
    SpectrumRow,
    SweepResult,
)

logger = logging.getLogger(__name__)

# Settings that change how a run executes but not what it computes
_RUNTIME_SETTINGS = {"workers", "log_level"}

SPECTRUM_COLUMNS = "s, abs_lambda_<j> (eigenvalue moduli along continuous tracks), gap, zero_multiplicity, semisimple_defect"
SWEEP_COLUMNS = "T, error (trace norm at s=1), substeps, richardson_discrepancy, flagged, error_s<x> (extra grid points)"
BOUND_COLUMNS = "T, error, C_over_T, holds (error <= safety * C / T)"


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def provenance(config: ExperimentConfig) -> Provenance:
    """Config hash, toolkit version and the effective tolerances."""
    settings = get_settings().model_dump()
    return Provenance(
        config_hash=config_hash(config),
        version=__version__,
        tolerances={key: value for key, value in sorted(settings.items()) if key not in _RUNTIME_SETTINGS},
    )


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.12e}"
    return str(value)


def write_csv(
    path: Path,
    fieldnames: Sequence[str],
    rows: Iterable[dict[str, Any]],
    prov: Provenance,
    columns_doc: str,
) -> Path:
    """Write rows under '#' header lines carrying the provenance."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# adiakit {prov.version}\n")
        f.write(f"# config_sha256: {prov.config_hash}\n")
        f.write(f"# tolerances: {json.dumps(prov.tolerances, sort_keys=True)}\n")
        f.write(f"# columns: {columns_doc}\n")
        w = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({key: _format(value) for key, value in row.items()})
    logger.info("wrote %s", path)
    return path


def write_json(path: Path, payload: BaseModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


# ============================================================================
# Tables
# ============================================================================


def write_spectrum_csv(path: Path, rows: Sequence[SpectrumRow], prov: Provenance) -> Path:
    width = max((len(row.moduli) for row in rows), default=0)
    fieldnames = ["s", *[f"abs_lambda_{j}" for j in range(width)], "gap", "zero_multiplicity", "semisimple_defect"]
    records = []
    for row in rows:
        record = {"s": row.s, "gap": row.gap, "zero_multiplicity": row.zero_multiplicity, "semisimple_defect": row.semisimple_defect}
        record.update({f"abs_lambda_{j}": value for j, value in enumerate(row.moduli)})
        records.append(record)
    return write_csv(path, fieldnames, records, prov, SPECTRUM_COLUMNS)


def write_sweep_csv(path: Path, result: SweepResult, grid: Optional[Sequence[float]] = None) -> Path:
    extra = [f"error_s{s:g}" for s in (grid or [])]
    fieldnames = ["T", "error", "substeps", "richardson_discrepancy", "flagged", *extra]
    records = []
    for row in result.rows:
        record = {
            "T": row.T,
            "error": row.error,
            "substeps": row.substeps,
            "richardson_discrepancy": row.richardson_discrepancy,
            "flagged": row.flagged,
        }
        for name, value in zip(extra, row.grid_errors or []):
            record[name] = value
        records.append(record)
    return write_csv(path, fieldnames, records, result.provenance, SWEEP_COLUMNS)


def write_bound_csv(path: Path, report: BoundReport, rows: Sequence[BoundRow], prov: Provenance) -> Path:
    records = [{"T": r.T, "error": r.error, "C_over_T": r.bound, "holds": r.holds} for r in rows]
    doc = f"{BOUND_COLUMNS}; C={report.C:.12e}"
    return write_csv(path, ["T", "error", "C_over_T", "holds"], records, prov, doc)


# ============================================================================
# Plot scripts
# ============================================================================


_PLOT_TEMPLATE = '''"""Log-log plot of {title}; generated by adiakit {version}."""

import csv
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
FIT = {fit}
THEORY_EXPONENT = {theory}


def load(name):
    with open(HERE / name, newline="") as f:
        rows = [r for r in csv.DictReader(line for line in f if not line.startswith("#"))]
    return rows


def main():
    rows = [r for r in load("{csv_name}") if r["flagged"] == "false"]
    T = np.array([float(r["T"]) for r in rows])
    error = np.array([float(r["error"]) for r in rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(T, error, "o", label="trace-norm error")
    if FIT is not None:
        ax.loglog(T, FIT["prefactor"] / T ** FIT["exponent"], "-",
                  label=f"{{FIT['prefactor']:.4g}} / T^{{FIT['exponent']:.4f}}")
    if THEORY_EXPONENT is not None:
        ax.loglog(T, error[-1] * (T[-1] / T) ** THEORY_EXPONENT, "--",
                  label=f"T^-{{THEORY_EXPONENT:.4g}}")
    ax.set_xlabel("T")
    ax.set_ylabel("error")
    ax.set_title("{title}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(HERE / "{png_name}", dpi=150)


if __name__ == "__main__":
    main()
'''


def write_plot_script(
    path: Path,
    csv_name: str,
    title: str,
    fit: Optional[PowerLawFit] = None,
    theoretical_exponent: Optional[float] = None,
) -> Path:
    """A standalone matplotlib script over the sweep CSV, with the fitted line."""
    path = Path(path)
    fit_literal = None if fit is None else {"prefactor": fit.prefactor, "exponent": fit.exponent}
    source = _PLOT_TEMPLATE.format(
        title=title,
        version=__version__,
        fit=repr(fit_literal),
        theory=repr(theoretical_exponent),
        csv_name=csv_name,
        png_name=Path(csv_name).with_suffix(".png").name,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(source, encoding="utf-8")
    logger.info("wrote %s", path)
    return path


_SPECTRUM_PLOT_TEMPLATE = '''"""Eigenvalue moduli of {title} along s; generated by adiakit {version}."""

import csv
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent


def main():
    with open(HERE / "{csv_name}", newline="") as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    s = np.array([float(r["s"]) for r in rows])
    tracks = sorted((k for k in rows[0] if k.startswith("abs_lambda_")), key=lambda k: int(k.rsplit("_", 1)[1]))
    fig, ax = plt.subplots(figsize=(5, 4))
    for key in tracks:
        ax.plot(s, [float(r[key]) for r in rows], "-", lw=1.2, label=key.replace("abs_lambda_", "|lambda_") + "|")
    ax.set_xlabel("s")
    ax.set_ylabel("|lambda_j(s)|")
    ax.set_title("{title}")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(HERE / "{png_name}", dpi=150)


if __name__ == "__main__":
    main()
'''


def write_spectrum_plot_script(path: Path, csv_name: str, title: str) -> Path:
    """A standalone matplotlib script drawing every abs_lambda_j track of a spectrum CSV."""
    path = Path(path)
    source = _SPECTRUM_PLOT_TEMPLATE.format(
        title=title,
        version=__version__,
        csv_name=csv_name,
        png_name=Path(csv_name).with_suffix(".png").name,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(source, encoding="utf-8")
    logger.info("wrote %s", path)
    return path
