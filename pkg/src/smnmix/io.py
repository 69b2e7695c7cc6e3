"""CSV/JSON artifact handling: datasets in, draws and reports out.

Draw files are columnar CSV, one row per kept iteration, floats printed with
17 significant digits so files round-trip to the exact double values.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .families import KINDS, ModelKind, variance_correction
from .sampler import ChainOutput, Dataset

FLOAT_FMT = "%.17g"


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


# ---------------------------------------------------------------------------
# Dataset CSV
# ---------------------------------------------------------------------------

def read_table(path):
    """Read a headed CSV into (column names, list of row value-lists)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (a header row is required)")
        rows = [row for row in reader if row]
    return [h.strip() for h in header], rows


def numeric_column(header, rows, name, path):
    idx = header.index(name)
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        cell = row[idx].strip() if idx < len(row) else ""
        try:
            out[i] = float(cell)
        except ValueError:
            raise DataError(f"{path}: non-numeric value {cell!r} in column "
                            f"{name!r}, data row {i + 1}")
        if not np.isfinite(out[i]):
            raise DataError(f"{path}: non-finite value in column {name!r}, "
                            f"data row {i + 1} (missing values are not "
                            f"supported)")
    return out


def read_dataset_csv(path, response, covariates, censored_col=None,
                     limit_col=None) -> Dataset:
    """Load a dataset, validating column presence and numeric cells."""
    header, rows = read_table(path)
    wanted = [response, *covariates]
    if censored_col is not None:
        wanted += [censored_col, limit_col]
        if limit_col is None:
            raise DataError("a censoring flag column requires a limit column")
    missing = [c for c in wanted if c is not None and c not in header]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}; file has "
                        f"columns {header}")
    y = numeric_column(header, rows, response, path)
    X = np.column_stack([numeric_column(header, rows, c, path)
                         for c in covariates])
    censored = kappa = None
    if censored_col is not None:
        flags = numeric_column(header, rows, censored_col, path)
        if not set(np.unique(flags)) <= {0.0, 1.0}:
            raise DataError(f"{path}: censoring flags must be 0/1")
        censored = flags.astype(bool)
        kappa = numeric_column(header, rows, limit_col, path)
    return Dataset(y=y, X=X, censored=censored, kappa=kappa)


def write_dataset_csv(dataset: Dataset, path, covariate_names=None) -> None:
    names = (list(covariate_names) if covariate_names is not None
             else [f"x{j}" for j in range(dataset.q)])
    header = ["y", *names]
    if dataset.censored is not None:
        header += ["censored", "limit"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [_fmt(dataset.y[i])] + [_fmt(v) for v in dataset.X[i]]
            if dataset.censored is not None:
                row += [str(int(dataset.censored[i])), _fmt(dataset.kappa[i])]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Draws CSV
# ---------------------------------------------------------------------------

def draws_header(output: ChainOutput):
    cols = [f"beta_{j}" for j in range(output.q)]
    cols += ["sigma2", "z", "nu_t", "nu_s"]
    cols += [f"p_{k.label.replace('-', '_')}" for k in output.components]
    return cols


def write_draws_csv(output: ChainOutput, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(draws_header(output))
        for m in range(output.n_draws):
            row = [_fmt(v) for v in output.beta[m]]
            row += [_fmt(output.sigma2[m]), str(int(output.z_index[m])),
                    _fmt(output.nu_t[m]), _fmt(output.nu_s[m])]
            row += [_fmt(v) for v in output.p[m]]
            writer.writerow(row)


def read_draws_csv(path) -> ChainOutput:
    """Rebuild a ChainOutput (draw arrays and rho_hat) from a draws file."""
    header, rows = read_table(path)
    if not rows:
        raise DataError(f"{path}: draws file holds no draws")
    q = sum(1 for c in header if c.startswith("beta_"))
    p_labels = [c[2:].replace("_", "-") for c in header if c.startswith("p_")]
    components = tuple(ModelKind.from_label(lbl) for lbl in p_labels)
    data = np.array([[float(v) for v in row] for row in rows])
    cols = {name: data[:, j] for j, name in enumerate(header)}
    beta = np.column_stack([cols[f"beta_{j}"] for j in range(q)])
    z = cols["z"].astype(np.int64)
    p = np.column_stack([cols[c] for c in header if c.startswith("p_")])
    gamma = np.ones(z.shape[0])
    for m, zv in enumerate(z):
        kind = ModelKind(int(zv))
        if kind is ModelKind.STUDENT_T:
            gamma[m] = variance_correction(kind, cols["nu_t"][m])
        elif kind is ModelKind.SLASH:
            gamma[m] = variance_correction(kind, cols["nu_s"][m])
    rho = np.zeros(3)
    for k in KINDS:
        rho[k.slot] = float(np.mean(z == k.value))
    return ChainOutput(components=components, beta=beta, sigma2=cols["sigma2"],
                       z_index=z, nu_t=cols["nu_t"], nu_s=cols["nu_s"], p=p,
                       gamma=gamma, rho_hat=rho, accept_rate_t=float("nan"),
                       accept_rate_s=float("nan"), seed=-1)


# ---------------------------------------------------------------------------
# JSON artifacts
# ---------------------------------------------------------------------------

def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=True) + "\n",
                          encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
