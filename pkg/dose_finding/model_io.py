"""
Model and Data Files
====================

- DataCSV: header naming p covariate columns, then `dose`, then `reward`;
  one record per row.
- ModelFile: versioned YAML document with named fields. PyYAML writes
  floats with repr(), so every number round-trips exactly and a reloaded
  model predicts bit-identically.
- Results CSV: fixed column order, dot decimals, full precision, "\\n" rows.
"""

import logging
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml

from .errors import DataFormatError
from .gaussian_process import Dataset, FittedGP, RewardScaler, build_model
from .kernel import Hyperparameters

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
KERNEL_NAME = 'ard_squared_exponential'

EXPERIMENT_COLUMNS = ['scenario', 'n_train', 'percentile', 'mean_vhat', 'std_vhat', 'completed', 'failed']
SWEEP_COLUMNS = ['scenario', 'n_train', 'percentile', 'mean_vhat', 'std_vhat']


def read_data_csv(path: str, dose_range: Tuple[float, float]) -> Dataset:
    """
    Load training records from a DataCSV file.

    Row numbers in errors are file line numbers (the header is row 1).

    Args:
        path: CSV file path
        dose_range: Admissible (lo, hi) dose interval

    Returns:
        Dataset

    Raises:
        DataFormatError: malformed header, ragged rows or non-numeric cells
        DomainError: doses outside dose_range (raised by Dataset)
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.ParserError as e:
        raise DataFormatError(f"inconsistent column count: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise DataFormatError("file is empty") from e
    if not isinstance(frame.index, pd.RangeIndex):
        raise DataFormatError("inconsistent column count: rows have more fields than the header", row=2)

    columns = [str(c).strip() for c in frame.columns]
    if len(columns) < 2 or columns[-2:] != ['dose', 'reward']:
        raise DataFormatError(f"header must end with 'dose,reward', got {','.join(columns)}", row=1)
    if frame.empty:
        raise DataFormatError("no records after the header", row=2)

    values = np.empty(frame.shape, dtype=float)
    first_bad: Optional[Tuple[int, int]] = None
    for j, column in enumerate(frame.columns):
        raw = frame[column].fillna('').str.strip()
        parsed = pd.to_numeric(raw, errors='coerce').to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(parsed))
        if bad.size and (first_bad is None or (bad[0], j) < first_bad):
            first_bad = (int(bad[0]), j)
        values[:, j] = parsed

    if first_bad is not None:
        row, j = first_bad
        cell = frame.iloc[row, j]
        raise DataFormatError(f"expected a finite number, got {cell!r}", row=row + 2, column=columns[j])

    logger.info(f"Loaded {len(frame)} records with {len(columns) - 2} covariate(s) from {path}")
    return Dataset(C=values[:, :-2], a=values[:, -2], r=values[:, -1], dose_range=dose_range)


def write_data_csv(data: Dataset, path: str, covariate_names: Optional[Sequence[str]] = None):
    """Write a Dataset as DataCSV (covariates C1..Cp unless named)."""
    if covariate_names is None:
        covariate_names = [f"C{i + 1}" for i in range(data.p)]
    frame = pd.DataFrame(np.column_stack([data.C, data.a, data.r]), columns=list(covariate_names) + ['dose', 'reward'])
    frame.to_csv(path, index=False, lineterminator='\n')


def model_to_document(model: FittedGP) -> dict:
    """Plain-python dict in ModelFile layout (fixed key order)."""
    return {
        'format_version': MODEL_FORMAT_VERSION,
        'kernel': KERNEL_NAME,
        'hyperparameters': {
            'sigma_f2': float(model.hp.sigma_f2),
            'theta': [float(t) for t in model.hp.theta],
            'sigma_n2': float(model.hp.sigma_n2),
        },
        'dose_range': [float(model.dose_range[0]), float(model.dose_range[1])],
        'reward_scaler': {'r_min': float(model.scaler.r_min), 'r_max': float(model.scaler.r_max)},
        'log_ml': float(model.log_ml),
        'inputs': model.X.tolist(),
        'targets': model.y.tolist(),
    }


def save_model(model: FittedGP, path: str):
    """Write a ModelFile. Identical models give identical bytes."""
    with open(path, 'w', newline='\n') as f:
        yaml.safe_dump(model_to_document(model), f, sort_keys=False, default_flow_style=None, width=4096)
    logger.info(f"Saved model ({model.n} training points) to {path}")


def model_from_document(doc: dict) -> FittedGP:
    """Rebuild a FittedGP (refactorizing the Gram matrix) from a ModelFile dict."""
    if not isinstance(doc, dict):
        raise DataFormatError("model file is not a mapping")
    version = doc.get('format_version')
    if version != MODEL_FORMAT_VERSION:
        raise DataFormatError(f"unsupported model format_version {version!r}, expected {MODEL_FORMAT_VERSION}")
    if doc.get('kernel', KERNEL_NAME) != KERNEL_NAME:
        raise DataFormatError(f"unsupported kernel {doc.get('kernel')!r}")

    try:
        hp_doc = doc['hyperparameters']
        hp = Hyperparameters(
            sigma_f2=float(hp_doc['sigma_f2']),
            theta=np.array(hp_doc['theta'], dtype=float),
            sigma_n2=float(hp_doc['sigma_n2']),
        )
        scaler = RewardScaler(r_min=float(doc['reward_scaler']['r_min']), r_max=float(doc['reward_scaler']['r_max']))
        X = np.array(doc['inputs'], dtype=float)
        y = np.array(doc['targets'], dtype=float)
        dose_range = (float(doc['dose_range'][0]), float(doc['dose_range'][1]))
    except (KeyError, TypeError, IndexError) as e:
        raise DataFormatError(f"model file is missing or has a malformed field: {e}") from e

    if X.ndim != 2 or X.shape[1] != hp.input_dim:
        raise DataFormatError(f"inputs must be an n x {hp.input_dim} matrix, got shape {X.shape}")
    return build_model(X, y, hp, scaler, dose_range)


def load_model(path: str) -> FittedGP:
    """Read a ModelFile written by save_model."""
    with open(path, 'r') as f:
        try:
            doc = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise DataFormatError(f"model file is not valid YAML: {e}") from e
    model = model_from_document(doc)
    logger.info(f"Loaded model ({model.n} training points, {model.p} covariates) from {path}")
    return model


def summary_frame(summary, columns: Sequence[str] = EXPERIMENT_COLUMNS) -> pd.DataFrame:
    """ExperimentSummary rows as a DataFrame with the requested columns, in order."""
    records = [
        {
            'scenario': row.scenario_id,
            'n_train': row.n_train,
            'percentile': row.percentile,
            'mean_vhat': row.mean_vhat,
            'std_vhat': row.std_vhat,
            'completed': row.completed,
            'failed': row.failed,
        }
        for row in summary.rows
    ]
    frame = pd.DataFrame.from_records(records, columns=EXPERIMENT_COLUMNS)
    return frame[list(columns)]


def write_summary_csv(summary, path: str, columns: Sequence[str] = EXPERIMENT_COLUMNS):
    """Write experiment or sweep results. Missing cells are left empty."""
    summary_frame(summary, columns).to_csv(path, index=False, lineterminator='\n')
    logger.info(f"Wrote {len(summary.rows)} result rows to {path}")


def format_summary_table(summary) -> str:
    """
    Human-readable 'mean (std)' table rounded to two decimals, one column per
    percentile (LCSL.<percentile>), one row per train size.
    """
    percentiles = sorted({row.percentile for row in summary.rows})
    sizes = sorted({row.n_train for row in summary.rows})
    header = ['Sample size'] + [f"LCSL.{q}" for q in percentiles]

    lines: List[List[str]] = [header]
    for n in sizes:
        cells = [str(n)]
        for q in percentiles:
            row = summary.row(n, q)
            if row.mean_vhat is None:
                cells.append('NA')
            else:
                flag = '*' if row.single_replication else ''
                cells.append(f"{row.mean_vhat:.2f} ({row.std_vhat:.2f}){flag}")
        lines.append(cells)

    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    rule = '-' * (sum(widths) + 3 * (len(widths) - 1))
    text = [' | '.join(cell.rjust(w) for cell, w in zip(lines[0], widths)), rule]
    text += [' | '.join(cell.rjust(w) for cell, w in zip(line, widths)) for line in lines[1:]]
    if any(row.single_replication for row in summary.rows):
        text.append("* single replication, std reported as 0")
    return '\n'.join(text) + '\n'


def write_summary_table(summary, path: str):
    with open(path, 'w', newline='\n') as f:
        f.write(format_summary_table(summary))


def companion_table_path(csv_path: str) -> str:
    root, _ = os.path.splitext(csv_path)
    return root + '.txt'
