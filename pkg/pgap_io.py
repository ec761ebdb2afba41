import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from pgap_constants import DENSITY_COLUMNS, EIGENFUNCTION_COLUMNS, FLOAT_FORMAT, SCHEMA_VERSION
from pgap_density import MCPDensity
from pgap_utils import DensityFormatError, json_ready

logger = logging.getLogger('pgap.io')


def _emit_frame(df: pd.DataFrame, path: str = None) -> str:
    text = df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    if path:
        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(path, 'w', newline='') as f:
            f.write(text)
    return text


def write_density_csv(h: MCPDensity, path: str = None) -> str:
    """Write `x,log_h,log_deriv`; -inf marks a vanishing endpoint."""
    df = pd.DataFrame({'x': h.grid, 'log_h': h.log_h, 'log_deriv': h.log_deriv}, columns=DENSITY_COLUMNS)
    return _emit_frame(df, path)


def _to_float(text) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        return np.nan


def _support_window(log_h) -> tuple:
    """Node range [start, stop] of the support: zero runs at either end are cut to one node."""
    finite = np.isfinite(log_h)
    first = int(np.argmax(finite))
    last = int(len(log_h) - 1 - np.argmax(finite[::-1]))
    return max(first - 1, 0), min(last + 1, len(log_h) - 1)


def read_density_csv(path: str, K: float, N: float, D: float = None) -> MCPDensity:
    """
    Read a density file. Errors carry the 1-based file line. When the density
    vanishes on a whole end interval the support is trimmed and D shrinks with it.
    """
    if not os.path.isfile(path):
        raise DensityFormatError(f"density file not found: {path}")
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DensityFormatError(f"cannot parse {path}: {e}", line=1)

    columns = [c.strip() for c in raw.columns]
    if columns != DENSITY_COLUMNS:
        raise DensityFormatError(f"header must be {','.join(DENSITY_COLUMNS)} (got {','.join(columns)})", line=1)
    raw.columns = columns
    if len(raw) < 4:
        raise DensityFormatError(f"need at least four nodes (got {len(raw)})", line=len(raw) + 1)

    values = {}
    for col in DENSITY_COLUMNS:
        parsed = raw[col].str.strip().map(_to_float).to_numpy(dtype=float)
        bad = np.isnan(parsed)
        if bad.any():
            idx = int(np.argmax(bad))
            raise DensityFormatError(f"column {col!r} is not a number: {raw[col].iloc[idx]!r}", line=idx + 2)
        values[col] = parsed

    x, log_h, log_deriv = values['x'], values['log_h'], values['log_deriv']
    if not np.all(np.isfinite(x)):
        idx = int(np.argmax(~np.isfinite(x)))
        raise DensityFormatError("node is not finite", line=idx + 2)
    steps = np.diff(x)
    if np.any(steps <= 0):
        idx = int(np.argmax(steps <= 0)) + 1
        raise DensityFormatError(f"nodes must be strictly increasing (x={x[idx]!r})", line=idx + 2)
    if x[0] != 0.0:
        raise DensityFormatError(f"first node must be 0 (got {x[0]!r})", line=2)
    if np.any(log_h == np.inf):
        idx = int(np.argmax(log_h == np.inf))
        raise DensityFormatError("log_h = +inf is not a density value", line=idx + 2)
    if not np.any(np.isfinite(log_h)):
        raise DensityFormatError("density vanishes everywhere", line=2)

    total = x.size
    if D is not None and abs(x[-1] - D) > 1e-9 * max(1.0, abs(D)):
        raise DensityFormatError(f"last node {x[-1]!r} does not match D={D!r}", line=total + 1)

    start, stop = _support_window(log_h)
    holes = ~np.isfinite(log_h[start + 1:stop])
    if np.any(holes):
        idx = start + 1 + int(np.argmax(holes))
        raise DensityFormatError("density vanishes inside its support (holes are not allowed)", line=idx + 2)
    bad_T = ~np.isfinite(log_deriv[start + 1:stop])
    if np.any(bad_T):
        idx = start + 1 + int(np.argmax(bad_T))
        raise DensityFormatError("log_deriv must be finite at interior nodes", line=idx + 2)

    if start > 0 or stop < total - 1:
        logger.warning(f"Density support trimmed to [{x[start]:.12g}, {x[stop]:.12g}]")
        x = x[start:stop + 1] - x[start]
        log_h = log_h[start:stop + 1].copy()
        log_deriv = log_deriv[start:stop + 1].copy()
        if start > 0:
            log_h[0], log_deriv[0] = -np.inf, np.inf
        if stop < total - 1:
            log_h[-1], log_deriv[-1] = -np.inf, -np.inf
    D_file = float(x[-1])
    try:
        return MCPDensity(K, N, D_file, x, log_h, log_deriv, label=os.path.basename(path))
    except ValueError as e:
        raise DensityFormatError(str(e))


def write_eigenfunction_csv(eig, path: str = None) -> str:
    df = pd.DataFrame({'x': eig.xs, 'phi': eig.phis, 'u': eig.u, 'uprime': eig.uprime}, columns=EIGENFUNCTION_COLUMNS)
    return _emit_frame(df, path)


def emit_json(payload: dict, path: str = None, stream=None) -> str:
    """Dump a versioned JSON report; floats keep full precision, non-finite become null."""
    document = {'schema': SCHEMA_VERSION}
    document.update(json_ready(payload))
    text = json.dumps(document, indent=4, allow_nan=False) + '\n'
    if path:
        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(path, 'w') as f:
            f.write(text)
    else:
        (stream or sys.stdout).write(text)
    return text


def emit_csv(df: pd.DataFrame, path: str = None, stream=None) -> str:
    text = _emit_frame(df, path)
    if not path:
        (stream or sys.stdout).write(text)
    return text
