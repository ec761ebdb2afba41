import itertools
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np
import pandas as pd
from tqdm import tqdm

from pgap_constants import SWEEP_COLUMNS, SWEEP_SORT_KEYS
from pgap_gap import lambda_sharp
from pgap_geometry import Params, Tolerances, log_model_h
from pgap_oracle import DiscreteProblem, minimize_gap
from pgap_utils import worker_count

logger = logging.getLogger('pgap.sweep')


def _normalize_table(df: pd.DataFrame) -> pd.DataFrame:
    if df is None or df.empty:
        return pd.DataFrame(columns=SWEEP_COLUMNS)

    for col in SWEEP_COLUMNS:
        if col not in df.columns:
            df[col] = None

    df = df.sort_values(SWEEP_SORT_KEYS, kind='mergesort').reset_index(drop=True)
    return df[SWEEP_COLUMNS]


def sweep_parameters(p_list, K_list, N_list, D_list, tol: Tolerances = None) -> list:
    """Valid Params for the Cartesian product; combinations outside the domain are skipped."""
    tol = tol or Tolerances()
    params = []
    for p, K, N, D in itertools.product(p_list, K_list, N_list, D_list):
        try:
            params.append(Params(p, K, N, D, tol))
        except ValueError as e:
            logger.warning(f"Skipping (p={p}, K={K}, N={N}, D={D}): {e}")
    return params


def oracle_lambda(params: Params, Dprime: float = None, M: int = 8192, restarts: int = 3, **kwargs) -> float:
    """Rayleigh-minimizer value on h_{K,N,D'} (D' defaults to D)."""
    target = params if Dprime is None else params.with_D(Dprime)
    prob = DiscreteProblem.from_log_h(lambda x: log_model_h(np.clip(x, 0.0, target.D), target),
                                      target.D, target.exponent, M)
    return minimize_gap(prob, restarts=restarts, **kwargs).value


def sweep_row(params: Params, oracle: bool = False, oracle_M: int = 8192, restarts: int = 3) -> dict:
    result = lambda_sharp(params)
    row = {
        'p': params.exponent,
        'K': params.K,
        'N': params.N,
        'D': params.D,
        'lambda': result.lam,
        'method': result.method,
        'minimizing_Dprime': result.minimizing_Dprime,
        'iterations': result.iterations,
        'oracle_lambda': None,
    }
    if oracle:
        # single-threaded restarts; the sweep already runs rows in parallel
        row['oracle_lambda'] = oracle_lambda(params, result.minimizing_Dprime, oracle_M, restarts, workers=1)
    return row


def generate_sweep_table(p_list, K_list, N_list, D_list, tol: Tolerances = None, oracle: bool = False,
                         oracle_M: int = 8192, restarts: int = 3, workers: int = None,
                         progress: bool = None) -> pd.DataFrame:
    """
    Sharp gaps over a parameter grid. Rows are computed in a thread pool and
    returned sorted by (p, K, N, D), so the table does not depend on scheduling.
    """
    total = len(p_list) * len(K_list) * len(N_list) * len(D_list)
    jobs = sweep_parameters(p_list, K_list, N_list, D_list, tol)
    if progress is None:
        progress = sys.stdout.isatty()

    rows = []
    pbar = tqdm(
        total=len(jobs),
        desc="Sweep",
        unit=" row(s)",
        disable=not progress,
        ncols=80,
        bar_format='{l_bar}{bar}| {n_fmt}/{total_fmt} [{elapsed}<{remaining}]'
    )
    with ThreadPoolExecutor(max_workers=workers or worker_count()) as executor:
        futures = {executor.submit(sweep_row, params, oracle, oracle_M, restarts): params for params in jobs}

        for future in as_completed(futures):
            pbar.update(1)
            try:
                rows.append(future.result())
            except Exception as e:
                params = futures[future]
                logger.error(f"Sweep row (p={params.exponent}, K={params.K}, N={params.N}, D={params.D}) failed: {e}")
                raise
    pbar.close()

    logger.info(f"Sweep finished: rows={len(rows)} skipped={total - len(jobs)}")
    return _normalize_table(pd.DataFrame(rows))


def load_sweep_table(path: str) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Sweep table not found: {path}")
    return _normalize_table(pd.read_csv(path))


def nonincreasing_in_D(table: pd.DataFrame, rtol: float = 1e-6) -> bool:
    """True when lambda never increases with D for every fixed (p, K, N)."""
    for _, group in table.groupby(['p', 'K', 'N'], sort=True):
        values = group.sort_values('D')['lambda'].to_numpy(dtype=float)
        if np.any(np.diff(values) > rtol * values[:-1]):
            return False
    return True
