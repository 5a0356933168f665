"""
Sampling-ratio sweeps: seeded Monte Carlo trials per ratio, aggregated into
median / interquartile-range tables
"""
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from ..core.config import ScenarioConfig
from ..core.errors import ConfigError, IoError, SeparationError
from ..core.signalgen import derive_seed
from ..utils.reporting import write_csv
from .pipeline import run_pipeline

logger = logging.getLogger(__name__)

METRICS = ('theta0_error_deg', 'phi0_error_deg', 'corr_soi')

TRIAL_COLUMNS = [
    'ratio', 'trial', 'seed', 'rep_rate_hz', 'n_gated', 'status', 'stage',
    'theta0_error_deg', 'phi0_error_deg', 'corr_soi', 'sinr_gain_db', 'error'
]


@dataclass
class SweepResult:
    table: pd.DataFrame
    trials: pd.DataFrame

    def is_monotone(self, column: str = 'corr_soi_median') -> bool:
        return median_is_monotone(self.table, column)


def ratio_key(ratio: float) -> tuple:
    """Seed keys from the bits of the ratio value, so other ratios never shift"""
    bits, = struct.unpack('<Q', struct.pack('<d', float(ratio)))
    return bits >> 32, bits & 0xFFFFFFFF


def trial_seed(master_seed: int, ratio: float, trial: int) -> int:
    return derive_seed(master_seed, *ratio_key(ratio), trial)


def _run_trial(cfg: ScenarioConfig, ratio: float, trial: int) -> Dict[str, Any]:
    seed = trial_seed(cfg.master_seed, ratio, trial)
    row: Dict[str, Any] = {column: None for column in TRIAL_COLUMNS}
    row.update({'ratio': ratio, 'trial': trial, 'seed': seed})
    try:
        scenario = cfg.with_sampling_ratio(ratio).with_seed(seed)
        row['rep_rate_hz'] = scenario.pulse.rep_rate_hz
        report = run_pipeline(scenario, evaluate_eye=False)
    except SeparationError as e:
        logger.warning("Trial %d at ratio %g failed: %s", trial, ratio, e)
        row.update({'status': 'error', 'stage': e.stage, 'error': e.message})
        return row

    row.update({
        'n_gated': report.n_gated,
        'status': report.status,
        'stage': report.failed_stage,
        'error': report.message,
        'theta0_error_deg': report.oracle.get('theta0_error_deg'),
        'phi0_error_deg': report.oracle.get('phi0_error_deg'),
    })
    if report.separation is not None:
        row['corr_soi'] = report.separation.corr_soi
        row['sinr_gain_db'] = report.separation.sinr_gain_db
    return row


def _iqr(values: pd.Series) -> float:
    values = values.dropna()
    if values.empty:
        return float('nan')
    q75, q25 = np.percentile(values, [75, 25])
    return float(q75 - q25)


def summarize_trials(trials: pd.DataFrame, ratios: Sequence[float]) -> pd.DataFrame:
    """Per-ratio medians and interquartile ranges, one row per ratio in input order"""
    rows = []
    for ratio in ratios:
        group = trials[trials['ratio'] == ratio]
        row = {
            'ratio': ratio,
            'rep_rate_hz': group['rep_rate_hz'].dropna().iloc[0] if group['rep_rate_hz'].notna().any() else float('nan'),
            'trials': len(group),
            'failures': int((group['status'] != 'ok').sum()),
            'n_gated_median': float(group['n_gated'].median()) if group['n_gated'].notna().any() else float('nan'),
        }
        for metric in METRICS:
            values = pd.to_numeric(group[metric], errors='coerce')
            name = metric.replace('_deg', '')
            row[f'{name}_median'] = float(values.median()) if values.notna().any() else float('nan')
            row[f'{name}_iqr'] = _iqr(values)
        rows.append(row)
    return pd.DataFrame(rows)


def median_is_monotone(table: pd.DataFrame, column: str = 'corr_soi_median', tol: float = 0.0) -> bool:
    """
    True when ``column`` never improves as the ratio decreases. A ratio whose
    trials all failed counts as no separation.
    """
    ordered = table.sort_values('ratio', ascending=False)
    values = ordered[column].fillna(0.0).to_numpy()
    return bool(np.all(np.diff(values) <= tol))


def run_sweep(cfg: ScenarioConfig, ratios: Sequence[float], trials: int, workers: int = 1) -> SweepResult:
    """
    Run ``trials`` seeded pipelines for every sampling ratio

    Trials may run concurrently; tables are always in (ratio, trial) order.

    Args:
        cfg: Base scenario; its pulse train is re-derived for each ratio
        ratios: Distinct sampling ratios in (0, 1]
        trials: Seeded trials per ratio
        workers: Concurrent trials

    Returns:
        SweepResult with the per-ratio table and the per-trial table
    """
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise ConfigError("sweep needs at least one sampling ratio")
    if len(set(ratios)) != len(ratios):
        raise ConfigError("sampling ratios must be distinct")
    for ratio in ratios:
        if not (0 < ratio <= 1):
            raise ConfigError(f"sampling ratio must lie in (0, 1], got {ratio}")
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    jobs = [(ratio, t) for ratio in ratios for t in range(trials)]
    logger.info("Sweeping %d ratios x %d trials on %d worker(s)...", len(ratios), trials, workers)
    if workers == 1:
        rows: List[Dict[str, Any]] = [_run_trial(cfg, r, t) for r, t in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda job: _run_trial(cfg, *job), jobs))

    trial_table = pd.DataFrame(rows, columns=TRIAL_COLUMNS)
    return SweepResult(summarize_trials(trial_table, ratios), trial_table)


def emit_sweep(result: SweepResult, out_dir) -> List[Path]:
    """Write sweep.csv (aggregate) and trials.csv (one row per trial)"""
    out_dir = Path(out_dir)
    paths = [out_dir / 'sweep.csv', out_dir / 'trials.csv']
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(result.table, paths[0])
        write_csv(result.trials, paths[1])
    except OSError as e:
        raise IoError(f"cannot write sweep results to {out_dir}: {e}") from e
    logger.info("Wrote sweep tables to %s", out_dir)
    return paths
