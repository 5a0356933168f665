"""
Run reports: serialization, curve/eye CSV emission and readable summaries
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..core.errors import IoError
from ..core.estimator import FourthMomentFit, SecondMomentFit
from ..core.evalkit import EyeDiagram, SeparationReport
from ..core.separator import DemixMatrix, IcaModel, PcaModel

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = '%.17g'

STATUS_OK = 'ok'
STATUS_DEGENERATE = 'degenerate_covariance'
STATUS_UNIDENTIFIABLE = 'ica_unidentifiable'


def finite_or_none(value):
    """Map non-finite floats to None so JSON stays standard and round-trips"""
    if value is None:
        return None
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    value = float(value)
    return value if math.isfinite(value) else None


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (float, int, np.floating, np.integer, bool, np.bool_)):
        return finite_or_none(obj)
    return obj


def _eye_to_dict(eye: Optional[EyeDiagram]) -> Optional[Dict[str, Any]]:
    if eye is None:
        return None
    return {
        'symbol_period_s': eye.symbol_period_s,
        'phase_bins': eye.phase_bins,
        'amplitude_bins': eye.amplitude_bins,
        'amplitude_limit': eye.amplitude_limit,
        'mid_band_fraction': eye.mid_band_fraction(),
        'histogram': eye.histogram.tolist(),
    }


def _eye_from_dict(doc: Optional[Dict[str, Any]]) -> Optional[EyeDiagram]:
    if doc is None:
        return None
    return EyeDiagram(doc['symbol_period_s'], doc['phase_bins'], doc['amplitude_bins'],
                      np.asarray(doc['histogram'], dtype=np.int64), doc['amplitude_limit'])


def _demix_from_dict(doc: Optional[Dict[str, Any]]) -> Optional[DemixMatrix]:
    if doc is None:
        return None
    pca = PcaModel(**doc['pca']) if doc.get('pca') else None
    ica = IcaModel(**doc['ica']) if doc.get('ica') else None
    return DemixMatrix(doc['w11'], doc['w12'], doc['w21'], doc['w22'],
                       doc['soi_channel'], pca, ica, doc['method'])


@dataclass
class RunReport:
    """Everything one pipeline run produced"""
    config: Dict[str, Any]
    status: str = STATUS_OK
    message: Optional[str] = None
    failed_stage: Optional[str] = None
    system_info: Dict[str, Any] = field(default_factory=dict)
    sampling_ratio: Optional[float] = None
    rep_rate_hz: Optional[float] = None
    n_gated: int = 0
    second_fit: Optional[SecondMomentFit] = None
    fourth_fit: Optional[FourthMomentFit] = None
    demix: Optional[DemixMatrix] = None
    oracle: Dict[str, Optional[float]] = field(default_factory=dict)
    whiteness: Optional[float] = None
    separation: Optional[SeparationReport] = None
    moment2: List[Dict[str, Optional[float]]] = field(default_factory=list)
    moment4: List[Dict[str, Optional[float]]] = field(default_factory=list)
    eye: Optional[EyeDiagram] = None
    eye_sampled: Optional[EyeDiagram] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 2

    def to_dict(self, include_timings: bool = False) -> Dict[str, Any]:
        doc = {
            'system_info': self.system_info,
            'status': self.status,
            'message': self.message,
            'failed_stage': self.failed_stage,
            'config': self.config,
            'sampling_ratio': self.sampling_ratio,
            'rep_rate_hz': self.rep_rate_hz,
            'n_gated': self.n_gated,
            'second_fit': asdict(self.second_fit) if self.second_fit else None,
            'fourth_fit': asdict(self.fourth_fit) if self.fourth_fit else None,
            'demix': asdict(self.demix) if self.demix else None,
            'oracle': self.oracle,
            'whiteness': self.whiteness,
            'separation': asdict(self.separation) if self.separation else None,
            'moment2': self.moment2,
            'moment4': self.moment4,
            'eye': _eye_to_dict(self.eye),
            'eye_sampled': _eye_to_dict(self.eye_sampled),
        }
        if include_timings:
            doc['timings'] = self.timings
        return _clean(doc)

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "RunReport":
        separation = doc.get('separation')
        if separation is not None:
            separation = SeparationReport(
                separation['corr_soi'], separation['sinr_gain_db'],
                tuple(separation['kurtosis_out']), separation.get('ber')
            )
        return cls(
            config=doc['config'],
            status=doc['status'],
            message=doc.get('message'),
            failed_stage=doc.get('failed_stage'),
            system_info=doc.get('system_info', {}),
            sampling_ratio=doc.get('sampling_ratio'),
            rep_rate_hz=doc.get('rep_rate_hz'),
            n_gated=doc.get('n_gated', 0),
            second_fit=SecondMomentFit(**doc['second_fit']) if doc.get('second_fit') else None,
            fourth_fit=FourthMomentFit(**doc['fourth_fit']) if doc.get('fourth_fit') else None,
            demix=_demix_from_dict(doc.get('demix')),
            oracle=doc.get('oracle', {}),
            whiteness=doc.get('whiteness'),
            separation=separation,
            moment2=doc.get('moment2', []),
            moment4=doc.get('moment4', []),
            eye=_eye_from_dict(doc.get('eye')),
            eye_sampled=_eye_from_dict(doc.get('eye_sampled')),
            timings=doc.get('timings', {}),
        )


def report_to_json(report: RunReport, include_timings: bool = False) -> str:
    return json.dumps(report.to_dict(include_timings), indent=2, allow_nan=False) + '\n'


def report_from_json(text: str) -> RunReport:
    return RunReport.from_dict(json.loads(text))


def write_csv(frame: pd.DataFrame, path: Path):
    """Header row, comma separated, LF endings, 17 significant digits"""
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')


def _curve_frame(rows: List[Dict[str, Optional[float]]], angle_column: str) -> pd.DataFrame:
    columns = [angle_column, 'moment_theory', 'moment_estimated']
    return pd.DataFrame([[row.get(c) for c in columns] for row in rows], columns=columns, dtype=float)


def emit_curves(report: RunReport, out_dir: Union[str, Path], include_timings: bool = False) -> List[Path]:
    """
    Write moment2.csv, moment4.csv, eye.csv and report.json into ``out_dir``.
    Curve and eye files are skipped when the report does not hold them.
    """
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if report.moment2:
            path = out_dir / 'moment2.csv'
            write_csv(_curve_frame(report.moment2, 'theta_deg'), path)
            written.append(path)
        if report.moment4:
            path = out_dir / 'moment4.csv'
            write_csv(_curve_frame(report.moment4, 'phi_deg'), path)
            written.append(path)
        if report.eye is not None:
            path = out_dir / 'eye.csv'
            write_csv(report.eye.to_frame(), path)
            written.append(path)
        path = out_dir / 'report.json'
        with open(path, 'w', newline='\n') as f:
            f.write(report_to_json(report, include_timings))
        written.append(path)
    except OSError as e:
        raise IoError(f"cannot write results to {out_dir}: {e}") from e
    logger.info("Wrote %d result files to %s", len(written), out_dir)
    return written


def summarize_report(report: RunReport) -> str:
    """Readable multi-line summary of a run"""
    lines = [f"Status: {report.status}"]
    if report.message:
        lines.append(f"  {report.failed_stage or 'pipeline'}: {report.message}")
    if report.sampling_ratio is not None:
        lines.append(f"Sampling ratio: {report.sampling_ratio:.3g} "
                     f"({report.n_gated} gated samples, rep rate {report.rep_rate_hz:.6g} Hz)")

    fit2, fit4 = report.second_fit, report.fourth_fit
    if fit2 is not None:
        lines.append(f"PCA fit: q1={fit2.q1:.5g} q2={fit2.q2:.5g} theta0={fit2.theta0_deg:.3f} deg"
                     + (" (degenerate)" if fit2.degenerate else ""))
    if fit4 is not None:
        lines.append(f"ICA fit: p1={fit4.p1:.5g} p2={fit4.p2:.5g} p3={fit4.p3:.5g} "
                     f"phi0={fit4.phi0_deg:.3f} deg"
                     + ("" if fit4.identifiable else " (unidentifiable)"))

    oracle = report.oracle
    if oracle.get('theta0_deg') is not None:
        lines.append(f"Oracle: theta0={oracle['theta0_deg']:.3f} deg, "
                     f"error {_fmt(oracle.get('theta0_error_deg'))} deg; "
                     f"phi0={_fmt(oracle.get('phi0_deg'))} deg, "
                     f"error {_fmt(oracle.get('phi0_error_deg'))} deg")
    if report.whiteness is not None:
        lines.append(f"Whiteness |C12|/mean var: {report.whiteness:.3g}")

    if report.demix is not None:
        w = report.demix
        lines.append(f"Demix ({w.method}): [[{w.w11:.5g}, {w.w12:.5g}], [{w.w21:.5g}, {w.w22:.5g}]], "
                     f"SOI on output {w.soi_channel}")
    sep = report.separation
    if sep is not None:
        lines.append(f"Separation: corr_soi={_fmt(sep.corr_soi, '.5f')}, "
                     f"SINR gain={_fmt(sep.sinr_gain_db, '.2f')} dB"
                     + (f", BER={sep.ber:.3g}" if sep.ber is not None else ""))
    if report.eye is not None:
        lines.append(f"Eye mid-band mass at best phase: {report.eye.mid_band_fraction():.3%}")
    return "\n".join(lines)


def _fmt(value, spec: str = '.3f') -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return 'n/a'
    return format(value, spec)
