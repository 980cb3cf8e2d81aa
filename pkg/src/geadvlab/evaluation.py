"""Attack-quality and efficiency metrics, the perturbation-budget audit, and
cross-model transfer evaluation.

Metric conventions: ASR counts all evaluated samples (no filtering to
clean-correct ones); APR/SPR are mean absolute / mean squared per-pixel
perturbations quoted on the 0-255 scale; FPS covers only the forward pass
that produces perturbations for generator attacks, and the full loop for
iterative attacks, measured on a monotonic clock with a warm-up pass
excluded.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .errors import (AuditError, ConfigError, FormatError, MeasurementError,
                     ShapeError)
from .models import NetworkParams, predict_labels

CSV_COLUMNS = ("source", "victim", "method", "seed", "epsilon",
               "n_total", "n_misleading", "asr", "apr", "spr", "fps")

BUDGET_TOLERANCE = 1e-9


@dataclass
class EvalReport:
    """One (source, victim) evaluation record."""

    source: str
    victim: str
    method: str
    seed: int
    epsilon: float
    n_total: int
    n_misleading: int
    asr: float
    apr: float
    spr: float
    fps: float

    def as_row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass
class TransferMatrix:
    """Per-victim reports for one shared adversarial sample set."""

    victims: List[str]
    reports: List[EvalReport]

    def mean_asr(self) -> float:
        return float(np.mean([r.asr for r in self.reports]))


# ---------------------------------------------------------------------------
# scalar metrics
# ---------------------------------------------------------------------------

def attack_success_rate(f_victim: NetworkParams, x_adv: np.ndarray,
                        true_labels: np.ndarray) -> Tuple[float, int, int]:
    """(asr, n_misleading, n_total): fraction of samples whose argmax differs
    from the true label."""
    x_adv = np.asarray(x_adv, dtype=np.float64)
    y = np.asarray(true_labels)
    if x_adv.shape[0] == 0:
        raise ConfigError("cannot evaluate an empty sample set")
    preds = predict_labels(f_victim, x_adv)
    n_misleading = int(np.sum(preds != y))
    n_total = int(x_adv.shape[0])
    return n_misleading / n_total, n_misleading, n_total


def _check_pair(x_adv: np.ndarray, x: np.ndarray) -> None:
    if x_adv.shape != x.shape:
        raise ShapeError(f"shapes differ: {x_adv.shape} vs {x.shape}")


def apr(x_adv: np.ndarray, x: np.ndarray) -> float:
    """Mean absolute per-pixel perturbation on the 0-255 scale."""
    x_adv, x = np.asarray(x_adv), np.asarray(x)
    _check_pair(x_adv, x)
    per_sample = np.abs(x_adv - x).reshape(x.shape[0], -1).mean(axis=1)
    return float(per_sample.mean() * 255.0)


def spr(x_adv: np.ndarray, x: np.ndarray) -> float:
    """Mean squared per-pixel perturbation on the 0-255^2 scale."""
    x_adv, x = np.asarray(x_adv), np.asarray(x)
    _check_pair(x_adv, x)
    per_sample = np.square(x_adv - x).reshape(x.shape[0], -1).mean(axis=1)
    return float(per_sample.mean() * 255.0 ** 2)


def fps(n_samples: int, wall_seconds: float) -> float:
    """Samples per second; zero or negative elapsed time is a measurement error."""
    if wall_seconds <= 0:
        raise MeasurementError(f"unusable elapsed time: {wall_seconds}")
    return n_samples / wall_seconds


def audit_budget(x_adv: np.ndarray, x: np.ndarray, epsilon: float) -> float:
    """Verify the max-norm budget (epsilon on the 0-255 scale) and [0, 1] range.

    Returns the max observed per-pixel deviation; raises AuditError naming
    the first offending sample otherwise.
    """
    x_adv, x = np.asarray(x_adv), np.asarray(x)
    _check_pair(x_adv, x)
    bound = epsilon / 255.0 + BUDGET_TOLERANCE
    linf = np.abs(x_adv - x).reshape(x.shape[0], -1).max(axis=1)
    bad = np.nonzero(linf > bound)[0]
    if bad.size:
        raise AuditError(
            f"sample {bad[0]} exceeds the budget: |delta|_inf = {linf[bad[0]]:.6g} "
            f"> {bound:.6g}")
    lo = x_adv.reshape(x.shape[0], -1).min(axis=1)
    hi = x_adv.reshape(x.shape[0], -1).max(axis=1)
    bad = np.nonzero((lo < -BUDGET_TOLERANCE) | (hi > 1.0 + BUDGET_TOLERANCE))[0]
    if bad.size:
        raise AuditError(f"sample {bad[0]} leaves [0, 1]: range [{lo[bad[0]]}, {hi[bad[0]]}]")
    return float(linf.max())


# ---------------------------------------------------------------------------
# throughput measurement
# ---------------------------------------------------------------------------

def measure_fps(attack_fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                batch_size: int = 256) -> Tuple[np.ndarray, float, float]:
    """Run an attack over batches, timing everything after a warm-up batch.

    Returns (x_adv, fps_value, wall_seconds).  The warm-up pass runs on the
    first batch and its output is discarded.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    attack_fn(x[:min(batch_size, n)])  # warm-up, excluded from the clock
    outs = []
    t0 = time.perf_counter()
    for lo in range(0, n, batch_size):
        outs.append(attack_fn(x[lo:lo + batch_size]))
    wall = time.perf_counter() - t0
    return np.concatenate(outs, axis=0), fps(n, wall), wall


# ---------------------------------------------------------------------------
# transfer evaluation
# ---------------------------------------------------------------------------

def evaluate_victims(x: np.ndarray, x_adv: np.ndarray, labels: np.ndarray,
                     victims: Sequence[Tuple[str, NetworkParams]], *,
                     source_id: str, method: str, seed: int, epsilon: float,
                     fps_value: float) -> TransferMatrix:
    """Audit the shared sample set, then fill one report per victim."""
    audit_budget(x_adv, x, epsilon)
    apr_value = apr(x_adv, x)
    spr_value = spr(x_adv, x)
    reports = []
    for victim_id, net in victims:
        asr, n_mis, n_tot = attack_success_rate(net, x_adv, labels)
        reports.append(EvalReport(
            source=source_id, victim=victim_id, method=method, seed=seed,
            epsilon=epsilon, n_total=n_tot, n_misleading=n_mis, asr=asr,
            apr=apr_value, spr=spr_value, fps=fps_value))
    return TransferMatrix(victims=[v for v, _ in victims], reports=reports)


def transfer_eval(attack_fn: Callable[[np.ndarray], np.ndarray], source_id: str,
                  victims: Sequence[Tuple[str, NetworkParams]], images: np.ndarray,
                  labels: np.ndarray, epsilon: float, *, method: str = "attack",
                  seed: int = 0, batch_size: int = 256) -> TransferMatrix:
    """Generate adversarial samples once from the source, audit, and evaluate
    every victim on the same set."""
    x = np.asarray(images, dtype=np.float64)
    x_adv, fps_value, _ = measure_fps(attack_fn, x, batch_size=batch_size)
    return evaluate_victims(x, x_adv, labels, victims, source_id=source_id,
                            method=method, seed=seed, epsilon=epsilon,
                            fps_value=fps_value)


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

def write_reports_csv(path: str, reports: Sequence[EvalReport],
                      mean_row: bool = False) -> None:
    """One row per report; optionally an aggregate row with the mean ASR
    across victims (victim id "average")."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow([_fmt(v) for v in r.as_row()])
        if mean_row and reports:
            agg = EvalReport(
                source=reports[0].source, victim="average", method=reports[0].method,
                seed=reports[0].seed, epsilon=reports[0].epsilon,
                n_total=sum(r.n_total for r in reports),
                n_misleading=sum(r.n_misleading for r in reports),
                asr=float(np.mean([r.asr for r in reports])),
                apr=float(np.mean([r.apr for r in reports])),
                spr=float(np.mean([r.spr for r in reports])),
                fps=float(np.mean([r.fps for r in reports])))
            writer.writerow([_fmt(v) for v in agg.as_row()])


def read_reports_csv(path: str) -> List[dict]:
    """Rows as dicts with numeric fields parsed; schema must match exactly."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise FormatError(f"unexpected CSV schema in {path}: {header}")
        rows = []
        for row in reader:
            d = dict(zip(CSV_COLUMNS, row))
            d["seed"] = int(d["seed"])
            d["n_total"] = int(d["n_total"])
            d["n_misleading"] = int(d["n_misleading"])
            for k in ("epsilon", "asr", "apr", "spr", "fps"):
                d[k] = float(d[k])
            rows.append(d)
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
