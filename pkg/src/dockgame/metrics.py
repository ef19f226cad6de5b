"""Pose-quality metrics and evaluation-table emission."""

import csv
import io
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricSummary:
    p25: float
    p50: float
    p75: float
    mean: float
    pct_below_2: float
    pct_below_5: float
    mean_runtime: float
    pocket_accuracy: float
    pocket_rmsd: float


def ligand_rmsd(pred, true):
    """Root-mean-square deviation of index-matched coordinates."""
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if pred.shape != true.shape:
        raise ValueError(f"coordinate shape mismatch: {pred.shape} vs {true.shape}")
    diff = pred - true
    return float(np.sqrt((diff * diff).sum(axis=1).mean()))


def centroid_distance(pred, true):
    """Distance between the predicted and true coordinate centroids."""
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if pred.shape != true.shape:
        raise ValueError(f"coordinate shape mismatch: {pred.shape} vs {true.shape}")
    return float(np.linalg.norm(pred.mean(axis=0) - true.mean(axis=0)))


def success_rates(rmsds):
    """Percentage of cases strictly below 2 A and 5 A."""
    rmsds = np.asarray(rmsds, dtype=np.float64)
    if rmsds.size == 0:
        raise ValueError("empty evaluation set")
    return (100.0 * float((rmsds < 2.0).mean()),
            100.0 * float((rmsds < 5.0).mean()))


def pocket_accuracy(indicators, labels):
    """Residue-level classification accuracy, averaged over complexes.

    This reconstruction (plain per-complex accuracy) is also flagged in the
    emitted table header.
    """
    accs = []
    for ind, lab in zip(indicators, labels):
        ind = np.asarray(ind)
        lab = np.asarray(lab)
        accs.append(float((ind == lab).mean()))
    if not accs:
        raise ValueError("empty evaluation set")
    return 100.0 * float(np.mean(accs))


def nearest_rank_percentile(values, p):
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest value."""
    values = np.sort(np.asarray(values, dtype=np.float64), kind="stable")
    if values.size == 0:
        raise ValueError("empty evaluation set")
    rank = int(np.ceil(p / 100.0 * values.size))
    return float(values[max(rank, 1) - 1])


def summarize(rmsds, runtimes, pocket_accuracy_pct=float("nan"),
              pocket_rmsds=None):
    rmsds = np.asarray(rmsds, dtype=np.float64)
    if rmsds.size == 0:
        raise ValueError("empty evaluation set")
    below2, below5 = success_rates(rmsds)
    return MetricSummary(
        p25=nearest_rank_percentile(rmsds, 25),
        p50=nearest_rank_percentile(rmsds, 50),
        p75=nearest_rank_percentile(rmsds, 75),
        mean=float(rmsds.mean()),
        pct_below_2=below2,
        pct_below_5=below5,
        mean_runtime=float(np.mean(runtimes)) if len(runtimes) else float("nan"),
        pocket_accuracy=pocket_accuracy_pct,
        pocket_rmsd=float(np.mean(pocket_rmsds))
        if pocket_rmsds is not None and len(pocket_rmsds) else float("nan"),
    )


CSV_COLUMNS = [
    "percentile_25", "percentile_50", "percentile_75", "mean_rmsd",
    "pct_below_2A", "pct_below_5A", "avg_runtime_s",
    "pocket_accuracy_reconstructed", "pocket_rmsd",
]


def summary_csv(summary):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    writer.writerow([
        repr(summary.p25), repr(summary.p50), repr(summary.p75),
        repr(summary.mean), repr(summary.pct_below_2), repr(summary.pct_below_5),
        repr(summary.mean_runtime), repr(summary.pocket_accuracy),
        repr(summary.pocket_rmsd),
    ])
    return buf.getvalue()
