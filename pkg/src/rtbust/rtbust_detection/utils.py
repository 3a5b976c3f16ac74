import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from rtbust.exceptions import ConfigurationError, IncompatibleArtifactError, InputNotFoundError, UndefinedInputError
from rtbust.rtbust_cluster.models import NOISE, ClusterLabeling
from rtbust.rtbust_detection.models import DetectionResult, Label, MetricsReport, Provenance
from rtbust.rtbust_ingest.models import UserSeries

logger = logging.getLogger(__name__)

LABELS_HEADER = ["user_id", "label", "provenance"]
TRUTH_HEADER = ["user_id", "label"]


def label_from_clusters(labeling: ClusterLabeling) -> DetectionResult:
    """Clustered accounts are bots, noise accounts are humans."""
    labels: dict[str, Label] = {}
    provenance: dict[str, Provenance] = {}
    for user_id, cluster_id in zip(labeling.user_ids, labeling.labels):
        clustered = cluster_id != NOISE
        labels[user_id] = Label.BOT if clustered else Label.HUMAN
        provenance[user_id] = Provenance.CLUSTERED if clustered else Provenance.NOISE
    return DetectionResult(labels=labels, provenance=provenance)


def baseline_retweet_rate(series_map: dict[str, UserSeries]) -> DetectionResult:
    """
    Labels as bots the accounts whose retweets per day lie strictly above
    the third quartile (linear interpolation) of all rates.

    Raises:
        UndefinedInputError: With fewer than 4 accounts.
    """
    if len(series_map) < 4:
        raise UndefinedInputError(f"the retweet-rate baseline needs at least 4 accounts, got {len(series_map)}")
    rates = {user_id: series.rate_per_day for user_id, series in series_map.items()}
    return baseline_from_rates(rates)


def baseline_from_rates(rates: dict[str, float]) -> DetectionResult:
    if len(rates) < 4:
        raise UndefinedInputError(f"the retweet-rate baseline needs at least 4 accounts, got {len(rates)}")
    q3 = float(np.quantile(np.array(list(rates.values()), dtype=np.float64), 0.75))
    labels = {user_id: Label.BOT if rate > q3 else Label.HUMAN for user_id, rate in rates.items()}
    logger.info(f"Retweet-rate baseline: Q3 = {q3:.4f}/day, {sum(l is Label.BOT for l in labels.values())} bots")
    return DetectionResult(labels=labels, provenance={user_id: Provenance.BASELINE for user_id in rates})


def _ratio(numerator: float, denominator: float, name: str, undefined: list[str]) -> float:
    if denominator == 0:
        undefined.append(name)
        return 0.0
    return numerator / denominator


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> MetricsReport:
    """
    Precision, recall, accuracy, F1 and MCC from a confusion matrix. A zero
    denominator yields 0 and names the metric in ``undefined``.
    """
    undefined: list[str] = []
    n = tp + fp + fn + tn
    precision = _ratio(tp, tp + fp, "precision", undefined)
    recall = _ratio(tp, tp + fn, "recall", undefined)
    accuracy = _ratio(tp + tn, n, "accuracy", undefined)
    if precision + recall == 0:
        undefined.append("f1")
    f1 = f1_score(precision, recall)
    mcc = _ratio(tp * tn - fp * fn, math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)), "mcc", undefined)
    if undefined:
        logger.warning(f"Undefined metrics reported as 0: {', '.join(undefined)}")
    return MetricsReport(tp=tp, fp=fp, fn=fn, tn=tn, precision=precision, recall=recall, accuracy=accuracy,
                         f1=f1, mcc=mcc, undefined=undefined)


def f1_score(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)


def compute_metrics(pred: dict[str, Label], truth: dict[str, Label]) -> MetricsReport:
    """
    Confusion counts with bot as the positive class.

    Raises:
        ConfigurationError: If the two maps cover different accounts.
    """
    if pred.keys() != truth.keys():
        missing = sorted(truth.keys() - pred.keys())[:5]
        extra = sorted(pred.keys() - truth.keys())[:5]
        raise ConfigurationError(f"prediction and truth cover different accounts "
                                 f"(missing from prediction: {missing}, unknown to truth: {extra})")
    tp = fp = fn = tn = 0
    for user_id, predicted in pred.items():
        actual = truth[user_id]
        if predicted is Label.BOT:
            if actual is Label.BOT:
                tp += 1
            else:
                fp += 1
        elif actual is Label.BOT:
            fn += 1
        else:
            tn += 1
    return metrics_from_counts(tp, fp, fn, tn)


def restrict_truth(truth: dict[str, Label], user_ids) -> dict[str, Label]:
    """Truth for the analysed accounts only; accounts missing from the truth raise."""
    missing = [u for u in user_ids if u not in truth]
    if missing:
        raise ConfigurationError(f"{len(missing)} analysed account(s) have no truth label, e.g. {missing[:5]}")
    return {u: truth[u] for u in user_ids}


def write_labels(result: DetectionResult, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(LABELS_HEADER)
        for user_id in sorted(result.labels):
            writer.writerow([user_id, result.labels[user_id].value, result.provenance[user_id].value])


def read_label_file(path: str | Path) -> dict[str, Label]:
    """
    Reads any CSV whose first two columns are user_id and label (labels.csv or a truth file).

    Raises:
        InputNotFoundError: If the file is missing.
        IncompatibleArtifactError: On a bad header, an unknown label or a duplicate account.
    """
    path = Path(path)
    if not path.is_file():
        raise InputNotFoundError(f"No such label file: '{path}'")
    with path.open("r", encoding="utf-8", newline="") as stream:
        rows = [row for row in csv.reader(stream) if row]
    if not rows or rows[0][:2] != TRUTH_HEADER:
        raise IncompatibleArtifactError(f"{path}: expected a header starting with user_id,label")
    labels: dict[str, Label] = {}
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise IncompatibleArtifactError(f"{path}:{line_no}: expected at least 2 fields")
        user_id, label = row[0], row[1].strip().lower()
        if user_id in labels:
            raise IncompatibleArtifactError(f"{path}:{line_no}: duplicate account {user_id}")
        try:
            labels[user_id] = Label(label)
        except ValueError as e:
            raise IncompatibleArtifactError(f"{path}:{line_no}: unknown label '{row[1]}'") from e
    return labels


def report_json(report: MetricsReport) -> str:
    return json.dumps(report.flat(), indent=2) + "\n"


def write_report(report: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(report_json(report), encoding="utf-8")
