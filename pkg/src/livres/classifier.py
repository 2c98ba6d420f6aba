"""Complexity classifier: regularized logistic regression plus evaluation.

The model minimizes the summed cross-entropy loss with an L2 penalty
(lambda/2)*||w||^2 on the weights only; the intercept is unpenalized.
Features are standardized per training set (a zero-variance feature
standardizes to all zeros). The objective is strictly convex in w, so any
descent scheme reaching a small gradient finds the unique optimum; here a
damped Newton iteration with Armijo backtracking runs until the gradient
infinity-norm is <= 1e-8 or 1000 iterations. Records are summed in case-id
order, making the fit a pure function of the record *set*.

Leave-one-out evaluation refits per held-out record (standardization
re-estimated per fold). AUC is the Mann-Whitney statistic computed from
average ranks (ties score 0.5); F1 is that of the positive class, defined
as 0 when precision + recall is 0.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    EmptyDatasetError,
    FeatureKeyMismatchError,
    InputError,
    NonFiniteFeatureError,
    SingleRecordError,
)

#: canonical feature order, also the ablation tie-break order
FEATURE_KEYS = ("b_hcz", "n_les", "v_les", "v_liv")

#: raw 1-10 complexity scores binarize to complex strictly above this
SCORE_THRESHOLD = 5


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    features: dict  # feature key -> float
    label: int  # 0 = not complex, 1 = complex
    raw_score: int | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise InputError(f"{self.case_id}: label must be 0 or 1, got {self.label}")
        if self.raw_score is not None:
            expected = 1 if self.raw_score > SCORE_THRESHOLD else 0
            if self.label != expected:
                raise InputError(
                    f"{self.case_id}: raw score {self.raw_score} implies label "
                    f"{expected}, got {self.label}"
                )


@dataclass(frozen=True)
class Dataset:
    records: tuple
    feature_keys: tuple = FEATURE_KEYS

    def __post_init__(self):
        ids = [r.case_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise InputError("duplicate case_ids in dataset")
        for r in self.records:
            missing = [k for k in self.feature_keys if k not in r.features]
            if missing:
                raise FeatureKeyMismatchError(f"{r.case_id}: missing features {missing}")

    def __len__(self):
        return len(self.records)

    def matrix(self, subset: tuple) -> tuple[np.ndarray, np.ndarray, list]:
        """(X, y, case_ids) with rows in case-id order."""
        recs = sorted(self.records, key=lambda r: r.case_id)
        X = np.array([[float(r.features[k]) for k in subset] for r in recs])
        y = np.array([r.label for r in recs], dtype=np.float64)
        return X, y, [r.case_id for r in recs]

    def drop(self, case_id: str) -> "Dataset":
        return Dataset(
            tuple(r for r in self.records if r.case_id != case_id), self.feature_keys
        )


@dataclass(frozen=True)
class LogisticModel:
    feature_keys: tuple
    weights: np.ndarray
    intercept: float
    mean: np.ndarray
    std: np.ndarray  # 0 marks a constant feature (standardizes to 0)
    lam: float
    standardized: bool
    n_iter: int
    converged: bool
    objective_history: tuple


def _standardize(X: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    safe = np.where(std > 0, std, 1.0)
    Z = (X - mean) / safe
    return np.where(std > 0, Z, 0.0)


def _objective(Z: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, lam: float) -> float:
    z = Z @ w + b
    # ce_i = log(1 + exp(z_i)) - y_i * z_i, computed stably
    ce = np.logaddexp(0.0, z) - y * z
    return float(ce.sum() + 0.5 * lam * (w @ w))


def fit(
    d: Dataset,
    lam: float = 1.0,
    subset: tuple | None = None,
    standardize: bool = True,
    tol: float = 1e-8,
    max_iter: int = 1000,
) -> LogisticModel:
    """Fit the regularized model on all records of ``d``."""
    if len(d) == 0:
        raise EmptyDatasetError("cannot fit on an empty dataset")
    keys = tuple(subset) if subset is not None else d.feature_keys
    if not keys:
        raise InputError("need at least one active feature")
    unknown = [k for k in keys if k not in d.feature_keys]
    if unknown:
        raise FeatureKeyMismatchError(f"unknown feature keys {unknown}")
    X, y, _ = d.matrix(keys)
    if not np.isfinite(X).all():
        raise NonFiniteFeatureError("features contain non-finite values")

    if standardize:
        mean = X.mean(axis=0)
        std = X.std(axis=0)
    else:
        mean = np.zeros(X.shape[1])
        std = np.ones(X.shape[1])
    Z = _standardize(X, mean, std)

    k = Z.shape[1]
    w = np.zeros(k)
    b = 0.0
    history = [_objective(Z, y, w, b, lam)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = Z @ w + b
        p = expit(z)
        grad_w = Z.T @ (p - y) + lam * w
        grad_b = float((p - y).sum())
        grad = np.append(grad_w, grad_b)
        if np.abs(grad).max() <= tol:
            converged = True
            break
        s = p * (1.0 - p)
        H = np.zeros((k + 1, k + 1))
        H[:k, :k] = Z.T * s @ Z + lam * np.eye(k)
        H[:k, k] = H[k, :k] = Z.T @ s
        H[k, k] = s.sum()
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = grad
        slope = float(grad @ step)
        if slope <= 0.0:  # solver returned a non-descent direction
            step = grad
            slope = float(grad @ grad)
        # Armijo backtracking keeps the objective monotone nonincreasing
        f0 = history[-1]
        t = 1.0
        f_new = None
        while t > 1e-20:
            w_try = w - t * step[:k]
            b_try = float(b - t * step[k])
            f_try = _objective(Z, y, w_try, b_try, lam)
            if f_try <= f0 - 1e-4 * t * slope:
                w, b, f_new = w_try, b_try, f_try
                break
            t *= 0.5
        if f_new is None:
            break  # no step makes measurable progress: numerically optimal
        history.append(f_new)

    return LogisticModel(
        keys, w, float(b), mean, std, lam, standardize, it, bool(converged), tuple(history)
    )


def predict_proba(m: LogisticModel, features: dict) -> float:
    """Probability of the complex class for one feature mapping."""
    missing = [k for k in m.feature_keys if k not in features]
    if missing:
        raise FeatureKeyMismatchError(f"missing features {missing}")
    x = np.array([[float(features[k]) for k in m.feature_keys]])
    z = float((_standardize(x, m.mean, m.std) @ m.weights)[0] + m.intercept)
    return float(expit(z))


def predict_class(m: LogisticModel, features: dict) -> int:
    return 1 if predict_proba(m, features) >= 0.5 else 0


def auc_score(probs: np.ndarray, labels: np.ndarray) -> float | None:
    """Mann-Whitney AUC from average ranks; None with a single class."""
    labels = np.asarray(labels)
    n1 = int(labels.sum())
    n0 = len(labels) - n1
    if n0 == 0 or n1 == 0:
        return None
    order = np.argsort(probs, kind="stable")
    sorted_p = np.asarray(probs)[order]
    ranks = np.empty(len(probs))
    i = 0
    while i < len(sorted_p):
        j = i
        while j + 1 < len(sorted_p) and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum = float(ranks[labels == 1].sum())
    u = rank_sum - n1 * (n1 + 1) / 2.0
    return u / (n1 * n0)


@dataclass(frozen=True)
class EvalReport:
    feature_subset: tuple
    accuracy: float
    f1: float
    auc: float | None
    confusion: tuple  # (tp, fp, tn, fn)
    probabilities: tuple  # ((case_id, prob, label), ...) in case-id order
    lam: float

    def as_dict(self) -> dict:
        tp, fp, tn, fn = self.confusion
        return {
            "feature_subset": list(self.feature_subset),
            "n": len(self.probabilities),
            "accuracy": self.accuracy,
            "f1": self.f1,
            "auc": self.auc,
            "confusion": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
            "lambda": self.lam,
            "loo_probabilities": [
                {"case_id": c, "prob": p, "label": y} for c, p, y in self.probabilities
            ],
        }


def loo_evaluate(
    d: Dataset,
    subset: tuple | None = None,
    lam: float = 1.0,
    standardize: bool = True,
) -> EvalReport:
    """Leave-one-out metrics: one refit per held-out record."""
    if len(d) < 2:
        raise SingleRecordError("leave-one-out needs at least 2 records")
    keys = tuple(subset) if subset is not None else d.feature_keys
    recs = sorted(d.records, key=lambda r: r.case_id)
    rows = []
    for r in recs:
        model = fit(d.drop(r.case_id), lam=lam, subset=keys, standardize=standardize)
        rows.append((r.case_id, predict_proba(model, r.features), r.label))

    probs = np.array([p for _, p, _ in rows])
    labels = np.array([y for _, _, y in rows])
    pred = probs >= 0.5
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    tn = int(np.sum(~pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    accuracy = (tp + tn) / len(rows)
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0
    return EvalReport(
        keys, accuracy, f1, auc_score(probs, labels), (tp, fp, tn, fn), tuple(rows), lam
    )


def roc_points(report: EvalReport) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) rows sweeping the decision threshold down."""
    rows = sorted(report.probabilities, key=lambda t: -t[1])
    n1 = sum(1 for _, _, y in rows if y == 1)
    n0 = len(rows) - n1
    out = [(0.0, 0.0, float("inf"))]
    tp = fp = 0
    i = 0
    while i < len(rows):
        thr = rows[i][1]
        while i < len(rows) and rows[i][1] == thr:
            if rows[i][2] == 1:
                tp += 1
            else:
                fp += 1
            i += 1
        out.append((fp / n0 if n0 else 0.0, tp / n1 if n1 else 0.0, thr))
    return out


@dataclass(frozen=True)
class AblationResult:
    grid: tuple  # ((subset, accuracy, f1, auc), ...) deterministic order
    elimination: tuple  # ((removed_key, remaining_subset), ...) in drop order
    baseline: tuple
    rule: str = "drop the feature whose removal maximizes LOO AUC (ties: accuracy, then latest fixed-order key)"


def ablate(d: Dataset, lam: float = 1.0, standardize: bool = True) -> AblationResult:
    """Backward elimination from the full feature set.

    Every subset evaluated on the way (baseline, all removal candidates per
    step) plus all single-feature subsets lands in the grid.
    """
    full = tuple(d.feature_keys)
    if len(full) < 2:
        raise InputError("ablation needs at least 2 features")
    evaluated: dict[tuple, EvalReport] = {}

    def ev(subset: tuple) -> EvalReport:
        if subset not in evaluated:
            evaluated[subset] = loo_evaluate(d, subset, lam, standardize)
        return evaluated[subset]

    ev(full)
    elimination = []
    current = full
    while len(current) > 1:
        candidates = []
        for k in current:
            rest = tuple(x for x in current if x != k)
            rep = ev(rest)
            auc = rep.auc if rep.auc is not None else -1.0
            candidates.append((auc, rep.accuracy, full.index(k), k, rest))
        # maximize AUC, then accuracy; ties drop the latest fixed-order key
        candidates.sort(key=lambda t: (-t[0], -t[1], -t[2]))
        _, _, _, removed, current = candidates[0]
        elimination.append((removed, current))
    for k in full:
        ev((k,))

    def subset_sort_key(s: tuple):
        mask = tuple(1 if k in s else 0 for k in full)
        return (-len(s), tuple(-m for m in mask))

    grid = tuple(
        (s, evaluated[s].accuracy, evaluated[s].f1, evaluated[s].auc)
        for s in sorted(evaluated, key=subset_sort_key)
    )
    return AblationResult(grid, tuple(elimination), full)


# --- CSV interfaces -------------------------------------------------------

_CSV_FEATURES = {
    "b_hcz": "b_hcz",
    "n_les": "n_les",
    "v_les_mm3": "v_les",
    "v_liv_mm3": "v_liv",
}


def load_dataset_csv(text: str) -> Dataset:
    """Dataset from CSV with header case_id, b_hcz, n_les, v_les_mm3,
    v_liv_mm3, raw_score (optional), label (optional when raw_score given).
    """
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise InputError("empty CSV")
    names = [n.strip() for n in reader.fieldnames]
    missing = [c for c in ("case_id", *_CSV_FEATURES) if c not in names]
    if missing:
        raise InputError(f"CSV is missing columns {missing}")
    if "label" not in names and "raw_score" not in names:
        raise InputError("CSV needs a label or raw_score column")
    records = []
    for row in reader:
        try:
            feats = {key: float(row[col]) for col, key in _CSV_FEATURES.items()}
        except (TypeError, ValueError) as e:
            raise InputError(f"bad feature value in row {row!r}") from e
        raw = row.get("raw_score")
        raw_score = int(raw) if raw not in (None, "") else None
        lab = row.get("label")
        if lab in (None, ""):
            if raw_score is None:
                raise InputError(f"row {row['case_id']!r} has neither label nor raw_score")
            label = 1 if raw_score > SCORE_THRESHOLD else 0
        else:
            label = int(lab)
        records.append(CaseRecord(row["case_id"], feats, label, raw_score))
    if not records:
        raise EmptyDatasetError("CSV contains no data rows")
    return Dataset(tuple(records))


def dataset_to_csv(d: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["case_id", "b_hcz", "n_les", "v_les_mm3", "v_liv_mm3", "raw_score", "label"])
    for r in sorted(d.records, key=lambda r: r.case_id):
        writer.writerow(
            [
                r.case_id,
                repr(float(r.features["b_hcz"])),
                repr(float(r.features["n_les"])),
                repr(float(r.features["v_les"])),
                repr(float(r.features["v_liv"])),
                "" if r.raw_score is None else r.raw_score,
                r.label,
            ]
        )
    return buf.getvalue()


def ablation_to_csv(result: AblationResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*result.baseline, "accuracy", "f1", "auc"])
    for subset, acc, f1, auc in result.grid:
        flags = ["1" if k in subset else "0" for k in result.baseline]
        writer.writerow([*flags, repr(acc), repr(f1), "" if auc is None else repr(auc)])
    return buf.getvalue()


def roc_to_csv(points: list[tuple[float, float, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["fpr", "tpr", "threshold"])
    for fpr, tpr, thr in points:
        writer.writerow([repr(fpr), repr(tpr), "inf" if math.isinf(thr) else repr(thr)])
    return buf.getvalue()
