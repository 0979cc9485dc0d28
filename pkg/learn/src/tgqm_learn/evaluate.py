"""Evaluation metrics for the learned models: precision-recall curves,
MSE, pairwise comparison accuracy, and the global-min score."""

import json
from dataclasses import dataclass, field

import numpy as np


def pr_curve(labels, scores):
    """Interpolated precision-recall curve.

    Returns (recall, precision) arrays sorted by increasing recall with
    precision made nonincreasing by the standard right-to-left maximum
    interpolation. Endpoints at recall 0 and 1 are always present."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    n_pos = int(labels.sum())
    if n_pos == 0 or len(labels) == 0:
        return np.array([0.0, 1.0]), np.array([0.0, 0.0])
    order = np.argsort(-scores, kind="stable")
    tp = np.cumsum(labels[order])
    fp = np.cumsum(~labels[order])
    recall = tp / n_pos
    precision = tp / (tp + fp)
    # Right-to-left running maximum makes precision nonincreasing.
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    recall = np.concatenate([[0.0], recall, [1.0]])
    precision = np.concatenate([[precision[0]], precision,
                                [n_pos / len(labels)]])
    keep = np.concatenate([[True], np.diff(recall) >= 0])
    return recall[keep], precision[keep]


def precision_at_recall(recall, precision, level):
    """Highest precision achieved at recall >= level."""
    recall = np.asarray(recall)
    precision = np.asarray(precision)
    mask = recall >= level
    return float(precision[mask].max()) if mask.any() else 0.0


def comparison_accuracy(targets, preds, n_pairs=10_000, seed=0):
    """Accuracy of the predicted ordering over random sample pairs.

    Pairs with equal ground-truth targets carry no ordering information
    and are skipped; predicted ties count half."""
    targets = np.asarray(targets, dtype=float)
    preds = np.asarray(preds, dtype=float)
    rng = np.random.default_rng(seed)
    correct = 0.0
    counted = 0
    attempts = 0
    while counted < n_pairs and attempts < 50 * n_pairs:
        k = min(4 * (n_pairs - counted), 1_000_000)
        i = rng.integers(0, len(targets), size=k)
        j = rng.integers(0, len(targets), size=k)
        valid = targets[i] != targets[j]
        i, j = i[valid], j[valid]
        if len(i) > n_pairs - counted:
            i, j = i[:n_pairs - counted], j[:n_pairs - counted]
        gt = targets[i] < targets[j]
        pd = preds[i] < preds[j]
        ties = preds[i] == preds[j]
        correct += float(np.sum((gt == pd) & ~ties)) + 0.5 * float(ties.sum())
        counted += len(i)
        attempts += k
    if counted == 0:
        raise ValueError("no pairs with distinct targets")
    return correct / counted


def global_min_scores(targets, preds, n_subsets=200, fraction=0.1, seed=0):
    """For each random subset, find the sample the predictor ranks lowest
    and score the fraction of the subset whose ground truth is strictly
    greater. Returns the per-subset scores."""
    targets = np.asarray(targets, dtype=float)
    preds = np.asarray(preds, dtype=float)
    n = len(targets)
    k = max(2, int(round(fraction * n)))
    rng = np.random.default_rng(seed)
    scores = np.empty(n_subsets)
    for s in range(n_subsets):
        idx = rng.choice(n, size=k, replace=False)
        best = idx[np.argmin(preds[idx])]
        scores[s] = float(np.mean(targets[idx] > targets[best]))
    return scores


@dataclass
class EvalReport:
    """Evaluation summary. Classifier reports fill the PR fields;
    regressor reports fill mse/comparison/GMS."""
    kind: str
    n_samples: int
    pr_recall: list | None = None
    pr_precision: list | None = None
    mse: float | None = None
    comparison_accuracy: float | None = None
    gms_values: list | None = None
    gms_mean: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def save_plots(self, directory):
        """Write PR-curve and GMS-histogram images where applicable."""
        import os
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        paths = []
        if self.pr_recall is not None:
            fig, ax = plt.subplots()
            ax.plot(self.pr_recall, self.pr_precision)
            ax.set_xlabel("recall")
            ax.set_ylabel("precision")
            ax.set_xlim(0, 1)
            ax.set_ylim(0, 1.05)
            p = os.path.join(directory, "pr_curve.png")
            fig.savefig(p)
            plt.close(fig)
            paths.append(p)
        if self.gms_values is not None:
            fig, ax = plt.subplots()
            ax.hist(self.gms_values, bins=20, range=(0, 1))
            ax.set_xlabel("global-min score")
            ax.set_ylabel("subsets")
            p = os.path.join(directory, "gms_hist.png")
            fig.savefig(p)
            plt.close(fig)
            paths.append(p)
        return paths


def evaluate(model, samples, n_pairs=10_000, n_subsets=200, seed=0):
    """Evaluate a trained model on a held-out split."""
    if not samples:
        raise ValueError("empty evaluation split")
    if model.kind == "classifier":
        scores = model.predict(samples)
        labels = np.array([s.label for s in samples], dtype=float)
        recall, precision = pr_curve(labels.astype(bool), scores)
        report = EvalReport(kind="classifier", n_samples=len(samples),
                            pr_recall=recall.tolist(),
                            pr_precision=precision.tolist(),
                            mse=float(np.mean((scores - labels) ** 2)))
        if labels.any() and not labels.all():
            report.comparison_accuracy = comparison_accuracy(
                labels, scores, n_pairs=n_pairs, seed=seed)
        report.extras["base_rate"] = float(labels.mean())
        return report
    kept = [s for s in samples if s.target is not None]
    if not kept:
        raise ValueError("no samples carry a regression target")
    preds = model.predict(kept)
    targets = np.array([s.target for s in kept])
    gms = global_min_scores(targets, preds, n_subsets=n_subsets, seed=seed)
    return EvalReport(kind="regressor", n_samples=len(kept),
                      mse=float(np.mean((preds - targets) ** 2)),
                      comparison_accuracy=comparison_accuracy(
                          targets, preds, n_pairs=n_pairs, seed=seed),
                      gms_values=gms.tolist(), gms_mean=float(gms.mean()))
