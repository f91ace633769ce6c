import math

from ..errors import LengthMismatch


def macro_f1(predictions, labels, label_set=None) -> float:
    """Unweighted mean of per-class F1 over ``label_set``.

    A class with no true positives scores 0, including classes absent from
    both predictions and labels.  ``label_set`` defaults to the union of
    observed labels.
    """
    predictions, labels = list(predictions), list(labels)
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    if not labels:
        raise LengthMismatch("need at least one prediction")
    if label_set is None:
        label_set = sorted(set(labels) | set(predictions))
    scores = []
    for c in label_set:
        tp = sum(p == c and t == c for p, t in zip(predictions, labels))
        fp = sum(p == c and t != c for p, t in zip(predictions, labels))
        fn = sum(p != c and t == c for p, t in zip(predictions, labels))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return math.fsum(scores) / len(scores)
