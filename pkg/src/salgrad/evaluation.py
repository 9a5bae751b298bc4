"""PR curves over the 256 8-bit cutoffs and best-F-beta scoring."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_CUTOFFS = 256


@dataclass
class PRCurve:
    """256 (precision, recall) pairs indexed by cutoff 0..255.

    ``valid`` marks cutoffs whose predicted set is nonempty; precision is
    undefined (and excluded from best-F) where it is False.
    """

    precision: np.ndarray
    recall: np.ndarray
    valid: np.ndarray


def pr_curve(s, gt):
    """PR pairs for every cutoff c: predicted = round(255 * s) >= c."""
    s = np.asarray(s, dtype=np.float64)
    gt = np.asarray(gt, dtype=bool)
    if s.shape != gt.shape:
        raise ValueError(f"map shape {s.shape} does not match mask {gt.shape}")
    n_fg = int(gt.sum())
    if n_fg == 0:
        raise ValueError("ground truth mask has no foreground pixels")

    q = np.clip(np.rint(255.0 * s).astype(np.int64), 0, 255)
    hist_all = np.bincount(q.ravel(), minlength=N_CUTOFFS)
    hist_fg = np.bincount(q[gt].ravel(), minlength=N_CUTOFFS)
    # predicted-set and true-positive counts at cutoff c are suffix sums
    pred = np.cumsum(hist_all[::-1])[::-1]
    tp = np.cumsum(hist_fg[::-1])[::-1]

    valid = pred > 0
    precision = np.zeros(N_CUTOFFS)
    precision[valid] = tp[valid] / pred[valid]
    recall = tp / n_fg
    return PRCurve(precision=precision, recall=recall, valid=valid)


def f_beta(precision, recall, beta_sq=0.3):
    """Weighted F-measure; defined as 0 when precision and recall are
    both 0."""
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise ValueError("precision and recall must lie in [0, 1]")
    denom = beta_sq * precision + recall
    if denom == 0.0:
        return 0.0
    return (1.0 + beta_sq) * precision * recall / denom


def best_f(curve, beta_sq=0.3):
    """Largest F-beta along the curve, over valid pairs only."""
    if not curve.valid.any():
        raise ValueError("PR curve has no valid pairs")
    best = -1.0
    best_cutoff = 0
    for c in np.flatnonzero(curve.valid):
        f = f_beta(curve.precision[c], curve.recall[c], beta_sq)
        if f > best:
            best = f
            best_cutoff = int(c)
    return best, best_cutoff


_IMAGE_SUFFIXES = {".png", ".pgm", ".ppm"}


def _match_pairs(maps_dir, gt_dir):
    maps_dir, gt_dir = Path(maps_dir), Path(gt_dir)
    gt_by_stem = {
        p.stem: p
        for p in sorted(gt_dir.iterdir())
        if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
    }
    pairs, unmatched = [], []
    for p in sorted(maps_dir.iterdir()):
        if not p.is_file() or p.suffix.lower() not in _IMAGE_SUFFIXES:
            continue
        if p.stem in gt_by_stem:
            pairs.append((p.stem, p, gt_by_stem[p.stem]))
        else:
            unmatched.append(p.name)
    for stem in gt_by_stem:
        if not any(stem == s for s, _, _ in pairs):
            unmatched.append(gt_by_stem[stem].name)
    return pairs, unmatched


def batch_report(maps_dir, gt_dir, beta_sq=0.3, out_csv=None, curve_csv=None):
    """Score every filename-matched (map, mask) pair.

    Returns ``(rows, mean_curve, unmatched)`` where rows are
    (image_id, best_f, best_cutoff) with a final aggregate row, and
    mean_curve is the pointwise mean PR curve over valid entries.
    Optionally writes both CSV files.
    """
    from .imageio import load_image_gray, load_mask

    pairs, unmatched = _match_pairs(maps_dir, gt_dir)
    if not pairs:
        raise ValueError(f"no filename-matched pairs between {maps_dir} and {gt_dir}")

    rows = []
    prec_sum = np.zeros(N_CUTOFFS)
    prec_n = np.zeros(N_CUTOFFS)
    rec_sum = np.zeros(N_CUTOFFS)
    for stem, map_path, gt_path in pairs:
        curve = pr_curve(load_image_gray(map_path), load_mask(gt_path))
        f, cutoff = best_f(curve, beta_sq)
        rows.append((stem, f, cutoff))
        prec_sum[curve.valid] += curve.precision[curve.valid]
        prec_n[curve.valid] += 1
        rec_sum += curve.recall

    mean_precision = np.divide(
        prec_sum, prec_n, out=np.full(N_CUTOFFS, np.nan), where=prec_n > 0
    )
    mean_recall = rec_sum / len(pairs)
    mean_f = float(np.mean([r[1] for r in rows]))
    rows.append(("mean", mean_f, ""))

    if out_csv is not None:
        with open(out_csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["image_id", "best_f", "best_cutoff"])
            for row in rows:
                writer.writerow([row[0], f"{row[1]:.6f}", row[2]])
    if curve_csv is not None:
        with open(curve_csv, "w", newline="") as f:
            writer = csv.writer(f)
            header = [f"precision_{c}" for c in range(N_CUTOFFS)]
            header += [f"recall_{c}" for c in range(N_CUTOFFS)]
            writer.writerow(["image_id"] + header)
            values = [
                "" if np.isnan(p) else f"{p:.6f}" for p in mean_precision
            ] + [f"{r:.6f}" for r in mean_recall]
            writer.writerow(["mean"] + values)

    return rows, (mean_precision, mean_recall), unmatched
