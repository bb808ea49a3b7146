"""Seeded, exactly reproducible K-fold cross-validation of the GP predictor
over indicator categories.

Each repeat shuffles the fold assignment; every district lands in the test
set exactly once per repeat.  Out-of-fold R^2 can be negative; summaries
floor it at 0 while the raw values stay in the report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import InsufficientData
from .gp import GpConfig, gp_fit, gp_predict
from .model import INDICATOR_CATEGORIES
from .stats import pearson_r


@dataclass
class CvReport:
    category: str
    feature_names: tuple[str, ...]
    k: int
    repeats: int
    seed: int
    fold_r2: list[list[float]]  # [repeat][fold]
    repeat_r2: list[float]  # pooled out-of-fold R^2 per repeat
    mean_r2: float
    mean_r2_floored: float
    ci95: tuple[float, float]
    oof_pred: np.ndarray  # (repeats, n)
    oof_var: np.ndarray  # (repeats, n)
    pearson_per_repeat: list[float]
    mean_pearson: float


def _fold_indices(n: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    perm = rng.permutation(n)
    return [np.asarray(f) for f in np.array_split(perm, k)]


def cross_validate(
    features: dict[str, Sequence[float]],
    y: Sequence[float],
    category: str = "full",
    k: int = 5,
    repeats: int = 10,
    seed: int = 0,
    gp_config: Optional[GpConfig] = None,
) -> CvReport:
    """Out-of-fold GP prediction quality for one indicator category.

    ``features`` maps indicator names to aligned district columns; the
    category picks which names feed the model.
    """
    names = tuple(n for n in INDICATOR_CATEGORIES[category] if n in features)
    if not names:
        raise InsufficientData(f"no features available for category {category!r}")
    X = np.column_stack([np.asarray(features[n], dtype=float) for n in names])
    y = np.asarray(y, dtype=float)
    n = y.size
    if X.shape[0] != n:
        raise InsufficientData("feature/target length mismatch")
    if n < k:
        raise InsufficientData(f"n={n} rows for k={k} folds")

    y_var_total = float(((y - y.mean()) ** 2).sum())
    fold_r2: list[list[float]] = []
    repeat_r2: list[float] = []
    oof_pred = np.empty((repeats, n))
    oof_var = np.empty((repeats, n))
    pearson_per_repeat: list[float] = []
    for rep in range(repeats):
        rng = np.random.default_rng([seed, rep])
        folds = _fold_indices(n, k, rng)
        per_fold: list[float] = []
        for fold_no, test_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(n), test_idx)
            model = gp_fit(
                X[train_idx],
                y[train_idx],
                config=gp_config,
                seed=_stable_seed(seed, rep, fold_no),
            )
            pred, var = gp_predict(model, X[test_idx])
            oof_pred[rep, test_idx] = pred
            oof_var[rep, test_idx] = var
            yt = y[test_idx]
            sst = float(((yt - yt.mean()) ** 2).sum())
            ssr = float(((yt - pred) ** 2).sum())
            per_fold.append(1.0 - ssr / sst if sst > 0 else 0.0)
        fold_r2.append(per_fold)
        ssr_all = float(((y - oof_pred[rep]) ** 2).sum())
        repeat_r2.append(1.0 - ssr_all / y_var_total if y_var_total > 0 else 0.0)
        pearson_per_repeat.append(pearson_r(oof_pred[rep], y))

    mean_r2 = float(np.mean(repeat_r2))
    if repeats >= 2:
        se = float(np.std(repeat_r2, ddof=1) / np.sqrt(repeats))
        half = float(sps.t.ppf(0.975, repeats - 1) * se)
    else:
        flat = fold_r2[0]
        se = float(np.std(flat, ddof=1) / np.sqrt(len(flat)))
        half = float(sps.t.ppf(0.975, len(flat) - 1) * se)
    return CvReport(
        category=category,
        feature_names=names,
        k=k,
        repeats=repeats,
        seed=seed,
        fold_r2=fold_r2,
        repeat_r2=repeat_r2,
        mean_r2=mean_r2,
        mean_r2_floored=max(0.0, mean_r2),
        ci95=(mean_r2 - half, mean_r2 + half),
        oof_pred=oof_pred,
        oof_var=oof_var,
        pearson_per_repeat=pearson_per_repeat,
        mean_pearson=float(np.mean(pearson_per_repeat)),
    )


def _stable_seed(*parts: int) -> int:
    out = 0
    for p in parts:
        out = (out * 1_000_003 + int(p) + 1) % (2**31 - 1)
    return out
