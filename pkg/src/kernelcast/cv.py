"""Fold generation and hyperparameter grid search.

Two fold geometries:

* overlapping windows for closed-loop (path continuation) tasks, so each
  fold rolls out from a different starting point of the training span,
* expanding blocks for input/output tasks: fold i trains on the first i
  equal blocks and validates on block i+1.

Grid search refits the estimator, including its preprocessing, on each
fold's training slice, scores validation MSE in the task's own mode, and
averages across folds.  Divergent rollouts score as infinity rather than
aborting the candidate.  Ties break toward simpler models: smaller p,
smaller tau, larger ridge, then first in grid order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridSearchError, InvalidInputError
from .estimators import fit_estimator, fit_path_estimator
from .forecast import open_loop, path_continue


@dataclass(frozen=True)
class Fold:
    train_start: int
    train_stop: int
    val_start: int
    val_stop: int


@dataclass
class FoldPlan:
    folds: list
    mode: str  # "overlapping" or "expanding"


def overlapping_folds(n_train: int, fold_len: int, val_len: int,
                      stride: int) -> FoldPlan:
    """Sliding train/validation windows stepping by ``stride``."""
    if fold_len < 1 or val_len < 1 or stride < 1:
        raise InvalidInputError("fold_len, val_len, stride must be >= 1")
    if fold_len + val_len > n_train:
        raise InvalidInputError(
            f"fold_len + val_len = {fold_len + val_len} exceeds n_train = {n_train}"
        )
    folds = []
    start = 0
    while start + fold_len + val_len <= n_train:
        folds.append(Fold(start, start + fold_len,
                          start + fold_len, start + fold_len + val_len))
        start += stride
    return FoldPlan(folds, "overlapping")


def expanding_folds(n_train: int, k: int) -> FoldPlan:
    """k equal blocks (remainder on the last); fold i = first i vs block i+1."""
    if k < 2:
        raise InvalidInputError("k must be >= 2")
    if n_train < k:
        raise InvalidInputError("n_train must be at least k")
    block = n_train // k
    folds = []
    for i in range(1, k):
        val_stop = (i + 1) * block if i + 1 < k else n_train
        folds.append(Fold(0, i * block, i * block, val_stop))
    return FoldPlan(folds, "expanding")


@dataclass
class Grid:
    """Per-hyperparameter value lists.

    Lagged estimators use ``taus``, ``ps``, ``lam_regs``; Volterra uses
    ``lams``, ``thetas``, ``lam_regs``.  Volterra pairs violating
    ``theta^2 M^2 < 1`` or ``lam >= sqrt(1 - theta^2 M^2)`` are pruned and
    reported, never evaluated.
    """

    taus: list = field(default_factory=list)
    ps: list = field(default_factory=list)
    lams: list = field(default_factory=list)
    thetas: list = field(default_factory=list)
    lam_regs: list = field(default_factory=list)
    M: float = 1.0

    def candidates(self, estimator_kind: str) -> tuple[list[dict], list[dict]]:
        """(feasible candidates in grid order, pruned candidates)."""
        if not self.lam_regs:
            raise InvalidInputError("lam_regs must be non-empty")
        feasible = []
        pruned = []
        if estimator_kind == "volterra":
            if not (self.lams and self.thetas):
                raise InvalidInputError("volterra grids need lams and thetas")
            for lam, theta, reg in itertools.product(self.lams, self.thetas,
                                                     self.lam_regs):
                cand = {"lam": lam, "theta": theta, "lam_reg": reg, "M": self.M}
                if theta**2 * self.M**2 >= 1.0 or not (
                    0.0 < lam < math.sqrt(1.0 - theta**2 * self.M**2)
                ):
                    pruned.append(cand)
                else:
                    feasible.append(cand)
        else:
            if not (self.taus and self.ps):
                raise InvalidInputError("lagged grids need taus and ps")
            for tau, p, reg in itertools.product(self.taus, self.ps,
                                                 self.lam_regs):
                feasible.append({"tau": tau, "p": p, "lam_reg": reg})
        return feasible, pruned


@dataclass
class CandidateResult:
    params: dict
    fold_mse: list
    mean_mse: float
    failures: list = field(default_factory=list)


@dataclass
class GridSearchResult:
    best: dict
    table: list  # CandidateResult in grid order
    pruned: list

    def leaderboard_csv(self, path) -> None:
        keys = sorted({k for row in self.table for k in row.params})
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(keys + ["mean_mse"]) + "\n")
            for row in self.table:
                cells = [repr(row.params.get(k, "")) for k in keys]
                fh.write(",".join(cells + [f"{row.mean_mse:.17g}"]) + "\n")


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean((a - b) ** 2))


def _score_path_fold(kind, params, values, fold: Fold, fit_kw) -> float:
    train = values[fold.train_start:fold.train_stop]
    val = values[fold.val_start:fold.val_stop]
    est, seed = fit_path_estimator(kind, params, train, **fit_kw)
    run = path_continue(est, seed, val.shape[0], reference=val)
    if run.truncated or run.predicted.shape[0] < val.shape[0]:
        return float("inf")
    if not np.all(np.isfinite(run.predicted)):
        return float("inf")
    return _mse(run.predicted, val)


def _score_open_fold(kind, params, inputs, outputs, fold: Fold,
                     fit_kw) -> float:
    est = fit_estimator(kind, params,
                        inputs[fold.train_start:fold.train_stop],
                        outputs[fold.train_start:fold.train_stop], **fit_kw)
    run = open_loop(est, inputs[fold.val_start:fold.val_stop],
                    reference=outputs[fold.val_start:fold.val_stop])
    if run.truncated or not np.all(np.isfinite(run.predicted)):
        return float("inf")
    return _mse(run.predicted, outputs[fold.val_start:fold.val_stop])


def _tie_break_key(item):
    index, cand = item
    mse = cand.mean_mse
    p = cand.params.get("p", 0)
    tau = cand.params.get("tau", 0)
    reg = cand.params.get("lam_reg", 0.0)
    return (mse, p, tau, -reg, index)


def grid_search(estimator_kind: str, grid: Grid, plan: FoldPlan,
                task_mode: str, series=None, inputs=None, outputs=None,
                fit_kw: dict | None = None,
                fixed_hyper: dict | None = None) -> GridSearchResult:
    """Exhaustive search over the feasible grid.

    ``task_mode`` is ``"path-continuation"`` (needs ``series``) or
    ``"open-loop"`` (needs ``inputs`` and ``outputs``).  ``fixed_hyper``
    entries (for example a Volterra washout) are merged into every
    candidate before fitting.  Estimator preprocessing is refit inside
    every fold, so validation slices never contribute statistics.
    """
    fit_kw = dict(fit_kw or {})
    fixed_hyper = dict(fixed_hyper or {})
    feasible, pruned = grid.candidates(estimator_kind)
    if not feasible:
        raise GridSearchError("no feasible candidates in the grid", pruned)
    if task_mode == "path-continuation":
        if series is None:
            raise InvalidInputError("path-continuation needs the series")
        values = np.asarray(series, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
    elif task_mode == "open-loop":
        if inputs is None or outputs is None:
            raise InvalidInputError("open-loop needs inputs and outputs")
        inputs = np.asarray(inputs, dtype=np.float64)
        outputs = np.asarray(outputs, dtype=np.float64)
    else:
        raise InvalidInputError(f"unknown task mode {task_mode!r}")

    table = []
    for params in feasible:
        full = {**fixed_hyper, **params}
        fold_scores = []
        failures = []
        for fold in plan.folds:
            try:
                if task_mode == "path-continuation":
                    score = _score_path_fold(estimator_kind, full, values,
                                             fold, fit_kw)
                else:
                    score = _score_open_fold(estimator_kind, full, inputs,
                                             outputs, fold, fit_kw)
            except Exception as exc:  # candidate-level failure, not fatal
                score = float("inf")
                failures.append(f"fold {fold}: {exc}")
            fold_scores.append(score)
        mean = float(np.mean(fold_scores)) if fold_scores else float("inf")
        table.append(CandidateResult(params, fold_scores, mean, failures))

    if all(not math.isfinite(c.mean_mse) for c in table):
        raise GridSearchError(
            "every candidate failed or diverged on every fold",
            [f"{c.params}: {c.failures or c.fold_mse}" for c in table],
        )
    best_idx, best = min(enumerate(table), key=_tie_break_key)
    return GridSearchResult(dict(best.params), table, pruned)
