"""Next-generation reservoir computing: delay embedding, monomial features,
and the primal ridge estimator built on them.

A model maps the flattened window of the last ``tau`` input samples (oldest
lag first) through every monomial of total degree at most ``p`` (constant
included) and applies a linear readout fitted by ridge regression.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InvalidInputError
from .linsolve import RidgeSolution, solve_ridge_primal

# Hard cap on materialized exponent-table rows; anything bigger is a config
# mistake at desk scale.
MAX_TABLE_ROWS = 1 << 22
_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class DelaySpec:
    """Number of lags ``tau`` and per-sample input dimension ``d``."""

    tau: int
    d: int

    def __post_init__(self):
        if self.tau < 1 or self.d < 1:
            raise InvalidInputError("tau and d must be >= 1")

    @property
    def window(self) -> int:
        return self.tau * self.d


def feature_dim(tau: int, d: int, p: int) -> int:
    """Number of monomials of degree <= p in tau*d variables, constant included.

    Equals ``binomial(tau*d + p, p)``.
    """
    if tau < 1 or d < 1 or p < 1:
        raise InvalidInputError("tau, d and p must be >= 1")
    n = math.comb(tau * d + p, p)
    if n > _INT64_MAX:
        raise CapacityError(
            f"feature dimension {n} exceeds the representable integer range"
        )
    return n


def _compositions(total: int, parts: int):
    """Yield all tuples of `parts` non-negative ints summing to `total`,
    in ascending lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


@dataclass
class ExponentTable:
    """Monomial exponent rows in graded lexicographic order, constant first.

    ``rows[k]`` holds the exponent applied to each window component for the
    k-th feature.  The ordering is deterministic: degrees ascend, and within
    a degree rows ascend lexicographically.
    """

    tau: int
    d: int
    p: int
    rows: np.ndarray
    _terms: list | None = field(default=None, repr=False, compare=False)

    @property
    def n_features(self) -> int:
        return self.rows.shape[0]

    def terms(self) -> list:
        """Per-row (column indices, exponents) with zero exponents dropped."""
        if self._terms is None:
            self._terms = []
            for row in self.rows:
                cols = np.nonzero(row)[0]
                self._terms.append((cols, row[cols].astype(np.float64)))
        return self._terms


def build_exponent_table(tau: int, d: int, p: int) -> ExponentTable:
    """Enumerate the exponent table for ``feature_dim(tau, d, p)`` monomials."""
    n = feature_dim(tau, d, p)
    if n > MAX_TABLE_ROWS:
        raise CapacityError(
            f"exponent table with {n} rows exceeds the cap of {MAX_TABLE_ROWS}"
        )
    width = tau * d
    rows = np.empty((n, width), dtype=np.int64)
    i = 0
    for degree in range(p + 1):
        for comp in _compositions(degree, width):
            rows[i] = comp
            i += 1
    assert i == n
    return ExponentTable(tau, d, p, rows)


def delay_vectors(values, tau: int) -> np.ndarray:
    """Stack each sample with its tau-1 predecessors, oldest lag first.

    Parameters
    ----------
    values : (n, d) or (n,) array
        Uniformly sampled series.
    tau : int
        Window length in samples.

    Returns
    -------
    (n - tau + 1, tau * d) array
        Row t corresponds to the window ending at sample ``t + tau - 1``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    if tau < 1:
        raise InvalidInputError("tau must be >= 1")
    if n < tau:
        raise InvalidInputError(f"series of length {n} is shorter than tau={tau}")
    return np.hstack([values[i : n - tau + 1 + i] for i in range(tau)])


def ngrc_features(v, table: ExponentTable) -> np.ndarray:
    """Evaluate the monomial feature vector(s) for window(s) ``v``.

    Accepts a single window of length tau*d or a matrix of windows; returns
    a vector of length ``table.n_features`` or a matrix with one feature row
    per window.  Feature 0 is the constant 1.
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    V = v[None, :] if single else v
    if V.shape[1] != table.rows.shape[1]:
        raise InvalidInputError(
            f"window length {V.shape[1]} does not match table width "
            f"{table.rows.shape[1]}"
        )
    out = np.empty((V.shape[0], table.n_features))
    out[:, 0] = 1.0
    for k, (cols, exps) in enumerate(table.terms()):
        if k == 0:
            continue
        out[:, k] = np.prod(V[:, cols] ** exps, axis=1)
    return out[0] if single else out


@dataclass
class NgrcModel:
    """Fitted NG-RC estimator.

    ``weights`` has one column per target dimension; row k multiplies the
    k-th monomial feature.  ``preprocessing`` is an opaque descriptor echoed
    into serialized models.
    """

    delay: DelaySpec
    table: ExponentTable
    weights: np.ndarray
    lam_reg: float
    preprocessing: dict | None = None
    solution: RidgeSolution | None = None

    @property
    def n_targets(self) -> int:
        return self.weights.shape[1]

    def to_dict(self) -> dict:
        return {
            "schema": "ngrc-model/1",
            "tau": self.delay.tau,
            "d": self.delay.d,
            "p": self.table.p,
            "lam_reg": self.lam_reg,
            "weights": self.weights.tolist(),
            "preprocessing": self.preprocessing,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "NgrcModel":
        if doc.get("schema") != "ngrc-model/1":
            raise InvalidInputError(f"unknown model schema {doc.get('schema')!r}")
        delay = DelaySpec(int(doc["tau"]), int(doc["d"]))
        table = build_exponent_table(delay.tau, delay.d, int(doc["p"]))
        weights = np.asarray(doc["weights"], dtype=np.float64)
        return cls(delay, table, weights, float(doc["lam_reg"]),
                   doc.get("preprocessing"))

    @classmethod
    def from_json(cls, text: str) -> "NgrcModel":
        return cls.from_dict(json.loads(text))


def design_matrix(inputs, tau: int, table: ExponentTable) -> np.ndarray:
    """Delay-embed ``inputs`` and evaluate features row by row."""
    return ngrc_features(delay_vectors(inputs, tau), table)


def fit_ngrc(inputs, targets, tau: int, p: int, lam_reg: float,
             preprocessing: dict | None = None) -> NgrcModel:
    """Fit the primal NG-RC ridge regression.

    Parameters
    ----------
    inputs : (n, d) array
        Input samples; the first ``tau - 1`` are consumed by the embedding.
    targets : (n,) or (n, m) array
        Targets aligned with ``inputs``; rows before the first full window
        are dropped to match.
    tau, p : int
        Delay length and maximum monomial degree.
    lam_reg : float
        Ridge strength.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    targets = np.asarray(targets, dtype=np.float64)
    Y = targets[:, None] if targets.ndim == 1 else targets
    if Y.shape[0] != inputs.shape[0]:
        raise InvalidInputError("inputs and targets must have equal length")
    delay = DelaySpec(tau, inputs.shape[1])
    table = build_exponent_table(tau, delay.d, p)
    X = design_matrix(inputs, tau, table)
    Y_eff = Y[tau - 1 :]
    if X.shape[0] < table.n_features:
        warnings.warn(
            f"only {X.shape[0]} effective rows for {table.n_features} features;"
            " the fit is underdetermined",
            stacklevel=2,
        )
    sol = solve_ridge_primal(X, Y_eff, lam_reg)
    return NgrcModel(delay, table, sol.coefficients, float(lam_reg),
                     preprocessing, sol)


def predict_ngrc(model: NgrcModel, v) -> np.ndarray:
    """Readout for one window (returns an m-vector) or a batch of windows."""
    feats = ngrc_features(v, model.table)
    return feats @ model.weights
