"""Polynomial, NG-RC dot-product, and Volterra kernels with dual ridge fitting.

The polynomial kernel ``(c + u'v)^p`` acts on flattened delay windows and
spans the same monomials as the NG-RC feature map, up to multinomial
weights.  The NG-RC kernel is the plain dot product of NG-RC feature
vectors, so kernel ridge regression with it reproduces the primal NG-RC
solution exactly.

The Volterra kernel acts on whole left-zero-padded input sequences and
encodes every lag and every monomial degree with geometrically decaying
weights.  Gram entries follow the recursion

    K[i, j] = 1 + lam^2 * K[i-1, j-1] / (1 - theta^2 <z_i, z_j>)

with border values ``1 / (1 - theta^2)``, and extend column by column when
new samples arrive.  The equivalent series form (used as an independent
oracle) is

    K = 1 + sum_{t>=1} lam^(2t) * prod_{s<t} 1 / (1 - theta^2 <z_{-s}, z'_{-s}>).

Parameters must satisfy ``theta^2 M^2 < 1`` and ``0 < lam < sqrt(1 - theta^2 M^2)``
where ``M`` bounds the Euclidean norm of every sample.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NormBoundError
from .linsolve import RidgeSolution, solve_ridge_gram
from .ngrc import ExponentTable, build_exponent_table, delay_vectors, ngrc_features

# Relative slack when checking sample norms against M; guards float fuzz only.
_NORM_SLACK = 1e-12


@dataclass(frozen=True)
class PolyKernelParams:
    """Degree ``p``, offset ``c`` and lag count ``tau`` of the polynomial kernel."""

    p: int
    tau: int
    c: float = 1.0

    def __post_init__(self):
        if self.p < 1 or self.tau < 1:
            raise InvalidInputError("p and tau must be >= 1")
        if not self.c > 0:
            raise InvalidInputError("offset c must be positive")

    def describe(self) -> dict:
        return {"kind": "polynomial", "p": self.p, "tau": self.tau, "c": self.c}


@dataclass(frozen=True)
class NgrcKernelParams:
    """Dot-product kernel of the NG-RC feature map for (tau, d, p)."""

    p: int
    tau: int
    d: int

    def __post_init__(self):
        if self.p < 1 or self.tau < 1 or self.d < 1:
            raise InvalidInputError("p, tau and d must be >= 1")

    def table(self) -> ExponentTable:
        return build_exponent_table(self.tau, self.d, self.p)

    def describe(self) -> dict:
        return {"kind": "ngrc", "p": self.p, "tau": self.tau, "d": self.d}


@dataclass(frozen=True)
class VolterraParams:
    """Volterra kernel parameters.

    ``lam`` controls the decay across lags, ``theta`` the weight of higher
    monomial degrees, and ``M`` the admissible input norm bound.
    """

    lam: float
    theta: float
    M: float = 1.0

    def __post_init__(self):
        if not self.M > 0:
            raise InvalidInputError("M must be positive")
        if not (self.theta > 0 and self.theta**2 * self.M**2 < 1.0):
            raise InvalidInputError("theta must satisfy theta^2 M^2 < 1")
        if not (0.0 < self.lam < math.sqrt(1.0 - self.theta**2 * self.M**2)):
            raise InvalidInputError(
                "lam must satisfy 0 < lam < sqrt(1 - theta^2 M^2)"
            )

    @property
    def border(self) -> float:
        """Border initialization 1 / (1 - theta^2) of the Gram recursion."""
        return 1.0 / (1.0 - self.theta**2)

    @property
    def denominator_floor(self) -> float:
        return 1.0 - self.theta**2 * self.M**2

    def describe(self) -> dict:
        return {"kind": "volterra", "lam": self.lam, "theta": self.theta,
                "M": self.M}


@dataclass
class GramMatrix:
    """Kernel evaluation table with construction provenance."""

    values: np.ndarray
    kind: str  # "square-train" or "rectangular-extension"
    kernel: dict

    def to_csv(self, path) -> None:
        """Dump the table for inspection; one row per line, comma separated."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# kind={self.kind}\n")
            fh.write(f"# kernel={json.dumps(self.kernel, sort_keys=True)}\n")
            for row in self.values:
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def poly_kernel(u, v, params: PolyKernelParams) -> float:
    """Evaluate ``(c + u'v)^p`` for two delay windows."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise InvalidInputError("u and v must have equal shapes")
    return float((params.c + u @ v) ** params.p)


def poly_gram(U, V, params: PolyKernelParams) -> np.ndarray:
    """Pairwise polynomial kernel between the rows of U and V."""
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    return (params.c + U @ V.T) ** params.p


def ngrc_kernel(u, v, table: ExponentTable) -> float:
    """Dot product of NG-RC feature vectors."""
    return float(ngrc_features(u, table) @ ngrc_features(v, table))


# Below this feature-matrix size the Gram is accumulated in extended
# precision, which keeps its numerical null space clean enough for the
# dual solver's pseudo-inverse cutoff.
_PRECISE_GRAM_ELEMENTS = 1 << 16


def ngrc_gram(U, V, table: ExponentTable) -> np.ndarray:
    """Pairwise NG-RC kernel between the rows of U and V."""
    FU = ngrc_features(np.atleast_2d(U), table)
    FV = ngrc_features(np.atleast_2d(V), table)
    if FU.size <= _PRECISE_GRAM_ELEMENTS and FV.size <= _PRECISE_GRAM_ELEMENTS:
        return (FU.astype(np.longdouble) @ FV.astype(np.longdouble).T).astype(
            np.float64
        )
    return FU @ FV.T


def _check_sample_norms(Z: np.ndarray, params: VolterraParams,
                        offset: int = 0) -> None:
    norms = np.linalg.norm(Z, axis=1)
    bad = np.nonzero(norms > params.M * (1.0 + _NORM_SLACK))[0]
    if bad.size:
        i = int(bad[0])
        raise NormBoundError(
            f"sample {offset + i} has norm {norms[i]:.6g} > M = {params.M:.6g}",
            position=offset + i,
        )


def _as_samples(inputs) -> np.ndarray:
    Z = np.asarray(inputs, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.ndim != 2:
        raise InvalidInputError("inputs must be a (n, d) sample matrix")
    if not np.all(np.isfinite(Z)):
        raise InvalidInputError("inputs contain non-finite entries")
    return Z


def volterra_gram(inputs, params: VolterraParams) -> GramMatrix:
    """Square Volterra Gram matrix over one input sequence.

    Row sweep of the diagonal recursion: row i is produced from row i-1
    shifted by one column, with the border column/row pinned at
    ``1 / (1 - theta^2)``.
    """
    Z = _as_samples(inputs)
    _check_sample_norms(Z, params)
    n = Z.shape[0]
    lam2 = params.lam**2
    denom = 1.0 - params.theta**2 * (Z @ Z.T)
    # Cauchy-Schwarz keeps denominators >= 1 - theta^2 M^2 > 0; a violation
    # means the norm check above was bypassed.
    assert denom.size == 0 or float(denom.min()) >= params.denominator_floor * (
        1.0 - 1e-9
    ), "Volterra denominator fell below its floor"
    G = np.empty((n + 1, n + 1))
    G[0, :] = params.border
    G[:, 0] = params.border
    for i in range(1, n + 1):
        G[i, 1:] = 1.0 + lam2 * G[i - 1, :n] / denom[i - 1]
    return GramMatrix(G[1:, 1:], "square-train", params.describe())


class VolterraExtension:
    """Incremental rectangular extension of a Volterra Gram matrix.

    Holds the training samples and the most recent full column (border
    entry included); each ``step`` appends one sample that continues the
    sequence and returns the kernel values against every training index.
    Single-writer: not safe for concurrent stepping.
    """

    def __init__(self, Z_train: np.ndarray, params: VolterraParams,
                 last_col_with_border: np.ndarray):
        self._Z = Z_train
        self._params = params
        self._col = np.asarray(last_col_with_border, dtype=np.float64).copy()
        self._steps = 0
        if self._col.shape != (Z_train.shape[0] + 1,):
            raise InvalidInputError("last column must include the border entry")

    @property
    def steps_taken(self) -> int:
        return self._steps

    def step(self, z_new) -> np.ndarray:
        """Append one sample; return kernel values against training samples."""
        z = np.asarray(z_new, dtype=np.float64).reshape(-1)
        if z.shape[0] != self._Z.shape[1]:
            raise InvalidInputError("appended sample has wrong dimension")
        if not np.all(np.isfinite(z)):
            raise InvalidInputError("appended sample is non-finite")
        p = self._params
        _check_sample_norms(z[None, :], p, offset=self._Z.shape[0] + self._steps)
        denom = 1.0 - p.theta**2 * (self._Z @ z)
        new = np.empty_like(self._col)
        new[0] = p.border
        new[1:] = 1.0 + p.lam**2 * self._col[:-1] / denom
        self._col = new
        self._steps += 1
        return new[1:]


def volterra_gram_extend(train_inputs, test_inputs,
                         params: VolterraParams) -> GramMatrix:
    """Rectangular (n_train x n_test) Gram block for a continued sequence.

    Column j holds the kernel between every training suffix and the suffix
    ending at test sample j; the test samples are treated as continuing the
    training sequence in order.
    """
    Z = _as_samples(train_inputs)
    T = _as_samples(test_inputs)
    if T.shape[1] != Z.shape[1]:
        raise InvalidInputError("train and test sample dimensions differ")
    square = volterra_gram(Z, params)
    last = np.concatenate(([params.border], square.values[:, -1])) \
        if Z.shape[0] else np.array([params.border])
    ext = VolterraExtension(Z, params, last)
    cols = np.empty((Z.shape[0], T.shape[0]))
    for j in range(T.shape[0]):
        cols[:, j] = ext.step(T[j])
    return GramMatrix(cols, "rectangular-extension", params.describe())


def volterra_kernel_truncated(seq_a, seq_b, params: VolterraParams,
                              tau_max: int) -> tuple[float, float]:
    """Truncated series evaluation of the Volterra kernel, with tail bound.

    Sequences are aligned at their most recent sample and padded with zeros
    on the left, so inner products beyond either length vanish and the
    corresponding factors equal one.

    Returns
    -------
    (value, tail_bound)
        The series truncated after lag ``tau_max`` and the analytic bound
        ``lam^(2(tau_max+1)) / ((1-theta^2 M^2)^(tau_max+1) (1 - lam^2/(1-theta^2 M^2)))``
        on everything that was dropped.
    """
    A = _as_samples(seq_a)
    B = _as_samples(seq_b)
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError("sequences must share the sample dimension")
    _check_sample_norms(A, params)
    _check_sample_norms(B, params)
    if tau_max < max(A.shape[0], B.shape[0]):
        raise InvalidInputError("tau_max must cover the padded sequence length")
    lam2 = params.lam**2
    theta2 = params.theta**2
    # factors[t] covers lag t (0 = most recent); 1.0 beyond either sequence.
    L = min(A.shape[0], B.shape[0])
    prods = np.einsum("ij,ij->i", A[::-1][:L], B[::-1][:L])
    factors = np.ones(tau_max)
    factors[:L] = 1.0 / (1.0 - theta2 * prods)
    value = 1.0
    weight = 1.0
    for t in range(tau_max):
        weight *= lam2 * factors[t]
        value += weight
    rho = lam2 / params.denominator_floor
    tail = rho ** (tau_max + 1) / (1.0 - rho)
    return value, tail


@dataclass
class KernelModel:
    """Fitted dual estimator for any of the three kernels.

    ``train_inputs`` is the raw input sequence as seen at fit time; for the
    lagged kernels the embedded windows are cached in ``train_windows``.
    ``alpha`` has one row per retained (washed) training index.
    """

    kernel: PolyKernelParams | NgrcKernelParams | VolterraParams
    train_inputs: np.ndarray
    alpha: np.ndarray
    washout: int
    lam_reg: float
    preprocessing: dict | None = None
    solution: RidgeSolution | None = None
    train_windows: np.ndarray | None = field(default=None, repr=False)
    _last_col: np.ndarray | None = field(default=None, repr=False)
    _table: ExponentTable | None = field(default=None, repr=False)

    @property
    def n_targets(self) -> int:
        return self.alpha.shape[1]

    @property
    def is_volterra(self) -> bool:
        return isinstance(self.kernel, VolterraParams)

    def table(self) -> ExponentTable:
        if self._table is None:
            self._table = self.kernel.table()
        return self._table

    def extension(self) -> VolterraExtension:
        """Fresh single-writer extension starting after the training samples."""
        if not self.is_volterra:
            raise InvalidInputError("extensions exist only for Volterra models")
        return VolterraExtension(self.train_inputs, self.kernel, self._last_col)

    def to_dict(self) -> dict:
        doc = {
            "schema": "kernel-model/1",
            "kernel": self.kernel.describe(),
            "train_inputs": self.train_inputs.tolist(),
            "alpha": self.alpha.tolist(),
            "washout": self.washout,
            "lam_reg": self.lam_reg,
            "preprocessing": self.preprocessing,
        }
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "KernelModel":
        if doc.get("schema") != "kernel-model/1":
            raise InvalidInputError(f"unknown model schema {doc.get('schema')!r}")
        kdoc = dict(doc["kernel"])
        kind = kdoc.pop("kind")
        if kind == "polynomial":
            kernel = PolyKernelParams(**kdoc)
        elif kind == "ngrc":
            kernel = NgrcKernelParams(**kdoc)
        elif kind == "volterra":
            kernel = VolterraParams(**kdoc)
        else:
            raise InvalidInputError(f"unknown kernel kind {kind!r}")
        model = fit_like_structure(
            kernel,
            np.asarray(doc["train_inputs"], dtype=np.float64),
            np.asarray(doc["alpha"], dtype=np.float64),
            int(doc["washout"]),
            float(doc["lam_reg"]),
            doc.get("preprocessing"),
        )
        return model

    @classmethod
    def from_json(cls, text: str) -> "KernelModel":
        return cls.from_dict(json.loads(text))


def fit_like_structure(kernel, train_inputs, alpha, washout, lam_reg,
                       preprocessing) -> KernelModel:
    """Rebuild the cached structures of a model from its serialized fields."""
    model = KernelModel(kernel, train_inputs, alpha, washout, lam_reg,
                        preprocessing)
    if isinstance(kernel, VolterraParams):
        gram = volterra_gram(train_inputs, kernel)
        model._last_col = np.concatenate(([kernel.border], gram.values[:, -1]))
    else:
        model.train_windows = delay_vectors(train_inputs, kernel.tau)[washout:]
    return model


def _lagged_gram(kernel, windows: np.ndarray) -> np.ndarray:
    if isinstance(kernel, PolyKernelParams):
        return poly_gram(windows, windows, kernel)
    return ngrc_gram(windows, windows, kernel.table())


def fit_kernel_model(inputs, targets, kernel, lam_reg: float,
                     washout: int = 0,
                     preprocessing: dict | None = None) -> KernelModel:
    """Fit dual coefficients on the washout-trimmed Gram matrix.

    For the lagged kernels (polynomial, NG-RC) the embedding itself consumes
    ``tau - 1`` leading samples and ``washout`` counts additional embedded
    rows to drop (normally 0).  For the Volterra kernel the Gram covers the
    whole sequence and ``washout`` rows/columns are trimmed from the solve
    to flush the zero-padding transient; the trimmed sequence is still used
    when predicting.
    """
    Z = _as_samples(inputs)
    targets = np.asarray(targets, dtype=np.float64)
    Y = targets[:, None] if targets.ndim == 1 else targets
    if Y.shape[0] != Z.shape[0]:
        raise InvalidInputError("inputs and targets must have equal length")
    if washout < 0:
        raise InvalidInputError("washout must be non-negative")

    if isinstance(kernel, VolterraParams):
        if washout >= Z.shape[0]:
            raise InvalidInputError("washout leaves no training rows")
        gram = volterra_gram(Z, kernel)
        K_eff = gram.values[washout:, washout:]
        Y_eff = Y[washout:]
        sol = solve_ridge_gram(K_eff, Y_eff, lam_reg)
        model = KernelModel(kernel, Z, sol.coefficients, washout,
                            float(lam_reg), preprocessing, sol)
        model._last_col = np.concatenate(([kernel.border], gram.values[:, -1]))
        return model

    if isinstance(kernel, NgrcKernelParams) and kernel.d != Z.shape[1]:
        raise InvalidInputError("kernel d does not match the input dimension")
    windows = delay_vectors(Z, kernel.tau)
    Y_emb = Y[kernel.tau - 1 :]
    if washout >= windows.shape[0]:
        raise InvalidInputError("washout leaves no training rows")
    windows = windows[washout:]
    Y_eff = Y_emb[washout:]
    K = _lagged_gram(kernel, windows)
    sol = solve_ridge_gram(K, Y_eff, lam_reg)
    model = KernelModel(kernel, Z, sol.coefficients, washout,
                        float(lam_reg), preprocessing, sol)
    model.train_windows = windows
    return model


def predict_kernel(model: KernelModel, new_inputs) -> np.ndarray:
    """Out-of-sample outputs ``sum_i alpha_i K(new, z_i)``.

    For lagged kernels ``new_inputs`` is one delay window or a batch of
    windows.  For Volterra models it is the batch of raw samples that
    continues the training sequence, consumed in order through a fresh
    rectangular extension.
    """
    if model.is_volterra:
        T = _as_samples(new_inputs)
        ext = model.extension()
        out = np.empty((T.shape[0], model.n_targets))
        for j in range(T.shape[0]):
            col = ext.step(T[j])
            out[j] = col[model.washout :] @ model.alpha
        return out
    v = np.asarray(new_inputs, dtype=np.float64)
    single = v.ndim == 1
    V = v[None, :] if single else v
    if isinstance(model.kernel, PolyKernelParams):
        K = poly_gram(V, model.train_windows, model.kernel)
    else:
        K = ngrc_gram(V, model.train_windows, model.table())
    out = K @ model.alpha
    return out[0] if single else out
