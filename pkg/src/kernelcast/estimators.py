"""Unified facade over the three estimators.

Bundles a fitted model with its train-fitted input/output transform chains
so that rollout and evaluation code can treat NG-RC, polynomial kernel
ridge, and Volterra kernel ridge uniformly.  All raw-data plumbing
(transform application, delay-window bookkeeping, Volterra sequence
extension) lives here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import preprocess
from .errors import InvalidInputError
from .kernels import (
    KernelModel,
    NgrcKernelParams,
    PolyKernelParams,
    VolterraParams,
    fit_kernel_model,
    predict_kernel,
)
from .ngrc import NgrcModel, delay_vectors, fit_ngrc, predict_ngrc

ESTIMATOR_KINDS = ("ngrc", "polynomial", "volterra", "ngrc-kernel")


@dataclass
class Estimator:
    """A fitted estimator plus its preprocessing state."""

    kind: str
    hyper: dict
    model: NgrcModel | KernelModel
    input_specs: list = field(default_factory=list)
    output_specs: list = field(default_factory=list)
    input_tail: np.ndarray | None = None  # raw samples ending the fit inputs

    @property
    def tau(self) -> int:
        if self.kind == "volterra":
            return 1
        return int(self.hyper["tau"])

    @property
    def seed_length(self) -> int:
        """Samples of raw history needed to start a closed-loop rollout.

        For the Volterra model the seed must consist of the samples that
        immediately follow the sequence stored at fit time.
        """
        return 1 if self.kind == "volterra" else self.tau

    def describe(self) -> dict:
        return {"kind": self.kind, "hyper": dict(self.hyper)}

    # -- raw-space prediction paths -------------------------------------

    def _predict_windows(self, windows: np.ndarray) -> np.ndarray:
        if self.kind == "ngrc":
            out = predict_ngrc(self.model, windows)
        else:
            out = predict_kernel(self.model, windows)
        return np.atleast_2d(out)

    def open_loop(self, test_inputs) -> np.ndarray:
        """One raw prediction per raw test input, no feedback.

        Lagged estimators embed the test inputs as a continuation of the
        training inputs, reusing the stored raw tail for the first windows.
        """
        raw = np.asarray(test_inputs, dtype=np.float64)
        if raw.ndim == 1:
            raw = raw[:, None]
        transformed = preprocess.apply_pipeline(self.input_specs, raw)
        if self.kind == "volterra":
            preds = predict_kernel(self.model, transformed)
        else:
            if self.tau > 1:
                if self.input_tail is None or self.input_tail.shape[0] < self.tau - 1:
                    raise InvalidInputError(
                        "missing training context for delay embedding"
                    )
                context = preprocess.apply_pipeline(
                    self.input_specs, self.input_tail[-(self.tau - 1):]
                )
                stacked = np.vstack([context, transformed])
            else:
                stacked = transformed
            windows = delay_vectors(stacked, self.tau)
            preds = self._predict_windows(windows)
        return preprocess.invert_pipeline(self.output_specs, preds)

    def start(self, seed_history) -> "_Stepper":
        """Closed-loop stepper primed with raw seed samples."""
        seed = np.asarray(seed_history, dtype=np.float64)
        if seed.ndim == 1:
            seed = seed[:, None]
        if seed.shape[0] < self.seed_length:
            raise InvalidInputError(
                f"seed of length {seed.shape[0]} is shorter than "
                f"{self.seed_length}"
            )
        seed_t = preprocess.apply_pipeline(self.input_specs, seed)
        if self.kind == "volterra":
            ext = self.model.extension()
            for row in seed_t[:-1]:
                ext.step(row)
            return _VolterraStepper(self, ext, seed_t[-1])
        return _LaggedStepper(self, list(seed_t[-self.tau:]))

    def _finish(self, model_output: np.ndarray) -> np.ndarray:
        return preprocess.invert_pipeline(self.output_specs, model_output)


class _LaggedStepper:
    def __init__(self, est: Estimator, window: list):
        self._est = est
        self._window = window

    def step(self) -> np.ndarray:
        v = np.concatenate(self._window)
        y_model = self._est._predict_windows(v[None, :])[0]
        y_raw = self._est._finish(y_model)
        nxt = preprocess.apply_pipeline(self._est.input_specs,
                                        y_raw[None, :])[0]
        self._window.pop(0)
        self._window.append(nxt)
        return y_raw


class _VolterraStepper:
    def __init__(self, est: Estimator, ext, pending: np.ndarray):
        self._est = est
        self._ext = ext
        self._pending = pending

    def step(self) -> np.ndarray:
        col = self._ext.step(self._pending)  # may raise NormBoundError
        model = self._est.model
        y_model = col[model.washout:] @ model.alpha
        y_raw = self._est._finish(y_model)
        self._pending = preprocess.apply_pipeline(self._est.input_specs,
                                                  y_raw[None, :])[0]
        return y_raw


def fit_estimator(kind: str, hyper: dict, inputs, targets, *,
                  input_kinds=None, output_kinds=(), headroom: float = 1.0,
                  scale_constant: float = 1000.0,
                  share_output_pipeline: bool = False) -> Estimator:
    """Fit one estimator with train-fitted preprocessing.

    Parameters
    ----------
    kind : str
        ``"ngrc"``, ``"polynomial"``, ``"volterra"``, or ``"ngrc-kernel"``
        (the dot-product dual of NG-RC, mostly for equivalence checks).
    hyper : dict
        ``tau, p, lam_reg`` for the lagged estimators (plus optional ``c``
        for the polynomial kernel); ``lam, theta, lam_reg, washout`` and
        optional ``M`` for Volterra.
    inputs, targets : arrays
        Raw aligned samples; targets may be the shifted inputs for
        path-continuation tasks.
    input_kinds, output_kinds
        Transform chains; ``None`` selects the estimator's convention.
    headroom : float
        Target training norm for the Volterra max-norm rescale.
    share_output_pipeline : bool
        Reuse the fitted input transforms on the target side.  This is the
        path-continuation convention: inputs and targets are one series, so
        the regression runs entirely in the normalized space and closed-loop
        feedback needs no round trip.
    """
    if kind not in ESTIMATOR_KINDS:
        raise InvalidInputError(f"unknown estimator kind {kind!r}")
    X_raw = np.asarray(inputs, dtype=np.float64)
    if X_raw.ndim == 1:
        X_raw = X_raw[:, None]
    Y_raw = np.asarray(targets, dtype=np.float64)
    if Y_raw.ndim == 1:
        Y_raw = Y_raw[:, None]

    if input_kinds is None:
        # the dot-product dual must see exactly the NG-RC inputs
        input_kinds = preprocess.estimator_pipeline(
            "ngrc" if kind == "ngrc-kernel" else kind
        )
    input_specs = preprocess.fit_pipeline(input_kinds, X_raw,
                                          target_norm=headroom,
                                          constant=scale_constant)
    if share_output_pipeline:
        if output_kinds:
            raise InvalidInputError(
                "output_kinds and share_output_pipeline are exclusive"
            )
        if Y_raw.shape[1] != X_raw.shape[1]:
            raise InvalidInputError(
                "shared pipelines need matching input/output dimensions"
            )
        output_specs = input_specs
    else:
        output_specs = preprocess.fit_pipeline(output_kinds, Y_raw,
                                               constant=scale_constant)
    X = preprocess.apply_pipeline(input_specs, X_raw)
    Y = preprocess.apply_pipeline(output_specs, Y_raw)

    pp_doc = {"inputs": preprocess.pipeline_to_dicts(input_specs),
              "outputs": preprocess.pipeline_to_dicts(output_specs)}

    if kind == "ngrc":
        model = fit_ngrc(X, Y, int(hyper["tau"]), int(hyper["p"]),
                         float(hyper["lam_reg"]), preprocessing=pp_doc)
    elif kind == "polynomial":
        kernel = PolyKernelParams(int(hyper["p"]), int(hyper["tau"]),
                                  float(hyper.get("c", 1.0)))
        model = fit_kernel_model(X, Y, kernel, float(hyper["lam_reg"]),
                                 washout=int(hyper.get("washout", 0)),
                                 preprocessing=pp_doc)
    elif kind == "ngrc-kernel":
        kernel = NgrcKernelParams(int(hyper["p"]), int(hyper["tau"]),
                                  X.shape[1])
        model = fit_kernel_model(X, Y, kernel, float(hyper["lam_reg"]),
                                 washout=int(hyper.get("washout", 0)),
                                 preprocessing=pp_doc)
    else:
        kernel = VolterraParams(float(hyper["lam"]), float(hyper["theta"]),
                                float(hyper.get("M", 1.0)))
        model = fit_kernel_model(X, Y, kernel, float(hyper["lam_reg"]),
                                 washout=int(hyper.get("washout", 0)),
                                 preprocessing=pp_doc)

    tail_len = max(int(hyper.get("tau", 1)), 1)
    return Estimator(kind, dict(hyper), model, input_specs, output_specs,
                     input_tail=X_raw[-tail_len:].copy())


def estimator_to_dict(est: Estimator) -> dict:
    """Serializable document for a fitted estimator (versioned schema)."""
    return {
        "schema": "estimator/1",
        "kind": est.kind,
        "hyper": dict(est.hyper),
        "model": est.model.to_dict(),
        "input_specs": preprocess.pipeline_to_dicts(est.input_specs),
        "shared_pipeline": est.output_specs is est.input_specs,
        "output_specs": None if est.output_specs is est.input_specs
        else preprocess.pipeline_to_dicts(est.output_specs),
        "input_tail": None if est.input_tail is None
        else est.input_tail.tolist(),
    }


def estimator_from_dict(doc: dict) -> Estimator:
    if doc.get("schema") != "estimator/1":
        raise InvalidInputError(f"unknown estimator schema {doc.get('schema')!r}")
    model_doc = doc["model"]
    if model_doc.get("schema") == "ngrc-model/1":
        model = NgrcModel.from_dict(model_doc)
    else:
        model = KernelModel.from_dict(model_doc)
    input_specs = preprocess.pipeline_from_dicts(doc["input_specs"])
    if doc.get("shared_pipeline"):
        output_specs = input_specs
    else:
        output_specs = preprocess.pipeline_from_dicts(doc.get("output_specs") or [])
    tail = doc.get("input_tail")
    return Estimator(
        doc["kind"], dict(doc["hyper"]), model, input_specs, output_specs,
        input_tail=None if tail is None else np.asarray(tail, dtype=np.float64),
    )


def fit_path_estimator(kind: str, hyper: dict, series_values, **kw) -> tuple[
        Estimator, np.ndarray]:
    """Fit on one-step-ahead pairs of a series; return (estimator, seed).

    The seed is the raw history a closed-loop rollout starting right after
    the series needs: the last ``tau`` samples for lagged estimators, the
    final sample (the one input the fitted Volterra sequence has not seen)
    for Volterra.
    """
    V = np.asarray(series_values, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] < 3:
        raise InvalidInputError("series too short to form training pairs")
    est = fit_estimator(kind, hyper, V[:-1], V[1:],
                        share_output_pipeline=True, **kw)
    seed = V[-est.seed_length:]
    return est, seed
