"""Train-fitted normalization transforms and their inverses.

All statistics are computed from training rows only; applying a fitted
transform to test data reuses those statistics, so no information leaks
from the test span.  Kinds:

* ``identity``            no-op,
* ``minmax01``            per-dimension (x - min) / (max - min),
* ``standardize``         per-dimension (x - mean) / std,
* ``demean``              per-dimension x - mean,
* ``max-norm-scale``      global rescale so the largest training row norm
                          equals ``target_norm``,
* ``constant-scale``      multiply by a fixed constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

KINDS = ("identity", "minmax01", "standardize", "demean", "max-norm-scale",
         "constant-scale")

_FLOOR = 1e-12


@dataclass
class TransformSpec:
    """One fitted transform; ``degenerate_dims`` flags floored statistics."""

    kind: str
    shift: np.ndarray | None = None   # subtracted before scaling
    scale: np.ndarray | float = 1.0   # divisor (per-dim array or global float)
    degenerate_dims: tuple = ()
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "shift": None if self.shift is None else self.shift.tolist(),
            "scale": self.scale if np.isscalar(self.scale)
            else np.asarray(self.scale).tolist(),
            "degenerate_dims": list(self.degenerate_dims),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TransformSpec":
        shift = doc.get("shift")
        scale = doc.get("scale", 1.0)
        return cls(
            doc["kind"],
            None if shift is None else np.asarray(shift, dtype=np.float64),
            float(scale) if np.isscalar(scale)
            else np.asarray(scale, dtype=np.float64),
            tuple(doc.get("degenerate_dims", ())),
            dict(doc.get("meta", {})),
        )


def _values(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2 or v.shape[0] < 1:
        raise InvalidInputError("expected a non-empty (n, d) value matrix")
    return v


def fit(kind: str, train, *, constant: float = 1000.0,
        target_norm: float = 1.0) -> TransformSpec:
    """Fit one transform on training rows only."""
    V = _values(train)
    if kind == "identity":
        return TransformSpec("identity")
    if kind == "minmax01":
        lo = V.min(axis=0)
        hi = V.max(axis=0)
        rng = hi - lo
        degenerate = tuple(int(j) for j in np.nonzero(rng < _FLOOR)[0])
        rng = np.maximum(rng, _FLOOR)
        return TransformSpec("minmax01", shift=lo, scale=rng,
                             degenerate_dims=degenerate,
                             meta={"min": lo.tolist(), "max": hi.tolist()})
    if kind == "standardize":
        mean = V.mean(axis=0)
        std = V.std(axis=0)
        degenerate = tuple(int(j) for j in np.nonzero(std < _FLOOR)[0])
        std = np.maximum(std, _FLOOR)
        return TransformSpec("standardize", shift=mean, scale=std,
                             degenerate_dims=degenerate)
    if kind == "demean":
        return TransformSpec("demean", shift=V.mean(axis=0))
    if kind == "max-norm-scale":
        max_norm = float(np.max(np.linalg.norm(V, axis=1)))
        degenerate = (0,) if max_norm < _FLOOR else ()
        divisor = max(max_norm, _FLOOR) / float(target_norm)
        return TransformSpec("max-norm-scale", scale=divisor,
                             degenerate_dims=degenerate,
                             meta={"max_norm": max_norm,
                                   "target_norm": float(target_norm)})
    if kind == "constant-scale":
        if not constant != 0:
            raise InvalidInputError("constant must be nonzero")
        return TransformSpec("constant-scale", scale=1.0 / float(constant),
                             meta={"constant": float(constant)})
    raise InvalidInputError(f"unknown transform kind {kind!r}")


def apply(spec: TransformSpec, x) -> np.ndarray:
    """Apply a fitted transform (shape preserved; 1-d in, 1-d out)."""
    arr = np.asarray(x, dtype=np.float64)
    out = arr.copy()
    if spec.shift is not None:
        out = out - spec.shift
    out = out / spec.scale
    return out


def invert(spec: TransformSpec, x) -> np.ndarray:
    """Inverse transform; ``invert(spec, apply(spec, x)) == x`` to 1e-12."""
    arr = np.asarray(x, dtype=np.float64)
    out = arr * spec.scale
    if spec.shift is not None:
        out = out + spec.shift
    return out


def fit_pipeline(kinds, train, *, constant: float = 1000.0,
                 target_norm: float = 1.0) -> list[TransformSpec]:
    """Fit a transform chain; each stage sees the previous stage's output."""
    specs: list[TransformSpec] = []
    current = _values(train)
    for kind in kinds:
        spec = fit(kind, current, constant=constant, target_norm=target_norm)
        specs.append(spec)
        current = apply(spec, current)
    return specs


def apply_pipeline(specs, x) -> np.ndarray:
    out = np.asarray(x, dtype=np.float64)
    for spec in specs:
        out = apply(spec, out)
    return out


def invert_pipeline(specs, x) -> np.ndarray:
    out = np.asarray(x, dtype=np.float64)
    for spec in reversed(specs):
        out = invert(spec, out)
    return out


def estimator_pipeline(estimator_kind: str, *, headroom: float = 1.0) -> list[str]:
    """Input transform chain conventionally used by each estimator.

    NG-RC runs on raw data; the polynomial kernel rescales inputs into
    [0, 1] per dimension; the Volterra kernel demeans and then rescales so
    the largest training row norm equals ``headroom`` (1.0 by default,
    0.95 leaves room for test excursions before the norm bound trips).
    """
    if estimator_kind == "ngrc":
        return []
    if estimator_kind in ("polynomial", "poly"):
        return ["minmax01"]
    if estimator_kind == "volterra":
        return ["demean", "max-norm-scale"]
    raise InvalidInputError(f"unknown estimator kind {estimator_kind!r}")


def bekk_output_pipeline() -> list[str]:
    """Output transform chain for covariance targets: x1000, then standardize."""
    return ["constant-scale", "standardize"]


def pipeline_to_dicts(specs) -> list[dict]:
    return [s.to_dict() for s in specs]


def pipeline_from_dicts(docs) -> list[TransformSpec]:
    return [TransformSpec.from_dict(d) for d in docs]
