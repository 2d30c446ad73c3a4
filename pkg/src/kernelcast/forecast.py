"""Closed-loop path continuation, open-loop forecasting, and valid time.

A closed-loop rollout feeds each prediction back as the next input; it is
deterministic given the fitted estimator and the seed history.  When the
estimator fails mid-rollout (Volterra norm bound, non-finite output) the
run is returned truncated with the failing step recorded instead of being
padded.

The valid prediction time converts the first threshold crossing of the
normalized instantaneous error

    e(t) = ||y_hat_t - y_t||_2 / sqrt(mean_s ||y_s - y_bar||_2^2)

into Lyapunov times: ``T_valid = k * dt * lyapunov_exponent`` where ``k``
is the 1-based step of the first crossing (the full horizon, flagged
censored, when the threshold is never exceeded).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NormBoundError


@dataclass
class ForecastRun:
    """Outcome of one forecasting task."""

    mode: str  # "path-continuation" or "open-loop"
    horizon: int
    predicted: np.ndarray
    reference: np.ndarray | None = None
    estimator: dict | None = None
    error: str | None = None
    error_step: int | None = None

    @property
    def truncated(self) -> bool:
        return self.error is not None

    def save_csv(self, path, extra_meta: dict | None = None) -> None:
        """Reference, prediction, and per-step error columns, one row a step."""
        pred = np.atleast_2d(self.predicted)
        m = pred.shape[1]
        ref = None if self.reference is None else np.atleast_2d(self.reference)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# mode={self.mode}\n")
            fh.write(f"# horizon={self.horizon}\n")
            if self.error is not None:
                fh.write(f"# error_step={self.error_step}\n")
                fh.write(f"# error={self.error}\n")
            for key, value in (extra_meta or {}).items():
                fh.write(f"# {key}={value}\n")
            cols = [f"pred{j}" for j in range(m)]
            if ref is not None:
                cols += [f"ref{j}" for j in range(m)] + ["err"]
            fh.write("step," + ",".join(cols) + "\n")
            for i in range(pred.shape[0]):
                cells = [f"{i + 1}"]
                cells += [f"{x:.17g}" for x in pred[i]]
                if ref is not None:
                    cells += [f"{x:.17g}" for x in ref[i]]
                    cells.append(f"{np.linalg.norm(pred[i] - ref[i]):.17g}")
                fh.write(",".join(cells) + "\n")


def load_forecast_csv(path) -> tuple[ForecastRun, dict]:
    """Read back a run written by :meth:`ForecastRun.save_csv`."""
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(c) for c in line.split(",")])
    if header is None:
        raise InvalidInputError(f"{path}: no forecast table found")
    data = np.asarray(rows) if rows else np.empty((0, len(header)))
    pred_cols = [i for i, c in enumerate(header) if c.startswith("pred")]
    ref_cols = [i for i, c in enumerate(header) if c.startswith("ref")]
    predicted = data[:, pred_cols]
    reference = data[:, ref_cols] if ref_cols else None
    run = ForecastRun(
        meta.get("mode", "open-loop"),
        int(meta.get("horizon", predicted.shape[0])),
        predicted,
        reference,
        None,
        meta.get("error"),
        int(meta["error_step"]) if "error_step" in meta else None,
    )
    return run, meta


def path_continue(estimator, seed_history, horizon: int,
                  reference=None) -> ForecastRun:
    """Autoregressive rollout of ``horizon`` steps.

    ``estimator`` must provide ``start(seed) -> stepper`` with
    ``stepper.step() -> next raw prediction`` (see
    :mod:`kernelcast.estimators`).
    """
    if horizon < 1:
        raise InvalidInputError("horizon must be >= 1")
    stepper = estimator.start(seed_history)
    rows = []
    error = None
    error_step = None
    # divergence shows up as overflow before the finiteness check catches it
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, horizon + 1):
            try:
                y = stepper.step()
            except NormBoundError as exc:
                error = str(exc)
                error_step = k
                break
            if not np.all(np.isfinite(y)):
                error = "non-finite prediction"
                error_step = k
                break
            rows.append(y)
    predicted = np.asarray(rows) if rows else np.empty((0, 1))
    ref = None
    if reference is not None:
        ref = np.atleast_2d(np.asarray(reference, dtype=np.float64))
        if error is not None:
            ref = ref[: predicted.shape[0]]
        elif ref.shape[0] != horizon:
            raise InvalidInputError("reference length must equal the horizon")
    return ForecastRun("path-continuation", horizon, predicted, ref,
                       estimator.describe(), error, error_step)


def open_loop(estimator, test_inputs, reference=None) -> ForecastRun:
    """One prediction per test input, no feedback."""
    inputs = np.atleast_2d(np.asarray(test_inputs, dtype=np.float64))
    error = None
    error_step = None
    try:
        predicted = estimator.open_loop(test_inputs)
    except NormBoundError as exc:
        # Volterra extension positions count from the start of the stored
        # training sequence; recover the step within the test batch.
        n_train = estimator.model.train_inputs.shape[0]
        step = (exc.position - n_train + 1) if exc.position is not None else 1
        predicted = estimator.open_loop(inputs[: step - 1]) if step > 1 \
            else np.empty((0, inputs.shape[1]))
        error = str(exc)
        error_step = step
    ref = None
    if reference is not None:
        ref = np.atleast_2d(np.asarray(reference, dtype=np.float64))
        ref = ref[: np.atleast_2d(predicted).shape[0]]
    return ForecastRun("open-loop", inputs.shape[0], np.atleast_2d(predicted),
                       ref, estimator.describe(), error, error_step)


@dataclass(frozen=True)
class ValidTime:
    """Valid prediction time in Lyapunov times."""

    value: float
    first_exceed_step: int | None  # 1-based; None when censored
    censored: bool


def valid_time(reference, predicted, lyapunov_exponent: float, dt: float,
               threshold: float = 0.2) -> ValidTime:
    """Lyapunov times until the normalized error first exceeds ``threshold``."""
    if not lyapunov_exponent > 0:
        raise InvalidInputError("lyapunov_exponent must be positive")
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    y = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    y_hat = np.atleast_2d(np.asarray(predicted, dtype=np.float64))
    if y.shape != y_hat.shape:
        raise InvalidInputError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    centered = y - y.mean(axis=0)
    rms = float(np.sqrt(np.mean(np.sum(centered**2, axis=1))))
    if rms <= 0:
        raise InvalidInputError("reference series has no variation")
    err = np.linalg.norm(y_hat - y, axis=1) / rms
    exceeded = np.nonzero(err > threshold)[0]
    if exceeded.size == 0:
        return ValidTime(y.shape[0] * dt * lyapunov_exponent, None, True)
    step = int(exceeded[0]) + 1
    return ValidTime(step * dt * lyapunov_exponent, step, False)
