"""File-based experiment driver.

Subcommands cover the full loop: ``simulate`` writes train/test CSVs,
``fit`` trains one estimator, ``cv`` grid-searches hyperparameters,
``forecast`` rolls the task (closed or open loop), ``eval`` scores it, and
``bench`` times the training/prediction primitives.  Every stage reads its
inputs from the experiment directory written by earlier stages, carries the
configuration hash into all outputs, and rejects stale artifacts whose hash
disagrees.

Exit codes: 0 success, 2 configuration or dependency error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .cv import Grid, expanding_folds, grid_search, overlapping_folds
from .datasets import (
    BekkParams,
    TimeSeries,
    load_csv,
    save_csv,
    simulate_bekk,
    simulate_lorenz,
    simulate_mackey_glass,
    split_train_test,
)
from .errors import ConfigError, DependencyError, InvalidInputError, KernelcastError
from .estimators import (
    estimator_from_dict,
    estimator_to_dict,
    fit_estimator,
    fit_path_estimator,
)
from .forecast import load_forecast_csv, open_loop, path_continue, valid_time
from .kernels import VolterraParams, volterra_gram
from .metrics import (
    MetricReport,
    mae,
    mape,
    mdae,
    nmse_detailed,
    psde_detailed,
    subsample_rows,
    w1_1d,
    w1_nd,
    welch_psd,
)
from .ngrc import fit_ngrc, predict_ngrc
from .preprocess import bekk_output_pipeline
from .presets import PRESETS

SCHEMA = "kernelcast-experiment/1"


# ---------------------------------------------------------------------------
# configuration plumbing


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _get(config: dict, path: str, required: bool = True, default=None):
    node = config
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError("missing required field", field=path)
            return default
        node = node[part]
    return node


def load_config(args) -> dict:
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r}; available: "
                + ", ".join(sorted(PRESETS)),
                field="preset",
            )
        config = json.loads(json.dumps(PRESETS[args.preset]))
    elif getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                config = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", field="config")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", field="config")
    else:
        raise ConfigError("either --config or --preset is required")
    if config.get("schema") != SCHEMA:
        raise ConfigError(f"expected schema {SCHEMA!r}", field="schema")
    if getattr(args, "seed", None) is not None:
        config["seed"] = int(args.seed)
    return config


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: str, what: str) -> dict:
    if not os.path.exists(path):
        raise DependencyError(f"missing upstream artifact: {path}", field=what)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_manifest(out_dir: str, stage: str, config: dict,
                    files: dict, extra: dict | None = None) -> None:
    doc = {
        "stage": stage,
        "schema": SCHEMA,
        "version": __version__,
        "config_sha256": config_hash(config),
        "seed": config.get("seed"),
        "files": files,
    }
    doc.update(extra or {})
    _write_json(os.path.join(out_dir, f"{stage}_manifest.json"), doc)


def _check_manifest(out_dir: str, stage: str, config: dict) -> dict:
    doc = _read_json(os.path.join(out_dir, f"{stage}_manifest.json"), stage)
    expected = config_hash(config)
    if doc.get("config_sha256") != expected:
        raise DependencyError(
            f"{stage} artifacts were produced from a different configuration "
            f"({doc.get('config_sha256')} != {expected})"
        )
    return doc


# ---------------------------------------------------------------------------
# dataset handling


def _build_bekk_params(d_cfg: dict, seed: int) -> BekkParams:
    d = int(_get(d_cfg, "d"))
    C = np.asarray(_get(d_cfg, "C"), dtype=np.float64)
    a = d_cfg.get("a", 0.3)
    b = d_cfg.get("b", 0.9)
    a = np.full(d, float(a)) if np.isscalar(a) else np.asarray(a, dtype=np.float64)
    b = np.full(d, float(b)) if np.isscalar(b) else np.asarray(b, dtype=np.float64)
    try:
        return BekkParams(C, a, b, seed=seed)
    except KernelcastError as exc:
        raise ConfigError(str(exc), field="dataset")


def generate_dataset(config: dict) -> dict:
    """Simulate or load the configured dataset, already split and paired."""
    d_cfg = _get(config, "dataset")
    kind = _get(config, "dataset.kind")
    seed = int(config.get("seed", 0))
    n_train = int(_get(config, "dataset.n_train"))
    if n_train < 1:
        raise ConfigError("n_train must be >= 1", field="dataset.n_train")

    if kind == "lorenz":
        n_points = int(d_cfg.get("n_points", 15001))
        if n_points < 2:
            raise ConfigError("n_points must be >= 2", field="dataset.n_points")
        series = simulate_lorenz(
            tuple(d_cfg.get("initial", (0.0, 1.0, 1.05))),
            float(d_cfg.get("dt", 0.005)), n_points,
        )
        train, test = split_train_test(series, n_train)
        return {"task": "path-continuation", "train": train, "test": test}
    if kind == "mackey-glass":
        series = simulate_mackey_glass(
            float(d_cfg.get("dt_fine", 0.02)), float(d_cfg.get("delay", 17.0)),
            int(d_cfg.get("n_fine", 382500)), int(d_cfg.get("splice", 50)),
        )
        train, test = split_train_test(series, n_train)
        return {"task": "path-continuation", "train": train, "test": test}
    if kind == "bekk":
        n_points = int(d_cfg.get("n_points", 3761))
        if n_points < 3:
            raise ConfigError("n_points must be >= 3", field="dataset.n_points")
        params = _build_bekk_params(d_cfg, seed)
        innovations, _returns, covariances = simulate_bekk(params, n_points)
        # Pair input z_t with next-step vech covariance.
        inputs = TimeSeries(innovations.values[:-1], 1.0, "bekk-inputs")
        outputs = TimeSeries(covariances.values[1:], 1.0, "bekk-outputs")
        if not n_train < inputs.n:
            raise ConfigError("n_train leaves no test pairs",
                              field="dataset.n_train")
        tr_in, te_in = split_train_test(inputs, n_train)
        tr_out, te_out = split_train_test(outputs, n_train)
        return {"task": "open-loop", "train_inputs": tr_in,
                "train_outputs": tr_out, "test_inputs": te_in,
                "test_outputs": te_out}
    if kind == "csv":
        mode = _get(config, "task.mode")
        if mode == "path-continuation":
            series, _ = load_csv(_get(config, "dataset.path"))
            train, test = split_train_test(series, n_train)
            return {"task": mode, "train": train, "test": test}
        inputs, _ = load_csv(_get(config, "dataset.inputs_path"))
        outputs, _ = load_csv(_get(config, "dataset.outputs_path"))
        if inputs.n != outputs.n:
            raise ConfigError("input/output CSV lengths differ",
                              field="dataset")
        tr_in, te_in = split_train_test(inputs, n_train)
        tr_out, te_out = split_train_test(outputs, n_train)
        return {"task": "open-loop", "train_inputs": tr_in,
                "train_outputs": tr_out, "test_inputs": te_in,
                "test_outputs": te_out}
    raise ConfigError(f"unknown dataset kind {kind!r}", field="dataset.kind")


_PATH_FILES = ("train", "test")
_OPEN_FILES = ("train_inputs", "train_outputs", "test_inputs", "test_outputs")


def cmd_simulate(config: dict, out_dir: str) -> int:
    data = generate_dataset(config)
    os.makedirs(out_dir, exist_ok=True)
    meta = {"config_sha256": config_hash(config),
            "seed": config.get("seed"),
            "generator": "philox-boxmuller"}
    names = _PATH_FILES if data["task"] == "path-continuation" else _OPEN_FILES
    files = {}
    for name in names:
        path = os.path.join(out_dir, f"{name}.csv")
        save_csv(data[name], path, extra_meta=meta)
        files[name] = f"{name}.csv"
    _write_manifest(out_dir, "simulate", config, files,
                    {"task": data["task"],
                     "sizes": {name: data[name].n for name in names}})
    print(f"simulate: wrote {', '.join(files.values())} to {out_dir}")
    return 0


def load_dataset_artifacts(config: dict, out_dir: str) -> dict:
    manifest = _check_manifest(out_dir, "simulate", config)
    task = manifest.get("task")
    names = _PATH_FILES if task == "path-continuation" else _OPEN_FILES
    data = {"task": task}
    for name in names:
        path = os.path.join(out_dir, manifest["files"][name])
        if not os.path.exists(path):
            raise DependencyError(f"missing upstream artifact: {path}")
        data[name], _ = load_csv(path)
    return data


# ---------------------------------------------------------------------------
# fit / cv


def _fit_from_config(config: dict, data: dict):
    e_cfg = _get(config, "estimator")
    kind = _get(config, "estimator.kind")
    hyper = dict(_get(config, "estimator.hyper"))
    headroom = float(e_cfg.get("headroom", 1.0))
    if data["task"] == "path-continuation":
        est, seed_hist = fit_path_estimator(kind, hyper, data["train"].values,
                                            headroom=headroom)
    else:
        est = fit_estimator(kind, hyper, data["train_inputs"].values,
                            data["train_outputs"].values,
                            output_kinds=bekk_output_pipeline(),
                            headroom=headroom)
        seed_hist = None
    return est, seed_hist


def cmd_fit(config: dict, out_dir: str) -> int:
    data = load_dataset_artifacts(config, out_dir)
    started = time.perf_counter()
    est, _seed = _fit_from_config(config, data)
    elapsed = time.perf_counter() - started
    doc = {"config_sha256": config_hash(config),
           "estimator": estimator_to_dict(est)}
    _write_json(os.path.join(out_dir, "model.json"), doc)
    _write_manifest(out_dir, "fit", config, {"model": "model.json"},
                    {"fit_seconds": elapsed})
    print(f"fit: {est.kind} model written to {out_dir}/model.json "
          f"({elapsed:.2f}s)")
    return 0


def _grid_from_config(config: dict) -> Grid:
    g_cfg = _get(config, "estimator.grid")
    return Grid(
        taus=list(g_cfg.get("taus", [])),
        ps=list(g_cfg.get("ps", [])),
        lams=list(g_cfg.get("lams", [])),
        thetas=list(g_cfg.get("thetas", [])),
        lam_regs=list(g_cfg.get("lam_regs", [])),
        M=float(g_cfg.get("M", 1.0)),
    )


def cmd_cv(config: dict, out_dir: str) -> int:
    data = load_dataset_artifacts(config, out_dir)
    kind = _get(config, "estimator.kind")
    grid = _grid_from_config(config)
    cv_cfg = _get(config, "cv")
    if data["task"] == "path-continuation":
        n_train = data["train"].n
    else:
        n_train = data["train_inputs"].n
    mode = _get(config, "cv.mode")
    try:
        if mode == "overlapping":
            plan = overlapping_folds(n_train, int(_get(config, "cv.fold_len")),
                                     int(_get(config, "cv.val_len")),
                                     int(_get(config, "cv.stride")))
        elif mode == "expanding":
            plan = expanding_folds(n_train, int(_get(config, "cv.k")))
        else:
            raise ConfigError(f"unknown cv mode {mode!r}", field="cv.mode")
    except InvalidInputError as exc:
        raise ConfigError(str(exc), field="cv")
    fixed = dict(cv_cfg.get("fixed_hyper", {}))
    fit_kw = {"headroom": float(_get(config, "estimator.headroom",
                                     required=False, default=1.0))}
    if data["task"] == "path-continuation":
        result = grid_search(kind, grid, plan, "path-continuation",
                             series=data["train"].values,
                             fit_kw=fit_kw, fixed_hyper=fixed)
    else:
        fit_kw["output_kinds"] = bekk_output_pipeline()
        result = grid_search(kind, grid, plan, "open-loop",
                             inputs=data["train_inputs"].values,
                             outputs=data["train_outputs"].values,
                             fit_kw=fit_kw, fixed_hyper=fixed)
    lb_path = os.path.join(out_dir, "leaderboard.csv")
    result.leaderboard_csv(lb_path)
    best_doc = {"config_sha256": config_hash(config), "best": result.best,
                "pruned": result.pruned,
                "n_candidates": len(result.table)}
    _write_json(os.path.join(out_dir, "cv_best.json"), best_doc)
    _write_manifest(out_dir, "cv", config,
                    {"leaderboard": "leaderboard.csv",
                     "best": "cv_best.json"})
    print(f"cv: best {result.best} of {len(result.table)} candidates "
          f"({len(result.pruned)} pruned)")
    return 0


# ---------------------------------------------------------------------------
# forecast / eval


def cmd_forecast(config: dict, out_dir: str) -> int:
    data = load_dataset_artifacts(config, out_dir)
    _check_manifest(out_dir, "fit", config)
    model_doc = _read_json(os.path.join(out_dir, "model.json"), "model")
    if model_doc.get("config_sha256") != config_hash(config):
        raise DependencyError("model.json was fitted under a different config")
    est = estimator_from_dict(model_doc["estimator"])
    mode = _get(config, "task.mode")
    horizon_cfg = _get(config, "task.horizon", required=False)
    if mode == "path-continuation":
        if data["task"] != "path-continuation":
            raise ConfigError("dataset does not support path continuation",
                              field="task.mode")
        test = data["test"]
        horizon = int(horizon_cfg) if horizon_cfg else test.n
        horizon = min(horizon, test.n)
        seed_hist = data["train"].values[-est.seed_length:]
        run = path_continue(est, seed_hist, horizon,
                            reference=test.values[:horizon])
    elif mode == "open-loop":
        if data["task"] == "path-continuation":
            # one-step-ahead predictions along the test span
            test = data["test"]
            horizon = int(horizon_cfg) if horizon_cfg else test.n
            stacked = np.vstack([data["train"].values[-1:],
                                 test.values[:horizon - 1]])
            run = open_loop(est, stacked, reference=test.values[:horizon])
        else:
            inputs = data["test_inputs"]
            horizon = int(horizon_cfg) if horizon_cfg else inputs.n
            run = open_loop(est, inputs.values[:horizon],
                            reference=data["test_outputs"].values[:horizon])
    else:
        raise ConfigError(f"unknown task mode {mode!r}", field="task.mode")
    path = os.path.join(out_dir, "forecast.csv")
    run.save_csv(path, extra_meta={"config_sha256": config_hash(config),
                                   "estimator": est.kind})
    _write_manifest(out_dir, "forecast", config, {"forecast": "forecast.csv"},
                    {"mode": mode, "horizon": run.horizon,
                     "truncated": run.truncated})
    status = f"truncated at step {run.error_step}" if run.truncated else "ok"
    print(f"forecast: {mode} horizon {run.horizon} -> forecast.csv ({status})")
    return 0


def evaluate_run(reference: np.ndarray, predicted: np.ndarray, config: dict,
                 dt: float, mode: str) -> MetricReport:
    """Score one forecast against its reference per the configured metrics."""
    m_cfg = _get(config, "metrics", required=False, default={}) or {}
    eps = float(m_cfg.get("mape_eps", 1e-8))
    report = MetricReport(config={"mode": mode, "dt": dt})
    flags = {}

    t_valid_steps = None
    lyap = _get(config, "task.lyapunov_exponent", required=False)
    if mode == "path-continuation" and lyap:
        vt = valid_time(reference, predicted, float(lyap), dt,
                        float(_get(config, "task.valid_threshold",
                                   required=False, default=0.2)))
        report.t_valid = vt.value
        report.t_valid_censored = vt.censored
        window = m_cfg.get("pointwise_window")
        if window is None:
            t_valid_steps = int(min(
                math.ceil(vt.value) / float(lyap) / dt, reference.shape[0]))
            t_valid_steps = max(t_valid_steps, 1)
        else:
            t_valid_steps = int(window)
    y = reference if t_valid_steps is None else reference[:t_valid_steps]
    y_hat = predicted if t_valid_steps is None else predicted[:t_valid_steps]

    report.nmse, degenerate = nmse_detailed(y, y_hat)
    if degenerate:
        flags["nmse_degenerate_dims"] = list(degenerate)
    report.mae = mae(y, y_hat)
    report.mdae = mdae(y, y_hat)
    report.mape = mape(y, y_hat, eps)

    nperseg = int(m_cfg.get("welch_nperseg", 1024))
    nperseg = min(nperseg, reference.shape[0])
    overlap = float(m_cfg.get("welch_overlap", 0.5))
    fs = 1.0 / dt
    psd_true = welch_psd(reference, nperseg, overlap, fs)
    psd_est = welch_psd(predicted, nperseg, overlap, fs)
    fcut = m_cfg.get("psde_fcut_bins")
    report.psde, skipped = psde_detailed(psd_true, psd_est,
                                         None if fcut is None else int(fcut))
    if skipped:
        flags["psde_skipped_bins"] = skipped

    cap = int(m_cfg.get("w1_cap", 512))
    sub = int(m_cfg.get("w1_subsample", 512))
    w1_seed = int(m_cfg.get("w1_seed", 7))
    try:
        if reference.shape[1] == 1:
            report.w1 = w1_1d(reference[:, 0], predicted[:, 0])
        else:
            k = min(sub, cap, reference.shape[0])
            a = subsample_rows(reference, k, w1_seed)
            b = subsample_rows(predicted, k, w1_seed)
            report.w1 = w1_nd(a, b, cap=cap)
            flags["w1_subsampled_to"] = int(a.shape[0])
    except InvalidInputError as exc:
        report.w1 = float("nan")
        flags["w1_degenerate"] = str(exc)
    report.flags = flags
    report.config.update({"t_valid_steps": t_valid_steps,
                          "welch_nperseg": nperseg})
    return report


def cmd_eval(config: dict, out_dir: str) -> int:
    _check_manifest(out_dir, "forecast", config)
    run, meta = load_forecast_csv(os.path.join(out_dir, "forecast.csv"))
    if meta.get("config_sha256") != config_hash(config):
        raise DependencyError("forecast.csv was produced under a different config")
    if run.reference is None:
        raise DependencyError("forecast.csv carries no reference columns")
    data = load_dataset_artifacts(config, out_dir)
    dt = data["test"].dt if data["task"] == "path-continuation" \
        else data["test_outputs"].dt
    if run.truncated:
        n = run.predicted.shape[0]
        if n == 0:
            raise KernelcastError("forecast is empty; nothing to evaluate")
        report = evaluate_run(run.reference[:n], run.predicted, config, dt,
                              run.mode)
        report.flags["truncated_at"] = run.error_step
    else:
        report = evaluate_run(run.reference, run.predicted, config, dt,
                              run.mode)
    report.config["config_sha256"] = config_hash(config)
    csv_path = os.path.join(out_dir, "metrics.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_sha256={config_hash(config)}\n")
        fh.write(report.csv_header() + "\n")
        fh.write(report.csv_row() + "\n")
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(report.to_json() + "\n")
    _write_manifest(out_dir, "eval", config,
                    {"metrics_csv": "metrics.csv",
                     "metrics_json": "metrics.json"})
    print("eval: " + ", ".join(
        f"{name}={getattr(report, name)}" for name in
        ("nmse", "mae", "mdae", "mape", "psde", "w1", "t_valid")))
    return 0


# ---------------------------------------------------------------------------
# bench


_ASYMPTOTIC = {
    "ngrc-train": "O(n*(p+tau*d)^(2*kappa) + (p+tau*d)^(3*kappa))",
    "poly-gram": "O(n^2*tau*d)",
    "volterra-gram": "O(n^2*d)",
    "ngrc-predict": "O((p+tau*d)^kappa)",
    "poly-predict": "O(n*tau*d)",
    "volterra-predict": "O(n*d)",
}


def _time_fn(fn, repeats: int) -> tuple[float, float]:
    """(median, min) wall-clock seconds over ``repeats`` after one warm-up."""
    fn()  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), float(np.min(times))


def _time_sweep(fns: dict, repeats: int) -> dict:
    """Time several closures with interleaved repeats.

    Interleaving exposes every entry to the same scheduler noise, which is
    what makes within-sweep comparisons (constant vs growing cost) fair.
    """
    for fn in fns.values():  # warm-up round
        fn()
    times = {key: [] for key in fns}
    for _ in range(repeats):
        for key, fn in fns.items():
            t0 = time.perf_counter()
            fn()
            times[key].append(time.perf_counter() - t0)
    return {key: (float(np.median(ts)), float(np.min(ts)))
            for key, ts in times.items()}


def run_bench(config: dict) -> list[dict]:
    b_cfg = _get(config, "bench")
    n = int(b_cfg.get("n", 2000))
    n2 = int(b_cfg.get("n_doubled", 2 * n))
    tau = int(b_cfg.get("tau", 8))
    d = int(b_cfg.get("d", 1))
    gram_d = int(b_cfg.get("gram_d", 3))
    ps = [int(p) for p in b_cfg.get("ps", [2, 3, 4, 5])]
    lam_reg = float(b_cfg.get("lam_reg", 1e-6))
    repeats = int(b_cfg.get("repeats", 5))
    steps = int(b_cfg.get("prediction_steps", 50))
    v_cfg = b_cfg.get("volterra", {})
    vp = VolterraParams(float(v_cfg.get("lam", 0.6)),
                        float(v_cfg.get("theta", 0.5)))
    seed = int(config.get("seed", 0))
    rng = np.random.Generator(np.random.Philox(seed))

    series = rng.uniform(-1.0, 1.0, (n + steps, d))
    targets = rng.uniform(-1.0, 1.0, (n + steps, 1))
    rows = []

    from .kernels import PolyKernelParams, fit_kernel_model, poly_gram, predict_kernel
    from .ngrc import delay_vectors

    def record(op, p_val, n_val, timing, per_step=1):
        median_s, min_s = timing
        rows.append({"op": op, "n": n_val, "tau": tau, "p": p_val,
                     "d": d if op.startswith(("ngrc", "poly")) else gram_d,
                     "median_s": median_s / per_step, "min_s": min_s / per_step,
                     "repeats": repeats, "asymptotic": _ASYMPTOTIC[op]})

    train_sweep = _time_sweep(
        {p: (lambda p=p: fit_ngrc(series[:n], targets[:n], tau, p, lam_reg))
         for p in ps}, repeats)
    for p in ps:
        record("ngrc-train", p, n, train_sweep[p])
        model = fit_ngrc(series[:n], targets[:n], tau, p, lam_reg)
        windows = delay_vectors(series[: n + steps], tau)[-steps:]
        record("ngrc-predict", p, n, _time_fn(
            lambda: predict_ngrc(model, windows), repeats), per_step=steps)

    windows_n = delay_vectors(series[:n], tau)
    pk = PolyKernelParams(2, tau)
    record("poly-gram", 2, n, _time_fn(
        lambda: poly_gram(windows_n, windows_n, pk), repeats))
    poly_model = fit_kernel_model(series[:n], targets[:n], pk, lam_reg)
    test_windows = delay_vectors(series[: n + steps], tau)[-steps:]
    record("poly-predict", 2, n, _time_fn(
        lambda: predict_kernel(poly_model, test_windows), repeats),
        per_step=steps)

    volt_inputs = rng.uniform(-1.0, 1.0, (n2 + steps, gram_d))
    volt_inputs /= np.linalg.norm(volt_inputs, axis=1).max()
    # the Volterra Gram ignores p; timed across the sweep to expose that
    volt_sweep = _time_sweep(
        {p: (lambda: volterra_gram(volt_inputs[:n], vp)) for p in ps},
        repeats)
    for p in ps:
        record("volterra-gram", p, n, volt_sweep[p])
    record("volterra-gram", 0, n2, _time_fn(
        lambda: volterra_gram(volt_inputs[:n2], vp), repeats))
    volt_model = fit_kernel_model(volt_inputs[:n], targets[:n], vp, lam_reg)
    record("volterra-predict", 0, n, _time_fn(
        lambda: predict_kernel(volt_model, volt_inputs[n : n + steps]),
        repeats), per_step=steps)
    return rows


def cmd_bench(config: dict, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    rows = run_bench(config)
    path = os.path.join(out_dir, "bench.csv")
    fields = ["op", "n", "tau", "p", "d", "median_s", "min_s", "repeats",
              "asymptotic"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_sha256={config_hash(config)}\n")
        fh.write(",".join(fields) + "\n")
        for row in rows:
            fh.write(",".join(str(row[f]) for f in fields) + "\n")
    _write_manifest(out_dir, "bench", config, {"bench": "bench.csv"})
    print(f"bench: {len(rows)} timings -> {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _limit_threads(n: int | None) -> None:
    if not n:
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=int(n))
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(int(n))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelcast",
        description="Simulate, fit, cross-validate, forecast, evaluate, and "
                    "benchmark kernel and NG-RC forecasters.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("fit", cmd_fit),
                     ("cv", cmd_cv), ("forecast", cmd_forecast),
                     ("eval", cmd_eval), ("bench", cmd_bench)):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="path to an experiment JSON file")
        cmd.add_argument("--preset",
                         help="named built-in configuration, one of: "
                              + ", ".join(sorted(PRESETS)))
        cmd.add_argument("--out", required=True, help="experiment directory")
        cmd.add_argument("--seed", type=int, help="override the config seed")
        cmd.add_argument("--threads", type=int,
                         help="cap the worker thread count")
        cmd.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _limit_threads(args.threads)
        config = load_config(args)
        return args.fn(config, args.out)
    except (ConfigError, DependencyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KernelcastError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
