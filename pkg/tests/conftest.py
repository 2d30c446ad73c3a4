import json
import time
import warnings

import pytest

from kernelcast.cli import main

REPLICATION_PRESETS = {
    "lorenz": ("lorenz-ngrc", "lorenz-polynomial", "lorenz-volterra"),
    "mackey-glass": ("mackey-glass-ngrc", "mackey-glass-polynomial",
                     "mackey-glass-volterra"),
    "bekk": ("bekk-ngrc", "bekk-polynomial", "bekk-volterra"),
}


def run_preset_pipeline(preset: str, out_dir) -> dict:
    """Drive simulate/fit/forecast/eval for one preset; return artifacts."""
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for cmd in ("simulate", "fit", "forecast", "eval"):
            code = main([cmd, "--preset", preset, "--out", str(out_dir)])
            assert code == 0, f"{preset}: {cmd} exited {code}"
    elapsed = time.perf_counter() - started
    metrics = json.loads((out_dir / "metrics.json").read_text())
    return {"dir": out_dir, "metrics": metrics, "seconds": elapsed}


def _run_family(tmp_path_factory, family: str) -> dict:
    """Each preset pipeline executed twice (run a/b) for determinism checks."""
    root = tmp_path_factory.mktemp(f"acc-{family}")
    out = {}
    for preset in REPLICATION_PRESETS[family]:
        out[preset] = {
            "a": run_preset_pipeline(preset, root / preset / "a"),
            "b": run_preset_pipeline(preset, root / preset / "b"),
        }
    return out


@pytest.fixture(scope="session")
def lorenz_pipelines(tmp_path_factory):
    return _run_family(tmp_path_factory, "lorenz")


@pytest.fixture(scope="session")
def mackey_glass_pipelines(tmp_path_factory):
    return _run_family(tmp_path_factory, "mackey-glass")


@pytest.fixture(scope="session")
def bekk_pipelines(tmp_path_factory):
    return _run_family(tmp_path_factory, "bekk")
