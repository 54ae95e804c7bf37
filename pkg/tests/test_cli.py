import json
from pathlib import Path

import numpy as np
import pytest

from torushomog.cli import main

BASE = """
seed = 42

[coefficients]
label = "sine_1d"

[validate]
grid_step = 0.015625

[invariant]
step = 2e-3
horizon = 8.0
n_paths = 64
bins = [16]

[corrector]
step = 2e-3
n_paths = 512
grid = [32]
gamma = 12.0

[simulate]
step = 2e-3
horizon = 0.5
n_paths = 512
store_stride = 50
starts = [[0.2]]

[elliptic]
epsilon = 0.5
domain = {kind = "ball", center = [0.0], radius = 1.0}
e = {kind = "const", value = -1.0}
x = [0.3]
step = 0.02
n_paths = 400
"""


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "exp.toml"
    p.write_text(BASE)
    return p


def run(config, out, *extra):
    return main(["--config", str(config), "--out", str(out),
                 "--budget", "smoke", *extra])


def test_missing_config_is_usage_error(tmp_path):
    assert main(["validate", "--out", str(tmp_path)]) == 2


def test_unreadable_config_is_io_error(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.toml"),
                 "--out", str(tmp_path)]) == 4


def test_bad_toml_is_config_error(tmp_path):
    p = tmp_path / "broken.toml"
    p.write_text("[coefficients\nlabel = ???")
    assert main(["validate", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_unknown_label_is_config_error(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('[coefficients]\nlabel = "not_a_thing"\n')
    assert main(["validate", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_missing_section_is_config_error(config, tmp_path):
    p = tmp_path / "nosec.toml"
    p.write_text('[coefficients]\nlabel = "sine_1d"\n')
    assert main(["mixing", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_missing_mixing_starts_is_config_error(tmp_path):
    p = tmp_path / "nostart.toml"
    p.write_text("""
[coefficients]
label = "sine_1d"

[mixing]
step = 5e-3
horizon = 2.0
n_paths = 32
""")
    assert main(["mixing", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_code(tmp_path):
    p = tmp_path / "dead.toml"
    p.write_text("""
[coefficients]
label = "sine_1d"

[elliptic]
epsilon = 0.5
domain = {kind = "ball", center = [0.0], radius = 1.0}
e = {kind = "const", value = 0.0}
x = [0.3]
step = 0.02
n_paths = 16
""")
    assert main(["elliptic", "--config", str(p), "--out", str(tmp_path)]) == 3


def test_validate_and_manifest(config, tmp_path):
    out = tmp_path / "out"
    assert run(config, out, "validate") == 0
    report = json.loads((out / "validate.json").read_text())
    assert all(report["passed"].values())
    manifest = json.loads((out / "validate_manifest.json").read_text())
    assert manifest["command"] == "validate"
    assert manifest["global_seed"] == 42
    assert "validate.json" in manifest["artifacts"]
    assert manifest["versions"]["package"]


def test_invariant_artifact(config, tmp_path):
    out = tmp_path / "out"
    assert run(config, out, "invariant") == 0
    lines = (out / "invariant.csv").read_text().splitlines()
    assert lines[0] == "bin_index_1,center_1,mass"
    assert len(lines) == 17
    mass = np.array([float(l.split(",")[-1]) for l in lines[1:]])
    assert mass.sum() == pytest.approx(1.0, abs=1e-9)


def test_effective_pipeline_smoke(config, tmp_path):
    out = tmp_path / "out"
    assert run(config, out, "effective") == 0
    result = json.loads((out / "effective.json").read_text())
    # smoke budget (64 corrector paths): just a wide sanity corridor around
    # the harmonic-mean value; the tight check runs at full budget elsewhere
    assert abs(result["cov_a"][0][0] - 1.732) < 0.4
    manifest = json.loads((out / "effective_manifest.json").read_text())
    assert set(manifest["upstream_fingerprints"]) == {"corrector", "invariant"}


def test_corrector_cache_reused(config, tmp_path):
    out = tmp_path / "out"
    assert run(config, out, "corrector") == 0
    cache = list((out / "cache").glob("corrector-*.npz"))
    assert len(cache) == 1
    first = (out / "corrector.csv").read_bytes()
    stamp = cache[0].stat().st_mtime_ns
    assert run(config, out, "corrector") == 0
    assert cache[0].stat().st_mtime_ns == stamp        # not recomputed
    assert (out / "corrector.csv").read_bytes() == first


def test_simulate_deterministic_across_threads_and_reruns(config, tmp_path):
    outs = [tmp_path / f"o{i}" for i in range(3)]
    assert run(config, outs[0], "simulate", "--threads", "1") == 0
    assert run(config, outs[1], "simulate", "--threads", "4") == 0
    assert run(config, outs[2], "simulate", "--threads", "1") == 0
    ref = (outs[0] / "paths.csv").read_bytes()
    assert (outs[1] / "paths.csv").read_bytes() == ref
    assert (outs[2] / "paths.csv").read_bytes() == ref


def test_seed_override_changes_output(config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(config, a, "simulate") == 0
    assert run(config, b, "simulate", "--seed", "7") == 0
    assert (a / "paths.csv").read_bytes() != (b / "paths.csv").read_bytes()


def test_example2d_artifacts_parse_numeric(tmp_path):
    p = tmp_path / "ex.toml"
    p.write_text("""
seed = 5

[coefficients]
label = "sine_1d"

[example2d]
step = 2e-2
hit_horizon = 5.0
inv_horizon = 5.0
long_horizon = 10.0
clt_step = 5e-3
""")
    out = tmp_path / "out"
    assert main(["example2d", "--config", str(p), "--out", str(out),
                 "--budget", "smoke"]) == 0
    for name in ("example2d_hitting.csv", "example2d_invariant.csv",
                 "example2d_clt.csv"):
        lines = (out / name).read_text().splitlines()
        assert len(lines) >= 2
        [float(v) for v in lines[1].split(",")]   # all cells numeric


def test_elliptic_command(config, tmp_path):
    out = tmp_path / "out"
    assert run(config, out, "elliptic") == 0
    est = json.loads((out / "elliptic.json").read_text())
    assert 0.0 < est["value"] < 1.0
    assert est["n_paths"] == 50                        # smoke budget factor
