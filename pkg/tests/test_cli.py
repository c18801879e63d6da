import json

import numpy as np
import pytest

from holdpp import cli, data, dynamics


@pytest.fixture
def run(capsys):
    def _run(*argv):
        code = cli.main(list(argv))
        out = capsys.readouterr()
        return code, out.out, out.err

    return _run


def test_params_n2(run):
    code, out, _ = run("params", "--n", "2")
    assert code == 0
    assert "lambda*       = -1\n" in out and "xi            = 2\n" in out and "gamma_1       = 1\n" in out


def test_params_n3(run):
    code, out, _ = run("params", "--n", "3")
    assert code == 0
    assert "2.82842712474619" in out and "5.19615242270663" in out
    assert "max|eig - lambda*|" in out


def test_params_n1_is_usage_error(run):
    code, _, err = run("params", "--n", "1")
    assert code == 2 and "--n >= 2" in err


def test_bad_arguments_are_usage_errors(run):
    assert run("params")[0] == 2
    assert run("frobnicate")[0] == 2
    assert run("verify")[0] == 2


def test_verify_all(run):
    code, out, _ = run("verify", "--all", "--n-max", "6")
    assert code == 0, out
    assert "all 7 checks passed" in out


def test_verify_spectral_n12(run):
    code, out, _ = run("verify", "--spectral", "--n-max", "12")
    assert code == 0 and "[PASS] spectral_exact" in out


def test_verify_catches_gamma2_sign_flip(run, monkeypatch):
    original = dynamics.drift_matrix

    def flipped(n, gammas, xi):
        F = original(n, gammas, xi)
        if n >= 3:
            F[1, 2], F[2, 1] = -F[1, 2], -F[2, 1]
        return F

    monkeypatch.setattr(dynamics, "drift_matrix", flipped)
    code, out, _ = run("verify", "--dynamics", "--n-max", "4")
    assert code == 1
    assert "[FAIL] critical_spectrum" in out


def test_verify_catches_wrong_coefficients(run, monkeypatch):
    original = dynamics.critical_params

    def perturbed(n, l_inv=0.5):
        spec = original(n, l_inv)
        g = list(spec.gammas)
        g[-1] *= 1.05
        return dynamics.DriftSpec(n=n, gammas=tuple(g), xi=spec.xi, l_inv=l_inv)

    monkeypatch.setattr(dynamics, "critical_params", perturbed)
    code, out, _ = run("verify", "--dynamics", "--optimality", "--n-max", "4")
    assert code == 1 and "FAIL" in out


def test_train_sample_plot_pipeline(run, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, err = run("train", "--dataset", "eight_gaussians", "--n", "3", "--iters", "50", "--batch", "64",
                       "--count", "2000", "--hidden", "16,16", "--seed", "1", "--out", "ck.hpp1", "--data-out", "d.csv")
    assert code == 0, err
    code, _, err = run("sample", "--ckpt", "ck.hpp1", "--count", "200", "--steps", "50", "--seed", "2",
                       "--out", "s.csv", "--evaluate")
    assert code == 0, err
    code, _, err = run("plot", "--data", "d.csv", "--samples", "s.csv", "--out", "fig.svg")
    assert code == 0, err
    code, _, err = run("plot", "--trajectory", "--ckpt", "ck.hpp1", "--chains", "3", "--steps", "20", "--out", "traj.svg")
    assert code == 0, err
    for name in ("ck.hpp1", "s.csv", "fig.svg", "traj.svg"):
        manifest = json.loads((tmp_path / f"{name}.manifest.json").read_text())
        assert {"subcommand", "config", "seed", "started", "finished", "version"} <= set(manifest)
    assert data.read_csv("s.csv").shape == (200, 2)
    svg = (tmp_path / "fig.svg").read_text()
    assert svg.startswith("<svg") and 'width="800"' in svg and "#888888" in svg
    assert "polyline" in (tmp_path / "traj.svg").read_text()
    sample_manifest = json.loads((tmp_path / "s.csv.manifest.json").read_text())
    assert sample_manifest["config"]["steps"] == 50
    assert "energy_distance" in sample_manifest["evaluation"]
    assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]


@pytest.fixture
def checkpoint(tmp_path, run):
    path = tmp_path / "ck.hpp1"
    code, _, err = run("train", "--dataset", "two_moons", "--n", "2", "--iters", "5", "--batch", "16",
                       "--count", "500", "--hidden", "8", "--out", str(path))
    assert code == 0, err
    return path


def test_sample_default_steps_is_250(checkpoint, run, tmp_path):
    out = tmp_path / "s.csv"
    assert run("sample", "--ckpt", str(checkpoint), "--count", "5", "--out", str(out))[0] == 0
    assert json.loads(out.with_name("s.csv.manifest.json").read_text())["config"]["steps"] == 250


def test_sample_seed_reproducible(checkpoint, run, tmp_path, monkeypatch):
    a, b, c = (tmp_path / f"{k}.csv" for k in "abc")
    run("sample", "--ckpt", str(checkpoint), "--count", "20", "--steps", "10", "--seed", "5", "--out", str(a))
    monkeypatch.setenv("HOLDPP_SEED", "5")
    run("sample", "--ckpt", str(checkpoint), "--count", "20", "--steps", "10", "--out", str(b))
    monkeypatch.setenv("HOLDPP_SEED", "6")
    run("sample", "--ckpt", str(checkpoint), "--count", "20", "--steps", "10", "--out", str(c))
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()


def test_sample_rejects_order_mismatch(checkpoint, run, tmp_path):
    code, _, err = run("sample", "--ckpt", str(checkpoint), "--n", "3", "--out", str(tmp_path / "x.csv"))
    assert code == 2 and "order mismatch" in err
    assert not (tmp_path / "x.csv").exists()


def test_sample_corrupt_checkpoint_is_io_error(checkpoint, run, tmp_path):
    blob = bytearray(checkpoint.read_bytes())
    blob[-30] ^= 0xFF
    checkpoint.write_bytes(bytes(blob))
    code, _, err = run("sample", "--ckpt", str(checkpoint), "--out", str(tmp_path / "x.csv"))
    assert code == 3 and "checksum" in err
    assert not (tmp_path / "x.csv").exists()


def test_missing_checkpoint_is_io_error(run, tmp_path):
    code, _, _ = run("sample", "--ckpt", str(tmp_path / "nope"), "--out", str(tmp_path / "x.csv"))
    assert code == 3


def test_plot_empty_csv_fails_without_output(run, tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    out = tmp_path / "fig.svg"
    code, _, err = run("plot", "--samples", str(empty), "--out", str(out))
    assert code == 3 and "empty" in err
    assert list(tmp_path.iterdir()) == [empty]


def test_plot_dimension_mismatch(run, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    data.write_csv(a, np.zeros((3, 2)))
    data.write_csv(b, np.zeros((3, 3)))
    code, _, _ = run("plot", "--samples", str(a), "--data", str(b), "--out", str(tmp_path / "f.svg"))
    assert code == 3 and not (tmp_path / "f.svg").exists()


def test_config_precedence(tmp_path, monkeypatch):
    cfg_file = tmp_path / "train.cfg"
    cfg_file.write_text("# toy run\niters = 40\nbatch=32\nseed=9\nlr=0.01\n")
    parser = cli.build_parser()
    args = parser.parse_args(["train", "--config", str(cfg_file), "--iters", "7", "--out", "x"])
    s = cli.train_settings(args)
    assert s["iters"] == 7 and s["batch"] == 32 and s["lr"] == 0.01 and s["seed"] == 9
    assert s["alpha"] == 0.08 and s["T"] == 5.0
    monkeypatch.setenv("HOLDPP_SEED", "3")
    args = parser.parse_args(["train", "--out", "x"])
    assert cli.train_settings(args)["seed"] == 3
    args = parser.parse_args(["train", "--seed", "4", "--out", "x"])
    assert cli.train_settings(args)["seed"] == 4


def test_config_unknown_key_is_usage_error(run, tmp_path):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("warp=9\n")
    code, _, err = run("train", "--config", str(cfg_file), "--out", str(tmp_path / "x"))
    assert code == 2 and "warp" in err


def test_bad_seed_env_is_usage_error(run, tmp_path, monkeypatch):
    monkeypatch.setenv("HOLDPP_SEED", "abc")
    code, _, err = run("plot", "--samples", "s.csv", "--out", str(tmp_path / "x.svg"))
    assert code == 2 and "HOLDPP_SEED" in err


def test_sweep_writes_per_order_energy_distances(run, tmp_path, monkeypatch):
    from holdpp import pipeline

    monkeypatch.setattr(pipeline, "TRAIN_COUNT", 2000)
    out = tmp_path / "sweep"
    code, stdout, err = run("sweep", "--orders", "1", "2", "--iters", "20", "--count", "100", "--steps", "20",
                            "--out", str(out))
    assert code == 0, err
    manifest = json.loads((tmp_path / "sweep.manifest.json").read_text())
    assert [r["n"] for r in manifest["runs"]] == [1, 2]
    assert all(r["iters"] == 20 and r["energy_distance"] >= 0 for r in manifest["runs"])


def test_console_script_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "holdpp", "params", "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and "lambda*" in res.stdout
