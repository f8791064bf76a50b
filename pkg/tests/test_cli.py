"""Command-line entry points, exercised in process through main()."""

import json

import numpy as np
import pytest

from selfdiffusion import cli
from selfdiffusion.dsmodel import load_model


@pytest.fixture(scope="module")
def matrix_dir(tmp_path_factory):
    """Output directory of one cheap 'matrix' invocation."""
    out = tmp_path_factory.mktemp("matrix_out")
    rc = cli.main(["matrix", "--method", "als", "--restarts", "2",
                   "--tol", "1e-4", "--trace-samples", "11",
                   "--out-dir", str(out)])
    assert rc == 0
    return out


def test_compute_single_direction(tmp_path, capsys):
    out = tmp_path / "levels.csv"
    rc = cli.main(["compute", "--method", "als", "--restarts", "2",
                   "--u", "1,0", "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "als   best =" in printed

    lines = out.read_text().splitlines()
    assert lines[0] == "u,method,l0,l1,l2,l3,l4,l5,l6,l7,l8"
    fields = lines[1].split(",")
    assert fields[:2] == ["1;0", "als"]
    assert float(fields[2]) == pytest.approx(0.5, abs=1e-6)
    assert float(fields[-1]) == 0.0

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "compute"
    assert manifest["parameters"]["seed"] == 0
    assert manifest["outputs"] == ["levels.csv"]


def test_compute_output_is_deterministic(tmp_path):
    argv = ["compute", "--method", "als", "--restarts", "2", "--seed", "7",
            "--u", "1,1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(argv + ["--out", str(a)]) == 0
    assert cli.main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_matrix_outputs(matrix_dir):
    for name in ("manifest.json", "ds_table.csv", "trace.dat", "ds_model.json"):
        assert (matrix_dir / name).exists()

    model = load_model(matrix_dir / "ds_model.json")
    assert model.method == "als"
    np.testing.assert_allclose(model.eval_Ds(0.0), np.eye(2), atol=5e-3)

    table = (matrix_dir / "ds_table.csv").read_text().splitlines()
    assert table[0] == "l,rho,D11,D12,D22"
    assert len(table) == 10

    trace = (matrix_dir / "trace.dat").read_text().splitlines()
    assert trace[0].startswith("#")
    assert len(trace) == 12
    first = [float(v) for v in trace[1].split()]
    assert first[0] == 0.0 and first[1] == pytest.approx(2.0, abs=1e-2)


def test_simulate_run(matrix_dir, tmp_path):
    config = {
        "dt": 1e-3, "t_final": 5e-3,
        "mesh": {"type": "cartesian", "nx": 4, "ny": 4},
        "initial_red": "0.25 + 0.25*cos(pi*x)*cos(pi*y)",
        "initial_blue": "0.5 - 0.5*cos(pi*x)*cos(pi*y)",
        "ds_model": str(matrix_dir / "ds_model.json"),
        "snapshot_every": 2,
    }
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / "sim"
    rc = cli.main(["simulate", "--config", str(cfg), "--out-dir", str(out)])
    assert rc == 0

    diag = (out / "diagnostics.csv").read_text().splitlines()
    assert diag[0].startswith("step,time,mass_red")
    assert len(diag) == 7
    assert (out / "mesh.txt").exists()
    for step in (0, 2, 4, 5):
        assert (out / f"snapshot_{step:06d}.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["parameters"]["steps"] == 5


def test_simulate_missing_model(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "dt": 1e-3, "t_final": 2e-3,
        "mesh": {"type": "cartesian", "nx": 2, "ny": 2},
        "initial_red": "0.25", "initial_blue": "0.5",
    }))
    rc = cli.main(["simulate", "--config", str(cfg),
                   "--out-dir", str(tmp_path / "sim")])
    assert rc == cli.USAGE_EXIT


def test_usage_errors_exit_one(tmp_path):
    for argv in ([], ["frobnicate"], ["compute", "--method", "nope"]):
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
        assert info.value.code == cli.USAGE_EXIT

    # parse failures inside a subcommand return rather than raise
    assert cli.main(["compute", "--u", "1,2,3"]) == cli.USAGE_EXIT
    assert cli.main(["compute", "--jumps", "gibberish"]) == cli.USAGE_EXIT
    assert cli.main(["compute", "--jumps", "preset:reference2d", "--M", "3"]) \
        == cli.USAGE_EXIT
    assert cli.main(["simulate", "--config", str(tmp_path / "absent.json"),
                     "--out-dir", str(tmp_path)]) == cli.USAGE_EXIT


def test_unreachable_tolerance_exits_two(capsys):
    rc = cli.main(["compute", "--method", "lsq", "--tol", "1e-30",
                   "--u", "1,0"])
    assert rc == cli.NUMERICAL_EXIT
    assert "compute:" in capsys.readouterr().err


def test_validate_passes(capsys):
    assert cli.main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "checks passed" in out
    assert "FAIL" not in out
