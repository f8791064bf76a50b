"""Polarization, spline interpolation and the model file format."""

import numpy as np
import pytest

from selfdiffusion.dsmodel import (
    SelfDiffusionModel,
    bulk_matrix,
    constant_model,
    export_table,
    export_trace,
    load_model,
    polarization_directions,
    save_model,
)


def _linear_model(n=4, slope=1.0):
    nodes = np.arange(n + 1) / n
    mats = np.array([(1.0 - slope * r) * np.eye(2) for r in nodes])
    return SelfDiffusionModel.from_level_data(2, mats, np.diag([0.5, 0.5]))


def test_bulk_matrix_reference(spec):
    np.testing.assert_allclose(bulk_matrix(spec), np.diag([0.5, 0.5]),
                               atol=1e-15)


def test_polarization_directions():
    assert polarization_directions(2) == [(1, 0), (0, 1), (1, 1)]
    assert polarization_directions(3) == [
        (1, 0, 0), (0, 1, 0), (0, 0, 1),
        (1, 1, 0), (1, 0, 1), (0, 1, 1)]


def test_model_reproduces_nodes(lsq_model):
    for lv, rho in enumerate(lsq_model.nodes):
        np.testing.assert_allclose(lsq_model.eval_Ds(rho),
                                   lsq_model.level_matrices[lv],
                                   rtol=1e-12, atol=1e-12)


def test_linear_data_interpolates_linearly():
    model = _linear_model()
    for rho in (0.1, 0.33, 0.77):
        np.testing.assert_allclose(model.eval_Ds(rho), (1 - rho) * np.eye(2),
                                   rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(model.eval_Ds_deriv(rho), -np.eye(2),
                                   rtol=1e-10, atol=1e-10)
    assert model.trace_Ds(0.4) == pytest.approx(2 * 0.6, rel=1e-12)


def test_clamping_counts_events():
    model = _linear_model()
    before = model.clamp_events
    np.testing.assert_allclose(model.eval_Ds(-0.5), model.eval_Ds(0.0),
                               atol=1e-15)
    np.testing.assert_allclose(model.eval_Ds(1.5), model.eval_Ds(1.0),
                               atol=1e-15)
    assert model.clamp_events == before + 2
    # outside the physical range the matrix is frozen, so its slope is zero
    assert np.all(model.eval_Ds_deriv(-0.5) == 0.0)
    assert np.all(model.eval_Ds_deriv(1.5) == 0.0)


def test_symmetry_validation():
    mats = np.zeros((3, 2, 2))
    mats[1, 0, 1] = 1e-6  # asymmetric beyond tolerance
    with pytest.raises(ValueError):
        SelfDiffusionModel.from_level_data(2, mats, np.eye(2))


def test_psd_repair_and_rejection():
    nodes3 = [np.eye(2), np.diag([0.5, -5e-9]), np.zeros((2, 2))]
    model = SelfDiffusionModel.from_level_data(2, np.array(nodes3), np.eye(2))
    w = np.linalg.eigvalsh(model.level_matrices[1])
    assert np.all(w >= 0.0)
    bad = [np.eye(2), np.diag([0.5, -1e-6]), np.zeros((2, 2))]
    with pytest.raises(ValueError):
        SelfDiffusionModel.from_level_data(2, np.array(bad), np.eye(2))


def test_save_load_round_trip(tmp_path, lsq_model):
    path = tmp_path / "model.json"
    save_model(lsq_model, path)
    loaded = load_model(path)
    np.testing.assert_array_equal(loaded.nodes, lsq_model.nodes)
    np.testing.assert_allclose(loaded.level_matrices, lsq_model.level_matrices,
                               rtol=0, atol=0)
    np.testing.assert_allclose(loaded.bulk, lsq_model.bulk, rtol=0, atol=0)
    assert loaded.method == lsq_model.method
    for rho in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(loaded.eval_Ds(rho), lsq_model.eval_Ds(rho),
                                   rtol=1e-12, atol=1e-14)


def test_load_rejects_tampered_file(tmp_path, lsq_model):
    import json

    path = tmp_path / "model.json"
    save_model(lsq_model, path)
    payload = json.loads(path.read_text())
    payload["spline_coefficients"]["11"][0][0] += 0.5
    path.write_text(json.dumps(payload))
    with pytest.raises(ValueError, match="corrupt"):
        load_model(path)
    payload["format"] = "something-else"
    path.write_text(json.dumps(payload))
    with pytest.raises(ValueError):
        load_model(path)


def test_export_table_format(tmp_path, lsq_model):
    path = tmp_path / "table.csv"
    export_table(lsq_model, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "l,rho,D11,D12,D22"
    assert len(lines) == 1 + lsq_model.num_sites + 1
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == 0.0
    assert float(first[2]) == pytest.approx(1.0, abs=1e-3)
    last = lines[-1].split(",")
    assert float(last[1]) == 1.0
    assert abs(float(last[2])) <= 1e-12


def test_export_trace_format(tmp_path, lsq_model):
    path = tmp_path / "trace.dat"
    export_trace(lsq_model, path, samples=11)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert len(lines) == 12
    rho, tr, ref = map(float, lines[1].split())
    assert (rho, ref) == (0.0, 2.0)
    assert tr == pytest.approx(2.0, abs=1e-3)
    rho, tr, ref = map(float, lines[-1].split())
    assert (rho, ref) == (1.0, 0.0)
    assert abs(tr) <= 1e-3


def test_constant_model():
    mat = np.array([[0.7, 0.1], [0.1, 0.7]])
    model = constant_model(2, 8, mat, np.eye(2))
    for rho in (0.0, 0.5, 1.0):
        np.testing.assert_allclose(model.eval_Ds(rho), mat, atol=1e-13)
        np.testing.assert_allclose(model.eval_Ds_deriv(rho),
                                   np.zeros((2, 2)), atol=1e-11)


def test_assemble_levels_rejects_unknown_method(spec):
    from selfdiffusion.dsmodel import assemble_levels

    with pytest.raises(ValueError):
        assemble_levels(spec, method="newton")
