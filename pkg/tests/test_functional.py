"""Dense functional evaluation against the naive brute-force oracle."""

import numpy as np
import pytest

from selfdiffusion.functional import (
    check_dense_size,
    enumerate_level,
    eval_dense_A,
    eval_level_A,
    level_binoms,
    level_sums,
    level_values,
)
from selfdiffusion.lattice import build_lattice

from _brute import REFERENCE_JUMPS, brute_level_sums

E1 = (1.0, 0.0)


def test_zero_function_total_is_frozen_value(spec):
    # brute count: 2 gated jumps per config on average, 256 configs, p = 1/4
    psi = np.zeros(spec.num_configs)
    assert eval_dense_A(spec, psi, E1) == 64.0
    assert eval_dense_A(spec, psi, (0.0, 1.0)) == 64.0
    assert eval_dense_A(spec, psi, (1.0, 1.0)) == 128.0


def test_zero_function_matches_brute(spec):
    psi = [0.0] * spec.num_configs
    sums = brute_level_sums(1, 2, REFERENCE_JUMPS, psi, E1)
    assert sum(sums) == 64.0
    np.testing.assert_allclose(level_sums(spec, np.zeros(256), E1), sums,
                               rtol=0, atol=1e-12)


def test_random_functions_match_brute(spec):
    rng = np.random.default_rng(42)
    for _ in range(3):
        psi = rng.standard_normal(spec.num_configs)
        for u in (E1, (0.0, 1.0), (0.7, -1.3)):
            ours = level_sums(spec, psi, u)
            ref = brute_level_sums(1, 2, REFERENCE_JUMPS, list(psi), u)
            np.testing.assert_allclose(ours, ref, rtol=1e-12, atol=1e-12)


def test_one_dimensional_matches_brute():
    jumps = [((1,), 0.5), ((-1,), 0.5)]
    spec = build_lattice(2, 1, jumps)
    rng = np.random.default_rng(3)
    psi = rng.standard_normal(spec.num_configs)
    ours = level_sums(spec, psi, (1.0,))
    ref = brute_level_sums(2, 1, jumps, list(psi), (1.0,))
    np.testing.assert_allclose(ours, ref, rtol=1e-12, atol=1e-12)


def test_empty_level_value_is_exact(spec):
    # the tagged image of the empty configuration is itself, so any psi
    # cancels and only the jump moments remain
    rng = np.random.default_rng(11)
    psi = rng.standard_normal(spec.num_configs)
    assert level_values(spec, psi, E1)[0] == 0.5
    assert level_values(spec, psi, (1.0, 1.0))[0] == 1.0


def test_full_level_value_is_zero(spec):
    rng = np.random.default_rng(12)
    psi = rng.standard_normal(spec.num_configs)
    assert level_values(spec, psi, E1)[spec.num_sites] == 0.0


def test_partition_identity(spec):
    rng = np.random.default_rng(5)
    binoms = level_binoms(spec.num_sites)
    for _ in range(3):
        psi = rng.standard_normal(spec.num_configs)
        for u in (E1, (1.0, 1.0)):
            total = eval_dense_A(spec, psi, u)
            assert abs(binoms @ level_values(spec, psi, u) - total) \
                <= 1e-10 * abs(total)


def test_constant_shift_invariance(spec):
    rng = np.random.default_rng(6)
    psi = rng.standard_normal(spec.num_configs)
    a = level_sums(spec, psi, E1)
    b = level_sums(spec, psi + 17.5, E1)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_enumerate_level_counts_and_order(spec):
    seen = set()
    binoms = level_binoms(spec.num_sites)
    for lv in range(spec.num_sites + 1):
        members = list(enumerate_level(spec, lv))
        assert len(members) == int(binoms[lv])
        assert members == sorted(members)
        assert all(bin(c).count("1") == lv for c in members)
        seen.update(members)
    assert len(seen) == spec.num_configs


def test_eval_level_A_slices_level_values(spec):
    rng = np.random.default_rng(8)
    psi = rng.standard_normal(spec.num_configs)
    vals = level_values(spec, psi, E1)
    for lv in (0, 3, 8):
        assert eval_level_A(spec, psi, E1, lv) == pytest.approx(vals[lv])
    with pytest.raises(ValueError):
        eval_level_A(spec, psi, E1, 9)


def test_dense_size_guard():
    check_dense_size(24)
    with pytest.raises(ValueError):
        check_dense_size(25)
    check_dense_size(25, limit=26)


def test_dense_shape_validation(spec):
    with pytest.raises(ValueError):
        eval_dense_A(spec, np.zeros(128), E1)
    with pytest.raises(TypeError):
        eval_dense_A(spec, [0.0] * 256, E1)
