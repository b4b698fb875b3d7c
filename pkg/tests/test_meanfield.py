"""Mean-field evaluation against empirical measures."""

import numpy as np
import pytest

from mvsde import (
    CoefficientSet,
    ConfigError,
    DomainError,
    EmpiricalMeasure,
    make_system,
    mf_batch,
    mf_drift0,
    mf_drift1,
    mf_sigma,
)

from conftest import constant_system, eta_indicator_sigma_system, mixed_system

ATTRACTION_MF = 0.04768342449921814  # mean of tanh(v - 0.25), v in {-1, 0.3, 2}, hand sum


def test_constant_kernel_ignores_measure():
    cs = constant_system(v=(2.5,))
    atoms = np.array([[0.0, 0.0], [9.0, -9.0], [1.0, 1.0]])
    np.testing.assert_array_equal(mf_drift0(cs, 0.0, np.zeros(2), atoms), [2.5])


def test_first_component_mean():
    cs = CoefficientSet(d=1, b0=lambda t, z, zeta: zeta[..., :1],
                        b1=lambda t, z, zeta: np.zeros(1),
                        sigma=lambda t, z, zeta: np.eye(1),
                        bound_C=10.0, ellipticity_nu=1.0)
    atoms = np.array([[1.0, 0.0], [3.0, 0.0]])
    np.testing.assert_array_equal(mf_drift0(cs, 0.0, np.zeros(2), atoms), [2.0])


def test_attraction_hand_sum():
    cs = make_system("attraction")
    atoms = np.array([[-1.0, 0.0], [0.3, 0.0], [2.0, 0.0]])
    z = np.array([0.25, 0.0])
    out = mf_drift0(cs, 0.0, z, atoms)
    assert out[0] == pytest.approx(ATTRACTION_MF, abs=1e-15)


def test_sigma_average_of_indicators():
    cs = eta_indicator_sigma_system()
    atoms = np.array([[0.0, 1.0], [0.0, -1.0]])
    sig = mf_sigma(cs, 0.0, np.zeros(2), atoms)
    assert sig[0, 0] == pytest.approx(1.25, abs=0)
    assert sig.shape == (1, 1)


def test_sigma_identity_any_measure():
    cs = make_system("free-d2")
    atoms = np.random.default_rng(0).uniform(-3, 3, (17, 4))
    np.testing.assert_array_equal(mf_sigma(cs, 1.0, np.zeros(4), atoms), np.eye(2))


def test_empty_measure_rejected():
    cs = make_system("free")
    with pytest.raises(DomainError):
        mf_drift0(cs, 0.0, np.zeros(2), np.zeros((0, 2)))
    with pytest.raises(DomainError):
        EmpiricalMeasure(np.zeros((0, 2)))


def test_batch_single_atom_self_interaction():
    cs = make_system("attraction")
    atoms = np.array([[0.7, -0.2]])
    b0, b1, sig = mf_batch(cs, 0.0, atoms)
    # singleton measure: mean-field value equals the kernel at zeta = z
    np.testing.assert_array_equal(b0[0], np.asarray(cs.b0(0.0, atoms[0], atoms[0])))
    np.testing.assert_array_equal(sig[0], np.eye(1))


def test_batch_constant_rows_identical():
    cs = constant_system(v=(1.5,), d=1)
    atoms = np.random.default_rng(1).uniform(-2, 2, (50, 2))
    b0, b1, sig = mf_batch(cs, 0.0, atoms)
    assert np.all(b0 == b0[0])
    assert np.all(sig == sig[0])


def test_batch_matches_pointwise_calls():
    cs = make_system("attraction")
    atoms = np.random.default_rng(2).uniform(-1, 1, (3, 2))
    b0, b1, sig = mf_batch(cs, 0.3, atoms)
    for i in range(3):
        np.testing.assert_array_equal(b0[i], mf_drift0(cs, 0.3, atoms[i], atoms))
        np.testing.assert_array_equal(b1[i], mf_drift1(cs, 0.3, atoms[i], atoms))
        np.testing.assert_array_equal(sig[i], mf_sigma(cs, 0.3, atoms[i], atoms))


def test_batch_matches_on_mixed_system():
    cs = mixed_system()
    atoms = np.random.default_rng(7).uniform(-2, 2, (5, 2))
    _, b1, _ = mf_batch(cs, 0.1, atoms)
    for i in range(5):
        np.testing.assert_array_equal(b1[i], mf_drift1(cs, 0.1, atoms[i], atoms))


def test_permutation_invariance_within_roundoff():
    cs = make_system("attraction")
    gen = np.random.default_rng(3)
    atoms = gen.uniform(-3, 3, (257, 2))
    z = np.array([0.1, 0.2])
    base = mf_drift0(cs, 0.0, z, atoms)
    for _ in range(5):
        perm = gen.permutation(257)
        out = mf_drift0(cs, 0.0, z, atoms[perm])
        assert np.max(np.abs(out - base)) <= 1e-12


def test_outputs_inherit_bounds():
    cs = make_system("rough")
    gen = np.random.default_rng(4)
    atoms = gen.uniform(-5, 5, (64, 2))
    b0, b1, sig = mf_batch(cs, 0.8, atoms)
    total = (np.linalg.norm(b0, axis=1) + np.linalg.norm(b1, axis=1)
             + np.linalg.norm(sig, axis=(1, 2)))
    assert np.all(total <= cs.bound_C + 1e-12)
    assert np.all(np.linalg.eigvalsh(sig)[..., 0] >= cs.ellipticity_nu - 1e-12)


def test_full_subsample_is_bitwise_identical():
    cs = make_system("attraction")
    atoms = np.random.default_rng(5).uniform(-2, 2, (40, 2))
    full = mf_batch(cs, 0.0, atoms)
    capped = mf_batch(cs, 0.0, atoms, subsample=40)
    over = mf_batch(cs, 0.0, atoms, subsample=1000)
    for a, b, c in zip(full, capped, over):
        assert np.array_equal(a, b)
        assert np.array_equal(a, c)


def test_subsample_is_seeded_and_deterministic():
    cs = make_system("attraction")
    atoms = np.random.default_rng(6).uniform(-2, 2, (64, 2))
    a = mf_batch(cs, 0.0, atoms, subsample=16, seed=9, step=3)
    b = mf_batch(cs, 0.0, atoms, subsample=16, seed=9, step=3)
    c = mf_batch(cs, 0.0, atoms, subsample=16, seed=9, step=4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not all(np.array_equal(x, y) for x, y in zip(a, c))


def test_subsample_zero_rejected():
    cs = make_system("free")
    with pytest.raises(ConfigError):
        mf_batch(cs, 0.0, np.zeros((3, 2)), subsample=0)


def test_worker_count_does_not_change_results():
    cs = make_system("attraction")
    atoms = np.random.default_rng(8).uniform(-2, 2, (500, 2))
    one = mf_batch(cs, 0.2, atoms, workers=1)
    four = mf_batch(cs, 0.2, atoms, workers=4)
    for a, b in zip(one, four):
        assert np.array_equal(a, b)
