import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ptrace, random_ket, trace_norm
from qgp.decoupling import (
    concentration_probe,
    decoupled_residual,
    fqsw_bound_check,
    iid_decoupling_experiment,
    largest_divisor_at_most,
)
from qgp.exceptions import LayoutError
from qgp.tensor_core import (
    LinearMap,
    PureState,
    apply_map,
    maximally_entangled,
    partial_trace,
    random_pure_state,
    tensor_product,
    trace_distance,
)
from qgp.typicality import HaarSampler

seeds = st.integers(0, 2**32 - 1)

# pinned regression, fixed sampler streams
SKEWED = np.array([0.9, 0.1, 0.2, 0.6j]) / np.linalg.norm([0.9, 0.1, 0.2, 0.6])
IID_FORCED_SPLIT = {2: (3, 1.7256466380012327), 3: (7, 1.93426555968814)}


def product_state(rng, da, dr):
    return tensor_product(random_pure_state([("A", da)], rng), random_pure_state([("R", dr)], rng))


# -- decoupled_residual ----------------------------------------------------------


def test_residual_identity_trivial_hat(rng):
    psi = random_pure_state([("A", 4), ("R", 2)], rng)
    res = decoupled_residual(psi, np.eye(4), (4, 1))
    assert res.layout.labels == ("A-", "R")
    np.testing.assert_allclose(res.matrix, psi.density().matrix, atol=1e-14)


def test_residual_product_keeps_reference(rng):
    psi = product_state(rng, 4, 3)
    psi_r = partial_trace(psi, "R")
    for k in range(5):
        u = HaarSampler(3).unitary_at(k, 4)
        res = decoupled_residual(psi, u, (2, 2))
        np.testing.assert_allclose(partial_trace(res, "R").matrix, psi_r.matrix, atol=1e-14)
        prod = tensor_product(partial_trace(res, "A-"), psi_r)
        assert trace_distance(res, prod) < 1e-12


def test_residual_matches_oracle(rng):
    psi = random_pure_state([("A", 4), ("C", 2), ("R", 2)], rng)
    u = HaarSampler(8).unitary_at(0, 4)
    res = decoupled_residual(psi, u, (2, 2))
    # (U (x) I) |psi>, A = A- (x) A^, order A- A^ C R; keep A- and R
    full = np.kron(u, np.eye(4)) @ psi.vector
    want = ptrace(np.outer(full, full.conj()), [2, 2, 2, 2], [0, 3])
    np.testing.assert_allclose(res.matrix, want, atol=1e-14)


@given(seed=seeds, split=st.sampled_from([(1, 4), (2, 2), (4, 1)]))
def test_residual_trace_positive(seed, split):
    rng = np.random.default_rng(seed)
    psi = PureState(random_ket(rng, 4 * 2 * 2), [("A", 4), ("R", 2), ("E", 2)])
    res = decoupled_residual(psi, HaarSampler(seed).unitary_at(0, 4), split)
    assert abs(res.trace - 1) < 1e-12
    assert np.linalg.eigvalsh(res.matrix).min() > -1e-10


def test_residual_errors(rng):
    psi = random_pure_state([("A", 4), ("R", 2)], rng)
    with pytest.raises(LayoutError):
        decoupled_residual(psi, np.eye(4), (3, 1))
    with pytest.raises(LayoutError):
        decoupled_residual(psi, np.eye(2), (2, 1))


# -- fqsw_bound_check -----------------------------------------------------------------


def test_bound_product_example(rng):
    psi = product_state(rng, 4, 2)
    rep = fqsw_bound_check(psi, (2, 2), HaarSampler(1, 4), 200)
    assert rep.rhs_bound == pytest.approx(2.0, abs=1e-12)
    assert rep.dims == (4, 2, 2, 2)
    assert rep.lhs_mean <= 2
    assert rep.bound_satisfied and rep.exists_individual
    assert all(0 <= v <= 4 for v in rep.lhs_values)


def test_bound_full_hat_gives_zero(rng):
    psi = random_pure_state([("A", 4), ("R", 2), ("E", 3)], rng)
    rep = fqsw_bound_check(psi, (1, 4), HaarSampler(2, 4), 50)
    assert max(rep.lhs_values) < 1e-24


def test_bound_maximally_entangled():
    psi = maximally_entangled(("A", "R"), 4)
    rep = fqsw_bound_check(psi, (2, 2), HaarSampler(3, 4), 200)
    assert rep.purity == pytest.approx(1.0, abs=1e-12)
    assert rep.rhs_bound == pytest.approx(4.0, abs=1e-12)
    assert rep.bound_satisfied
    assert rep.lhs_mean <= 4


def test_bound_lhs_matches_oracle(rng):
    psi = random_pure_state([("A", 4), ("R", 2), ("E", 2)], rng)
    s = HaarSampler(10, 4)
    rep = fqsw_bound_check(psi, (2, 2), s, 5)
    assert s.counter == 5
    psi_r = partial_trace(psi, "R").matrix
    for k, val in enumerate(rep.lhs_values):
        res = decoupled_residual(psi, s.unitary_at(k, 4), (2, 2)).matrix
        assert abs(val - trace_norm(res - np.kron(np.eye(2) / 2, psi_r)) ** 2) < 1e-12
    rows = list(rep.csv_rows())
    assert rows[0] == ("stream_index", "lhs") and len(rows) == 6
    assert rep.to_dict()["dims"] == {"A": 4, "A_hat": 2, "A_bar": 2, "R": 2}


def test_bound_rhs_uses_ar_purity(rng):
    psi = random_pure_state([("A", 2), ("R", 2), ("E", 2)], rng)
    rep = fqsw_bound_check(psi, (1, 2), HaarSampler(4, 2), 3)
    rho_ar = partial_trace(psi, ["A", "R"]).matrix
    assert rep.purity == pytest.approx(np.trace(rho_ar @ rho_ar).real, abs=1e-12)
    assert rep.rhs_bound == pytest.approx(2 * 2 / 4 * rep.purity, abs=1e-12)


@pytest.mark.parametrize("da, split, dr", [(2, (1, 2), 2), (4, (4, 1), 2), (8, (4, 2), 4)])
def test_bound_holds(da, split, dr):
    rng = np.random.default_rng(da * 10 + dr)
    psi = random_pure_state([("A", da), ("R", dr), ("E", 2)], rng)
    assert fqsw_bound_check(psi, split, HaarSampler(da, da), 100).bound_satisfied


def test_bound_invariant_under_reference_rotation(rng):
    psi = random_pure_state([("A", 4), ("R", 2), ("E", 2)], rng)
    v = HaarSampler(77).unitary_at(0, 2)
    rotated = apply_map(LinearMap(v, [("R", 2)], [("R", 2)], "unitary"), psi)
    a = fqsw_bound_check(psi, (2, 2), HaarSampler(5, 4), 300)
    b = fqsw_bound_check(rotated, (2, 2), HaarSampler(5, 4), 300)
    # same unitaries: the values themselves agree, which is stronger than 3 SE
    np.testing.assert_allclose(a.lhs_values, b.lhs_values, atol=1e-10)
    c = fqsw_bound_check(rotated, (2, 2), HaarSampler(6, 4), 300)
    assert abs(a.lhs_mean - c.lhs_mean) <= 3 * np.hypot(a.standard_error, c.standard_error)


def test_bound_errors(rng):
    psi = random_pure_state([("A", 4), ("R", 2)], rng)
    with pytest.raises(ValueError):
        fqsw_bound_check(psi, (2, 2), HaarSampler(0, 4), 0)
    with pytest.raises(LayoutError):
        fqsw_bound_check(psi, (2, 2), HaarSampler(0, 4), 5, r=("A",))


def test_bound_replay(rng):
    psi = random_pure_state([("A", 4), ("R", 2)], rng)
    a = fqsw_bound_check(psi, (2, 2), HaarSampler(9, 4), 20)
    b = fqsw_bound_check(psi, (2, 2), HaarSampler(9, 4), 20)
    assert a.lhs_values == b.lhs_values


# -- concentration ---------------------------------------------------------------


def test_concentration_degenerate(rng):
    psi = random_pure_state([("A", 4), ("R", 2)], rng)
    rep = concentration_probe(psi, (4, 1), HaarSampler(1, 4), 100)
    # |A^| = 1 keeps everything: the residual is psi^{AR} rotated, the deviation is U-independent
    assert rep.std_dev < 1e-10


def test_concentration_generic(rng):
    psi = random_pure_state([("A", 4), ("R", 2), ("E", 2)], rng)
    rep = concentration_probe(psi, (2, 2), HaarSampler(2, 4), 300)
    assert rep.outlier_fraction <= 0.1
    with pytest.raises(ValueError):
        concentration_probe(psi, (2, 2), HaarSampler(2, 4), 50)


def test_concentration_trend():
    stds = []
    for da in (4, 8, 16):
        rng = np.random.default_rng(da)
        psi = random_pure_state([("A", da), ("R", 2), ("E", 2)], rng)
        stds.append(concentration_probe(psi, (2, da // 2), HaarSampler(da, da), 200).std_dev)
    assert stds[0] >= stds[1] >= stds[2]


# -- iid experiment --------------------------------------------------------------


def test_iid_maximally_entangled_n1():
    rep = iid_decoupling_experiment(maximally_entangled(("A", "R"), 2), 1, HaarSampler(0))
    assert rep.typical_dim == 2
    assert rep.a_hat_dim == 2 and rep.a_bar_dim == 1
    assert rep.mutual_information == pytest.approx(2.0)
    assert rep.distance < 1e-12


def test_iid_product_state(rng):
    psi = product_state(rng, 2, 2)
    for n in (1, 2, 3):
        rep = iid_decoupling_experiment(psi, n, HaarSampler(7))
        assert rep.mutual_information == pytest.approx(0.0, abs=1e-12)
        assert rep.typical_dim == 1
        assert rep.distance < 1e-12


def test_iid_pinned_regression():
    psi = PureState(SKEWED, [("A", 2), ("R", 2)])
    for n in (1, 2, 3):
        rep = iid_decoupling_experiment(psi, n, HaarSampler(2024, stream=n))
        assert rep.a_bar_dim == 1 and rep.distance < 1e-12
        assert rep.draw == 0
    for n, (t, dist) in IID_FORCED_SPLIT.items():
        rep = iid_decoupling_experiment(psi, n, HaarSampler(2024, stream=n), a_hat_dim=1)
        assert rep.typical_dim == t and rep.a_bar_dim == t
        assert rep.distance == pytest.approx(dist, abs=1e-12)


def test_iid_errors():
    psi = PureState(SKEWED, [("A", 2), ("R", 2)])
    with pytest.raises(LayoutError):
        iid_decoupling_experiment(psi, 2, HaarSampler(0), a_hat_dim=2)
    with pytest.raises(LayoutError):
        iid_decoupling_experiment(psi, 2, HaarSampler(0), a_hat_dim=6)


def test_largest_divisor():
    assert largest_divisor_at_most(12, 5) == 4
    assert largest_divisor_at_most(7, 6.9) == 1
    assert largest_divisor_at_most(8, 8) == 8
    assert largest_divisor_at_most(9, 0.5) == 1
