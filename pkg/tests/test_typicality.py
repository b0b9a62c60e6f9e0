import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import bernoulli_typical, random_state, typical_sequences
from qgp.exceptions import DimensionCapError
from qgp.tensor_core import (
    DensityOperator,
    PureState,
    dimension_cap,
    maximally_mixed,
    tensor_power,
)
from qgp.typicality import (
    HaarSampler,
    classical_typical_set,
    epsilon_schedule,
    gentle_measurement_check,
    group_spectrum,
    haar_unitary,
    typical_projector,
    typicality_report,
)

seeds = st.integers(0, 2**32 - 1)

# exhaustive enumeration, frozen
BERNOULLI_03_N10_E02 = (375, 0.7004233214999996)
SPECTRUM_73_N8_E015 = 84


# -- Haar sampling ----------------------------------------------------------------


def test_haar_unitary_is_unitary():
    s = HaarSampler(7, dim=5)
    for _ in range(20):
        u = haar_unitary(s, "A").matrix
        assert np.max(np.abs(u.conj().T @ u - np.eye(5))) < 1e-12
    assert s.counter == 20


def test_haar_first_moment():
    s = HaarSampler(11, dim=4)
    vals = np.array([abs(s.next_unitary()[0, 0]) ** 2 for _ in range(5000)])
    assert abs(vals.mean() - 0.25) < 0.02


def test_haar_left_invariance():
    d, n = 3, 2000
    v = HaarSampler(99, dim=d).unitary_at(0)
    a, b = HaarSampler(5, d, stream=1), HaarSampler(5, d, stream=2)
    us = np.array([a.next_unitary() for _ in range(n)])
    vus = np.array([v @ b.next_unitary() for _ in range(n)])
    m1, m2 = np.abs(us) ** 2, np.abs(vus) ** 2
    se = np.sqrt(m1.var(axis=0) / n + m2.var(axis=0) / n)
    assert np.all(np.abs(m1.mean(axis=0) - m2.mean(axis=0)) < 5 * se)
    # entries are centred
    assert np.all(np.abs(vus.mean(axis=0)) < 5 * np.sqrt(1 / (d * n)))


def test_haar_replay():
    a, b = HaarSampler(123, 4), HaarSampler(123, 4)
    seq_a = [a.next_unitary() for _ in range(5)]
    seq_b = [b.next_unitary() for _ in range(5)]
    for x, y in zip(seq_a, seq_b):
        assert x.tobytes() == y.tobytes()
    # random access matches sequential draws
    assert HaarSampler(123, 4).unitary_at(3).tobytes() == seq_a[3].tobytes()
    c = HaarSampler(123, 4)
    c.skip(4)
    assert c.next_unitary().tobytes() == seq_a[4].tobytes()
    assert HaarSampler(124, 4).unitary_at(0).tobytes() != seq_a[0].tobytes()


def test_haar_spawn_streams_distinct():
    root = HaarSampler(1, 2)
    kids = [root.spawn(i) for i in range(3)]
    draws = {k.unitary_at(0).tobytes() for k in kids}
    assert len(draws) == 3
    assert root.spawn(1).unitary_at(0).tobytes() == kids[1].unitary_at(0).tobytes()
    assert kids[0].stream == (0,)
    assert root.spawn(0, dim=3).unitary_at(0).shape == (3, 3)


def test_haar_sampler_rejects():
    with pytest.raises(ValueError):
        HaarSampler(-1)
    with pytest.raises(ValueError):
        HaarSampler(2**64)
    with pytest.raises(ValueError):
        HaarSampler(0, dim=0)


def test_epsilon_schedule():
    assert epsilon_schedule()(16) == 0.5
    assert epsilon_schedule("half")(16) == 0.25
    assert epsilon_schedule("fixed=0.3")(7) == 0.3
    with pytest.raises(ValueError):
        epsilon_schedule("cubic")
    with pytest.raises(ValueError):
        epsilon_schedule("fixed=0")


# -- classical typical sets ----------------------------------------------------------


@pytest.mark.parametrize("n", [1, 4, 9])
def test_uniform_bits_all_typical(n):
    ts = classical_typical_set([0.5, 0.5], n, 0.01)
    assert ts.size == 2**n
    assert abs(ts.probability - 1) < 1e-12


def test_deterministic_distribution():
    ts = classical_typical_set([0.0, 1.0, 0.0], 5, 0.1)
    assert ts.size == 1
    np.testing.assert_array_equal(ts.sequences, [[1] * 5])
    assert ts.probability == 1.0


def test_bernoulli_typical_set():
    ts = classical_typical_set([0.7, 0.3], 10, 0.2)
    assert (ts.size, ts.probability) == pytest.approx(BERNOULLI_03_N10_E02, abs=1e-12)
    assert (ts.size, ts.probability) == pytest.approx(bernoulli_typical(0.3, 10, 0.2), abs=1e-12)
    # every member is decided by its number of ones
    ones = ts.sequences.sum(axis=1)
    assert set(ones.tolist()) <= {1, 2, 3, 4, 5}


@given(
    p=st.lists(st.floats(0.05, 1.0), min_size=2, max_size=3),
    n=st.integers(1, 6),
    eps=st.floats(0.01, 0.8),
)
def test_typical_set_vs_enumeration(p, n, eps):
    p = np.array(p) / sum(p)
    ts = classical_typical_set(p, n, eps)
    count, mass = typical_sequences(list(p), n, eps)
    assert ts.size == count
    assert abs(ts.probability - mass) < 1e-10


def test_classical_guard_and_errors():
    with pytest.raises(DimensionCapError):
        classical_typical_set([0.5, 0.5], 23, 0.1)
    with pytest.raises(ValueError):
        classical_typical_set([0.5, 0.6], 3, 0.1)
    with pytest.raises(ValueError):
        classical_typical_set([0.5, 0.5], 0, 0.1)
    with pytest.raises(ValueError):
        classical_typical_set([0.5, 0.5], 3, 0.0)


# -- typical projectors -----------------------------------------------------------


def test_pure_state_projector():
    v = np.array([1, 1j]) / np.sqrt(2)
    psi = PureState(v, [("A", 2)]).density()
    tp = typical_projector(psi, 3, 0.1)
    assert tp.typical_dim == 1
    vn = np.kron(np.kron(v, v), v)
    np.testing.assert_allclose(tp.projector.matrix, np.outer(vn, vn.conj()), atol=1e-12)
    assert abs(tp.mass - 1) < 1e-12


@pytest.mark.parametrize("n", [1, 3, 5])
def test_maximally_mixed_full(n):
    tp = typical_projector(maximally_mixed([("A", 2)]), n, 1e-3)
    assert tp.typical_dim == 2**n
    np.testing.assert_allclose(tp.projector.matrix, np.eye(2**n), atol=1e-12)
    gm = gentle_measurement_check(tp)
    assert abs(gm.mass - 1) < 1e-12 and gm.post_distance < 1e-12


def test_projector_matches_classical_count(rng):
    u = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]
    rho = DensityOperator(u @ np.diag([0.7, 0.3]) @ u.conj().T, [("A", 2)])
    tp = typical_projector(rho, 8, 0.15)
    assert tp.typical_dim == SPECTRUM_73_N8_E015
    assert tp.typical_dim == classical_typical_set([0.7, 0.3], 8, 0.15).size
    assert tp.typical_dim == bernoulli_typical(0.3, 8, 0.15)[0]
    assert tp.typical_dim <= tp.dimension_bound
    assert tp.projector.in_layout.labels == tuple(f"A_{i}" for i in range(1, 9))
    assert tp.isometry.in_layout.labels == ("A_typ",)


@given(seed=seeds, d=st.integers(2, 3), n=st.integers(1, 4), eps=st.floats(0.05, 1.0))
def test_projector_invariants(seed, d, n, eps):
    rng = np.random.default_rng(seed)
    rho = DensityOperator(random_state(rng, d), [("A", d)])
    try:
        tp = typical_projector(rho, n, eps)
    except ValueError:
        return
    p = tp.projector.matrix
    assert np.max(np.abs(p @ p - p)) < 1e-10
    assert np.max(np.abs(p - p.conj().T)) < 1e-12
    assert tp.typical_dim <= tp.dimension_bound
    assert 0 <= tp.mass <= 1 + 1e-12
    big = tensor_power(rho, n, lambda lab, i: f"{lab}_{i}").matrix
    assert np.linalg.norm(p @ big - big @ p, 2) < 1e-12
    assert abs(np.trace(p @ big).real - tp.mass) < 1e-10
    iso = tp.isometry.matrix
    assert np.max(np.abs(iso.conj().T @ iso - np.eye(tp.typical_dim))) < 1e-10


def test_degenerate_spectrum_grouped():
    w = np.array([0.5, 0.5 + 1e-14, 0.2, 0.2 - 5e-13])
    g = group_spectrum(w)
    assert g[0] == g[1] and g[2] == g[3]
    assert abs(g.sum() - w.sum()) < 1e-15
    # typicality depends only on the spectrum, not on the eigenbasis picked inside a block
    rho = DensityOperator(np.diag([0.4, 0.4, 0.2]).astype(complex), [("A", 3)])
    tp = typical_projector(rho, 2, 0.25)
    assert tp.typical_dim == classical_typical_set([0.4, 0.4, 0.2], 2, 0.25).size == 4


def test_typical_projector_cap_and_empty():
    rho = maximally_mixed([("A", 2)])
    with dimension_cap(64):
        with pytest.raises(DimensionCapError):
            typical_projector(rho, 7, 0.1)
    biased = DensityOperator(np.diag([0.7, 0.3]), [("A", 2)])
    with pytest.raises(ValueError):
        typical_projector(biased, 2, 0.15)


# -- gentle measurement -------------------------------------------------------------


def test_gentle_measurement_example():
    tp = typical_projector(DensityOperator(np.diag([0.9, 0.1]), [("A", 2)]), 6, 0.3)
    gm = gentle_measurement_check(tp)
    assert gm.holds
    assert gm.post_distance <= gm.bound + 1e-9
    # both sides from the sequence probabilities: the disturbance is 2 (1 - mass)
    count, mass = bernoulli_typical(0.1, 6, 0.3)
    assert tp.typical_dim == count
    assert abs(gm.mass - mass) < 1e-12
    assert abs(gm.post_distance - 2 * (1 - mass)) < 1e-12
    assert abs(gm.bound - 2 * np.sqrt(1 - mass)) < 1e-12


@given(q=st.floats(0.02, 0.5), n=st.integers(1, 8), eps=st.floats(0.05, 1.0))
def test_gentle_measurement_property(q, n, eps):
    rho = DensityOperator(np.diag([1 - q, q]), [("A", 2)])
    try:
        tp = typical_projector(rho, n, eps)
        gm = gentle_measurement_check(tp)
    except ValueError:
        return
    assert gm.holds


def test_mass_trend():
    masses = {n: classical_typical_set([0.7, 0.3], n, 0.15).probability for n in range(2, 11)}
    assert masses[10] >= masses[2]
    assert masses[10] == pytest.approx(0.7004233214999996, abs=1e-12)
    for q in (0.1, 0.2, 0.4):
        assert classical_typical_set([1 - q, q], 10, 0.2).probability >= classical_typical_set(
            [1 - q, q], 2, 0.2
        ).probability


def test_typicality_report():
    rep = typicality_report([0.7, 0.3], 8, 0.15)
    assert rep["typical_dim"] == rep["classical_count"] == SPECTRUM_73_N8_E015
    assert rep["counts_match"] and rep["bound_holds"] and rep["gentle_holds"]
    assert rep["mass"] == pytest.approx(bernoulli_typical(0.3, 8, 0.15)[1], abs=1e-12)
