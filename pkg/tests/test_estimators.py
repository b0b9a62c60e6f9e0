import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qgp.channels import KrausChannel, defective_memory_channel, identity_channel
from qgp.coding import optimize_capacity
from qgp.estimators import CapacityOptimizer, CodeBuilder, TypicalSubspace
from qgp.exceptions import ContractViolation, StateValidationError
from qgp.tensor_core import (
    DensityOperator,
    LinearMap,
    PureState,
    maximally_entangled,
    tensor_power,
    tensor_product,
)
from qgp.typicality import HaarSampler, copy_label
from qgp.validation import (
    check_channel,
    check_isometry,
    check_positive_int,
    check_seed,
    check_state,
    hermiticity_residual,
    require,
)


def test_capacity_optimizer_matches_function():
    ch = defective_memory_channel(0.5, 0.0)
    est = CapacityOptimizer(dim_A=2, env_dim=2, restarts=2, max_iter=200, seed=4).fit(ch)
    res = optimize_capacity(ch, 2, 2, 2, HaarSampler(4), max_iter=200)
    assert est.rate_ == res.rate
    assert est.score() == est.rate_
    assert est.classical_rate_ == 2 * est.rate_
    params = clone(est).get_params()
    assert params == {"dim_A": 2, "env_dim": 2, "restarts": 2, "max_iter": 200, "seed": 4, "n_jobs": 1}
    with pytest.raises(NotFittedError):
        CapacityOptimizer().score()


def test_capacity_optimizer_rejects_bad_params():
    ch = identity_channel()
    with pytest.raises(ValueError):
        CapacityOptimizer(restarts=0).fit(ch)
    with pytest.raises(ValueError):
        CapacityOptimizer(seed=-1).fit(ch)
    with pytest.raises(TypeError):
        CapacityOptimizer().fit("identity")


def test_code_builder():
    sigma = tensor_product(maximally_entangled(("A", "A'"), 2), PureState([1], [("S", 1)]))
    est = CodeBuilder(n=1, sizes=(2, 1, 1), seed=0).fit(sigma, identity_channel())
    assert est.epsilon_ < 1e-9
    assert est.score() == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(NotFittedError):
        CodeBuilder().score()


def test_typical_subspace_transform():
    rho = DensityOperator(np.diag([0.9, 0.1]), [("A", 2)])
    est = TypicalSubspace(n=3, epsilon=0.8).fit(rho)
    # the all-zero sequence and the three with a single one
    assert est.typical_dim_ == 4
    big = tensor_power(PureState(np.array([0.6, 0.8]), [("A", 2)]), 3, copy_label)
    small = est.transform(big)
    assert small.layout.labels == ("A_typ",)
    back = est.inverse_transform(small)
    # compress then embed is the typical projection
    np.testing.assert_allclose(back.vector, est.projector_.projector.matrix @ big.vector, atol=1e-12)
    est2 = TypicalSubspace(n=2, epsilon=0.1).fit(np.eye(2) / 2)
    assert est2.typical_dim_ == 4 and est2.mass_ == pytest.approx(1.0)


def test_validation_helpers():
    with pytest.raises(ContractViolation):
        require(False, "nope")
    with pytest.raises(KeyError):
        require(False, "nope", KeyError)
    require(True, "fine")
    assert check_seed("12") == 12
    assert check_seed(3.0) == 3
    for bad in (2.5, "x", 2**64, -1):
        with pytest.raises(ValueError):
            check_seed(bad)
    assert check_positive_int(3, "k") == 3
    for bad in (0, 1.5, True):
        with pytest.raises(ValueError):
            check_positive_int(bad, "k")
    with pytest.raises(StateValidationError):
        check_state(np.ones(3))
    assert hermiticity_residual(np.array([[0, 1j], [0, 0]])) == 1.0
    v = LinearMap(np.eye(3)[:, :2], [("X", 2)], [("Y", 3)], "isometry")
    assert check_isometry(v) == 0.0


def test_check_channel():
    ch = identity_channel()
    assert check_channel(ch) is ch
    with pytest.raises(TypeError):
        check_channel(KrausChannel([np.eye(2)], [("X", 2)], [("Y", 2)]))
