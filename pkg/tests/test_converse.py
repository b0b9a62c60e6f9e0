import numpy as np
import pytest

from qgp.channels import defective_memory_channel, depolarizing_channel, identity_channel, pauli_reveal_channel
from qgp.coding import build_code, converse_chain_check, d_eps, random_code
from qgp.coding.converse import IDENTITY_NAMES
from qgp.exceptions import LayoutError
from qgp.tensor_core import PureState, maximally_entangled, tensor_product
from qgp.typicality import HaarSampler


def perfect_code(n):
    sigma = tensor_product(maximally_entangled(("A", "A'"), 2), PureState([1], [("S", 1)]))
    art = build_code(sigma, identity_channel(), n, (2**n, 1, 1), HaarSampler(0))
    assert art.epsilon_achieved < 1e-9
    return art


def test_perfect_code_n2():
    art = perfect_code(2)
    led = converse_chain_check(art.W_enc, art.V_dec, identity_channel(), 2, Q=1.0, epsilon=0.0)
    assert led.fannes_threshold == 4.0
    assert abs(led.fannes_lhs - 4.0) < 1e-8
    assert led.fannes_satisfied and led.fannes_satisfied_clamped
    assert led.identities_pass and led.max_identity_residual < 1e-8
    assert led.slacks_nonnegative
    assert led.telescoped_holds
    assert abs(led.independence_RBt) < 1e-8 and abs(led.independence_RBt_S) < 1e-8
    assert led.code_error < 1e-9
    assert led.encoder_isometric
    assert [s.i for s in led.steps] == [2]
    step = led.steps[0]
    assert set(step.identities) == set(IDENTITY_NAMES)
    assert abs(step.slack - step.gap_mi) < 1e-8
    assert abs(step.side_product_gap) < 1e-10


def test_default_q_is_message_rate():
    art = perfect_code(2)
    led = converse_chain_check(art.W_enc, None, identity_channel(), 2)
    assert led.Q == 1.0 and led.code_error is None


def test_n1_chain_is_vacuous():
    art = perfect_code(1)
    led = converse_chain_check(art.W_enc, art.V_dec, identity_channel(), 1, Q=1.0, epsilon=0.0)
    assert led.steps == []
    assert led.fannes_threshold == 2.0
    assert abs(led.fannes_lhs - 2.0) < 1e-8
    assert led.endpoints["chain_residual"] < 1e-10
    assert led.telescoped_holds
    assert led.csv_text() == "i\n"


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_code_negative_control(seed):
    ch = identity_channel()
    w, v = random_code(ch, 2, 4, np.random.default_rng(seed))
    led = converse_chain_check(w, v, ch, 2, Q=1.0, epsilon=0.0)
    assert led.encoder_isometric
    assert led.identities_pass
    assert led.slacks_nonnegative
    assert led.telescoped_holds
    assert not led.fannes_satisfied
    assert led.code_error > 0.5


@pytest.mark.parametrize("ch", [depolarizing_channel(0.4), defective_memory_channel(0.5, 0.3)])
def test_identities_on_noisy_random_codes(ch):
    w, v = random_code(ch, 2, 2, np.random.default_rng(3), d_b=2)
    led = converse_chain_check(w, v, ch, 2, epsilon=0.2)
    assert led.identities_pass
    assert led.slacks_nonnegative
    assert led.telescoped_holds
    assert abs(led.independence_RBt_S) < 1e-8


def test_pauli_random_code_n2():
    ch = pauli_reveal_channel()
    w, v = random_code(ch, 2, 2, np.random.default_rng(4))
    led = converse_chain_check(w, v, ch, 2)
    assert led.identities_pass and led.slacks_nonnegative
    rows = led.csv_text().splitlines()
    assert rows[0].startswith("i,") and len(rows) == 2


def test_raw_and_clamped_threshold():
    art = perfect_code(2)
    led = converse_chain_check(art.W_enc, art.V_dec, identity_channel(), 2, Q=1.0, epsilon=0.1)
    d = d_eps(0.1, 2, 1.0)
    assert d < 0
    assert led.d == d
    assert led.fannes_threshold == pytest.approx(4 * (1 - d))
    assert led.fannes_threshold_clamped == pytest.approx(4.0)
    # the negative entropy term pushes the raw threshold above what any code can reach
    assert not led.fannes_satisfied and led.fannes_satisfied_clamped


def test_converse_errors():
    art = perfect_code(1)
    with pytest.raises(ValueError):
        converse_chain_check(art.W_enc, None, identity_channel(), 0)
    with pytest.raises(LayoutError):
        converse_chain_check(art.V_dec, None, identity_channel(), 1)
