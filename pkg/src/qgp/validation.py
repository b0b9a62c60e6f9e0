"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import numpy as np

from .channels import SideInfoChannel, validate_cptp
from .exceptions import ContractViolation, StateValidationError
from .tensor_core import DensityOperator, LinearMap, PureState, State


def require(condition: bool, message: str, exc: type[Exception] = ContractViolation) -> None:
    if not condition:
        raise exc(message)


def check_seed(seed) -> int:
    """A seed as a 64-bit unsigned integer."""
    try:
        s = int(seed)
    except (TypeError, ValueError):
        raise ValueError(f"seed {seed!r} is not an integer") from None
    if isinstance(seed, float) and seed != s:
        raise ValueError(f"seed {seed!r} is not an integer")
    if not 0 <= s < 2**64:
        raise ValueError(f"seed {s} is outside [0, 2**64)")
    return s


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or int(value) < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_state(x) -> State:
    """Accept a state object or a square matrix (validated as a density operator)."""
    if isinstance(x, (PureState, DensityOperator)):
        return x
    m = np.asarray(x, dtype=complex)
    if m.ndim == 2 and m.shape[0] == m.shape[1]:
        return DensityOperator(m, [("A", m.shape[0])])
    raise StateValidationError(f"cannot interpret object of shape {m.shape} as a state")


def hermiticity_residual(m) -> float:
    m = np.asarray(m, dtype=complex)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def check_channel(ch) -> SideInfoChannel:
    if not isinstance(ch, SideInfoChannel):
        raise TypeError(f"expected a SideInfoChannel, got {type(ch).__name__}")
    rep = validate_cptp(ch.channel)
    require(not rep.flagged, f"channel is not trace preserving (residual {rep.completeness_residual:.3e})",
            StateValidationError)
    return ch


def check_isometry(m: LinearMap, atol: float = 1e-9) -> float:
    """Residual of ``V^dagger V = 1``."""
    v = m.matrix
    return float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))) if v.size else 0.0
