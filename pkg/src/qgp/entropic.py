"""Von Neumann entropies and the mutual-information quantities built on them.

All logarithms are base 2. Every function reduces the input state to the
queried subsystems and diagonalizes; nothing is cached between calls.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .exceptions import LayoutError, StateValidationError
from .tensor_core import PureState, State, _as_labels, marginal_eigenvalues

NEGATIVE_EIG_TOL = 1e-9


@dataclass(frozen=True)
class EntropyReport:
    quantity_name: str
    value: float
    state_fingerprint: str
    subsystem_args: tuple[tuple[str, ...], ...]


def state_fingerprint(x: State) -> str:
    """SHA-256 over the layout and the raw amplitudes/matrix entries."""
    h = hashlib.sha256(repr(x.layout.subsystems).encode())
    data = x.vector if isinstance(x, PureState) else x.matrix
    h.update(np.ascontiguousarray(data).tobytes())
    return h.hexdigest()


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) if p.size else 0.0


def _entropy_of_eigenvalues(w: np.ndarray) -> float:
    if w.size and w[0] < -NEGATIVE_EIG_TOL:
        raise StateValidationError(f"state has eigenvalue {w[0]:.3e}, below roundoff tolerance")
    w = w[w > 0]
    h = float(-np.sum(w * np.log2(w)))
    return max(h, 0.0)


def von_neumann_entropy(rho: State, subsystems=None) -> float:
    """Entropy in bits of the marginal on ``subsystems`` (all of them by default).

    The empty set has zero entropy.
    """
    labels = rho.layout.labels if subsystems is None else _as_labels(subsystems)
    if not labels:
        return 0.0
    return _entropy_of_eigenvalues(np.sort(marginal_eigenvalues(rho, labels)))


def _disjoint(*groups) -> list[tuple[str, ...]]:
    out = [_as_labels(g) for g in groups]
    seen = set()
    for g in out:
        for lab in g:
            if lab in seen:
                raise LayoutError(f"subsystem {lab!r} appears in more than one argument")
            seen.add(lab)
    return out


def mutual_information(rho: State, a, b) -> float:
    """``I(A;B) = H(A) + H(B) - H(AB)``."""
    a, b = _disjoint(a, b)
    h = von_neumann_entropy
    return h(rho, a) + h(rho, b) - h(rho, a + b)


def conditional_mutual_information(rho: State, a, b, c) -> float:
    """``I(A;B|C) = H(AC) + H(BC) - H(ABC) - H(C)``."""
    a, b, c = _disjoint(a, b, c)
    h = von_neumann_entropy
    return h(rho, a + c) + h(rho, b + c) - h(rho, a + b + c) - h(rho, c)


def coherent_information(rho: State, a, b) -> float:
    """``I(A>B) = H(B) - H(AB)``."""
    a, b = _disjoint(a, b)
    return von_neumann_entropy(rho, b) - von_neumann_entropy(rho, a + b)


def check_mi_identity(rho: State, a, b, c) -> float:
    """Residual of ``I(A;B) - I(A;B|C) = I(A;C) - I(A;C|B)``; zero on any state."""
    a, b, c = _disjoint(a, b, c)
    left = mutual_information(rho, a, b) - conditional_mutual_information(rho, a, b, c)
    right = mutual_information(rho, a, c) - conditional_mutual_information(rho, a, c, b)
    return abs(left - right)


_QUANTITIES = {
    "entropy": von_neumann_entropy,
    "mutual_information": mutual_information,
    "conditional_mutual_information": conditional_mutual_information,
    "coherent_information": coherent_information,
}


def entropy_report(name: str, rho: State, *subsystem_args) -> EntropyReport:
    """Evaluate one named quantity and package it with a state fingerprint."""
    try:
        fn = _QUANTITIES[name]
    except KeyError:
        raise ValueError(f"unknown quantity {name!r}; choose from {sorted(_QUANTITIES)}") from None
    value = fn(rho, *subsystem_args)
    if not np.isfinite(value):
        raise StateValidationError(f"{name} evaluated to {value}")
    return EntropyReport(name, float(value), state_fingerprint(rho),
                         tuple(_as_labels(g) for g in subsystem_args))
