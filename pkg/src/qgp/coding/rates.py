"""Single-letter rates and entanglement bookkeeping for channels with side information."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..channels import PAULIS, SideInfoChannel, apply_channel, stinespring_dilation
from ..entropic import coherent_information, mutual_information
from ..exceptions import ConstraintError, LayoutError
from ..tensor_core import (
    DensityOperator,
    State,
    apply_map,
    maximally_entangled,
    partial_trace,
    purify,
    trace_distance,
)

MARGINAL_ATOL = 1e-6
ACCOUNTING_ATOL = 1e-8


def _reference_labels(sigma: State, ch: SideInfoChannel) -> tuple[str, ...]:
    needed = ch.a_labels + ch.s_labels
    for lab in needed:
        if lab not in sigma.layout:
            raise LayoutError(f"input state lacks channel subsystem {lab!r}")
        if sigma.layout.dim(lab) != ch.channel.in_layout.dim(lab):
            raise LayoutError(f"subsystem {lab!r} has dimension {sigma.layout.dim(lab)}, "
                              f"channel expects {ch.channel.in_layout.dim(lab)}")
    extra = set(ch.channel.in_layout.labels) - set(needed)
    if extra:
        raise LayoutError(f"channel has inputs {sorted(extra)} not supplied by the state")
    refs = tuple(lab for lab in sigma.layout.labels if lab not in needed)
    if not refs:
        raise LayoutError("input state has no reference subsystem A")
    return refs


def side_marginal_gap(sigma: State, ch: SideInfoChannel) -> float:
    """Trace distance between ``sigma^S`` and the channel's ``psi^S``."""
    return trace_distance(partial_trace(sigma, ch.s_labels), ch.side_marginal())


def check_side_marginal(sigma: State, ch: SideInfoChannel, atol: float = MARGINAL_ATOL) -> float:
    gap = side_marginal_gap(sigma, ch)
    if gap > atol:
        raise ConstraintError(f"input marginal on S differs from psi^S by {gap:.3e} (tolerance {atol:.0e})")
    return gap


def gp_rate(sigma: State, ch: SideInfoChannel, *, atol: float = MARGINAL_ATOL) -> float:
    """``I(A;B)/2 - I(A;S)/2`` in qubits per use.

    ``A`` is every subsystem of ``sigma`` that the channel does not consume.
    """
    refs = _reference_labels(sigma, ch)
    check_side_marginal(sigma, ch, atol)
    out = apply_channel(ch.channel, sigma)
    return 0.5 * mutual_information(out, refs, ch.b_labels) - 0.5 * mutual_information(sigma, refs, ch.s_labels)


def pauli_precorrection_state() -> DensityOperator:
    """Input on ``(A, A', S)`` that undoes the Pauli announced by ``S``.

    A maximally entangled ``A A'`` pair gets ``sigma_i`` applied to ``A'``
    on branch ``|i><i|_S``; the channel applies ``sigma_i`` again, leaving
    the pair intact.
    """
    phi = maximally_entangled(("A", "A'"), 2).vector
    m = np.zeros((16, 16), dtype=complex)
    for i, p in enumerate(PAULIS):
        branch = np.kron(np.eye(2), p.conj().T) @ phi
        proj = np.zeros((4, 4))
        proj[i, i] = 0.25
        m += np.kron(np.outer(branch, branch.conj()), proj)
    return DensityOperator(m, [("A", 2), ("A'", 2), ("S", 4)])


def d_eps(epsilon: float, n: int, Q: float) -> float:
    """``3 eps Q / 2 + 3 eps log2(eps) / n`` with ``eps log eps = 0`` at zero."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if n < 1:
        raise ValueError("n must be at least 1")
    xlogx = epsilon * math.log2(epsilon) if epsilon > 0 else 0.0
    return 1.5 * epsilon * Q + 3.0 * xlogx / n


@dataclass
class EntanglementAccounting:
    n: int
    consumed: float
    recovered: float
    net: float
    unassisted_rate: float
    coherent_information: float
    log_r: float
    identity_lhs: float
    identity_rhs: float
    identity_residual: float
    identity_holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def dilated_output(sigma: State, ch: SideInfoChannel, *, purifier: str = "D", env: str = "E"):
    """Pure ``A B E D`` state: purify ``sigma`` with ``D`` then apply the Stinespring isometry."""
    psi = purify(sigma.density(), purifier)
    return apply_map(stinespring_dilation(ch.channel, env), psi)


def entanglement_accounting(sigma: State, ch: SideInfoChannel, n: int = 1) -> EntanglementAccounting:
    """Entanglement consumed and recovered by ``n`` uses of the random code.

    ``consumed = n I(A;ED)/2`` and ``recovered = n I(A;S)/2``. With
    ``log R = n [I(A;B) - I(A;S)] / 2`` the balance
    ``log R - consumed + recovered`` equals ``n I(A>B)`` on the pure
    dilated output; ``unassisted_rate`` is ``I(A>B)/2``.
    """
    n = int(n)
    refs = _reference_labels(sigma, ch)
    check_side_marginal(sigma, ch)
    omega = dilated_output(sigma, ch)
    i_aed = mutual_information(omega, refs, ("E", "D"))
    i_ab = mutual_information(omega, refs, ch.b_labels)
    i_as = mutual_information(sigma, refs, ch.s_labels)
    ci = coherent_information(omega, refs, ch.b_labels)
    consumed = 0.5 * n * i_aed
    recovered = 0.5 * n * i_as
    log_r = 0.5 * n * (i_ab - i_as)
    lhs = log_r - consumed + recovered
    rhs = n * ci
    resid = abs(lhs - rhs)
    return EntanglementAccounting(
        n=n, consumed=consumed, recovered=recovered, net=consumed - recovered,
        unassisted_rate=0.5 * ci, coherent_information=ci, log_r=log_r,
        identity_lhs=lhs, identity_rhs=rhs, identity_residual=resid,
        identity_holds=bool(resid < ACCOUNTING_ATOL),
    )
