"""Kraus channels, Stinespring dilations, Choi matrices and side-information channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import LayoutError, StateValidationError
from .tensor_core import (
    RANK_CUTOFF,
    DensityOperator,
    Layout,
    LinearMap,
    PureState,
    State,
    _Frozen,
    apply_operators,
    as_layout,
    hermitian_part,
    partial_trace,
    tensor_product,
    trace_distance,
)

CPTP_ATOL = 1e-9

PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def completeness_residual(kraus_ops: np.ndarray) -> float:
    """Operator-norm distance of ``sum_k K_k^dagger K_k`` from the identity."""
    din = kraus_ops.shape[2]
    s = np.einsum("kji,kjl->il", kraus_ops.conj(), kraus_ops)
    return float(np.linalg.norm(s - np.eye(din), ord=2)) if din else 0.0


class KrausChannel(_Frozen):
    """A CPTP map in Kraus form between two layouts.

    ``check=False`` admits operator sets that are not trace preserving so
    that :func:`validate_cptp` can report on them.
    """

    __slots__ = ("kraus_ops", "in_layout", "out_layout")

    def __init__(self, kraus_ops, in_layout, out_layout, *, check: bool = True, atol: float = CPTP_ATOL):
        in_layout = as_layout(in_layout)
        out_layout = as_layout(out_layout)
        ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
        if not ops:
            raise StateValidationError("a Kraus channel needs at least one operator")
        shapes = {k.shape for k in ops}
        if len(shapes) != 1:
            raise StateValidationError(f"Kraus operators have mismatched shapes {sorted(shapes)}")
        expected = (out_layout.total_dim, in_layout.total_dim)
        if ops[0].shape != expected:
            raise StateValidationError(f"Kraus operators have shape {ops[0].shape}, layouts need {expected}")
        arr = np.stack(ops)
        if check:
            res = completeness_residual(arr)
            if res > atol:
                raise StateValidationError(f"Kraus operators are not trace preserving (residual {res:.3e})")
        arr.flags.writeable = False
        object.__setattr__(self, "kraus_ops", arr)
        object.__setattr__(self, "in_layout", in_layout)
        object.__setattr__(self, "out_layout", out_layout)

    def __repr__(self):
        return f"KrausChannel({len(self.kraus_ops)} ops: {self.in_layout} -> {self.out_layout})"

    @property
    def n_kraus(self) -> int:
        return int(self.kraus_ops.shape[0])

    def relabel(self, mapping) -> "KrausChannel":
        in_map = {k: v for k, v in mapping.items() if k in self.in_layout}
        out_map = {k: v for k, v in mapping.items() if k in self.out_layout}
        return KrausChannel(self.kraus_ops, self.in_layout.rename(in_map),
                            self.out_layout.rename(out_map), check=False)


@dataclass(frozen=True)
class CPTPReport:
    completeness_residual: float
    flagged: bool
    cp_witness: None = None
    note: str = "completely positive by construction (Kraus form)"


def validate_cptp(ch: KrausChannel, atol: float = CPTP_ATOL) -> CPTPReport:
    res = completeness_residual(ch.kraus_ops)
    return CPTPReport(completeness_residual=res, flagged=res > atol)


def apply_channel(ch: KrausChannel, rho: State) -> DensityOperator:
    """``sum_k K rho K^dagger`` on the channel's input subsystems; others pass through."""
    return apply_operators(ch.kraus_ops, ch.in_layout, ch.out_layout, rho.density())


def tensor_channels(*chans: KrausChannel) -> KrausChannel:
    ops = chans[0].kraus_ops
    in_layout, out_layout = chans[0].in_layout, chans[0].out_layout
    for c in chans[1:]:
        ops = np.einsum("aij,bkl->abikjl", ops, c.kraus_ops).reshape(
            ops.shape[0] * c.n_kraus, ops.shape[1] * c.kraus_ops.shape[1], ops.shape[2] * c.kraus_ops.shape[2]
        )
        in_layout = in_layout + c.in_layout
        out_layout = out_layout + c.out_layout
    return KrausChannel(ops, in_layout, out_layout, check=False)


def minimal_kraus(ops: np.ndarray, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """Drop linearly dependent Kraus operators (Choi-rank many remain).

    Linearly independent sets come back unchanged.
    """
    k = ops.shape[0]
    flat = ops.reshape(k, -1)
    gram = flat.conj() @ flat.T
    w, u = np.linalg.eigh(hermitian_part(gram))
    keep = w > cutoff * max(w[-1], 0.0)
    if keep.sum() == k:
        return ops
    # K'_j = sum_k u[k, j] K_k spans the same operator space with orthogonal elements
    return np.einsum("kj,kab->jab", u[:, keep], ops)


def stinespring_dilation(ch: KrausChannel, env_label: str = "E") -> LinearMap:
    """Isometry ``V = sum_k K_k (x) |k>_E`` from the input to output + environment."""
    if env_label in ch.out_layout or env_label in ch.in_layout:
        raise LayoutError(f"environment label {env_label!r} collides with the channel's layouts")
    ops = minimal_kraus(ch.kraus_ops)
    k, dout, din = ops.shape
    v = ops.transpose(1, 0, 2).reshape(dout * k, din)
    return LinearMap(v, ch.in_layout, ch.out_layout + Layout([(env_label, k)]), "isometry", check=False)


def complementary_channel(ch: KrausChannel, env_label: str = "E") -> KrausChannel:
    """Channel to the dilation's environment, tracing the output instead."""
    ops = minimal_kraus(ch.kraus_ops)
    env = Layout([(env_label, ops.shape[0])])
    return KrausChannel(ops.transpose(1, 0, 2), ch.in_layout, env, check=False)


def complementary_output(ch: KrausChannel, rho: State, env_label: str = "E") -> DensityOperator:
    """``tr_B[V rho V^dagger]``: what the environment of the dilation holds."""
    return apply_channel(complementary_channel(ch, env_label), rho)


def _copy_layout(layout: Layout, suffix: str) -> Layout:
    return layout.rename({lab: lab + suffix for lab in layout.labels})


def choi_matrix(ch: KrausChannel, copy_suffix: str = "*") -> DensityOperator:
    """``(id (x) N)(Phi)`` on (input copy, output), normalized to trace 1."""
    in_copy = _copy_layout(ch.in_layout, copy_suffix)
    d = ch.in_layout.total_dim
    phi = PureState(np.eye(d).reshape(-1) / np.sqrt(d), in_copy + ch.in_layout, check=False)
    return apply_channel(ch, phi)


def kraus_from_choi(choi: DensityOperator, in_layout, out_layout, cutoff: float = RANK_CUTOFF) -> KrausChannel:
    """Rebuild a minimal Kraus set from a Choi matrix laid out as (input copy, output)."""
    in_layout, out_layout = as_layout(in_layout), as_layout(out_layout)
    din, dout = in_layout.total_dim, out_layout.total_dim
    w, v = np.linalg.eigh(hermitian_part(choi.matrix) * din)
    keep = w > cutoff * max(w[-1], 0.0)
    ops = [np.sqrt(lam) * vec.reshape(din, dout).T for lam, vec in zip(w[keep], v[:, keep].T)]
    return KrausChannel(ops, in_layout, out_layout)


def choi_distance(a: KrausChannel, b: KrausChannel) -> float:
    return trace_distance(choi_matrix(a), choi_matrix(b))


# ---------------------------------------------------------------------------
# channels with side information at the transmitter


@dataclass(frozen=True)
class ChannelUse:
    """Labels of one channel use: input A', state S, Alice's purifier S', output B."""

    a: str
    s: str
    sp: str
    b: str


SINGLE_USE = ChannelUse("A'", "S", "S'", "B")


class SideInfoChannel(_Frozen):
    """A channel ``N: A'S -> B`` paired with the side state ``|psi>^{SS'}``.

    ``components`` holds one single-use Kraus channel per use (labelled for
    that use); ``channel`` is their tensor product.
    """

    __slots__ = ("channel", "side_state", "uses", "components", "name")

    def __init__(self, channel: KrausChannel, side_state: PureState, uses=(SINGLE_USE,),
                 components=None, name: str = "custom"):
        uses = tuple(uses)
        components = (channel,) if components is None else tuple(components)
        if len(components) != len(uses):
            raise LayoutError("need one channel component per use")
        for use, comp in zip(uses, components):
            for lab in (use.a, use.s):
                if lab not in comp.in_layout:
                    raise LayoutError(f"channel input lacks subsystem {lab!r}")
            if use.b not in comp.out_layout:
                raise LayoutError(f"channel output lacks subsystem {use.b!r}")
            for lab in (use.s, use.sp):
                if lab not in side_state.layout:
                    raise LayoutError(f"side state lacks subsystem {lab!r}")
            if side_state.layout.dim(use.s) != comp.in_layout.dim(use.s):
                raise LayoutError(f"side state and channel disagree on the dimension of {use.s!r}")
        res = validate_cptp(channel)
        if res.flagged:
            raise StateValidationError(f"channel is not CPTP (residual {res.completeness_residual:.3e})")
        norm2 = float(np.vdot(side_state.vector, side_state.vector).real)
        if abs(norm2 - 1) > 1e-10:
            raise StateValidationError(f"side state is not normalized (squared norm {norm2!r})")
        object.__setattr__(self, "channel", channel)
        object.__setattr__(self, "side_state", side_state)
        object.__setattr__(self, "uses", uses)
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "name", name)

    def __repr__(self):
        return f"SideInfoChannel({self.name}, n={self.n})"

    @property
    def n(self) -> int:
        return len(self.uses)

    @property
    def s_labels(self) -> tuple[str, ...]:
        return tuple(u.s for u in self.uses)

    @property
    def sp_labels(self) -> tuple[str, ...]:
        return tuple(u.sp for u in self.uses)

    @property
    def a_labels(self) -> tuple[str, ...]:
        return tuple(u.a for u in self.uses)

    @property
    def b_labels(self) -> tuple[str, ...]:
        return tuple(u.b for u in self.uses)

    def side_marginal(self) -> DensityOperator:
        """``psi^S``: the side state with Alice's share traced out."""
        return partial_trace(self.side_state, self.s_labels)


def n_fold(ch: SideInfoChannel, n: int) -> SideInfoChannel:
    """``n`` independent uses; labels get a ``_i`` suffix (``A'_1``, ``S_1``, ...), also for ``n = 1``."""
    if ch.n != 1:
        raise ValueError("n_fold expects a single-use channel")
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    use = ch.uses[0]
    comps, sides, uses = [], [], []
    for i in range(1, n + 1):
        mapping = {lab: f"{lab}_{i}" for lab in ch.channel.in_layout.labels + ch.channel.out_layout.labels
                   + ch.side_state.layout.labels}
        comps.append(ch.channel.relabel(mapping))
        side_map = {lab: mapping[lab] for lab in ch.side_state.layout.labels}
        sides.append(PureState(ch.side_state.vector, ch.side_state.layout.rename(side_map), check=False))
        uses.append(ChannelUse(mapping[use.a], mapping[use.s], mapping[use.sp], mapping[use.b]))
    full = tensor_channels(*comps)
    side = tensor_product(*sides)
    return SideInfoChannel(full, side, uses, comps, name=f"{ch.name}^{n}")


def effective_channel(ch: SideInfoChannel) -> KrausChannel:
    """The map on A' alone when S is fed its marginal ``psi^S``."""
    if ch.n != 1:
        raise ValueError("effective_channel expects a single-use channel")
    use = ch.uses[0]
    comp = ch.components[0]
    rho_s = ch.side_marginal()
    w, v = np.linalg.eigh(hermitian_part(rho_s.matrix))
    in_rest = comp.in_layout.without([use.s])
    ops = [
        np.sqrt(lam) * _feed_ket(k, comp.in_layout, use.s, vec)
        for lam, vec in zip(w, v.T)
        if lam > RANK_CUTOFF
        for k in comp.kraus_ops
    ]
    return KrausChannel(ops, in_rest, comp.out_layout)


def _feed_ket(k: np.ndarray, in_layout: Layout, label: str, ket: np.ndarray) -> np.ndarray:
    """``K (1 (x) |ket>_label)`` as a matrix on the remaining inputs."""
    dims = in_layout.dims
    idx = in_layout.index(label)
    t = k.reshape((k.shape[0],) + dims)
    t = np.tensordot(t, ket, axes=([idx + 1], [0]))
    return t.reshape(k.shape[0], -1)


def trivial_side_info(channel: KrausChannel, name: str = "custom", a: str = "A'", b: str = "B") -> SideInfoChannel:
    """Wrap a plain channel ``A' -> B`` with a one-dimensional side state."""
    in_layout = channel.in_layout.rename({channel.in_layout.labels[0]: a}) + Layout([("S", 1)])
    out_layout = channel.out_layout.rename({channel.out_layout.labels[0]: b})
    ch = KrausChannel(channel.kraus_ops, in_layout, out_layout)
    side = PureState([1.0], [("S", 1), ("S'", 1)])
    return SideInfoChannel(ch, side, name=name)


def identity_channel(dim: int = 2) -> SideInfoChannel:
    """Noiseless ``A' -> B`` with trivial side information."""
    ch = KrausChannel([np.eye(dim)], [("A'", dim)], [("B", dim)])
    return trivial_side_info(ch, name="identity")


def depolarizing_kraus(depol: float) -> list[np.ndarray]:
    """Qubit depolarizing channel replacing the input by I/2 with probability ``depol``."""
    if not 0.0 <= depol <= 1.0:
        raise ValueError(f"depolarizing parameter must lie in [0, 1], got {depol}")
    coeffs = (np.sqrt(1 - 3 * depol / 4),) + (np.sqrt(depol / 4),) * 3
    return [c * p for c, p in zip(coeffs, PAULIS) if c > 0]


def depolarizing_channel(depol: float) -> SideInfoChannel:
    ch = KrausChannel(depolarizing_kraus(depol), [("A'", 2)], [("B", 2)])
    return trivial_side_info(ch, name="depolarizing")


def defective_memory_channel(p: float, depol: float = 0.0) -> SideInfoChannel:
    """Memory cell that is defective (outputs |0>) when S measures 0.

    The side state is ``sqrt(p)|00> + sqrt(1-p)|11>``, so ``p`` is the defect
    probability. Working cells (S = 1) apply a depolarizing channel of
    strength ``depol``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"defect probability must lie in [0, 1], got {p}")
    bra = np.eye(2)
    ops = []
    for j in range(2):
        reset = np.zeros((2, 2), dtype=complex)
        reset[0, j] = 1.0
        ops.append(np.kron(reset, bra[0][None, :]))
    for k in depolarizing_kraus(depol):
        ops.append(np.kron(k, bra[1][None, :]))
    ch = KrausChannel(ops, [("A'", 2), ("S", 2)], [("B", 2)])
    side = PureState([np.sqrt(p), 0, 0, np.sqrt(1 - p)], [("S", 2), ("S'", 2)])
    return SideInfoChannel(ch, side, name="defective_memory")


def pauli_reveal_channel() -> SideInfoChannel:
    """Qubit channel applying the Pauli selected by the basis value of a 4-level S.

    The side state is maximally entangled, so the transmitter learns which
    Pauli will be applied.
    """
    ops = []
    for i, p in enumerate(PAULIS):
        bra = np.zeros((1, 4))
        bra[0, i] = 1.0
        ops.append(np.kron(p, bra))
    ch = KrausChannel(ops, [("A'", 2), ("S", 4)], [("B", 2)])
    side = PureState(np.eye(4).reshape(-1) / 2.0, [("S", 4), ("S'", 4)])
    return SideInfoChannel(ch, side, name="pauli_reveal")
