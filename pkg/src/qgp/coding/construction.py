"""Finite-block codes from a random split of the typical subspace.

Pipeline for ``n`` uses: purify ``sigma`` with ``D``, take ``n`` copies,
project ``A^n`` onto its typical subspace ``A_typ``, apply a Haar unitary
``A_typ -> R B~ A^``, then obtain the encoder ``W`` and decoder ``V`` as
Uhlmann partial isometries. The decoder is fitted on the projected state
itself, not on the encoded input.

Labels: ``R'`` and ``A~`` are the transmitter's halves of the message and
preshared pairs, ``B-`` and ``B^`` the receiver's decoded outputs, ``G``
the receiver's discarded system, ``E_i`` the channel environments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..channels import SideInfoChannel, apply_channel, n_fold, stinespring_dilation
from ..decoupling import largest_divisor_at_most
from ..entropic import mutual_information
from ..exceptions import ConstraintError, LayoutError
from ..tensor_core import (
    DensityOperator,
    Layout,
    LinearMap,
    PureState,
    State,
    apply_map,
    apply_operators,
    get_dimension_cap,
    maximally_entangled,
    maximally_mixed,
    partial_trace,
    purify,
    tensor_power,
    tensor_product,
    trace_distance,
    uhlmann_partial_isometry,
)
from ..typicality import DEFAULT_SCHEDULE, HaarSampler, copy_label, epsilon_schedule, typical_projector
from .rates import _reference_labels, check_side_marginal, dilated_output

R, RP, BT, AT, AH, BH, BB, G = "R", "R'", "B~", "A~", "A^", "B^", "B-", "G"
A_TYP = "A_typ"
MIN_MASS = 1e-6


@dataclass
class CodeArtifacts:
    """A realized code together with every intermediate figure of the construction.

    ``sizes`` are log2 dimensions of ``R``, ``B~`` and ``A^``.
    ``epsilon_achieved`` is the trace distance between the decoded output
    and the ideal ``Phi^{R B-} (x) Phi^{A^ B^}``; ``victory_distance``
    compares the full pure output including ``G E^n D^n`` with the
    reference purification ``xi``.
    """

    n: int
    U_split: LinearMap
    W_enc: LinearMap
    V_dec: LinearMap
    sizes: dict
    dims: dict
    epsilon_achieved: float
    residual_state: DensityOperator | None
    seed: int
    eq6_distance: float
    eq7_distance: float
    victory_distance: float
    typical_mass: float
    typical_dim: int
    delta: float
    w_overlap: float
    v_overlap: float
    draw: int
    extra: dict = field(default_factory=dict)

    @property
    def log_r(self) -> float:
        return self.sizes["R"]

    def summary(self) -> dict:
        return {
            "n": self.n,
            "sizes": dict(self.sizes),
            "dims": dict(self.dims),
            "epsilon_achieved": self.epsilon_achieved,
            "eq6_distance": self.eq6_distance,
            "eq7_distance": self.eq7_distance,
            "victory_distance": self.victory_distance,
            "typical_mass": self.typical_mass,
            "typical_dim": self.typical_dim,
            "delta": self.delta,
            "w_overlap": self.w_overlap,
            "v_overlap": self.v_overlap,
            "seed": self.seed,
            "draw": self.draw,
        }

    def to_dict(self) -> dict:
        from ..serialization import linear_map_to_dict, density_to_dict

        d = self.summary()
        d["U_split"] = linear_map_to_dict(self.U_split)
        d["W_enc"] = linear_map_to_dict(self.W_enc)
        d["V_dec"] = linear_map_to_dict(self.V_dec)
        d["residual_state"] = None if self.residual_state is None else density_to_dict(self.residual_state)
        return d


def _log2(d: int) -> float:
    return math.log2(d)


def default_dims(typical_dim: int, n: int, i_aed: float, i_as: float, delta: float) -> tuple[int, int, int]:
    """``(|R|, |B~|, |A^|)`` from the qubit counts, clipped to divide ``typical_dim``.

    ``B~`` gets ``ceil(n I(A;ED)/2 + 2 n delta)`` qubits and ``A^`` gets
    ``ceil(n I(A;S)/2 + 2 n delta)``, each reduced to the largest divisor of
    what is left; ``R`` takes the remainder.
    """
    t = int(typical_dim)
    q_b = max(math.ceil(n * i_aed / 2 + 2 * n * delta - 1e-9), 0)
    q_a = max(math.ceil(n * i_as / 2 + 2 * n * delta - 1e-9), 0)
    d_b = largest_divisor_at_most(t, 2.0**q_b)
    d_a = largest_divisor_at_most(t // d_b, 2.0**q_a)
    return t // (d_b * d_a), d_b, d_a


def _check_dims(sizes, t: int) -> tuple[int, int, int]:
    if isinstance(sizes, dict):
        sizes = (sizes.get("R", 1), sizes.get("B~", 1), sizes.get("A^", 1))
    dims = tuple(int(x) for x in sizes)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ConstraintError(f"sizes {sizes!r} must be three positive dimensions (R, B~, A^)")
    if dims[0] * dims[1] * dims[2] != t:
        raise ConstraintError(f"sizes {dims} do not multiply to the typical dimension {t}")
    return dims


def _ed_marginal(sigma: State, ch: SideInfoChannel) -> DensityOperator:
    """``N(sigma)^{ED}`` from the dilated channel, ``D`` purifying ``sigma``."""
    return partial_trace(dilated_output(sigma, ch), ("E", "D"))


def _copies(rho: DensityOperator, n: int) -> DensityOperator:
    return tensor_power(rho, n, copy_label)


def build_code(sigma: State, ch: SideInfoChannel, n: int, sizes=None, sampler: HaarSampler | None = None,
               *, schedule: str = DEFAULT_SCHEDULE, delta: float | None = None) -> CodeArtifacts:
    """Construct encoder and decoder for ``n`` uses and measure how well they work.

    ``sizes`` overrides the split as dimensions ``(|R|, |B~|, |A^|)`` whose
    product must equal the typical dimension. The sampler's next draw
    supplies the splitting unitary.
    """
    n = int(n)
    if n < 1:
        raise ValueError("block length must be at least 1")
    if ch.n != 1:
        raise ValueError("build_code expects a single-use channel")
    sampler = HaarSampler(0) if sampler is None else sampler
    refs = _reference_labels(sigma, ch)
    check_side_marginal(sigma, ch)
    use = ch.uses[0]
    chn = n_fold(ch, n)
    cap = get_dimension_cap()
    delta = epsilon_schedule(schedule)(n) if delta is None else float(delta)

    # purify, copy, project onto the typical subspace of A^n
    psi1 = purify(sigma.density(), "D")
    if psi1.layout.total_dim**n > cap:
        raise LayoutError(f"{n} copies of a {psi1.layout.total_dim}-dimensional purification exceed the cap of {cap}")
    state = tensor_power(psi1, n, copy_label)
    tp = typical_projector(partial_trace(sigma, refs), n, delta, typ_label=A_TYP)
    state = apply_map(tp.compression, state)
    mass = state.norm**2
    if mass < MIN_MASS:
        raise ConstraintError(f"typical projection keeps mass {mass:.3e} < {MIN_MASS:.0e}")
    state = PureState(state.vector / math.sqrt(mass), state.layout, check=False)
    t = tp.typical_dim

    # split
    omega1 = dilated_output(sigma, ch)
    i_aed = mutual_information(omega1, refs, ("E", "D"))
    i_as = mutual_information(sigma, refs, ch.s_labels)
    if sizes is None:
        d_r, d_b, d_a = default_dims(t, n, i_aed, i_as, delta)
    else:
        d_r, d_b, d_a = _check_dims(sizes, t)
    draw = sampler.counter
    u = sampler.next_unitary(t)
    u_split = LinearMap(u, [(A_TYP, t)], [(R, d_r), (BT, d_b), (AH, d_a)], "unitary", check=False)
    state = apply_map(u_split, state)

    s_labels = tuple(copy_label(use.s, i) for i in range(1, n + 1))
    a_labels = tuple(copy_label(use.a, i) for i in range(1, n + 1))
    d_labels = tuple(copy_label("D", i) for i in range(1, n + 1))
    e_labels = tuple(copy_label("E", i) for i in range(1, n + 1))
    sp_labels = chn.sp_labels

    # decoupling distances
    psi_s = partial_trace(chn.side_state, s_labels)
    target6 = tensor_product(maximally_mixed([(R, d_r), (BT, d_b)]), psi_s)
    eq6 = trace_distance(partial_trace(state, (R, BT) + s_labels), target6)

    after = state
    for i, comp in enumerate(chn.components, start=1):
        after = apply_map(stinespring_dilation(comp, copy_label("E", i)), after)
    ed1 = _ed_marginal(sigma, ch)
    ed_n = _copies(ed1, n)
    target7 = tensor_product(maximally_mixed([(R, d_r), (AH, d_a)]), ed_n)
    eq7 = trace_distance(partial_trace(after, (R, AH) + e_labels + d_labels), target7)

    # encoder: purifications of the eq6 pair
    phi_in = input_state(d_r, d_b, chn)
    w_map, w_overlap = uhlmann_partial_isometry(state, phi_in, (R, BT) + s_labels, allow_wide=True)

    # decoder: purifications of the eq7 pair
    xi = purify(ed_n, G)
    phi_out = output_state(d_r, d_a)
    ideal = tensor_product(phi_out, xi)
    v_map, v_overlap = uhlmann_partial_isometry(ideal, after, (R, AH) + e_labels + d_labels, allow_wide=True)

    # realized code
    final = apply_map(w_map, phi_in)
    for i, comp in enumerate(chn.components, start=1):
        final = apply_map(stinespring_dilation(comp, copy_label("E", i)), final)
    final = apply_map(v_map, final)
    victory = trace_distance(final, ideal)
    decoded = partial_trace(final, (R, BB, AH, BH))
    epsilon = trace_distance(decoded, phi_out)
    junk = (G,) + e_labels + d_labels
    junk_dim = final.layout.select(junk).total_dim
    residual = partial_trace(final, junk) if junk_dim <= cap else None

    return CodeArtifacts(
        n=n,
        U_split=u_split,
        W_enc=w_map,
        V_dec=v_map,
        sizes={"R": _log2(d_r), "B~": _log2(d_b), "A^": _log2(d_a), "A_typ": _log2(t)},
        dims={"R": d_r, "B~": d_b, "A^": d_a, "A_typ": t, "G": xi.layout.dim(G)},
        epsilon_achieved=float(epsilon),
        residual_state=residual,
        seed=sampler.seed,
        eq6_distance=float(eq6),
        eq7_distance=float(eq7),
        victory_distance=float(victory),
        typical_mass=float(mass),
        typical_dim=t,
        delta=float(delta),
        w_overlap=float(w_overlap),
        v_overlap=float(v_overlap),
        draw=draw,
        extra={"I(A;ED)": float(i_aed), "I(A;S)": float(i_as), "labels": {
            "A'": list(a_labels), "S'": list(sp_labels)}},
    )


def input_state(d_r: int, d_b: int, chn: SideInfoChannel) -> PureState:
    """``Phi^{R R'} (x) Phi^{B~ A~} (x) psi^{S S'}`` for all uses."""
    return tensor_product(maximally_entangled((R, RP), d_r), maximally_entangled((BT, AT), d_b), chn.side_state)


def output_state(d_r: int, d_a: int) -> PureState:
    """``Phi^{R B-} (x) Phi^{A^ B^}``."""
    return tensor_product(maximally_entangled((R, BB), d_r), maximally_entangled((AH, BH), d_a))


def _decoder_kraus(v: LinearMap) -> tuple[np.ndarray, Layout]:
    """Kraus operators ``(<g|_G (x) 1) V`` of the decoder with ``G`` discarded."""
    out = v.out_layout
    if G not in out:
        return v.matrix[None], out
    kept = out.without([G])
    t = v.matrix.reshape(out.dims + (-1,))
    g = out.index(G)
    t = np.moveaxis(t, g, 0)
    return t.reshape(out.dim(G), kept.total_dim, -1), kept


def evaluate_code(W: LinearMap, V: LinearMap, ch: SideInfoChannel, n: int, log_r: float | None = None) -> float:
    """Trace distance of the decoded output from ``Phi^{R B-} (x) Phi^{A^ B^}``.

    Works on density operators and Kraus operators throughout, so it is
    independent of the pure-state bookkeeping used by :func:`build_code`.
    """
    n = int(n)
    chn = n_fold(ch, n)
    for lab in (RP, AT) + chn.sp_labels:
        if lab not in W.in_layout:
            raise LayoutError(f"encoder input lacks {lab!r}")
    for lab in chn.a_labels:
        if lab not in W.out_layout:
            raise LayoutError(f"encoder output lacks {lab!r}")
    for lab in (BT,) + chn.b_labels:
        if lab not in V.in_layout:
            raise LayoutError(f"decoder input lacks {lab!r}")
    for lab in (BB, BH):
        if lab not in V.out_layout:
            raise LayoutError(f"decoder output lacks {lab!r}")
    d_r = W.in_layout.dim(RP)
    d_b = W.in_layout.dim(AT)
    d_a = W.out_layout.dim(AH) if AH in W.out_layout else 1
    if log_r is not None and abs(_log2(d_r) - log_r) > 1e-12:
        raise LayoutError(f"log|R| = {log_r} does not match the encoder's |R'| = {d_r}")
    if V.out_layout.dim(BB) != d_r or V.out_layout.dim(BH) != d_a:
        raise LayoutError("decoder outputs do not match the message and recovered-pair dimensions")
    if V.in_layout.dim(BT) != d_b:
        raise LayoutError("decoder and encoder disagree on the preshared dimension")

    rho = input_state(d_r, d_b, chn).density()
    rho = apply_operators(W.matrix[None], W.in_layout, W.out_layout, rho)
    keep = tuple(lab for lab in rho.layout.labels if not lab.startswith("D_"))
    rho = partial_trace(rho, keep)
    rho = apply_channel(chn.channel, rho)
    ops, kept = _decoder_kraus(V)
    rho = apply_operators(ops, V.in_layout, kept, rho)
    rho = partial_trace(rho, (R, BB, AH, BH) if AH in rho.layout else (R, BB, BH))
    target = output_state(d_r, d_a)
    if AH not in rho.layout:
        target = partial_trace(target, (R, BB, BH))
    return trace_distance(rho, target)
