"""Numerical ledger of the weak-converse chain for a realized code.

``sigma = W . phi_in`` and ``omega(i)`` applies the first ``i`` channel uses
through their Stinespring isometries, so every state stays pure. Channel
use ``j`` consumes ``S_j``; any quantity involving only ``R``, ``B~`` and
``S`` systems is unaffected by the channels acting elsewhere and is
evaluated on ``sigma``.

Groupings: ``X(i) = R B~ B^{i-1} S_{i+1..n}`` and ``Y(i) = R B~ S_{i+1..n}``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from ..channels import SideInfoChannel, n_fold, stinespring_dilation
from ..entropic import check_mi_identity, conditional_mutual_information, mutual_information
from ..exceptions import LayoutError
from ..tensor_core import LinearMap, PureState, apply_map
from ..typicality import copy_label
from .construction import AT, BT, R, RP, evaluate_code, input_state
from .rates import d_eps

IDENTITY_ATOL = 1e-8
SLACK_ATOL = 1e-8

IDENTITY_NAMES = (
    "chain_YB",
    "chain_YS",
    "shift_YS",
    "split_YB_prev",
    "chain_XB",
    "chain_XS",
)


@dataclass
class StepRecord:
    i: int
    identities: dict
    identity_residuals: dict
    mi_identity_residuals: dict
    step_lhs: float
    step_rhs: float
    slack: float
    gap_mi: float
    slack_residual: float
    side_product_gap: float = 0.0

    def row(self) -> dict:
        out = {"i": self.i, "step_lhs": self.step_lhs, "step_rhs": self.step_rhs, "slack": self.slack,
               "I(B^{i-1};B_i)": self.gap_mi, "slack_residual": self.slack_residual,
               "I(S_i;S^{i-1})": self.side_product_gap}
        for k in IDENTITY_NAMES:
            out[f"resid_{k}"] = self.identity_residuals[k]
        for k, v in sorted(self.mi_identity_residuals.items()):
            out[f"mi_identity_{k}"] = v
        return out


@dataclass
class ConverseLedger:
    n: int
    Q: float
    epsilon: float
    d: float
    fannes_lhs: float
    fannes_threshold: float
    fannes_threshold_clamped: float
    fannes_satisfied: bool
    fannes_satisfied_clamped: bool
    independence_RBt: float
    independence_RBt_S: float
    endpoints: dict
    telescoped_lhs: float
    telescoped_rhs: float
    telescoped_holds: bool
    steps: list[StepRecord] = field(default_factory=list)
    sigma_norm: float = 1.0
    encoder_isometric: bool = True
    code_error: float | None = None

    @property
    def max_identity_residual(self) -> float:
        vals = [v for s in self.steps for v in s.identity_residuals.values()]
        vals += [v for s in self.steps for v in s.mi_identity_residuals.values()]
        vals.append(self.endpoints["chain_residual"])
        return float(max(vals))

    @property
    def identities_pass(self) -> bool:
        return self.max_identity_residual < IDENTITY_ATOL

    @property
    def slacks_nonnegative(self) -> bool:
        return all(s.slack >= -SLACK_ATOL for s in self.steps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["max_identity_residual"] = self.max_identity_residual
        d["identities_pass"] = self.identities_pass
        d["slacks_nonnegative"] = self.slacks_nonnegative
        return d

    def csv_text(self) -> str:
        buf = io.StringIO()
        rows = [s.row() for s in self.steps]
        fields = list(rows[0]) if rows else ["i"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        return buf.getvalue()


def _labels(prefix: str, lo: int, hi: int) -> tuple[str, ...]:
    """``prefix_lo .. prefix_hi`` inclusive; empty when ``lo > hi``."""
    return tuple(copy_label(prefix, j) for j in range(lo, hi + 1))


def converse_chain_check(W: LinearMap, V: LinearMap | None, ch: SideInfoChannel, n: int,
                         Q: float | None = None, epsilon: float = 0.0) -> ConverseLedger:
    """Evaluate every quantity of the converse chain on the code ``(W, V)``.

    The shift step assumes ``I(S_i;S^{i-1}) = 0`` on ``sigma``, which any
    isometric encoder preserves since it never touches ``S``; the value is
    recorded per step as ``side_product_gap``.

    ``Q`` defaults to ``log|R| / n``. The threshold ``2 n (Q - d(eps, n))``
    is reported raw and with ``d`` clamped at zero; ``fannes_satisfied``
    uses the raw value. ``V`` is only used to report the code's actual
    decoding error.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    chn = n_fold(ch, n)
    use = ch.uses[0]
    for lab in (RP, AT) + chn.sp_labels:
        if lab not in W.in_layout:
            raise LayoutError(f"encoder input lacks {lab!r}")
    for lab in chn.a_labels:
        if lab not in W.out_layout:
            raise LayoutError(f"encoder output lacks {lab!r}")
    d_r = W.in_layout.dim(RP)
    d_b = W.in_layout.dim(AT)
    Q = float(np.log2(d_r) / n) if Q is None else float(Q)

    sigma = apply_map(W, input_state(d_r, d_b, chn))
    norm = sigma.norm
    if norm < 1e-12:
        raise ValueError("encoder annihilates the input state")
    sigma = PureState(sigma.vector / norm, sigma.layout, check=False)
    omegas = [sigma]
    for j, comp in enumerate(chn.components, start=1):
        omegas.append(apply_map(stinespring_dilation(comp, copy_label("E", j)), omegas[-1]))
    omega = omegas[n]

    S = lambda lo, hi: _labels(use.s, lo, hi)  # noqa: E731
    B = lambda lo, hi: _labels(use.b, lo, hi)  # noqa: E731
    mi, cmi = mutual_information, conditional_mutual_information
    rbt = (R, BT)

    fannes_lhs = mi(omega, (R,), B(1, n) + (BT,))
    d = d_eps(epsilon, n, Q)
    thr = 2 * n * (Q - d)
    thr_c = max(2 * n * (Q - max(d, 0.0)), 0.0)
    i_bt_r = mi(omega, (BT,), (R,))
    i_r_b_given_bt = cmi(omega, (R,), B(1, n), (BT,))
    i_rbt_b = mi(omega, rbt, B(1, n))
    i_rbt_s = mi(sigma, rbt, S(1, n))
    endpoints = {
        "I(R;B^n B~)": fannes_lhs,
        "I(B~;R)": i_bt_r,
        "I(R;B^n|B~)": i_r_b_given_bt,
        "I(R B~;B^n)": i_rbt_b,
        "I(R B~;S^n)": i_rbt_s,
        "chain_residual": abs(fannes_lhs - i_bt_r - i_r_b_given_bt),
        "conditioning_slack": i_rbt_b - i_r_b_given_bt,
    }

    def X(i):
        return rbt + B(1, i - 1) + S(i + 1, n)

    def Y(i):
        return rbt + S(i + 1, n)

    def term(i):
        return mi(omegas[i], X(i), B(i, i)) - mi(omegas[i - 1], X(i), S(i, i))

    def head(i):
        # I(Y(i);B^i)_{omega(i)} - I(Y(i);S^i)_sigma
        return mi(omegas[i], Y(i), B(1, i)) - mi(sigma, Y(i), S(1, i))

    steps = []
    for i in range(2, n + 1):
        w_i, w_prev = omegas[i], omegas[i - 1]
        yi, bp, si = Y(i), B(1, i - 1), S(i, i)
        vals = {
            "chain_YB": (mi(w_i, yi, B(1, i)), mi(w_i, yi, bp) + cmi(w_i, yi, B(i, i), bp)),
            "chain_YS": (mi(sigma, yi, S(1, i)), mi(sigma, yi, si) + cmi(sigma, yi, S(1, i - 1), si)),
            "shift_YS": (mi(sigma, Y(i - 1), S(1, i - 1)), cmi(sigma, yi, S(1, i - 1), si)),
            "split_YB_prev": (mi(w_prev, Y(i - 1), bp), mi(w_prev, si, bp) + cmi(w_prev, yi, bp, si)),
            "chain_XB": (mi(w_i, X(i), B(i, i)), mi(w_i, bp, B(i, i)) + cmi(w_i, yi, B(i, i), bp)),
            "chain_XS": (mi(w_prev, X(i), si), mi(w_prev, bp, si) + cmi(w_prev, yi, si, bp)),
        }
        resid = {k: abs(a - b) for k, (a, b) in vals.items()}
        mi_resid = {
            "YB": check_mi_identity(w_i, yi, B(i, i), bp),
            "YS": check_mi_identity(w_prev, yi, si, bp),
            "YSprev": check_mi_identity(sigma, yi, S(1, i - 1), si),
        }
        lhs = head(i)
        rhs = head(i - 1) + term(i)
        gap = mi(w_i, bp, B(i, i))
        slack = rhs - lhs
        steps.append(StepRecord(
            i=i,
            identities={k: [a, b] for k, (a, b) in vals.items()},
            identity_residuals=resid,
            mi_identity_residuals=mi_resid,
            step_lhs=lhs,
            step_rhs=rhs,
            slack=slack,
            gap_mi=gap,
            slack_residual=abs(slack - gap),
            side_product_gap=mi(sigma, si, S(1, i - 1)),
        ))

    tel_lhs = i_rbt_b - i_rbt_s
    tel_rhs = float(sum(term(i) for i in range(1, n + 1)))
    code_error = None if V is None else evaluate_code(W, V, ch, n)
    return ConverseLedger(
        n=n, Q=Q, epsilon=float(epsilon), d=d,
        fannes_lhs=fannes_lhs, fannes_threshold=thr, fannes_threshold_clamped=thr_c,
        fannes_satisfied=bool(fannes_lhs >= thr - IDENTITY_ATOL),
        fannes_satisfied_clamped=bool(fannes_lhs >= thr_c - IDENTITY_ATOL),
        independence_RBt=i_bt_r, independence_RBt_S=i_rbt_s, endpoints=endpoints,
        telescoped_lhs=tel_lhs, telescoped_rhs=tel_rhs,
        telescoped_holds=bool(tel_lhs <= tel_rhs + IDENTITY_ATOL),
        steps=steps, sigma_norm=float(norm), code_error=code_error,
        encoder_isometric=bool(np.allclose(W.matrix.conj().T @ W.matrix, np.eye(W.matrix.shape[1]), atol=1e-9)),
    )


def random_code(ch: SideInfoChannel, n: int, d_r: int, rng: np.random.Generator, *, d_b: int = 1,
                d_a: int = 1, d_d: int | None = None, d_g: int = 1):
    """Haar-random encoder and decoder with code-shaped layouts (a negative control).

    The encoder is a genuine isometry; by default each ``D_j`` is the
    smallest dimension (at least 2) making that possible, so the encoder
    leaks into systems the receiver never sees.
    """
    from .construction import AH, BB, BH, G
    from ..typicality import haar_matrix

    chn = n_fold(ch, n)
    use = ch.uses[0]
    d_in = d_r * d_b * int(np.prod([chn.side_state.layout.dim(lab) for lab in chn.sp_labels]))
    d_ap = ch.channel.in_layout.dim(use.a)
    if d_d is None:
        d_d = 2
        while (d_ap * d_d) ** n * d_a < d_in:
            d_d += 1
    w_in = [(RP, d_r), (AT, d_b)] + [(lab, chn.side_state.layout.dim(lab)) for lab in chn.sp_labels]
    w_out = ([(copy_label(use.a, j), ch.channel.in_layout.dim(use.a)) for j in range(1, n + 1)]
             + [(AH, d_a)] + [(copy_label("D", j), d_d) for j in range(1, n + 1)])
    v_in = [(BT, d_b)] + [(copy_label(use.b, j), ch.channel.out_layout.dim(use.b)) for j in range(1, n + 1)]
    v_out = [(BB, d_r), (BH, d_a), (G, d_g)]

    def iso(in_l, out_l):
        din = int(np.prod([d for _, d in in_l]))
        dout = int(np.prod([d for _, d in out_l]))
        u = haar_matrix(rng, max(din, dout))
        if dout >= din:
            return LinearMap(u[:dout, :din], in_l, out_l, "isometry", check=False)
        return LinearMap(u[:dout, :din], in_l, out_l, "partial_isometry", check=False)

    return iso(w_in, w_out), iso(v_in, v_out)
