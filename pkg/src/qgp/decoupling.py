"""Monte Carlo checks of the random-unitary decoupling inequality.

For a pure state on ``A R (rest)``, a unitary ``U`` on ``A`` followed by the
split ``A = A- (x) A^`` and discarding ``A^`` leaves ``rho^{A- R}(U)``. Its
squared trace distance from ``I/|A-| (x) psi^R`` averages, over Haar ``U``,
to at most ``|A||R| / |A^|^2 * tr[(psi^{AR})^2]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .entropic import mutual_information
from .exceptions import LayoutError
from .tensor_core import (
    DensityOperator,
    LinearMap,
    PureState,
    _as_labels,
    _bipartition,
    apply_map,
    hermitian_part,
    partial_trace,
    tensor_power,
    trace_distance,
    maximally_mixed,
    tensor_product,
)
from .typicality import DEFAULT_SCHEDULE, HaarSampler, copy_label, epsilon_schedule, typical_projector

A_BAR = "A-"
A_HAT = "A^"


def _split_dims(d_a: int, split) -> tuple[int, int]:
    d_bar, d_hat = (int(x) for x in split)
    if d_bar < 1 or d_hat < 1 or d_bar * d_hat != d_a:
        raise LayoutError(f"split {tuple(split)} does not factor |A| = {d_a}")
    return d_bar, d_hat


def largest_divisor_at_most(t: int, bound: float) -> int:
    """Largest divisor of ``t`` not exceeding ``bound`` (at least 1)."""
    best = 1
    for d in range(1, t + 1):
        if t % d == 0 and d <= bound:
            best = d
    return best


def decoupled_residual(psi: PureState, U, split, *, a: str = "A", r=("R",)) -> DensityOperator:
    """``tr_{A^}[U . psi]`` restricted to ``A- R``.

    ``split`` is ``(|A-|, |A^|)`` with product ``|A|``; everything other than
    ``A`` and ``r`` is traced out.
    """
    d_a = psi.layout.dim(a)
    d_bar, d_hat = _split_dims(d_a, split)
    u = U.matrix if isinstance(U, LinearMap) else np.asarray(U, dtype=complex)
    if u.shape != (d_a, d_a):
        raise LayoutError(f"unitary has shape {u.shape}, |A| = {d_a}")
    m = LinearMap(u, [(a, d_a)], [(A_BAR, d_bar), (A_HAT, d_hat)], "unitary", check=False)
    out = apply_map(m, psi)
    return partial_trace(out, (A_BAR,) + _as_labels(r))


class _ResidualSampler:
    """Precomputed bipartition of ``psi`` for fast per-unitary residuals."""

    def __init__(self, psi: PureState, split, a: str, r):
        r = _as_labels(r)
        layout = psi.layout
        if a in r:
            raise LayoutError(f"{a!r} cannot also be a reference subsystem")
        self.d_a = layout.dim(a)
        self.d_bar, self.d_hat = _split_dims(self.d_a, split)
        self.d_r = layout.select(r).total_dim
        m = _bipartition(psi.vector, layout, (a,) + r)
        self.t = m.reshape(self.d_a, self.d_r, -1)
        rho_ar = np.einsum("aro,bso->arbs", self.t, self.t.conj()).reshape(self.d_a * self.d_r, -1)
        self.purity = float(np.vdot(rho_ar, rho_ar).real)

    def lhs(self, u: np.ndarray) -> float:
        x = np.tensordot(u, self.t, axes=([1], [0])).reshape(self.d_bar, self.d_hat, self.d_r, -1)
        rho = np.einsum("ahro,bhso->arbs", x, x.conj())
        rho_r = np.einsum("aras->rs", rho)
        target = np.einsum("ab,rs->arbs", np.eye(self.d_bar) / self.d_bar, rho_r)
        diff = (rho - target).reshape(self.d_bar * self.d_r, -1)
        norm1 = float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(diff)))))
        return norm1**2


@dataclass
class DecouplingReport:
    dims: tuple[int, int, int, int]
    n_samples: int
    lhs_mean: float
    lhs_max: float
    lhs_values: list[float]
    rhs_bound: float
    purity: float
    seed: int
    standard_error: float
    bound_satisfied: bool
    exists_individual: bool
    stream: tuple[int, ...] = ()
    first_draw: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = {"A": self.dims[0], "A_hat": self.dims[1], "A_bar": self.dims[2], "R": self.dims[3]}
        return d

    def csv_rows(self):
        yield ("stream_index", "lhs")
        for k, v in enumerate(self.lhs_values):
            yield (self.first_draw + k, v)


def fqsw_bound_check(psi: PureState, split, sampler: HaarSampler, n_samples: int, *,
                     a: str = "A", r=("R",)) -> DecouplingReport:
    """Monte Carlo estimate of the averaged squared decoupling error vs its bound.

    Sample ``k`` uses the sampler's draw ``counter + k``; the sampler then
    advances by ``n_samples``. The statistical contract is
    ``lhs_mean <= rhs_bound + 3 * standard_error`` (meaningful from about 30
    samples).
    """
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rs = _ResidualSampler(psi, split, a, r)
    start = sampler.counter
    values = np.array([rs.lhs(sampler.unitary_at(start + k, rs.d_a)) for k in range(n_samples)])
    sampler.skip(n_samples)
    rhs = rs.d_a * rs.d_r / rs.d_hat**2 * rs.purity
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return DecouplingReport(
        dims=(rs.d_a, rs.d_hat, rs.d_bar, rs.d_r),
        n_samples=n_samples,
        lhs_mean=mean,
        lhs_max=float(values.max()),
        lhs_values=[float(v) for v in values],
        rhs_bound=float(rhs),
        purity=rs.purity,
        seed=sampler.seed,
        standard_error=se,
        bound_satisfied=bool(mean <= rhs + 3 * se),
        exists_individual=bool(values.min() <= rhs),
        stream=sampler.stream,
        first_draw=start,
    )


@dataclass
class ConcentrationReport:
    std_dev: float
    outlier_fraction: float
    mean: float
    n_samples: int
    seed: int


def concentration_probe(psi: PureState, split, sampler: HaarSampler, n_samples: int, *,
                        a: str = "A", r=("R",)) -> ConcentrationReport:
    """Spread of the decoupling error: sample std and fraction beyond mean + 2 std."""
    if n_samples < 100:
        raise ValueError("concentration probe needs at least 100 samples")
    rep = fqsw_bound_check(psi, split, sampler, n_samples, a=a, r=r)
    v = np.asarray(rep.lhs_values)
    std = float(v.std(ddof=1))
    frac = float(np.mean(v > v.mean() + 2 * std)) if std > 0 else 0.0
    return ConcentrationReport(std, frac, float(v.mean()), n_samples, sampler.seed)


@dataclass
class IIDDecouplingReport:
    n: int
    delta: float
    typical_dim: int
    typical_mass: float
    mutual_information: float
    target_qubits: int
    a_hat_dim: int
    a_bar_dim: int
    distance: float
    seed: int
    draw: int
    schedule: str = DEFAULT_SCHEDULE
    extra: dict = field(default_factory=dict)


def iid_decoupling_experiment(sigma_pure: PureState, n: int, sampler: HaarSampler, *, a: str = "A",
                              a_hat_dim: int | None = None, schedule: str = DEFAULT_SCHEDULE,
                              delta: float | None = None) -> IIDDecouplingReport:
    """Typical projection, random unitary and split on ``n`` copies of a pure state.

    By default ``log|A^| = ceil(n I(A;R)/2 + n delta_n)``, reduced to the
    largest divisor of the typical dimension not above ``2**target``. The
    projected state is renormalized before the unitary acts and the
    projection mass is reported separately.
    """
    n = int(n)
    refs = tuple(lab for lab in sigma_pure.layout.labels if lab != a)
    delta = epsilon_schedule(schedule)(n) if delta is None else float(delta)
    rho_a = partial_trace(sigma_pure, [a])
    tp = typical_projector(rho_a, n, delta)
    state = tensor_power(sigma_pure, n, copy_label)
    compressed = apply_map(tp.compression, state)
    mass = compressed.norm**2
    if mass < 1e-12:
        raise ValueError(f"typical projection has negligible mass {mass:.3e}")
    compressed = PureState(compressed.vector / np.sqrt(mass), compressed.layout, check=False)
    t = tp.typical_dim
    info = mutual_information(sigma_pure, [a], refs) if refs else 0.0
    target = max(math.ceil(n * info / 2 + n * delta - 1e-9), 0)
    if a_hat_dim is None:
        d_hat = largest_divisor_at_most(t, 2.0**target)
    else:
        d_hat = int(a_hat_dim)
        if d_hat < 1 or d_hat > t or t % d_hat:
            raise LayoutError(f"|A^| = {d_hat} does not divide the typical dimension {t}")
    d_bar = t // d_hat
    draw = sampler.counter
    u = sampler.next_unitary(t)
    ref_labels = tuple(copy_label(lab, i) for i in range(1, n + 1) for lab in refs)
    residual = decoupled_residual(compressed, u, (d_bar, d_hat), a="A_typ", r=ref_labels)
    if ref_labels:
        ref_marg = partial_trace(compressed, ref_labels)
        target_state = tensor_product(maximally_mixed([(A_BAR, d_bar)]), ref_marg)
    else:
        target_state = maximally_mixed([(A_BAR, d_bar)])
    dist = trace_distance(residual, target_state)
    return IIDDecouplingReport(
        n=n, delta=delta, typical_dim=t, typical_mass=float(mass), mutual_information=float(info),
        target_qubits=int(target), a_hat_dim=d_hat, a_bar_dim=d_bar, distance=float(dist),
        seed=sampler.seed, draw=draw, schedule=schedule if delta is None else f"fixed={delta}",
    )
