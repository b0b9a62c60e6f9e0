"""Seeded Haar sampling, typical sets and typical projectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DimensionCapError
from .tensor_core import DensityOperator, Layout, LinearMap, get_dimension_cap, hermitian_part

ENUMERATION_GUARD = 2**22
DEGENERACY_TOL = 1e-12
DEFAULT_SCHEDULE = "quarter"

EPSILON_SCHEDULES: dict[str, Callable[[int], float]] = {
    "quarter": lambda n: float(n) ** -0.25,
    "half": lambda n: float(n) ** -0.5,
}


def epsilon_schedule(name: str = DEFAULT_SCHEDULE) -> Callable[[int], float]:
    """Look up a typicality schedule ``n -> delta_n``.

    Named schedules are ``quarter`` (``n**-1/4``, the default) and ``half``
    (``n**-1/2``); ``fixed=<x>`` gives a constant.
    """
    if name.startswith("fixed="):
        value = float(name.split("=", 1)[1])
        if value <= 0:
            raise ValueError("a fixed epsilon must be positive")
        return lambda n: value
    try:
        return EPSILON_SCHEDULES[name]
    except KeyError:
        raise ValueError(
            f"unknown epsilon schedule {name!r}; choose from {sorted(EPSILON_SCHEDULES)} or fixed=<x>"
        ) from None


# ---------------------------------------------------------------------------
# Haar sampling


def haar_matrix(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-random ``d x d`` unitary: QR of a complex Ginibre matrix with phase fix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    phases = diag / np.abs(diag)
    return q * phases[None, :]


class HaarSampler:
    """Counter-based source of Haar unitaries and random generators.

    Draw ``k`` on stream ``path`` comes from a Philox generator keyed by
    ``SeedSequence(seed, spawn_key=path + (k,))``, so any draw can be
    replayed on its own and parallel workers need only distinct streams.
    The counter makes instances stateful: do not share one across threads,
    :meth:`spawn` a child stream per worker instead.
    """

    def __init__(self, seed: int, dim: int = 2, stream: tuple[int, ...] | int = ()):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if int(dim) < 1:
            raise ValueError("dimension must be positive")
        self.seed = seed
        self.dim = int(dim)
        self.stream = (int(stream),) if isinstance(stream, (int, np.integer)) else tuple(int(s) for s in stream)
        self.counter = 0

    def __repr__(self):
        return f"HaarSampler(seed={self.seed}, dim={self.dim}, stream={self.stream}, counter={self.counter})"

    def generator_at(self, k: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream + (int(k),))
        return np.random.Generator(np.random.Philox(ss))

    def unitary_at(self, k: int, dim: int | None = None) -> np.ndarray:
        return haar_matrix(self.generator_at(k), self.dim if dim is None else int(dim))

    def next_generator(self) -> np.random.Generator:
        g = self.generator_at(self.counter)
        self.counter += 1
        return g

    def next_unitary(self, dim: int | None = None) -> np.ndarray:
        u = self.unitary_at(self.counter, dim)
        self.counter += 1
        return u

    def skip(self, k: int) -> None:
        self.counter += int(k)

    def spawn(self, index: int, dim: int | None = None) -> "HaarSampler":
        return HaarSampler(self.seed, self.dim if dim is None else dim, self.stream + (int(index),))


def haar_unitary(sampler: HaarSampler, label: str = "A", dim: int | None = None) -> LinearMap:
    """Next Haar unitary from ``sampler`` as a map on one subsystem."""
    u = sampler.next_unitary(dim)
    layout = Layout([(label, u.shape[0])])
    return LinearMap(u, layout, layout, "unitary", check=False)


# ---------------------------------------------------------------------------
# typical sets


@dataclass(frozen=True)
class TypicalSet:
    sequences: np.ndarray
    probability: float
    entropy: float
    n: int
    epsilon: float

    @property
    def size(self) -> int:
        return int(self.sequences.shape[0])


def _validate_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError(f"{p!r} is not a probability vector")
    return p


def sequence_log_probabilities(p, n: int) -> np.ndarray:
    """``log2 Pr(x^n)`` for every sequence, indexed in row-major (first symbol slowest) order."""
    with np.errstate(divide="ignore"):
        logp = np.log2(np.asarray(p, dtype=float))
    lp = np.zeros(1)
    for _ in range(n):
        lp = (lp[:, None] + logp[None, :]).reshape(-1)
    return lp


def _entropy(p: np.ndarray) -> float:
    q = p[p > 0]
    return float(-np.sum(q * np.log2(q)))


def _typical_mask(p: np.ndarray, n: int, epsilon: float) -> tuple[np.ndarray, np.ndarray, float]:
    h = _entropy(p)
    lp = sequence_log_probabilities(p, n)
    finite = np.isfinite(lp)
    mask = np.zeros(lp.shape, dtype=bool)
    mask[finite] = np.abs(-lp[finite] / n - h) <= epsilon
    return mask, lp, h


def classical_typical_set(p, n: int, epsilon: float, max_sequences: int = ENUMERATION_GUARD) -> TypicalSet:
    """All length-``n`` sequences whose empirical rate is within ``epsilon`` of ``H(p)``.

    Decided by exhaustive enumeration of ``|alphabet|**n`` sequences.
    """
    p = _validate_distribution(p)
    n = int(n)
    if n < 1:
        raise ValueError("block length must be at least 1")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if p.size**n > max_sequences:
        raise DimensionCapError(f"{p.size}**{n} sequences exceed the enumeration guard of {max_sequences}")
    mask, lp, h = _typical_mask(p, n, epsilon)
    idx = np.flatnonzero(mask)
    seqs = np.array(np.unravel_index(idx, (p.size,) * n)).T.reshape(-1, n)
    return TypicalSet(seqs, float(np.sum(np.exp2(lp[mask]))), h, n, float(epsilon))


def group_spectrum(w: np.ndarray, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Replace clusters of eigenvalues closer than ``tol`` by their mean."""
    w = np.asarray(w, dtype=float)
    order = np.argsort(w)
    out = w.copy()
    start = 0
    sw = w[order]
    for i in range(1, len(sw) + 1):
        if i == len(sw) or sw[i] - sw[i - 1] > tol:
            out[order[start:i]] = sw[start:i].mean()
            start = i
    return out


@dataclass(frozen=True)
class TypicalProjector:
    """Typical projector on ``A^n`` together with the compression to ``A_Typ``.

    ``isometry`` embeds ``A_Typ`` into ``A^n`` (its columns are the typical
    product eigenvectors); ``projector`` is ``isometry @ isometry^dagger``.
    """

    projector: LinearMap
    isometry: LinearMap
    n: int
    epsilon: float
    base_state: DensityOperator
    typical_dim: int
    mass: float
    entropy: float
    spectrum: np.ndarray
    mask: np.ndarray

    @property
    def dimension_bound(self) -> float:
        return 2.0 ** (self.n * (self.entropy + self.epsilon))

    @property
    def compression(self) -> LinearMap:
        return self.isometry.adjoint


def copy_label(label: str, i: int) -> str:
    return f"{label}_{i}"


def typical_projector(rho: DensityOperator, n: int, epsilon: float, typ_label: str = "A_typ") -> TypicalProjector:
    """Projector onto product eigenvectors of ``rho^{(x)n}`` with typical eigenvalue sequences.

    Copy ``i`` of subsystem ``X`` is labelled ``X_i``.
    """
    n = int(n)
    d = rho.layout.total_dim
    cap = get_dimension_cap()
    if d**n > cap:
        raise DimensionCapError(f"typical projector on dimension {d}**{n} exceeds the cap of {cap}")
    layout = Layout([(copy_label(lab, i), dim) for i in range(1, n + 1) for lab, dim in rho.layout])
    w, v = np.linalg.eigh(hermitian_part(rho.matrix))
    w = np.clip(group_spectrum(w), 0.0, None)
    w = w / w.sum()
    ts = classical_typical_set(w, n, epsilon, max_sequences=cap)
    mask, _, h = _typical_mask(w, n, epsilon)
    t = int(mask.sum())
    if t == 0:
        raise ValueError(f"typical subspace is empty for n={n}, epsilon={epsilon}")
    vn = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        vn = np.kron(vn, v)
    cols = vn[:, mask]
    proj = cols @ cols.conj().T
    return TypicalProjector(
        projector=LinearMap(proj, layout, layout, "projector", check=False),
        isometry=LinearMap(cols, Layout([(typ_label, t)]), layout, "isometry", check=False),
        n=n,
        epsilon=float(epsilon),
        base_state=rho,
        typical_dim=t,
        mass=ts.probability,
        entropy=h,
        spectrum=w,
        mask=mask,
    )


@dataclass(frozen=True)
class GentleMeasurementReport:
    mass: float
    post_distance: float
    bound: float
    holds: bool


def gentle_measurement_check(tp: TypicalProjector, atol: float = 1e-9) -> GentleMeasurementReport:
    """Disturbance of ``rho^{(x)n}`` by the typical projection vs ``2 sqrt(1 - mass)``.

    Both operators are diagonal in the product eigenbasis, so the trace
    distance is a sum over sequence probabilities.
    """
    probs = np.exp2(sequence_log_probabilities(tp.spectrum, tp.n))
    mass = float(np.sum(probs[tp.mask]))
    if mass < 1e-12:
        raise ValueError(f"typical mass {mass:.3e} is degenerate")
    post = np.where(tp.mask, probs / mass, 0.0)
    dist = float(np.sum(np.abs(post - probs)))
    bound = 2.0 * np.sqrt(max(1.0 - mass, 0.0))
    return GentleMeasurementReport(mass, dist, float(bound), dist <= bound + atol)


def typicality_report(spectrum, n: int, epsilon: float) -> dict:
    """Quantum vs classical typical counts, the size bound and gentle measurement."""
    p = _validate_distribution(spectrum)
    rho = DensityOperator(np.diag(p).astype(complex), [("A", p.size)])
    tp = typical_projector(rho, n, epsilon)
    ts = classical_typical_set(p, n, epsilon)
    gm = gentle_measurement_check(tp)
    report = {
        "spectrum": [float(x) for x in p],
        "n": int(n),
        "epsilon": float(epsilon),
        "entropy": tp.entropy,
        "typical_dim": tp.typical_dim,
        "classical_count": ts.size,
        "counts_match": tp.typical_dim == ts.size,
        "dimension_bound": tp.dimension_bound,
        "bound_holds": tp.typical_dim <= tp.dimension_bound,
        "mass": gm.mass,
        "post_distance": gm.post_distance,
        "gentle_bound": gm.bound,
        "gentle_holds": gm.holds,
    }
    return report
