"""Lower bounds on the side-information capacity by search over encoders.

Every admissible input is ``(id_S (x) E)(psi^{SS'})`` for a channel
``E: S' -> A A'``. ``E`` is given by an isometry ``S' -> A A' F``, taken as
the first ``|S'|`` columns of a unitary on ``A A' F`` (the input padded with
a fixed ancilla ket). The unitary walks by ``U <- U exp(i t H)`` with random
Hermitian ``H``; improvements are kept and the step adapts by a one-fifth
success rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channels import SideInfoChannel
from ..exceptions import DimensionCapError, LayoutError
from ..tensor_core import DensityOperator, get_dimension_cap, hermitian_part
from ..typicality import HaarSampler, haar_matrix

GROW = 2.0**0.25
SHRINK = 2.0**-0.0625
MIN_STEP = 1e-7


@dataclass
class CapacityResult:
    """Best input found; ``rate`` is a lower bound on the supremum, not the capacity."""

    best_sigma: DensityOperator
    rate: float
    classical_rate: float
    iterations: int
    restarts: int
    trace: list[tuple[int, float]]
    dims_used: tuple[int, int]
    isometry: np.ndarray
    restart_rates: list[float] = field(default_factory=list)
    best_restart: int = 0
    seed: int = 0
    lower_bound: bool = True

    def to_dict(self) -> dict:
        from ..serialization import encode_complex

        return {
            "rate": self.rate,
            "classical_rate": self.classical_rate,
            "lower_bound": self.lower_bound,
            "iterations": self.iterations,
            "restarts": self.restarts,
            "best_restart": self.best_restart,
            "restart_rates": list(self.restart_rates),
            "dims_used": {"A": self.dims_used[0], "F": self.dims_used[1]},
            "seed": self.seed,
            "best_sigma": {"layout": self.best_sigma.layout.to_list(),
                           "matrix": encode_complex(self.best_sigma.matrix)},
            "isometry": encode_complex(self.isometry),
            "trace": [list(t) for t in self.trace],
        }


def _entropy(rho: np.ndarray) -> float:
    w = np.linalg.eigvalsh(hermitian_part(rho))
    w = w[w > 1e-300]
    return float(-np.sum(w * np.log2(w)))


class _Objective:
    """Fast evaluation of the rate for a given isometry ``S' -> A A' F``."""

    def __init__(self, ch: SideInfoChannel, dim_a: int, env_dim: int):
        if ch.n != 1:
            raise ValueError("optimize over a single-use channel")
        use = ch.uses[0]
        comp = ch.channel
        self.d_a, self.d_f = int(dim_a), int(env_dim)
        if self.d_a < 1:
            raise ValueError("dim_A must be at least 1")
        if self.d_f < 1:
            raise ValueError("env_dim must be at least 1")
        in_layout = comp.in_layout
        self.d_ap = in_layout.dim(use.a)
        self.d_s = in_layout.dim(use.s)
        if set(in_layout.labels) != {use.a, use.s}:
            raise LayoutError(f"channel inputs {in_layout.labels} are not exactly (A', S)")
        side = ch.side_state
        self.d_sp = side.layout.dim(use.sp)
        if set(side.layout.labels) != {use.s, use.sp}:
            raise LayoutError(f"side state on {side.layout.labels} is not exactly (S, S')")
        self.d_total = self.d_a * self.d_ap * self.d_f
        cap = get_dimension_cap()
        if self.d_total > cap or self.d_a * self.d_ap * self.d_s > cap:
            raise DimensionCapError(f"search space of dimension {self.d_total} exceeds the cap of {cap}")
        if self.d_total < self.d_sp:
            raise LayoutError(f"|A||A'||F| = {self.d_total} cannot hold an isometry from |S'| = {self.d_sp}")
        psi = side.vector.reshape(side.layout.dims)
        if side.layout.labels[0] != use.s:
            psi = psi.T
        self.psi = psi
        k = comp.kraus_ops.reshape((comp.n_kraus, -1) + in_layout.dims)
        if in_layout.labels[0] != use.a:
            k = np.swapaxes(k, 2, 3)
        self.kraus = k
        self.labels = ("A", use.a, use.s)

    def tensor(self, v: np.ndarray) -> np.ndarray:
        """Amplitudes ``X[s, a, a', f]`` of ``(1 (x) V)|psi>``."""
        return (self.psi @ v.T).reshape(self.d_s, self.d_a, self.d_ap, self.d_f)

    def rate(self, v: np.ndarray) -> float:
        x = self.tensor(v)
        y = np.einsum("kbps,sapf->kbaf", self.kraus, x)
        w_ab = np.einsum("kbaf,kcdf->abdc", y, y.conj()).reshape(self.d_a * y.shape[1], -1)
        s_as = np.einsum("sapf,tbpf->asbt", x, x.conj()).reshape(self.d_a * self.d_s, -1)
        d_b = y.shape[1]
        t_ab = w_ab.reshape(self.d_a, d_b, self.d_a, d_b)
        rho_a = np.einsum("abcb->ac", t_ab)
        rho_b = np.einsum("abad->bd", t_ab)
        rho_s = np.einsum("asat->st", s_as.reshape(self.d_a, self.d_s, self.d_a, self.d_s))
        h_a = _entropy(rho_a)
        i_ab = h_a + _entropy(rho_b) - _entropy(w_ab)
        i_as = h_a + _entropy(rho_s) - _entropy(s_as)
        return 0.5 * (i_ab - i_as)

    def sigma(self, v: np.ndarray) -> DensityOperator:
        x = self.tensor(v)
        m = np.einsum("sapf,tbqf->apsbqt", x, x.conj())
        d = self.d_a * self.d_ap * self.d_s
        return DensityOperator(hermitian_part(m.reshape(d, d)),
                               [("A", self.d_a), (self.labels[1], self.d_ap), (self.labels[2], self.d_s)])


def _random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (z + z.conj().T) / 2
    return h / np.linalg.norm(h)


def _expi(h: np.ndarray, t: float) -> np.ndarray:
    w, q = np.linalg.eigh(h)
    return (q * np.exp(1j * t * w)) @ q.conj().T


def _complete_unitary(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unitary whose leading columns are the orthonormal columns of ``v``."""
    d, k = v.shape
    if k == d:
        return v.copy()
    z = rng.standard_normal((d, d - k)) + 1j * rng.standard_normal((d, d - k))
    z -= v @ (v.conj().T @ z)
    q, _ = np.linalg.qr(z)
    return np.concatenate([v, q], axis=1)


def embed_isometry(v: np.ndarray, from_dims: tuple[int, int, int], to_dims: tuple[int, int, int]) -> np.ndarray:
    """Pad an isometry into ``A A' F`` of larger ``|A|`` or ``|F|``; the rate is unchanged."""
    da, dap, df = from_dims
    ea, eap, ef = to_dims
    if dap != eap or ea < da or ef < df:
        raise LayoutError(f"cannot embed dimensions {from_dims} into {to_dims}")
    t = v.reshape(da, dap, df, -1)
    out = np.zeros((ea, eap, ef, t.shape[-1]), dtype=complex)
    out[:da, :, :df] = t
    return out.reshape(ea * eap * ef, -1)


def _search(obj: _Objective, u: np.ndarray, rng: np.random.Generator, max_iter: int,
            patience: int, rel_tol: float, step: float):
    k = obj.d_sp
    best = obj.rate(u[:, :k])
    history = [best]
    trace = [(0, best)]
    it = 0
    for it in range(1, max_iter + 1):
        h = _random_hermitian(rng, obj.d_total)
        cand = u @ _expi(h, step)
        val = obj.rate(cand[:, :k])
        if val > best:
            u, best = cand, val
            step *= GROW
            trace.append((it, best))
        else:
            step *= SHRINK
        history.append(best)
        if it >= patience:
            old = history[-1 - patience]
            if best - old <= rel_tol * max(abs(best), 1.0):
                break
        if step < MIN_STEP:
            break
    return u, best, it, trace


def _run_restart(obj: _Objective, sampler: HaarSampler, index: int, max_iter: int, patience: int,
                 rel_tol: float, step: float, start: np.ndarray | None):
    rng = sampler.spawn(index).generator_at(0)
    if start is None:
        u = haar_matrix(rng, obj.d_total)
    else:
        u = _complete_unitary(start, rng)
    return _search(obj, u, rng, max_iter, patience, rel_tol, step)


def optimize_capacity(ch: SideInfoChannel, dim_A: int = 2, env_dim: int = 2, restarts: int = 10,
                      sampler: HaarSampler | None = None, *, max_iter: int = 2000, patience: int = 50,
                      rel_tol: float = 1e-7, step: float = 0.5, warm_start: CapacityResult | None = None,
                      n_jobs: int = 1) -> CapacityResult:
    """Multi-restart local search for the best side-information-constrained input.

    Restart ``r`` draws its start and perturbations from ``sampler.spawn(r)``.
    A ``warm_start`` result from smaller ``dim_A``/``env_dim`` is embedded and
    refined as one extra restart, so enlarging either dimension never lowers
    the returned rate. The best restart wins; ties go to the lowest index.
    """
    if restarts < 1 and warm_start is None:
        raise ValueError("need at least one restart")
    sampler = HaarSampler(0) if sampler is None else sampler
    obj = _Objective(ch, dim_A, env_dim)
    jobs = [(r, None) for r in range(int(restarts))]
    if warm_start is not None:
        src = (warm_start.dims_used[0], obj.d_ap, warm_start.dims_used[1])
        jobs.append((int(restarts), embed_isometry(warm_start.isometry, src, (obj.d_a, obj.d_ap, obj.d_f))))
    args = (max_iter, patience, rel_tol, step)
    if n_jobs == 1:
        runs = [_run_restart(obj, sampler, r, *args, start) for r, start in jobs]
    else:
        from joblib import Parallel, delayed

        runs = Parallel(n_jobs=n_jobs)(delayed(_run_restart)(obj, sampler, r, *args, start) for r, start in jobs)
    rates = [r[1] for r in runs]
    best = int(np.argmax(rates))
    u, rate, _, trace = runs[best]
    v = u[:, : obj.d_sp]
    rate = float(rate)
    return CapacityResult(
        best_sigma=obj.sigma(v),
        rate=rate,
        classical_rate=2.0 * rate,
        iterations=int(sum(r[2] for r in runs)),
        restarts=len(jobs),
        trace=[(int(i), float(x)) for i, x in trace],
        dims_used=(obj.d_a, obj.d_f),
        isometry=v,
        restart_rates=[float(x) for x in rates],
        best_restart=best,
        seed=sampler.seed,
    )


def input_from_isometry(ch: SideInfoChannel, v: np.ndarray, dim_A: int, env_dim: int) -> DensityOperator:
    """``sigma^{A A' S}`` generated by the isometry ``v: S' -> A A' F``."""
    return _Objective(ch, dim_A, env_dim).sigma(np.asarray(v, dtype=complex))
