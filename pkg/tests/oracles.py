"""Reference implementations used to cross-check the package.

Everything here is written the slow, obvious way (explicit Kronecker
products, loops over basis vectors, scipy matrix functions) and shares no
code with ``qgp``.
"""

import itertools
import math

import numpy as np
import scipy.linalg


def ket(d, i):
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def ptrace(rho, dims, keep):
    """Partial trace keeping the subsystem positions in ``keep`` (in order of ``dims``).

    Sums ``M_k rho M_k^dagger`` with ``M_k = (x)_j (1 or <k_j|)``.
    """
    keep = set(keep)
    traced = [j for j in range(len(dims)) if j not in keep]
    out = None
    for idx in itertools.product(*[range(dims[j]) for j in traced]):
        pick = dict(zip(traced, idx))
        factors = [np.eye(d) if j in keep else ket(d, pick[j])[None, :] for j, d in enumerate(dims)]
        m = kron_all(factors)
        term = m @ rho @ m.conj().T
        out = term if out is None else out + term
    return out


def trace_norm(m):
    return float(np.sum(scipy.linalg.svdvals(m)))


def entropy(rho):
    w = scipy.linalg.eigvalsh((rho + rho.conj().T) / 2)
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log2(w)))


def mutual_info(rho, dims, a, b):
    h = lambda keep: entropy(ptrace(rho, dims, keep))  # noqa: E731
    return h(a) + h(b) - h(sorted(a + b))


def binary_entropy(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def root_fidelity(rho, sigma):
    """``|| sqrt(rho) sqrt(sigma) ||_1``."""
    return trace_norm(scipy.linalg.sqrtm(rho) @ scipy.linalg.sqrtm(sigma))


def apply_kraus(ops, rho):
    return sum(k @ rho @ k.conj().T for k in ops)


def choi(ops):
    """``sum_ij |i><j| (x) N(|i><j|) / d`` built from matrix units."""
    d = ops[0].shape[1]
    out = 0
    for i in range(d):
        for j in range(d):
            e = np.outer(ket(d, i), ket(d, j))
            out = out + np.kron(e, apply_kraus(ops, e))
    return out / d


def random_state(rng, d, rank=None):
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_ket(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_isometry(rng, dout, din):
    z = rng.standard_normal((dout, din)) + 1j * rng.standard_normal((dout, din))
    q, _ = np.linalg.qr(z)
    return q


def typical_sequences(p, n, eps):
    """Enumerate sequences with ``|-log2 Pr / n - H| <= eps``; returns (count, mass)."""
    h = -sum(x * math.log2(x) for x in p if x > 0)
    count, mass = 0, 0.0
    for seq in itertools.product(range(len(p)), repeat=n):
        pr = math.prod(p[s] for s in seq)
        if pr > 0 and abs(-math.log2(pr) / n - h) <= eps:
            count += 1
            mass += pr
    return count, mass


def bernoulli_typical(q, n, eps):
    """Same set decided by the number of ones only."""
    h = binary_entropy(q)
    count, mass = 0, 0.0
    for k in range(n + 1):
        rate = -(k * math.log2(q) + (n - k) * math.log2(1 - q)) / n
        if abs(rate - h) <= eps:
            count += math.comb(n, k)
            mass += math.comb(n, k) * q**k * (1 - q) ** (n - k)
    return count, mass
