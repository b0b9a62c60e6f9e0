"""Subsystem-labelled states, linear maps and the operations between them.

Every state and map carries a :class:`Layout`, an ordered list of
``(label, dim)`` pairs. Operations address subsystems by label and never
broadcast silently: a label-set mismatch is always an error.
"""

from __future__ import annotations

import contextlib
from collections.abc import Mapping
from typing import Union

import numpy as np

from .exceptions import DimensionCapError, LayoutError, StateValidationError

DEFAULT_CAP = 4096
RANK_CUTOFF = 1e-12

STATE_ATOL = 1e-10
MAP_ATOL = 1e-9
PSD_ATOL = 1e-9

MAP_KINDS = ("unitary", "isometry", "partial_isometry", "projector")

_cap = DEFAULT_CAP


def get_dimension_cap() -> int:
    return _cap


def set_dimension_cap(cap: int) -> None:
    """Set the process-wide cap on ``Layout.total_dim``."""
    global _cap
    cap = int(cap)
    if cap < 1:
        raise ValueError("dimension cap must be a positive integer")
    _cap = cap


@contextlib.contextmanager
def dimension_cap(cap: int):
    old = _cap
    set_dimension_cap(cap)
    try:
        yield
    finally:
        set_dimension_cap(old)


def _as_labels(labels) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


class _Frozen:
    __slots__ = ()

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def __delattr__(self, name):
        raise AttributeError(f"{type(self).__name__} is immutable")


class Layout(_Frozen):
    """Ordered named subsystems with their dimensions.

    Parameters
    ----------
    subsystems : iterable of (label, dim) pairs, a mapping, or a Layout
    cap : int, optional
        Upper bound on the product of dimensions. Defaults to the
        process-wide cap (4096 unless changed with :func:`set_dimension_cap`).
    """

    __slots__ = ("_subsystems", "_index")

    def __init__(self, subsystems=(), cap: int | None = None):
        if isinstance(subsystems, Layout):
            items = subsystems.subsystems
        elif isinstance(subsystems, Mapping):
            items = tuple(subsystems.items())
        else:
            items = tuple(subsystems)
        parsed = []
        index = {}
        for item in items:
            try:
                label, dim = item
            except (TypeError, ValueError):
                raise LayoutError(f"subsystem entry {item!r} is not a (label, dim) pair") from None
            label = str(label)
            if not label:
                raise LayoutError("subsystem labels must be nonempty strings")
            if isinstance(dim, (bool, np.bool_)) or int(dim) != dim:
                raise LayoutError(f"dimension of {label!r} must be an integer, got {dim!r}")
            dim = int(dim)
            if dim < 1:
                raise LayoutError(f"dimension of {label!r} must be positive, got {dim}")
            if label in index:
                raise LayoutError(f"duplicate subsystem label {label!r}")
            index[label] = len(parsed)
            parsed.append((label, dim))
        total = 1
        for _, d in parsed:
            total *= d
        limit = _cap if cap is None else int(cap)
        if total > limit:
            raise DimensionCapError(
                f"layout {parsed!r} has total dimension {total}, above the cap of {limit}"
            )
        object.__setattr__(self, "_subsystems", tuple(parsed))
        object.__setattr__(self, "_index", index)

    @property
    def subsystems(self) -> tuple[tuple[str, int], ...]:
        return self._subsystems

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self._subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self._subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self._subsystems else 1

    def __len__(self):
        return len(self._subsystems)

    def __iter__(self):
        return iter(self._subsystems)

    def __contains__(self, label):
        return label in self._index

    def __eq__(self, other):
        return isinstance(other, Layout) and self._subsystems == other._subsystems

    def __hash__(self):
        return hash(self._subsystems)

    def __repr__(self):
        inner = ", ".join(f"{lab}:{d}" for lab, d in self._subsystems)
        return f"Layout({inner})"

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise LayoutError(f"unknown subsystem label {label!r} (layout has {self.labels})") from None

    def dim(self, label: str) -> int:
        return self._subsystems[self.index(label)][1]

    def select(self, labels) -> "Layout":
        """Sub-layout with the given labels, in the order given."""
        return Layout([(lab, self.dim(lab)) for lab in _as_labels(labels)])

    def without(self, labels) -> "Layout":
        drop = set(_as_labels(labels))
        for lab in drop:
            self.index(lab)
        return Layout([item for item in self._subsystems if item[0] not in drop])

    def rename(self, mapping: Mapping[str, str]) -> "Layout":
        for lab in mapping:
            self.index(lab)
        return Layout([(mapping.get(lab, lab), d) for lab, d in self._subsystems])

    def ordered(self, labels) -> tuple[str, ...]:
        """The given labels sorted into this layout's order."""
        labels = set(_as_labels(labels))
        for lab in labels:
            self.index(lab)
        return tuple(lab for lab in self.labels if lab in labels)

    def __add__(self, other: "Layout") -> "Layout":
        return Layout(self._subsystems + Layout(other)._subsystems)

    def to_list(self) -> list:
        return [[lab, d] for lab, d in self._subsystems]


def as_layout(layout) -> Layout:
    return layout if isinstance(layout, Layout) else Layout(layout)


class PureState(_Frozen):
    """A ket on a labelled layout.

    ``check=False`` skips the normalization test; it is used internally for
    vectors produced by projectors and partial isometries, which may be
    subnormalized.
    """

    __slots__ = ("vector", "layout")

    def __init__(self, vector, layout, *, check: bool = True, atol: float = STATE_ATOL):
        layout = as_layout(layout)
        v = np.array(vector, dtype=complex).reshape(-1)
        if v.size != layout.total_dim:
            raise StateValidationError(
                f"amplitude vector has length {v.size}, layout {layout} needs {layout.total_dim}"
            )
        if check:
            norm2 = float(np.vdot(v, v).real)
            if abs(norm2 - 1.0) > atol:
                raise StateValidationError(f"state is not normalized: squared norm {norm2!r}")
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "layout", layout)

    def __repr__(self):
        return f"PureState({self.layout})"

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.vector, self.vector.conj()), self.layout, check=False)

    def normalized(self) -> "PureState":
        return PureState(self.vector / np.linalg.norm(self.vector), self.layout)


class DensityOperator(_Frozen):
    """A density matrix on a labelled layout."""

    __slots__ = ("matrix", "layout")

    def __init__(self, matrix, layout, *, check: bool = True, atol: float = STATE_ATOL,
                 psd_atol: float = PSD_ATOL):
        layout = as_layout(layout)
        m = np.array(matrix, dtype=complex)
        d = layout.total_dim
        if m.shape != (d, d):
            raise StateValidationError(f"matrix has shape {m.shape}, layout {layout} needs {(d, d)}")
        if check:
            herm = np.max(np.abs(m - m.conj().T)) if d else 0.0
            if herm > atol:
                raise StateValidationError(f"matrix is not Hermitian (deviation {herm:.3e})")
            tr = np.trace(m).real
            if abs(tr - 1.0) > atol:
                raise StateValidationError(f"trace is {tr!r}, expected 1")
            lo = np.linalg.eigvalsh(hermitian_part(m))[0]
            if lo < -psd_atol:
                raise StateValidationError(f"matrix has negative eigenvalue {lo:.3e}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "layout", layout)

    def __repr__(self):
        return f"DensityOperator({self.layout})"

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)

    def density(self) -> "DensityOperator":
        return self


State = Union[PureState, DensityOperator]


def _check_map_kind(m: np.ndarray, kind: str, atol: float) -> None:
    dout, din = m.shape
    gram = m.conj().T @ m
    if kind == "unitary":
        if dout != din:
            raise StateValidationError(f"unitary must be square, got {m.shape}")
        err = max(np.max(np.abs(gram - np.eye(din))), np.max(np.abs(m @ m.conj().T - np.eye(dout))))
    elif kind == "isometry":
        err = np.max(np.abs(gram - np.eye(din))) if din else 0.0
    elif kind == "partial_isometry":
        err = np.max(np.abs(gram @ gram - gram)) if din else 0.0
    elif kind == "projector":
        if dout != din:
            raise StateValidationError(f"projector must be square, got {m.shape}")
        err = max(np.max(np.abs(m @ m - m)), np.max(np.abs(m - m.conj().T)))
    else:
        raise ValueError(f"unknown map kind {kind!r}; expected one of {MAP_KINDS}")
    if err > atol:
        raise StateValidationError(f"matrix is not a valid {kind} (deviation {err:.3e})")


class LinearMap(_Frozen):
    """A unitary, isometry, partial isometry or projector between layouts.

    ``matrix`` has shape ``(out_layout.total_dim, in_layout.total_dim)``.
    """

    __slots__ = ("matrix", "in_layout", "out_layout", "kind")

    def __init__(self, matrix, in_layout, out_layout, kind: str = "isometry", *,
                 check: bool = True, atol: float = MAP_ATOL):
        in_layout = as_layout(in_layout)
        out_layout = as_layout(out_layout)
        if kind not in MAP_KINDS:
            raise ValueError(f"unknown map kind {kind!r}; expected one of {MAP_KINDS}")
        m = np.array(matrix, dtype=complex)
        shape = (out_layout.total_dim, in_layout.total_dim)
        if m.shape != shape:
            raise StateValidationError(f"map matrix has shape {m.shape}, layouts need {shape}")
        if check:
            _check_map_kind(m, kind, atol)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "in_layout", in_layout)
        object.__setattr__(self, "out_layout", out_layout)
        object.__setattr__(self, "kind", kind)

    def __repr__(self):
        return f"LinearMap({self.kind}: {self.in_layout} -> {self.out_layout})"

    @property
    def adjoint(self) -> "LinearMap":
        kind = "partial_isometry" if self.kind == "isometry" else self.kind
        return LinearMap(self.matrix.conj().T, self.out_layout, self.in_layout, kind, check=False)


def identity_map(layout, kind: str = "unitary") -> LinearMap:
    layout = as_layout(layout)
    return LinearMap(np.eye(layout.total_dim), layout, layout, kind, check=False)


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


# ---------------------------------------------------------------------------
# constructors


def basis_state(layout, indices) -> PureState:
    """Computational basis ket; ``indices`` gives one index per subsystem."""
    layout = as_layout(layout)
    indices = tuple(indices)
    if len(indices) != len(layout):
        raise LayoutError(f"need {len(layout)} basis indices, got {len(indices)}")
    v = np.zeros(layout.total_dim, dtype=complex)
    v[np.ravel_multi_index(indices, layout.dims) if layout.dims else 0] = 1.0
    return PureState(v, layout)


def maximally_mixed(layout) -> DensityOperator:
    layout = as_layout(layout)
    d = layout.total_dim
    return DensityOperator(np.eye(d) / d, layout, check=False)


def maximally_entangled(labels, dim: int) -> PureState:
    """``sum_i |ii> / sqrt(dim)`` on two subsystems of dimension ``dim``."""
    a, b = labels
    if int(dim) != dim or dim < 1:
        raise LayoutError(f"maximally entangled dimension must be a positive integer, got {dim!r}")
    dim = int(dim)
    return PureState(np.eye(dim).reshape(-1) / np.sqrt(dim), [(a, dim), (b, dim)])


def random_pure_state(layout, rng: np.random.Generator) -> PureState:
    layout = as_layout(layout)
    d = layout.total_dim
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(v / np.linalg.norm(v), layout)


def random_density_operator(layout, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Random mixed state from a Ginibre matrix (full rank unless ``rank`` is given)."""
    layout = as_layout(layout)
    d = layout.total_dim
    k = d if rank is None else int(rank)
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    rho = hermitian_part(rho / np.trace(rho).real)
    return DensityOperator(rho, layout)


# ---------------------------------------------------------------------------
# reshaping helpers


def _vector_tensor(v: np.ndarray, layout: Layout) -> np.ndarray:
    return v.reshape(layout.dims) if len(layout) else v.reshape(())


def _bipartition(v: np.ndarray, layout: Layout, keep: tuple[str, ...]) -> np.ndarray:
    """Reshape a ket into a (keep, rest) matrix; keep follows the given order."""
    idx = [layout.index(lab) for lab in keep]
    rest = [i for i in range(len(layout)) if i not in idx]
    t = np.transpose(_vector_tensor(v, layout), idx + rest)
    dk = int(np.prod([layout.dims[i] for i in idx], dtype=np.int64))
    return t.reshape(dk, -1)


def _density_tensor(m: np.ndarray, layout: Layout) -> np.ndarray:
    return m.reshape(layout.dims * 2) if len(layout) else m.reshape(())


def _resolve_keep(layout: Layout, keep) -> tuple[str, ...]:
    keep = _as_labels(keep)
    if not keep:
        raise LayoutError("partial trace needs a nonempty set of subsystems to keep")
    if len(set(keep)) != len(keep):
        raise LayoutError(f"repeated labels in {keep}")
    return layout.ordered(keep)


def reduced_matrix(x: State, keep) -> np.ndarray:
    """Raw matrix of the marginal on ``keep`` (labels in layout order)."""
    keep = _resolve_keep(x.layout, keep)
    if isinstance(x, PureState):
        m = _bipartition(x.vector, x.layout, keep)
        return m @ m.conj().T
    layout = x.layout
    n = len(layout)
    idx = [layout.index(lab) for lab in keep]
    rest = [i for i in range(n) if i not in idx]
    dk = int(np.prod([layout.dims[i] for i in idx], dtype=np.int64))
    dr = layout.total_dim // dk
    t = np.transpose(_density_tensor(x.matrix, layout), idx + rest + [i + n for i in idx] + [i + n for i in rest])
    t = t.reshape(dk, dr, dk, dr)
    return np.einsum("ijkj->ik", t)


def partial_trace(x: State, keep) -> DensityOperator:
    """Marginal on the subsystems in ``keep``; everything else is traced out.

    Accepts pure states as well as density operators. The result keeps the
    subsystems in the order they appear in ``x.layout``.
    """
    keep = _resolve_keep(x.layout, keep)
    return DensityOperator(reduced_matrix(x, keep), x.layout.select(keep), check=False)


def marginal_eigenvalues(x: State, keep) -> np.ndarray:
    """Eigenvalues of the marginal on ``keep``, after Hermitian symmetrization.

    For pure inputs the smaller of the two Gram matrices is diagonalized.
    """
    keep = _resolve_keep(x.layout, keep)
    if isinstance(x, PureState):
        m = _bipartition(x.vector, x.layout, keep)
        g = m @ m.conj().T if m.shape[0] <= m.shape[1] else m.conj().T @ m
        return np.linalg.eigvalsh(hermitian_part(g))
    return np.linalg.eigvalsh(hermitian_part(reduced_matrix(x, keep)))


def permute_subsystems(x, new_order, *, in_order=None):
    """Reorder subsystems of a state or map.

    For a :class:`LinearMap`, ``new_order`` permutes the output subsystems and
    ``in_order`` (optional) the input subsystems.
    """
    if isinstance(x, LinearMap):
        m = x.matrix
        out_layout, in_layout = x.out_layout, x.in_layout
        if new_order is not None:
            perm = _permutation(out_layout, new_order)
            t = m.reshape(out_layout.dims + (in_layout.total_dim,))
            t = np.transpose(t, perm + [len(out_layout)])
            out_layout = Layout([out_layout.subsystems[i] for i in perm])
            m = t.reshape(out_layout.total_dim, in_layout.total_dim)
        if in_order is not None:
            perm = _permutation(in_layout, in_order)
            t = m.reshape((out_layout.total_dim,) + in_layout.dims)
            t = np.transpose(t, [0] + [i + 1 for i in perm])
            in_layout = Layout([in_layout.subsystems[i] for i in perm])
            m = t.reshape(out_layout.total_dim, in_layout.total_dim)
        return LinearMap(m, in_layout, out_layout, x.kind, check=False)
    layout = x.layout
    perm = _permutation(layout, new_order)
    new_layout = Layout([layout.subsystems[i] for i in perm])
    if isinstance(x, PureState):
        v = np.transpose(_vector_tensor(x.vector, layout), perm).reshape(-1)
        return PureState(v, new_layout, check=False)
    n = len(layout)
    t = np.transpose(_density_tensor(x.matrix, layout), perm + [i + n for i in perm])
    d = layout.total_dim
    return DensityOperator(t.reshape(d, d), new_layout, check=False)


def _permutation(layout: Layout, new_order) -> list[int]:
    new_order = _as_labels(new_order)
    if sorted(new_order) != sorted(layout.labels) or len(set(new_order)) != len(new_order):
        raise LayoutError(f"{new_order} is not a permutation of {layout.labels}")
    return [layout.index(lab) for lab in new_order]


def align(x: State, reference: Layout) -> State:
    """Permute ``x`` into the label order of ``reference``; dimensions must agree."""
    if x.layout == reference:
        return x
    if set(x.layout.labels) != set(reference.labels):
        raise LayoutError(f"layouts {x.layout} and {reference} have different label sets")
    for lab, d in reference:
        if x.layout.dim(lab) != d:
            raise LayoutError(f"subsystem {lab!r} has dimension {x.layout.dim(lab)} vs {d}")
    return permute_subsystems(x, reference.labels)


def tensor_product(*operands):
    """Kronecker product of states or of maps, concatenating layouts.

    Mixing a pure state with a density operator yields a density operator.
    """
    if not operands:
        raise ValueError("tensor_product needs at least one operand")
    if all(isinstance(o, LinearMap) for o in operands):
        m = operands[0].matrix
        in_layout, out_layout = operands[0].in_layout, operands[0].out_layout
        kinds = {operands[0].kind}
        for o in operands[1:]:
            in_layout = in_layout + o.in_layout
            out_layout = out_layout + o.out_layout
            m = np.kron(m, o.matrix)
            kinds.add(o.kind)
        if len(kinds) == 1:
            kind = kinds.pop()
        elif kinds <= {"unitary", "isometry"}:
            kind = "isometry"
        else:
            kind = "partial_isometry"
        return LinearMap(m, in_layout, out_layout, kind, check=False)
    if any(isinstance(o, LinearMap) for o in operands):
        raise TypeError("cannot mix states and maps in a tensor product")
    layout = operands[0].layout
    for o in operands[1:]:
        layout = layout + o.layout
    if all(isinstance(o, PureState) for o in operands):
        v = operands[0].vector
        for o in operands[1:]:
            v = np.kron(v, o.vector)
        return PureState(v, layout, check=False)
    m = operands[0].density().matrix
    for o in operands[1:]:
        m = np.kron(m, o.density().matrix)
    return DensityOperator(m, layout, check=False)


def tensor_power(x, n: int, relabel) -> State:
    """``x`` tensored ``n`` times; ``relabel(label, i)`` names copy ``i`` (1-based)."""
    copies = [relabel_state(x, {lab: relabel(lab, i) for lab in x.layout.labels}) for i in range(1, n + 1)]
    return tensor_product(*copies)


def relabel_state(x: State, mapping: Mapping[str, str]) -> State:
    layout = x.layout.rename(mapping)
    if isinstance(x, PureState):
        return PureState(x.vector, layout, check=False)
    return DensityOperator(x.matrix, layout, check=False)


def relabel_map(m: LinearMap, mapping: Mapping[str, str]) -> LinearMap:
    in_map = {k: v for k, v in mapping.items() if k in m.in_layout}
    out_map = {k: v for k, v in mapping.items() if k in m.out_layout}
    return LinearMap(m.matrix, m.in_layout.rename(in_map), m.out_layout.rename(out_map), m.kind, check=False)


# ---------------------------------------------------------------------------
# applying maps


def _target_axes(layout: Layout, in_layout: Layout) -> tuple[list[int], list[int], int]:
    for lab, d in in_layout:
        if lab not in layout:
            raise LayoutError(f"map input subsystem {lab!r} not present in {layout}")
        if layout.dim(lab) != d:
            raise LayoutError(f"map expects {lab!r} of dimension {d}, state has {layout.dim(lab)}")
    tgt = [layout.index(lab) for lab in in_layout.labels]
    rest = [i for i in range(len(layout)) if i not in tgt]
    pos = sum(1 for i in rest if i < min(tgt)) if tgt else len(rest)
    return tgt, rest, pos


def _output_layout(layout: Layout, rest: list[int], pos: int, out_layout: Layout) -> Layout:
    rest_items = [layout.subsystems[i] for i in rest]
    return Layout(rest_items[:pos] + list(out_layout.subsystems) + rest_items[pos:])


def _final_perm(n_out: int, n_rest: int, pos: int) -> list[int]:
    return (
        [n_out + j for j in range(pos)]
        + list(range(n_out))
        + [n_out + j for j in range(pos, n_rest)]
    )


def apply_operators(ops: np.ndarray, in_layout: Layout, out_layout: Layout, x: State) -> State:
    """Apply ``sum_k K_k . x . K_k^dagger`` on the targeted subsystems.

    ``ops`` has shape ``(k, dout, din)``. A single operator on a pure state
    acts on the ket; otherwise the result is a density operator. The output
    subsystems take the position of the first targeted input subsystem.
    """
    layout = x.layout
    tgt, rest, pos = _target_axes(layout, in_layout)
    new_layout = _output_layout(layout, rest, pos, out_layout)
    din = in_layout.total_dim
    rest_dims = tuple(layout.dims[i] for i in rest)
    dr = int(np.prod(rest_dims, dtype=np.int64))
    n_out, n_rest = len(out_layout), len(rest)
    perm = _final_perm(n_out, n_rest, pos)
    if isinstance(x, PureState) and ops.shape[0] == 1:
        t = np.transpose(_vector_tensor(x.vector, layout), tgt + rest).reshape(din, dr)
        t = (ops[0] @ t).reshape(out_layout.dims + rest_dims)
        return PureState(np.transpose(t, perm).reshape(-1), new_layout, check=False)
    rho = x.density().matrix
    n = len(layout)
    t = np.transpose(_density_tensor(rho, layout), tgt + rest + [i + n for i in tgt] + [i + n for i in rest])
    t = t.reshape(din, dr, din, dr)
    t = np.einsum("kij,jalb->kialb", ops, t)
    t = np.einsum("kialb,kml->iamb", t, ops.conj())
    t = t.reshape(out_layout.dims + rest_dims + out_layout.dims + rest_dims)
    m = n_out + n_rest
    t = np.transpose(t, perm + [p + m for p in perm])
    d = new_layout.total_dim
    return DensityOperator(t.reshape(d, d), new_layout, check=False)


def apply_map(m: LinearMap, x: State) -> State:
    """Act with ``m`` on the subsystems of ``x`` named by ``m.in_layout``.

    Pure states map by matrix action, density operators by conjugation.
    Projected or partially-isometric outputs are not renormalized.
    """
    return apply_operators(m.matrix[None], m.in_layout, m.out_layout, x)


def compose(second: LinearMap, first: LinearMap) -> LinearMap:
    """``second @ first``; layouts must chain exactly."""
    if second.in_layout != first.out_layout:
        raise LayoutError(f"cannot compose: {first.out_layout} feeds {second.in_layout}")
    kinds = {first.kind, second.kind}
    if kinds == {"unitary"}:
        kind = "unitary"
    elif kinds <= {"unitary", "isometry"}:
        kind = "isometry"
    else:
        kind = "partial_isometry"
    return LinearMap(second.matrix @ first.matrix, first.in_layout, second.out_layout, kind, check=False)


# ---------------------------------------------------------------------------
# purification, distances, fidelities


def purify(rho: DensityOperator, ref_label: str, *, cutoff: float = RANK_CUTOFF) -> PureState:
    """Purification with a reference of dimension ``rank(rho)``.

    The reference is appended after the existing subsystems.
    """
    if ref_label in rho.layout:
        raise LayoutError(f"reference label {ref_label!r} already present in {rho.layout}")
    w, v = np.linalg.eigh(hermitian_part(rho.matrix))
    keep = w > cutoff * max(w[-1], 0.0)
    w, v = np.clip(w[keep], 0.0, None), v[:, keep]
    layout = rho.layout + Layout([(ref_label, int(keep.sum()))])
    vec = (v * np.sqrt(w)).reshape(-1)
    return PureState(vec, layout, check=False)


def _pure_pair_trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Trace norm of ``|a><a| - |b><b|`` for possibly unnormalized kets."""
    aa = np.vdot(a, a).real
    bb = np.vdot(b, b).real
    if aa == 0.0 or bb == 0.0:
        return float(aa + bb)
    # (aa + bb)^2 - 4|<a|b>|^2 = (aa - bb)^2 + 4 aa |r|^2 with r the part of b
    # orthogonal to a; this form has no cancellation for nearby states
    r = b - (np.vdot(a, b) / aa) * a
    rr = np.vdot(r, r).real
    return float(np.sqrt((aa - bb) ** 2 + 4 * aa * rr))


def trace_distance(rho: State, sigma: State) -> float:
    """``|| rho - sigma ||_1``, the sum of absolute eigenvalues of the difference.

    The second argument is permuted into the first one's label order.
    Ranges over [0, 2] for normalized states.
    """
    sigma = align(sigma, rho.layout)
    # canonical operand order keeps the result bit-symmetric
    if isinstance(rho, PureState) and isinstance(sigma, PureState):
        a, b = rho.vector, sigma.vector
        if a.tobytes() > b.tobytes():
            a, b = b, a
        return _pure_pair_trace_distance(a, b)
    a, b = rho.density().matrix, sigma.density().matrix
    if a.tobytes() > b.tobytes():
        a, b = b, a
    diff = hermitian_part(a - b)
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def fidelity_pure(psi: PureState, phi: PureState) -> float:
    """``|<psi|phi>|``."""
    phi = align(phi, psi.layout)
    return float(abs(np.vdot(psi.vector, phi.vector)))


def uhlmann_partial_isometry(psi: PureState, phi: PureState, shared=None, *,
                             allow_wide: bool = False, cutoff: float = RANK_CUTOFF):
    """Overlap-maximizing partial isometry between purifying systems.

    ``psi`` lives on ``shared + B`` and ``phi`` on ``shared + C``. Returns
    ``(V, overlap)`` with ``V: C -> B`` maximizing ``|<psi| (1 (x) V) |phi>|``;
    the maximum equals the nuclear norm of the cross-overlap operator.

    By default ``|C| > |B|`` is rejected; ``allow_wide=True`` returns the
    (rank-limited) optimal partial isometry anyway.
    """
    if shared is None:
        shared = tuple(lab for lab in psi.layout.labels if lab in phi.layout)
    shared = _as_labels(shared)
    for lab in shared:
        if psi.layout.dim(lab) != phi.layout.dim(lab):
            raise LayoutError(
                f"shared subsystem {lab!r} has dimension {psi.layout.dim(lab)} vs {phi.layout.dim(lab)}"
            )
    b_labels = tuple(lab for lab in psi.layout.labels if lab not in shared)
    c_labels = tuple(lab for lab in phi.layout.labels if lab not in shared)
    b_layout = psi.layout.select(b_labels)
    c_layout = phi.layout.select(c_labels)
    if c_layout.total_dim > b_layout.total_dim and not allow_wide:
        raise LayoutError(
            f"target purifying system {b_layout} is smaller than source {c_layout}"
        )
    ps = _bipartition(psi.vector, psi.layout, shared)
    ph = _bipartition(phi.vector, phi.layout, shared)
    # K[b, c] = sum_a psi[a, b] conj(phi[a, c]); V = U Wh maximizes Re tr(V^dag K).
    k = ps.T @ ph.conj()
    u, s, wh = np.linalg.svd(k, full_matrices=False)
    r = int(np.sum(s > cutoff * s[0])) if s.size and s[0] > 0 else 0
    v = u[:, :r] @ wh[:r, :]
    kind = "isometry" if r == c_layout.total_dim else "partial_isometry"
    return LinearMap(v, c_layout, b_layout, kind, check=False), float(np.sum(s))


def cross_overlap_operator(psi: PureState, phi: PureState, shared) -> np.ndarray:
    """``M[b, c] = sum_a conj(psi[a, b]) phi[a, c]`` with ``a`` ranging over ``shared``."""
    shared = _as_labels(shared)
    ps = _bipartition(psi.vector, psi.layout, shared)
    ph = _bipartition(phi.vector, phi.layout, shared)
    return ps.conj().T @ ph
