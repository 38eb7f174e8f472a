"""Dense operator layer: Hilbert-space bookkeeping, bosonic/atomic matrices,
matrix exponentials and midpoint-rule time-ordered propagation.

Conventions used throughout the package:

* hbar = 1, rates in units of the cavity detuning unless stated otherwise.
* Tensor factors are ordered left to right, the leftmost being the slowest
  varying index (``np.kron`` order).
* Atomic levels are indexed ``|0> = 0``, ``|1> = 1``, ``|i> = 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-8


class NonHermitianError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def hermiticity_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def _check_hermitian(m: np.ndarray) -> None:
    # relative to the matrix scale so that large drive rates do not trip rounding
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    err = hermiticity_defect(m)
    if err > HERMITIAN_TOL * scale:
        raise NonHermitianError(f"matrix is not Hermitian (max |M - M^dag| = {err:.3e})")


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of labelled finite factors."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(lbl), int(dim)) for lbl, dim in self.factors)
        object.__setattr__(self, "factors", factors)
        labels = [lbl for lbl, _ in factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels in {labels}")
        if any(dim < 1 for _, dim in factors):
            raise ValueError("factor dimensions must be positive")

    @classmethod
    def of(cls, **dims: int) -> "HilbertSpace":
        return cls(tuple(dims.items()))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no factor labelled {label!r} in {self.labels}") from None

    def factor_dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def __mul__(self, other: "HilbertSpace") -> "HilbertSpace":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise ValueError(f"factor labels collide: {sorted(clash)}")
        return HilbertSpace(self.factors + other.factors)

    def identity(self) -> "Operator":
        return Operator(self, np.eye(self.dim, dtype=complex), hermitian=True)

    def zero(self) -> "Operator":
        return Operator(self, np.zeros((self.dim, self.dim), dtype=complex), hermitian=True)

    def basis_index(self, levels: Sequence[int]) -> int:
        if len(levels) != len(self.factors):
            raise ValueError("need one level per factor")
        return int(np.ravel_multi_index(tuple(levels), self.dims))

    def basis(self, *levels: int) -> "Ket":
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.basis_index(levels)] = 1.0
        return Ket(self, vec)

    def occupations(self, label: str) -> np.ndarray:
        """Level index of factor ``label`` for every basis state, as a flat array."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids[self.index(label)]


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square matrix attached to a :class:`HilbertSpace`."""

    space: HilbertSpace
    mat: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        n = self.space.dim
        if mat.shape != (n, n):
            raise ValueError(f"operator shape {mat.shape} does not match space dimension {n}")
        if self.hermitian:
            _check_hermitian(mat)
        object.__setattr__(self, "mat", _readonly(mat))

    @property
    def dim(self) -> int:
        return self.space.dim

    def dag(self) -> "Operator":
        return Operator(self.space, self.mat.conj().T, hermitian=self.hermitian)

    def _same(self, other: "Operator") -> None:
        if other.space != self.space:
            raise ValueError("operators live on different spaces")

    def __add__(self, other: "Operator") -> "Operator":
        self._same(other)
        return Operator(self.space, self.mat + other.mat)

    def __sub__(self, other: "Operator") -> "Operator":
        self._same(other)
        return Operator(self.space, self.mat - other.mat)

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.mat, hermitian=self.hermitian)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.mat * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._same(other)
            return Operator(self.space, self.mat @ other.mat)
        if isinstance(other, Ket):
            if other.space != self.space:
                raise ValueError("ket lives on a different space")
            return Ket(self.space, self.mat @ other.vec)
        return NotImplemented

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return hermiticity_defect(self.mat) < tol

    def unitarity_defect(self, columns: np.ndarray | None = None) -> float:
        """max |U^dag U - I|, optionally restricted to a subset of input columns."""
        u = self.mat if columns is None else self.mat[:, columns]
        return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))

    def expect(self, ket: "Ket") -> complex:
        return complex(np.vdot(ket.vec, self.mat @ ket.vec))


@dataclass(frozen=True, eq=False)
class Ket:
    space: HilbertSpace
    vec: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vec, dtype=complex).reshape(-1)
        if vec.shape != (self.space.dim,):
            raise ValueError(f"ket length {vec.shape[0]} does not match space dimension {self.space.dim}")
        object.__setattr__(self, "vec", _readonly(vec))

    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))

    def normalized(self) -> "Ket":
        return Ket(self.space, self.vec / self.norm())

    def overlap(self, other: "Ket") -> complex:
        """<self|other>"""
        if other.space != self.space:
            raise ValueError("kets live on different spaces")
        return complex(np.vdot(self.vec, other.vec))

    def __add__(self, other: "Ket") -> "Ket":
        if other.space != self.space:
            raise ValueError("kets live on different spaces")
        return Ket(self.space, self.vec + other.vec)

    def __sub__(self, other: "Ket") -> "Ket":
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> "Ket":
        return Ket(self.space, self.vec * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class TimeOperator:
    """Time-dependent Hamiltonian ``t -> H(t)`` on a fixed space.

    ``fn`` returns the raw matrix; :meth:`__call__` wraps it in an
    :class:`Operator` (and therefore checks Hermiticity).
    """

    space: HilbertSpace
    fn: Callable[[float], np.ndarray]
    name: str = field(default="H(t)")

    def matrix(self, t: float) -> np.ndarray:
        return self.fn(t)

    def __call__(self, t: float) -> Operator:
        return Operator(self.space, self.fn(t), hermitian=True)

    def check_hermitian(self, times: Iterable[float]) -> float:
        worst = 0.0
        for t in times:
            m = self.fn(t)
            _check_hermitian(m)
            worst = max(worst, hermiticity_defect(m))
        return worst


def tensor(a, b):
    """Kronecker product of two Operators (or two Kets) on disjoint spaces."""
    space = a.space * b.space
    if isinstance(a, Ket) and isinstance(b, Ket):
        return Ket(space, np.kron(a.vec, b.vec))
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(space, np.kron(a.mat, b.mat), hermitian=a.hermitian and b.hermitian)
    raise TypeError("tensor expects two Operators or two Kets")


def tensor_all(items: Sequence):
    return reduce(tensor, items)


def embed(op: Operator | np.ndarray, target: HilbertSpace, factor_label: str) -> Operator:
    """Lift a single-factor operator into ``target``, identity elsewhere."""
    mat = op.mat if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    if isinstance(op, Operator) and len(op.space.factors) != 1:
        raise ValueError("embed expects an operator on a single factor")
    k = target.index(factor_label)
    dims = target.dims
    if mat.shape != (dims[k], dims[k]):
        raise ValueError(f"operator dimension {mat.shape[0]} does not match factor "
                         f"{factor_label!r} of dimension {dims[k]}")
    left = math.prod(dims[:k])
    right = math.prod(dims[k + 1:])
    full = np.kron(np.kron(np.eye(left), mat), np.eye(right))
    return Operator(target, full)


def destroy(cutoff: int, label: str = "mode") -> Operator:
    """Truncated annihilation operator, <n-1|a|n> = sqrt(n)."""
    if cutoff < 2:
        raise ValueError("Fock cutoff must be at least 2")
    mat = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)
    return Operator(HilbertSpace(((label, cutoff),)), mat)


def number(cutoff: int, label: str = "mode") -> Operator:
    return Operator(HilbertSpace(((label, cutoff),)),
                    np.diag(np.arange(cutoff, dtype=float)).astype(complex), hermitian=True)


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def max_norm(m) -> float:
    m = m.mat if isinstance(m, Operator) else m
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


# ---------------------------------------------------------------------------
# exponentials
# ---------------------------------------------------------------------------

def unitary_from_hermitian(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) for a Hermitian array via its eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def expm_propagator(h: Operator, dt: float) -> Operator:
    if not isinstance(h, Operator):
        raise TypeError("expm_propagator expects an Operator")
    _check_hermitian(h.mat)
    return Operator(h.space, unitary_from_hermitian(h.mat, dt))


def expm_general(m: np.ndarray, tol: float = 1e-16) -> np.ndarray:
    """Matrix exponential of an arbitrary square matrix.

    Scaling and squaring around a Taylor series.  The argument is scaled so
    that its 1-norm is at most 1/2; the series is cut once the tail bound
    ``|next term| / (1 - |A|)`` falls below ``tol`` relative to the partial sum.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    norm = np.linalg.norm(m, 1)
    if norm == 0.0:
        return np.eye(n, dtype=complex)
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5))))
    a = m / 2.0 ** squarings
    a_norm = norm / 2.0 ** squarings
    result = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 60):
        term = term @ a / k
        result = result + term
        tail = np.linalg.norm(term, 1) * a_norm / (1.0 - a_norm)
        if tail <= tol * max(1.0, np.linalg.norm(result, 1)):
            break
    for _ in range(squarings):
        result = result @ result
    return result


# ---------------------------------------------------------------------------
# time-ordered propagation
# ---------------------------------------------------------------------------

def block_structure(mats: Iterable[np.ndarray]) -> list[np.ndarray]:
    """Index sets of the invariant blocks shared by every matrix in ``mats``."""
    pattern = None
    for m in mats:
        nz = np.abs(m) > 0
        pattern = nz if pattern is None else (pattern | nz)
    n_comp, labels = connected_components(csr_matrix(pattern | pattern.T), directed=False)
    return [np.flatnonzero(labels == k) for k in range(n_comp)]


def propagate_td(h: TimeOperator, t0: float, t1: float, steps: int,
                 blocks: Sequence[np.ndarray] | str | None = "auto") -> Operator:
    """Time-ordered propagator from ``t0`` to ``t1`` with the exponential midpoint rule.

    ``blocks="auto"`` detects invariant subspaces from the sparsity of ``h`` at
    a few sample times and exponentiates each block separately.  Pass ``None``
    to force dense stepping.
    """
    if not t1 > t0:
        raise ValueError("propagate_td needs t1 > t0")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = (t1 - t0) / steps
    n = h.space.dim
    if isinstance(blocks, str):
        samples = [h.matrix(t0 + f * (t1 - t0)) for f in (0.0, 0.31, 0.5, 0.77, 1.0)]
        blocks = block_structure(samples)
    elif blocks is None:
        blocks = [np.arange(n)]
    blocks = [np.asarray(b) for b in blocks]
    u_blocks = [np.eye(len(b), dtype=complex) for b in blocks]
    for k in range(steps):
        hm = h.matrix(t0 + (k + 0.5) * dt)
        _check_hermitian(hm)
        for j, idx in enumerate(blocks):
            sub = hm[np.ix_(idx, idx)]
            u_blocks[j] = unitary_from_hermitian(sub, dt) @ u_blocks[j]
    u = np.zeros((n, n), dtype=complex)
    for idx, ub in zip(blocks, u_blocks):
        u[np.ix_(idx, idx)] = ub
    return Operator(h.space, u)


@dataclass(frozen=True)
class ConvergenceReport:
    """Step-doubling record of a numerical propagation."""

    method: str
    steps: int
    change: float
    tol: float
    history: tuple[tuple[int, float], ...] = ()

    @property
    def converged(self) -> bool:
        return self.change < self.tol

    def as_dict(self) -> dict:
        return {"method": self.method, "steps": self.steps, "change": self.change,
                "tol": self.tol, "converged": self.converged,
                "history": [list(h) for h in self.history]}


def converged_propagate(h: TimeOperator, t0: float, t1: float, steps: int, tol: float,
                        columns: np.ndarray | None = None, max_doublings: int = 6,
                        blocks="auto") -> tuple[Operator, ConvergenceReport]:
    """Double the step count until successive propagators agree to ``tol``.

    The change is measured in max-norm over ``columns`` (all columns by
    default).  Raises :class:`ConvergenceError` if ``max_doublings`` is
    exhausted.
    """
    if isinstance(blocks, str):
        samples = [h.matrix(t0 + f * (t1 - t0)) for f in (0.0, 0.31, 0.5, 0.77, 1.0)]
        blocks = block_structure(samples)
    cols = slice(None) if columns is None else columns
    prev = propagate_td(h, t0, t1, steps, blocks=blocks)
    history = []
    for _ in range(max_doublings):
        steps *= 2
        cur = propagate_td(h, t0, t1, steps, blocks=blocks)
        change = max_norm(cur.mat[:, cols] - prev.mat[:, cols])
        history.append((steps, change))
        if change < tol:
            return cur, ConvergenceReport("midpoint", steps, change, tol, tuple(history))
        prev = cur
    raise ConvergenceError(f"midpoint propagation not converged after {steps} steps "
                           f"(last change {change:.3e} > tol {tol:.1e})")
