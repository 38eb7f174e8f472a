"""Hamiltonians for two driven three-level atoms in fiber-coupled cavities.

Two frames are used for dynamics:

* full: atoms plus the three photonic normal modes ``c`` (dark), ``cp`` and
  ``cm`` (split by the fiber coupling), evolving under ``H0 + H1(t)``;
* effective: atoms plus the dark mode only, under the dispersive ``H_eff(t)``.

The lab-frame cavity/fiber modes ``a1, a2, b`` only appear in static
algebraic checks of the normal-mode transformation.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .operators import HilbertSpace, Ket, Operator, TimeOperator, destroy, embed, number

SQRT2 = math.sqrt(2.0)

ATOMS = ("atom1", "atom2")
LEVEL_INDEX = {"0": 0, "1": 1, "i": 2}


@dataclass(frozen=True)
class SystemParams:
    """Physical rates (rad/time, hbar = 1) and numerical controls.

    Rates are normally given in units of ``delta`` (so ``delta = 1``).
    ``cutoff_c`` is the dark-mode Fock cutoff of the effective frame;
    ``cutoff_full_c`` and ``cutoff_pm`` are the cutoffs of the three-mode
    full frame.  ``td_steps=None`` picks the per-frame default step count.
    """

    g: float
    nu: float
    omega_drive: float
    omega_mw: float
    delta: float = 1.0
    fiber_phase: float = 0.0
    cutoff_c: int = 10
    cutoff_full_c: int = 4
    cutoff_pm: int = 3
    td_steps: int | None = None
    leak_threshold: float = 1e-6

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("g must be non-negative")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.nu < 0:
            raise ValueError("nu must be non-negative")
        if self.omega_drive <= 0 or self.omega_mw <= 0:
            raise ValueError("Rabi frequencies must be positive")
        if min(self.cutoff_c, self.cutoff_full_c, self.cutoff_pm) < 2:
            raise ValueError("Fock cutoffs must be at least 2")
        if self.td_steps is not None and self.td_steps < 1:
            raise ValueError("td_steps must be positive")

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    @property
    def tau(self) -> float:
        """Closing time of the dark-mode loop, 2 pi / delta."""
        return 2.0 * math.pi / self.delta

    @property
    def lam(self) -> float:
        return self.g ** 2 / (8.0 * self.delta)

    @property
    def theta(self) -> float:
        return self.lam * self.tau

    @property
    def strong_fiber(self) -> bool:
        return self.nu >= 10.0 * self.g

    @property
    def strong_drive(self) -> bool:
        return self.omega_drive >= 10.0 * max(self.g, self.delta)

    @property
    def drive_ratio(self) -> float:
        return self.omega_drive / self.delta

    @property
    def drive_phase_cancels(self) -> bool:
        """True when omega_drive / delta is a positive integer."""
        r = self.drive_ratio
        return r >= 1 and abs(r - round(r)) < 1e-9


# ---------------------------------------------------------------------------
# spaces and states
# ---------------------------------------------------------------------------

def full_space(p: SystemParams) -> HilbertSpace:
    return HilbertSpace((("atom1", 3), ("atom2", 3), ("c", p.cutoff_full_c),
                         ("cp", p.cutoff_pm), ("cm", p.cutoff_pm)))


def effective_space(p: SystemParams) -> HilbertSpace:
    return HilbertSpace((("atom1", 3), ("atom2", 3), ("c", p.cutoff_c)))


def lab_space(cutoff: int) -> HilbertSpace:
    return HilbertSpace((("a1", cutoff), ("a2", cutoff), ("b", cutoff)))


def mode_labels(space: HilbertSpace) -> tuple[str, ...]:
    return tuple(lbl for lbl in space.labels if lbl not in ATOMS)


def atom_ket(label: str) -> np.ndarray:
    """Single-atom amplitudes for '0', '1', 'i', '+' or '-'."""
    v = np.zeros(3, dtype=complex)
    if label in LEVEL_INDEX:
        v[LEVEL_INDEX[label]] = 1.0
    elif label in ("+", "-"):
        s = 1.0 if label == "+" else -1.0
        v[1], v[2] = 1 / SQRT2, s / SQRT2
    else:
        raise ValueError(f"unknown atomic state {label!r}")
    return v


def product_state(space: HilbertSpace, atoms: tuple[str, str] = ("0", "0"),
                  fock: dict[str, int] | None = None) -> Ket:
    """|atom1, atom2> tensor Fock states (vacuum for modes not listed)."""
    fock = dict(fock or {})
    unknown = set(fock) - set(mode_labels(space))
    if unknown:
        raise KeyError(f"unknown modes {sorted(unknown)}")
    vec = np.ones(1, dtype=complex)
    for lbl, dim in space.factors:
        if lbl in ATOMS:
            part = atom_ket(atoms[ATOMS.index(lbl)])
        else:
            n = fock.get(lbl, 0)
            if not 0 <= n < dim:
                raise ValueError(f"Fock level {n} outside cutoff {dim} of mode {lbl!r}")
            part = np.zeros(dim, dtype=complex)
            part[n] = 1.0
        vec = np.kron(vec, part)
    return Ket(space, vec)


def low_fock_indices(space: HilbertSpace, nmax: int = 2) -> np.ndarray:
    """Basis indices whose total photon number over all modes is at most ``nmax``."""
    total = sum(space.occupations(lbl) for lbl in mode_labels(space))
    return np.flatnonzero(np.asarray(total) <= nmax)


# ---------------------------------------------------------------------------
# atomic operators
# ---------------------------------------------------------------------------

def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.outer(a, b.conj())


SIGMA_PLUS = _outer(atom_ket("i"), atom_ket("1"))
SZ_TILDE = _outer(atom_ket("+"), atom_ket("+")) - _outer(atom_ket("-"), atom_ket("-"))
SP_TILDE = _outer(atom_ket("+"), atom_ket("-"))
SM_TILDE = _outer(atom_ket("-"), atom_ket("+"))


@dataclass(frozen=True, eq=False)
class AtomBasisMap:
    """Dressed-basis kets and operators for both atoms on ``space``."""

    space: HilbertSpace
    plus: tuple[np.ndarray, np.ndarray]
    minus: tuple[np.ndarray, np.ndarray]
    sz: tuple[Operator, Operator]
    sp: tuple[Operator, Operator]
    sm: tuple[Operator, Operator]


@lru_cache(maxsize=32)
def atom_basis(space: HilbertSpace) -> AtomBasisMap:
    return AtomBasisMap(
        space=space,
        plus=(atom_ket("+"), atom_ket("+")),
        minus=(atom_ket("-"), atom_ket("-")),
        sz=tuple(embed(SZ_TILDE, space, a) for a in ATOMS),
        sp=tuple(embed(SP_TILDE, space, a) for a in ATOMS),
        sm=tuple(embed(SM_TILDE, space, a) for a in ATOMS),
    )


@lru_cache(maxsize=32)
def s_operator(space: HilbertSpace) -> Operator:
    """S = sz~_1 - sz~_2, the operator the dark mode couples to."""
    ab = atom_basis(space)
    return ab.sz[0] - ab.sz[1]


def mode_op(space: HilbertSpace, label: str) -> Operator:
    return embed(destroy(space.factor_dim(label), label), space, label)


def photon_number(space: HilbertSpace) -> Operator:
    total = space.zero()
    for lbl in mode_labels(space):
        total = total + embed(number(space.factor_dim(lbl), lbl), space, lbl)
    return total


# ---------------------------------------------------------------------------
# lab-frame cavity/fiber coupling and normal modes
# ---------------------------------------------------------------------------

def h_cavity_fiber(p: SystemParams, cutoff: int = 4) -> Operator:
    """nu b (a1^dag + e^{i phi} a2^dag) + h.c. on the (a1, a2, b) space."""
    space = lab_space(cutoff)
    a1, a2, b = (mode_op(space, lbl) for lbl in ("a1", "a2", "b"))
    term = p.nu * (b @ (a1.dag() + np.exp(1j * p.fiber_phase) * a2.dag()))
    return Operator(space, (term + term.dag()).mat, hermitian=True)


def normal_modes(p: SystemParams, cutoff: int = 4) -> tuple[Operator, Operator, Operator]:
    """Dark mode c and split modes c+, c- expressed on the (a1, a2, b) space.

    The relative cavity phase is e^{-i phi}: that is the combination which
    decouples from the fiber for the coupling built by :func:`h_cavity_fiber`.
    """
    space = lab_space(cutoff)
    a1, a2, b = (mode_op(space, lbl) for lbl in ("a1", "a2", "b"))
    ph = np.exp(-1j * p.fiber_phase)
    c = (a1 - ph * a2) * (1 / SQRT2)
    cp = (a1 + ph * a2 + SQRT2 * b) * 0.5
    cm = (a1 + ph * a2 - SQRT2 * b) * 0.5
    return c, cp, cm


def normal_mode_defects(p: SystemParams, cutoff: int = 5) -> dict[str, float]:
    """Max-norm defects of the normal-mode identities on the untruncated block.

    The block keeps basis states where no mode occupies its top two Fock levels.
    """
    h = h_cavity_fiber(p, cutoff)
    c, cp, cm = normal_modes(p, cutoff)
    space = h.space
    keep = np.flatnonzero(np.all([space.occupations(l) <= cutoff - 3 for l in space.labels], axis=0))
    sub = np.ix_(keep, keep)
    diag_form = SQRT2 * p.nu * (cp.dag() @ cp - cm.dag() @ cm)
    comm = h @ c - c @ h
    ccd = c @ c.dag() - c.dag() @ c
    return {
        "diagonal_form": float(np.max(np.abs((h - diag_form).mat[sub]))),
        "dark_mode": float(np.max(np.abs(comm.mat[sub]))),
        "dark_commutator": float(np.max(np.abs((ccd.mat - np.eye(space.dim))[sub]))),
    }


def single_excitation_spectrum(p: SystemParams) -> np.ndarray:
    """Eigenvalues of the cavity/fiber coupling in the one-photon sector."""
    h = h_cavity_fiber(p, cutoff=2)
    space = h.space
    total = sum(space.occupations(l) for l in space.labels)
    idx = np.flatnonzero(total == 1)
    return np.linalg.eigvalsh(h.mat[np.ix_(idx, idx)])


# ---------------------------------------------------------------------------
# normal-mode frame: H0, H1, rotated and effective Hamiltonians
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _h0_mat(p: SystemParams, space: HilbertSpace) -> np.ndarray:
    m = np.zeros((space.dim, space.dim), dtype=complex)
    if "cp" in space and "cm" in space:
        m += SQRT2 * p.nu * embed(number(space.factor_dim("cp"), "cp"), space, "cp").mat
        m -= SQRT2 * p.nu * embed(number(space.factor_dim("cm"), "cm"), space, "cm").mat
    for a in ATOMS:
        m += p.omega_drive * embed(SIGMA_PLUS + SIGMA_PLUS.conj().T, space, a).mat
    m.setflags(write=False)
    return m


@lru_cache(maxsize=32)
def _coupling_mat(p: SystemParams, space: HilbertSpace) -> np.ndarray:
    """The e^{-i delta t} part of H1 (photon-lowering, atom-raising)."""
    modes = {lbl: mode_op(space, lbl).mat for lbl in mode_labels(space)}
    zero = np.zeros((space.dim, space.dim), dtype=complex)
    cp, cm, c = modes.get("cp", zero), modes.get("cm", zero), modes.get("c", zero)
    s1 = embed(SIGMA_PLUS, space, "atom1").mat
    s2 = embed(SIGMA_PLUS, space, "atom2").mat
    m = p.g * (0.5 * (cp + SQRT2 * c + cm) @ s1 + 0.5 * (cp - SQRT2 * c + cm) @ s2)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=32)
def _h0_eig(p: SystemParams, space: HilbertSpace) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(_h0_mat(p, space))
    return w, v


def h0(p: SystemParams, space: HilbertSpace | None = None) -> Operator:
    space = full_space(p) if space is None else space
    return Operator(space, _h0_mat(p, space), hermitian=True)


def h1(p: SystemParams, t: float, space: HilbertSpace | None = None) -> Operator:
    space = full_space(p) if space is None else space
    a = _coupling_mat(p, space) * np.exp(-1j * p.delta * t)
    return Operator(space, a + a.conj().T, hermitian=True)


def h_lab(p: SystemParams, space: HilbertSpace | None = None) -> TimeOperator:
    """t -> H0 + H1(t) in the normal-mode frame."""
    space = full_space(p) if space is None else space
    h0m = _h0_mat(p, space)
    a = _coupling_mat(p, space)

    def fn(t: float) -> np.ndarray:
        x = a * np.exp(-1j * p.delta * t)
        return h0m + x + x.conj().T

    return TimeOperator(space, fn, "H0+H1(t)")


def h_rotated(p: SystemParams, space: HilbertSpace | None = None) -> TimeOperator:
    """t -> e^{i H0 t} H1(t) e^{-i H0 t}, by exact conjugation in the H0 eigenbasis."""
    space = full_space(p) if space is None else space
    w, v = _h0_eig(p, space)
    a_eig = v.conj().T @ _coupling_mat(p, space) @ v
    gaps = w[:, None] - w[None, :]

    def fn(t: float) -> np.ndarray:
        x = a_eig * np.exp(-1j * p.delta * t)
        m = (x + x.conj().T) * np.exp(1j * gaps * t)
        m = v @ m @ v.conj().T
        return 0.5 * (m + m.conj().T)

    return TimeOperator(space, fn, "H'(t)")


def h_eff(p: SystemParams, space: HilbertSpace | None = None) -> TimeOperator:
    """t -> (g / 2 sqrt 2)(c e^{-i delta t} + c^dag e^{i delta t}) S."""
    space = effective_space(p) if space is None else space
    c = mode_op(space, "c").mat
    cs = c @ s_operator(space).mat
    k = p.g / (2.0 * SQRT2)

    def fn(t: float) -> np.ndarray:
        x = k * np.exp(-1j * p.delta * t) * cs
        return x + x.conj().T

    return TimeOperator(space, fn, "H_eff(t)")


def h_corotating(p: SystemParams, space: HilbertSpace | None = None,
                 effective: bool = False) -> Operator:
    """Time-independent generator in the frame rotating with the photon number.

    Every explicitly time-dependent term carries e^{-i delta t} together with
    exactly one photon annihilation, so with N the total photon number
    ``H(t) = e^{i delta N t} K e^{-i delta N t} - delta N`` and the
    propagator is ``e^{i delta N t} e^{-i K t}``.  This returns K, built from
    ``H0 + H1`` (or from ``H_eff`` when ``effective``).
    """
    if effective:
        space = effective_space(p) if space is None else space
        k0 = h_eff(p, space).matrix(0.0)
    else:
        space = full_space(p) if space is None else space
        a = _coupling_mat(p, space)
        k0 = _h0_mat(p, space) + a + a.conj().T
    k = k0 + p.delta * photon_number(space).mat
    return Operator(space, 0.5 * (k + k.conj().T), hermitian=True)
