"""Propagators for the dispersive interaction step.

Three routes are provided and cross-checked:

* closed form: ``e^{-iA S^2} e^{-iB c S} e^{-iB* c^dag S}`` with the
  displacement/phase coefficients A(t), B(t);
* numeric effective: midpoint stepping of ``H_eff(t)``;
* numeric full: the three-mode normal-mode frame, either stepped through
  ``H'(t)`` or exactly through the co-rotating generator.

Propagators named ``u_prime_*`` are in the frame rotating with ``H0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .model import (SQRT2, SystemParams, effective_space, full_space,
                    h_corotating, h_eff, h_rotated, low_fock_indices, mode_labels, mode_op,
                    SZ_TILDE, photon_number, s_operator)
from .operators import (ConvergenceReport, HilbertSpace, Operator, converged_propagate,
                        embed, expm_general, unitary_from_hermitian)


class TruncationLeakError(RuntimeError):
    pass


@dataclass(frozen=True)
class ABCoefficients:
    a_val: complex
    b_val: complex
    t: float


def ab_coefficients(p: SystemParams, t: float) -> ABCoefficients:
    if t < 0:
        raise ValueError("t must be non-negative")
    d, g = p.delta, p.g
    loop = np.exp(-1j * d * t) - 1
    # at multiples of the loop period the displacement closes; drop rounding residue
    if abs(loop) <= 8 * np.finfo(float).eps * max(1.0, d * t):
        loop = 0j
    b = -g / (2 * SQRT2 * 1j * d) * loop
    a = -g ** 2 / (8 * d) * (t - (np.exp(1j * d * t) - 1) / (1j * d))
    return ABCoefficients(complex(a), complex(b), float(t))


def ab_quadrature(p: SystemParams, t: float) -> ABCoefficients:
    """A(t), B(t) by integrating dB/dt = k e^{-i delta t}, dA/dt = i conj(dB/dt) B."""
    k = p.g / (2 * SQRT2)
    if t == 0:
        return ABCoefficients(0j, 0j, 0.0)

    def rhs(s, y):
        b = y[0] + 1j * y[1]
        db = k * np.exp(-1j * p.delta * s)
        da = 1j * np.conj(db) * b
        return [db.real, db.imag, da.real, da.imag]

    sol = solve_ivp(rhs, (0.0, t), [0.0, 0.0, 0.0, 0.0], method="DOP853",
                    rtol=1e-13, atol=1e-15)
    y = sol.y[:, -1]
    return ABCoefficients(complex(y[2], y[3]), complex(y[0], y[1]), float(t))


def top_level_population(u: np.ndarray, space: HilbertSpace, columns) -> float:
    """Largest population any mode puts on its top Fock level, over ``columns`` of u."""
    worst = 0.0
    for lbl in mode_labels(space):
        top = space.occupations(lbl) == space.factor_dim(lbl) - 1
        pops = np.sum(np.abs(u[top][:, columns]) ** 2, axis=0)
        worst = max(worst, float(np.max(pops)))
    return worst


def vacuum_columns(space: HilbertSpace) -> np.ndarray:
    occ = sum(space.occupations(l) for l in mode_labels(space))
    return np.flatnonzero(np.asarray(occ) == 0)


def _atom_s9() -> np.ndarray:
    eye3 = np.eye(3)
    return np.kron(SZ_TILDE, eye3) - np.kron(eye3, SZ_TILDE)


def _check_atoms_lead(space: HilbertSpace) -> None:
    if space.labels[:2] != ("atom1", "atom2"):
        raise ValueError("expected the atoms as the two leading factors")


def _s2_phase(space: HilbertSpace, coeff: complex) -> np.ndarray:
    """e^{-i coeff S^2}, built on the two atoms and tensored with the field identity."""
    _check_atoms_lead(space)
    w, v = np.linalg.eigh(_atom_s9())
    phase = (v * np.exp(-1j * coeff * w ** 2)) @ v.conj().T
    return np.kron(phase, np.eye(space.dim // 9))


def _s_projectors() -> dict[int, np.ndarray]:
    """Spectral projectors of S on the two atoms (eigenvalues -2..2)."""
    w, v = np.linalg.eigh(_atom_s9())
    vals = np.rint(w).astype(int)
    return {int(s): v[:, vals == s] @ v[:, vals == s].conj().T for s in np.unique(vals)}


def u_prime_closed(p: SystemParams, t: float, space: HilbertSpace | None = None,
                   ab: ABCoefficients | None = None, check_leak: bool = True) -> Operator:
    """Closed-form propagator of ``H_eff``: e^{-iA S^2} e^{-iB c S} e^{-iB* c^dag S}.

    The two displacement-like factors are not unitary on their own; the
    imaginary part of A(t) compensates.  S commutes with everything here, so
    each S eigenspace reduces to a single-mode product.  That product is
    evaluated on a padded Fock space and then cut back to the cutoff, since
    e^{-iB* c^dag S} passes through photon numbers far above the ones that
    come out.  ``check_leak`` raises :class:`TruncationLeakError` when vacuum
    inputs reach the top kept Fock level.
    """
    space = effective_space(p) if space is None else space
    _check_atoms_lead(space)
    ab = ab_coefficients(p, t) if ab is None else ab
    rest = HilbertSpace(space.factors[2:])
    nc = rest.factor_dim("c")
    padded = nc + 24 + int(math.ceil(16 * abs(ab.b_val) ** 2))
    a = np.diag(np.sqrt(np.arange(1, padded, dtype=float)), k=1).astype(complex)
    u = np.zeros((space.dim, space.dim), dtype=complex)
    for s, proj in _s_projectors().items():
        phase = np.exp(-1j * ab.a_val * s * s)
        if s == 0 or ab.b_val == 0:
            block = phase * np.eye(nc, dtype=complex)
        else:
            lower = expm_general(-1j * ab.b_val * s * a)
            upper = expm_general(-1j * np.conj(ab.b_val) * s * a.T)
            block = phase * (lower @ upper)[:nc, :nc]
        u += np.kron(proj, embed(block, rest, "c").mat)
    if check_leak:
        leak = top_level_population(u, space, vacuum_columns(space))
        if leak > p.leak_threshold:
            raise TruncationLeakError(
                f"closed-form propagator at t={t:.4g} puts {leak:.2e} on the top Fock level "
                f"(threshold {p.leak_threshold:.1e}); raise cutoff_c")
    return Operator(space, u)


def u_prime_displacement(p: SystemParams, t: float, space: HilbertSpace | None = None) -> Operator:
    """Same propagator rewritten as e^{-i Re(A) S^2} exp(-i S (B c + B* c^dag)).

    Exactly unitary even on a truncated mode; used as an independent check
    of the ordered product.
    """
    space = effective_space(p) if space is None else space
    ab = ab_coefficients(p, t)
    s = s_operator(space).mat
    c = mode_op(space, "c").mat
    gen = (ab.b_val * c + np.conj(ab.b_val) * c.conj().T) @ s
    phase = _s2_phase(space, ab.a_val.real)
    return Operator(space, phase @ unitary_from_hermitian(0.5 * (gen + gen.conj().T), 1.0))


def drive_phase(p: SystemParams, t: float, space: HilbertSpace) -> Operator:
    """e^{-i H0 t}, assembled factor by factor since H0 is a sum of local terms."""
    u = np.ones((1, 1), dtype=complex)
    for label, dim in space.factors:
        if label in ("atom1", "atom2"):
            local = unitary_from_hermitian(p.omega_drive * SZ_TILDE, t)
        elif label in ("cp", "cm"):
            freq = SQRT2 * p.nu * (1 if label == "cp" else -1)
            local = np.diag(np.exp(-1j * freq * t * np.arange(dim)))
        else:
            local = np.eye(dim, dtype=complex)
        u = np.kron(u, local)
    return Operator(space, u)


def u_total(p: SystemParams, space: HilbertSpace | None = None, n_periods: int = 1) -> Operator:
    """Interaction-picture evolution over n closed loops, e^{-i H0 t} U'(t) at t = n tau."""
    space = effective_space(p) if space is None else space
    t = n_periods * p.tau
    return drive_phase(p, t, space) @ u_prime_closed(p, t, space)


def default_steps(p: SystemParams, t: float, frame: str) -> int:
    """Midpoint steps: 200 per fastest period (delta in the effective frame, the drive in the full one)."""
    if p.td_steps is not None:
        return max(1, int(math.ceil(p.td_steps * t / p.tau)))
    rate = p.delta if frame == "effective" else max(p.delta, p.omega_drive)
    return max(1, int(math.ceil(200 * rate * t / (2 * math.pi))))


def u_effective_numeric(p: SystemParams, t: float, steps: int | None = None,
                        tol: float = 1e-7, t0: float = 0.0,
                        space: HilbertSpace | None = None) -> tuple[Operator, ConvergenceReport]:
    """Midpoint propagation of ``H_eff`` from t0 to t with step doubling.

    Convergence is measured on the block with at most two photons, the only
    block where the truncated model is physical.
    """
    space = effective_space(p) if space is None else space
    if p.g == 0:
        return space.identity(), ConvergenceReport("trivial", 0, 0.0, tol)
    steps = default_steps(p, t - t0, "effective") if steps is None else steps
    return converged_propagate(h_eff(p, space), t0, t, steps, tol,
                               columns=low_fock_indices(space, 2))


def u_full_numeric(p: SystemParams, t: float, method: str = "corotating",
                   steps: int | None = None, tol: float = 1e-6,
                   space: HilbertSpace | None = None) -> tuple[Operator, ConvergenceReport]:
    """Full three-mode propagator U'(t) in the frame rotating with H0.

    ``method="stepped"`` integrates ``H'(t)`` with the midpoint rule;
    ``method="corotating"`` uses the exact time-independent generator.
    """
    space = full_space(p) if space is None else space
    if p.g == 0:
        return space.identity(), ConvergenceReport("trivial", 0, 0.0, tol)
    if method == "stepped":
        steps = default_steps(p, t, "full") if steps is None else steps
        return converged_propagate(h_rotated(p, space), 0.0, t, steps, tol,
                                   columns=low_fock_indices(space, 2))
    if method != "corotating":
        raise ValueError(f"unknown method {method!r}")
    u_int = corotating_interaction_propagator(p, t, space)
    u = drive_phase(p, -t, space).mat @ u_int.mat
    return Operator(space, u), ConvergenceReport("corotating-exact", 0, 0.0, tol)


def corotating_interaction_propagator(p: SystemParams, t: float, space: HilbertSpace,
                                      effective: bool = False) -> Operator:
    """Interaction-picture propagator e^{i delta N t} e^{-i K t} (no H0 frame removed)."""
    k = h_corotating(p, space, effective=effective).mat
    n_diag = np.real(np.diag(photon_number(space).mat))
    u = np.exp(1j * p.delta * n_diag * t)[:, None] * unitary_from_hermitian(k, t)
    return Operator(space, u)


def schrodinger_residual(p: SystemParams, times, step: float = 1e-4,
                         ab_fn=ab_coefficients, nmax: int = 2) -> float:
    """Worst relative residual |i dU'/dt - H_eff U'| / |H_eff| over ``times``.

    dU'/dt comes from a central difference of the closed form built from
    ``ab_fn``.  Norms are spectral norms on input columns with at most
    ``nmax`` photons.
    """
    space = effective_space(p)
    cols = low_fock_indices(space, nmax)
    h = h_eff(p, space)
    worst = 0.0
    for t in times:
        up = u_prime_closed(p, t + step, space, ab=ab_fn(p, t + step), check_leak=False).mat
        um = u_prime_closed(p, t - step, space, ab=ab_fn(p, t - step), check_leak=False).mat
        u0 = u_prime_closed(p, t, space, ab=ab_fn(p, t), check_leak=False).mat
        hm = h.matrix(t)
        res = 1j * (up - um)[:, cols] / (2 * step) - (hm @ u0)[:, cols]
        scale = np.linalg.norm(hm[np.ix_(cols, cols)], 2)
        worst = max(worst, float(np.linalg.norm(res, 2) / scale))
    return worst


@dataclass
class PropagatorBundle:
    """The closed-form and numerical propagators at one time, in the H0 frame."""

    t: float
    u_closed: Operator
    u_effective_numeric: Operator
    u_full_numeric: Operator | None = None
    diagnostics: dict = field(default_factory=dict)

    def unitarity_defects(self) -> dict[str, float]:
        out = {}
        for name in ("u_closed", "u_effective_numeric", "u_full_numeric"):
            u = getattr(self, name)
            if u is not None:
                out[name] = u.unitarity_defect(low_fock_indices(u.space, 2))
        return out


def build_bundle(p: SystemParams, t: float | None = None, include_full: bool = False,
                 full_method: str = "corotating") -> PropagatorBundle:
    t = p.tau if t is None else t
    u_closed = u_prime_closed(p, t)
    u_eff, rep = u_effective_numeric(p, t)
    bundle = PropagatorBundle(t, u_closed, u_eff, diagnostics={"effective": rep.as_dict()})
    if include_full:
        u_full, rep_full = u_full_numeric(p, t, method=full_method)
        bundle.u_full_numeric = u_full
        bundle.diagnostics["full"] = rep_full.as_dict()
        bundle.diagnostics["regime"] = {"strong_fiber": p.strong_fiber,
                                        "strong_drive": p.strong_drive}
    return bundle
