"""Fidelities, Theta(g) sweeps, field-state robustness and regime reports."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evolution import TruncationLeakError
from .model import SystemParams
from .operators import Ket
from .protocol import THETA_LEAK_LIMIT, GateResult, extract_gate, theta_of_g, trace_fidelity

UNITARY_TOL = 1e-6


def state_fidelity(a: Ket, b: Ket) -> float:
    if a.space != b.space:
        raise ValueError("states live on different spaces")
    return float(min(1.0, abs(a.overlap(b)) ** 2))


def gate_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """|tr(u^dag v)|^2 / d^2 for two unitaries of equal size."""
    u, v = np.asarray(u, dtype=complex), np.asarray(v, dtype=complex)
    if u.shape != v.shape or u.shape[0] != u.shape[1]:
        raise ValueError("gate_fidelity needs two square matrices of equal size")
    eye = np.eye(u.shape[0])
    for m in (u, v):
        if np.max(np.abs(m.conj().T @ m - eye)) > UNITARY_TOL:
            raise ValueError("gate_fidelity inputs must be unitary")
    return min(1.0, trace_fidelity(u, v))


# ---------------------------------------------------------------------------
# Theta(g) sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepPoint:
    g: float
    theta_est: float
    theta_formula: float
    leakage: float
    fidelity: float
    status: str

    @property
    def residual(self) -> float:
        return self.theta_est - self.theta_formula


@dataclass
class SweepResult:
    mode: str
    points: list[SweepPoint]
    coefficient: float
    fit_residuals: list[float] = field(default_factory=list)

    @property
    def g_values(self) -> np.ndarray:
        return np.array([pt.g for pt in self.points])

    @property
    def max_residual(self) -> float:
        used = [abs(pt.residual) for pt in self.points if pt.status in ("ok", "regime-warn")]
        return max(used) if used else math.nan

    def expected_coefficient(self, delta: float = 1.0) -> float:
        return math.pi / (4 * delta ** 2)


def regime_status(p: SystemParams, mode: str) -> str:
    if mode != "full":
        return "ok"
    statuses = {row.status for row in regime_check(p).rows[:3]}
    if "fail" in statuses:
        return "regime-fail"
    if "warn" in statuses:
        return "regime-warn"
    return "ok"


def _sweep_point(p: SystemParams, g: float, mode: str) -> SweepPoint:
    q = p.replace(g=g)
    status = regime_status(q, mode)
    # a regime failure is the root cause, so it outranks the leak flag it usually brings
    leak_status = status if status == "regime-fail" else "leak"
    try:
        res = extract_gate(q, mode)
    except TruncationLeakError:
        return SweepPoint(g, math.nan, theta_of_g(q), math.nan, math.nan, leak_status)
    if res.leakage > THETA_LEAK_LIMIT:
        status = leak_status
    return SweepPoint(g, res.theta_est, theta_of_g(q), res.leakage, res.fidelity_vs_target, status)


def fit_quadratic(g: np.ndarray, theta: np.ndarray) -> float:
    """Least-squares c in theta = c g^2, through the origin."""
    x = np.asarray(g, dtype=float) ** 2
    return float(np.dot(x, theta) / np.dot(x, x))


def sweep_theta(p: SystemParams, g_grid: Sequence[float], mode: str = "analytic",
                threads: int = 1) -> SweepResult:
    """Extract Theta at each coupling in ``g_grid`` and fit Theta = c g^2.

    Points with leakage above the validity limit, and (in full mode) points
    failing the regime check, are kept in the result but excluded from the fit.
    """
    grid = [float(g) for g in g_grid]
    if not grid:
        raise ValueError("empty coupling grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("coupling grid must be strictly increasing")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda g: _sweep_point(p, g, mode), grid))
    else:
        points = [_sweep_point(p, g, mode) for g in grid]
    used = [pt for pt in points if pt.status in ("ok", "regime-warn") and pt.g > 0]
    if used:
        coef = fit_quadratic(np.array([pt.g for pt in used]), np.array([pt.theta_est for pt in used]))
    else:
        coef = math.nan
    fit_res = [pt.theta_est - coef * pt.g ** 2 for pt in points]
    return SweepResult(mode, points, coef, fit_res)


# ---------------------------------------------------------------------------
# field-state robustness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldState:
    """Fock-diagonal field state of the dark mode: {photon number: weight}."""

    label: str
    weights: tuple[tuple[int, float], ...]

    def __post_init__(self):
        w = [x for _, x in self.weights]
        if any(x < 0 for x in w):
            raise ValueError("weights must be non-negative")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")


def fock(n: int) -> FieldState:
    return FieldState("vacuum" if n == 0 else f"fock:{n}", ((int(n), 1.0),))


def thermal(nbar: float, nmax: int = 4) -> FieldState:
    """Thermal occupation distribution with mean ``nbar`` cut at ``nmax`` photons and renormalized."""
    if nbar < 0:
        raise ValueError("mean occupation must be non-negative")
    if nbar == 0:
        return FieldState(f"thermal:{nbar:g}", ((0, 1.0),))
    x = nbar / (1 + nbar)
    w = np.array([x ** n for n in range(nmax + 1)])
    w = w / w.sum()
    return FieldState(f"thermal:{nbar:g}", tuple((n, float(v)) for n, v in enumerate(w)))


@dataclass
class FieldEnsemble:
    states: list[FieldState]

    @classmethod
    def default(cls, nbar: float = 0.5) -> "FieldEnsemble":
        return cls([fock(0), fock(1), fock(2), thermal(nbar)])

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.states]


@dataclass
class RobustnessRow:
    label: str
    theta_est: float
    fidelity: float
    leakage: float


def _field_row(p: SystemParams, state: FieldState, mode: str) -> RobustnessRow:
    theta = fid = leak = 0.0
    for n, w in state.weights:
        res: GateResult = extract_gate(p, mode, field={"c": n} if n else None)
        theta += w * res.theta_est
        fid += w * res.fidelity_vs_target
        leak += w * res.leakage
    return RobustnessRow(state.label, float(theta), float(fid), float(leak))


def robustness_scan(p: SystemParams, ensemble: FieldEnsemble, mode: str = "analytic",
                    threads: int = 1) -> list[RobustnessRow]:
    """Gate angle and fidelity for each field state, mixtures averaged over their Fock runs."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda s: _field_row(p, s, mode), ensemble.states))
    return [_field_row(p, s, mode) for s in ensemble.states]


def theta_spread(rows: Sequence[RobustnessRow]) -> float:
    th = [r.theta_est for r in rows]
    return float(max(th) - min(th))


# ---------------------------------------------------------------------------
# regime report
# ---------------------------------------------------------------------------

PASS_RATIO = 10.0
WARN_RATIO = 3.0


@dataclass
class RegimeRow:
    name: str
    value: float
    status: str


@dataclass
class RegimeReport:
    rows: list[RegimeRow]
    drive_ratio_integer: bool
    thresholds: tuple[float, float] = (PASS_RATIO, WARN_RATIO)

    @property
    def ok(self) -> bool:
        return all(r.status != "fail" for r in self.rows)

    @property
    def warnings(self) -> list[str]:
        out = [f"{r.name} = {r.value:g} ({r.status})" for r in self.rows if r.status != "pass"]
        if not self.drive_ratio_integer:
            out.append("omega_drive/delta is not an integer")
        return out


def _grade(x: float) -> str:
    if x >= PASS_RATIO:
        return "pass"
    if x >= WARN_RATIO:
        return "warn"
    return "fail"


def regime_check(p: SystemParams) -> RegimeReport:
    """Grade nu/g, omega_drive/g and omega_drive/delta against the 10 / 3 thresholds."""
    inf = math.inf
    ratios = [("nu/g", p.nu / p.g if p.g else inf),
              ("omega_drive/g", p.omega_drive / p.g if p.g else inf),
              ("omega_drive/delta", p.omega_drive / p.delta)]
    rows = [RegimeRow(name, val, _grade(val)) for name, val in ratios]
    return RegimeReport(rows, p.drive_phase_cancels)
