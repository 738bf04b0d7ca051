"""Norms, decay-exponent fits, space-time norms, and the form bound.

The dispersive content of the toolkit is quantitative: evolved fields
should lose dual-Lebesgue mass like a power of time, space-time norms on
the admissible segment should saturate as the horizon grows, and the
attractive part of the potential should be controllable by an arbitrarily
small slice of kinetic energy.  This module measures all three.  Decay is
fitted from log-log least squares against ``C * t**(-alpha)``; the fitted
exponent is compared with the conjugate-exponent target ``1/p - 1/2``
elsewhere, never asserted here.

Norm conventions: ``lp_norm`` integrates the piecewise-linear grid data
with the trapezoid rule, so a constant 1 sampled on [0, 1] has unit norm
for every p.  Derivatives use centered differences, one-sided at the two
ends of the grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, DomainError, GridMismatchError
from .field import WaveField
from .jost import solve_jost_batch
from .potential import Potential, local_l1_sup
from .propagator import evolve_continuous
from .scattering import BoundStateSet, scattering_matrix

__all__ = [
    "DEFAULT_FIT_TIMES",
    "AdmissiblePoint",
    "DecayReport",
    "FormBoundReport",
    "CoarseTimeGridWarning",
    "admissible_segment",
    "boundary_trace",
    "decay_fit",
    "duhamel_apply",
    "form_bound_check",
    "lp_norm",
    "sobolev_norm",
    "strichartz_norm",
]

# geometric fit grid, one octave per sample
DEFAULT_FIT_TIMES = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)

# free group velocity is 2k; this covers wavenumbers up to 4 when the
# evolution grid is grown linearly in time
_SPAN_RATE = 8.0

_MIN_FIT_SAMPLES = 6


class CoarseTimeGridWarning(UserWarning):
    """Time quadrature ran on too few snapshots to resolve the integral."""


def _check_p(p: float) -> float:
    p = float(p)
    if not (p >= 1.0):
        raise DomainError(f"Lebesgue exponent must satisfy p >= 1, got {p}")
    return p


def _dual(p: float) -> float:
    if math.isinf(p):
        return 1.0
    if p == 1.0:
        return math.inf
    return p / (p - 1.0)


def lp_norm(field: WaveField, p: float) -> float:
    """Grid L^p norm; p = inf is the max of ``|values|``."""
    p = _check_p(p)
    a = np.abs(field.values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    return float(np.trapezoid(a ** p, field.x_grid) ** (1.0 / p))


def _derivative(field: WaveField) -> np.ndarray:
    return np.gradient(field.values, field.x_grid)


def sobolev_norm(field: WaveField, p: float) -> float:
    """First-order Sobolev norm ``||u||_p + ||u'||_p``.

    The derivative is the centered difference of the samples, so the
    field must be smooth at the grid scale for the value to mean
    anything.  The Dirichlet trace that decides membership in the
    zero-boundary subspace is reported by :func:`boundary_trace`.
    """
    du = field.with_values(_derivative(field))
    return lp_norm(field, p) + lp_norm(du, p)


def boundary_trace(field: WaveField) -> float:
    """|u(0)|, the quantity that must vanish on the Dirichlet domain."""
    return float(abs(field.values[0]))


@dataclass(frozen=True)
class AdmissiblePoint:
    """Exponent pair on the admissible segment 1/p + 2/r = 1/2.

    The segment runs from the energy endpoint (p, r) = (2, inf) to the
    smoothing endpoint (inf, 4).  Dual exponents are the usual Lebesgue
    conjugates, used for the inhomogeneous estimate.
    """

    p: float
    r: float

    def __post_init__(self):
        pinv = 0.0 if math.isinf(self.p) else 1.0 / self.p
        rinv = 0.0 if math.isinf(self.r) else 1.0 / self.r
        if not 0.0 <= pinv <= 0.5:
            raise DomainError(f"1/p = {pinv:g} is outside [0, 1/2]")
        if abs(pinv + 2.0 * rinv - 0.5) > 1e-12:
            raise DomainError(
                f"(p, r) = ({self.p:g}, {self.r:g}) is off the segment: "
                f"1/p + 2/r = {pinv + 2.0 * rinv:g}")

    @property
    def p_dual(self) -> float:
        return _dual(self.p)

    @property
    def r_dual(self) -> float:
        return _dual(self.r)


def admissible_segment(count: int = 3) -> tuple[AdmissiblePoint, ...]:
    """Evenly spaced points on the segment, both endpoints included."""
    if count < 2:
        raise DomainError("need at least the two endpoint exponent pairs")
    points = []
    for j in range(count):
        theta = 1.0 - j / (count - 1)  # 1 at (2, inf), 0 at (inf, 4)
        p = math.inf if theta == 0.0 else 2.0 / theta
        r = math.inf if theta == 1.0 else 4.0 / (1.0 - theta)
        points.append(AdmissiblePoint(p, r))
    return tuple(points)


@dataclass(frozen=True)
class DecayReport:
    """Log-log fit of a norm series against ``C * t**(-alpha)``."""

    p: float
    target_alpha: float
    times: tuple
    norms: tuple
    alpha: float
    constant: float
    residual_rms: float
    projected: bool
    mode: str
    sobolev_norms: tuple | None = None
    sobolev_alpha: float | None = None
    sobolev_constant: float | None = None
    sobolev_residual_rms: float | None = None

    def as_dict(self) -> dict:
        out = {
            "p": self.p,
            "target_alpha": self.target_alpha,
            "times": list(self.times),
            "norms": list(self.norms),
            "alpha": self.alpha,
            "constant": self.constant,
            "residual_rms": self.residual_rms,
            "projected": self.projected,
            "mode": self.mode,
        }
        if self.sobolev_norms is not None:
            out["sobolev_norms"] = list(self.sobolev_norms)
            out["sobolev_alpha"] = self.sobolev_alpha
            out["sobolev_constant"] = self.sobolev_constant
            out["sobolev_residual_rms"] = self.sobolev_residual_rms
        return out


def _loglog_fit(times: np.ndarray, norms: np.ndarray) -> tuple[float, float, float]:
    mask = times >= 1.0
    if int(mask.sum()) < _MIN_FIT_SAMPLES:
        raise DataError(
            f"decay fit needs at least {_MIN_FIT_SAMPLES} samples with "
            f"t >= 1, got {int(mask.sum())}")
    if np.any(norms[mask] <= 0.0):
        raise DataError("decay fit needs positive norms")
    lt = np.log(times[mask])
    ln = np.log(norms[mask])
    design = np.stack([np.ones_like(lt), -lt], axis=1)
    (logc, alpha), *_ = np.linalg.lstsq(design, ln, rcond=None)
    resid = ln - design @ np.array([logc, alpha])
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return float(alpha), float(math.exp(logc)), rms


def _extended_field(phi: WaveField, x_max: float) -> WaveField:
    """Zero-pad the data onto a longer grid with the same spacing."""
    x = phi.x_grid
    h = x[1] - x[0]
    if x[-1] >= x_max:
        return phi
    n_total = int(math.ceil((x_max - x[0]) / h)) + 1
    grid = x[0] + h * np.arange(n_total)
    values = np.zeros(n_total, dtype=complex)
    values[: x.size] = phi.values
    return WaveField(grid, values, phi.time)


def _bound_state_values(potential: Potential, bound: BoundStateSet,
                        x: np.ndarray) -> np.ndarray:
    """Normalized eigenfunction rows on an arbitrary grid.

    Normalization is inherited from the tail grid the bound states were
    found on, so the caller grid may end before the tails do.
    """
    f, _ = solve_jost_batch(potential, 1j * bound.kappas, x)
    ft, _ = solve_jost_batch(potential, 1j * bound.kappas, bound.x_grid)
    norms = np.sqrt(np.trapezoid(ft.real ** 2, bound.x_grid, axis=1))
    return f.real / norms[:, None]


def _pp_term(potential: Potential, bound: BoundStateSet,
             phi: WaveField, t: float) -> np.ndarray:
    """e^{-itH} restricted to the point spectrum, as grid values."""
    if bound.count == 0:
        return np.zeros(phi.x_grid.size, dtype=complex)
    funcs = _bound_state_values(potential, bound, phi.x_grid)
    coeff = np.trapezoid(funcs * phi.values[None, :], phi.x_grid, axis=1)
    phases = np.exp(1j * t * bound.kappas ** 2)
    return (coeff * phases) @ funcs


def decay_fit(potential: Potential, phi: WaveField, p: float,
              times=None, *, mode: str = "assembled",
              projected: bool = True, sobolev: bool = False,
              span_rate: float = _SPAN_RATE) -> DecayReport:
    """Measure ``||e^{-itH} P_c phi||_{p'}`` and fit its decay exponent.

    The evolution grid grows linearly with time (``span_rate`` length
    units per unit time) so the norm window tracks a fixed wavenumber
    window; a fixed grid would see spurious extra decay once the bulk
    moves past its edge.  With ``projected=False`` the point-spectrum
    part is added back, which is exactly the situation where the decay
    law is expected to fail when bound states exist.  ``sobolev=True``
    additionally fits the first-order Sobolev norm series with the same
    target exponent.
    """
    p = _check_p(p)
    if p > 2.0:
        raise DomainError(f"decay exponents are fitted for p in [1, 2], got {p}")
    q = _dual(p)
    if times is None:
        times = DEFAULT_FIT_TIMES
    t_arr = np.asarray([float(t) for t in times], dtype=float)
    if t_arr.size == 0 or np.any(t_arr <= 0.0):
        raise DomainError("fit times must be positive")

    bound = None
    if not projected and not potential.is_trivial():
        bound = scattering_matrix(potential).bound_states

    norms = []
    wnorms = []
    for t in t_arr:
        data = _extended_field(phi, phi.x_grid[-1] + span_rate * t)
        u = evolve_continuous(potential, data, t, mode=mode)
        if bound is not None:
            u = u.with_values(u.values + _pp_term(potential, bound, data, t))
        norms.append(lp_norm(u, q))
        if sobolev:
            wnorms.append(sobolev_norm(u, q))

    alpha, constant, rms = _loglog_fit(t_arr, np.asarray(norms))
    extra: dict = {}
    if sobolev:
        walpha, wconstant, wrms = _loglog_fit(t_arr, np.asarray(wnorms))
        extra = {
            "sobolev_norms": tuple(wnorms),
            "sobolev_alpha": walpha,
            "sobolev_constant": wconstant,
            "sobolev_residual_rms": wrms,
        }
    return DecayReport(
        p=p,
        target_alpha=1.0 / p - 0.5,
        times=tuple(t_arr.tolist()),
        norms=tuple(norms),
        alpha=alpha,
        constant=constant,
        residual_rms=rms,
        projected=projected,
        mode=mode,
        **extra,
    )


def strichartz_norm(trajectory, point: AdmissiblePoint, T: float) -> float:
    """Mixed norm ``L^r([0, T], L^p)`` of a sampled trajectory.

    The time integral is the trapezoid rule on the snapshot times inside
    [0, T]; r = inf is the running sup.  A warning is emitted when the
    snapshots are too sparse for the quadrature to be trusted.
    """
    if T <= 0.0:
        raise DomainError(f"horizon must be positive, got {T}")
    kept = [f for f in trajectory if f.time <= T + 1e-12]
    if not kept:
        raise DataError("no snapshots inside the time horizon")
    kept.sort(key=lambda f: f.time)
    times = np.asarray([f.time for f in kept])
    space = np.asarray([lp_norm(f, point.p) for f in kept])
    if math.isinf(point.r):
        return float(space.max())
    if times.size < 4 or float(np.diff(times).max()) > T / 3.0:
        warnings.warn(
            f"{times.size} snapshots with max gap "
            f"{float(np.diff(times).max()) if times.size > 1 else T:g} "
            f"over [0, {T:g}]; the time quadrature is under-resolved",
            CoarseTimeGridWarning, stacklevel=2)
    return float(np.trapezoid(space ** point.r, times) ** (1.0 / point.r))


def duhamel_apply(potential: Potential, forcing, t: float,
                  mode: str = "assembled") -> WaveField:
    """Inhomogeneous term ``int_0^t e^{-i(t-s)H} P_c f(s) ds``.

    The forcing is a sequence of snapshots on a common grid with times
    inside [0, t]; the integral is their trapezoid combination, one
    evolution per snapshot.
    """
    fields = sorted(forcing, key=lambda f: f.time)
    if len(fields) < 2:
        raise DataError("forcing needs at least two snapshots")
    x = fields[0].x_grid
    for f in fields[1:]:
        if f.x_grid.shape != x.shape or float(np.max(np.abs(f.x_grid - x))) > 1e-12:
            raise GridMismatchError("forcing snapshots live on different grids")
    times = np.asarray([f.time for f in fields])
    if times[0] < -1e-12 or times[-1] > t + 1e-12:
        raise DomainError("forcing times must lie inside [0, t]")
    weights = np.zeros(times.size)
    dt = np.diff(times)
    weights[:-1] += 0.5 * dt
    weights[1:] += 0.5 * dt
    out = np.zeros(x.size, dtype=complex)
    for w, f in zip(weights, fields):
        if w == 0.0:
            continue
        out += w * evolve_continuous(potential, f, t - f.time, mode=mode).values
    return WaveField(x, out, t)


@dataclass(frozen=True)
class FormBoundReport:
    """Measured vs constructive constant in the kinetic-energy bound."""

    epsilon: float
    measured_k: float
    constructive_k: float
    local_mass: float
    delta: float
    family_size: int

    @property
    def satisfied(self) -> bool:
        return self.measured_k <= self.constructive_k + 1e-12

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "measured_k": self.measured_k,
            "constructive_k": self.constructive_k,
            "local_mass": self.local_mass,
            "delta": self.delta,
            "family_size": self.family_size,
            "satisfied": self.satisfied,
        }


def form_bound_check(potential: Potential, phi_family,
                     epsilon: float) -> FormBoundReport:
    """Check ``int |V| |phi|^2 <= eps ||phi'||^2 + K ||phi||^2`` on a family.

    The measured constant is the smallest K making the inequality hold
    for every family member (never negative: K = 0 always suffices when
    V vanishes).  The constructive constant comes from splitting the
    line into unit windows: with C the largest unit-window mass of |V|
    and delta = epsilon / C, the splitting argument yields
    K = C (1 + 1/delta).
    """
    if epsilon <= 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    fields = list(phi_family)
    if not fields:
        raise DataError("form bound check needs a nonempty family")
    worst = 0.0
    for f in fields:
        x = f.x_grid
        absv = np.abs(potential(x))
        pot_term = float(np.trapezoid(absv * np.abs(f.values) ** 2, x))
        kinetic = float(np.trapezoid(np.abs(_derivative(f)) ** 2, x))
        mass = float(np.trapezoid(np.abs(f.values) ** 2, x))
        if mass <= 0.0:
            raise DataError("family member with zero L2 mass")
        worst = max(worst, (pot_term - epsilon * kinetic) / mass)
    c_mass = local_l1_sup(potential)
    if c_mass > 0.0:
        delta = epsilon / c_mass
        constructive = c_mass * (1.0 + 1.0 / delta)
    else:
        delta = math.inf
        constructive = 0.0
    return FormBoundReport(
        epsilon=float(epsilon),
        measured_k=worst,
        constructive_k=constructive,
        local_mass=c_mass,
        delta=delta,
        family_size=len(fields),
    )
