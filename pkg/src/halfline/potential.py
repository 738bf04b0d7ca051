"""Half-line potentials and their moment functions.

The toolkit restricts itself to real, compactly supported potentials: V is
given on [0, L_V] and treated as exactly zero beyond. Everything downstream
(kernel equations, scattering sweeps, bounds) consumes a potential through
the uniform-cell tabulation built here, which stores exact per-cell
integrals of V, |V| and the first moment of |V|. Computing the decay
moments

    sigma(x)  = integral_x^inf |V(y)| dy
    sigma1(x) = integral_x^inf sigma(y) dy

from those shared cell integrals makes the moment identities (monotonicity,
convexity, the Fubini identity sigma1(0) = first moment of |V|) hold to
rounding, and makes the pointwise kernel bounds used elsewhere tight on the
same lattice the kernel solver uses.

Supported kinds
---------------
``square_well``
    V = -V0 on [0, a), zero beyond; ``params = {"V0": depth, "a": width}``.
``exp``
    V = amplitude * exp(-rate * x) truncated at L_V;
    ``params = {"amplitude": c, "rate": mu}``.
``table``
    piecewise-linear through uniform samples x[], v[].

Potential definition files are JSON objects
``{"kind": ..., "params": ..., "L_V": ..., "dx": ...}`` with ``x``/``v``
arrays for the table kind.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .exceptions import DataError, DomainError

__all__ = [
    "Potential",
    "MomentProfile",
    "PotentialTabulation",
    "sigma",
    "first_moment",
    "local_l1_sup",
    "moment_profile",
    "load_potential",
    "save_potential",
    "preset",
    "PRESET_NAMES",
]

# Tabulation cell widths. Finer for strong potentials so that kernel-route
# quadratures stay below the 1e-6 cross-validation tolerance.
_DELTA_BASE_DENOM = 512
_DELTA_FLOOR_DENOM = 8192
_KERNEL_NODE_BUDGET = 4608
_ROUGHNESS_TARGET = 3.2e-3

_QUAD_REL_TOL = 1e-10
_QUAD_MAX_LEVEL = 12


def _as_grid_count(length: float, delta: float) -> int:
    n = length / delta
    n_int = int(round(n))
    if n_int < 1 or abs(n - n_int) > 1e-9 * max(1.0, n_int):
        raise DataError(
            f"length {length} is not an integer multiple of cell width {delta}"
        )
    return n_int


@dataclass(frozen=True, eq=False)
class Potential:
    """Real potential on the half-line, zero beyond ``L_V``.

    Parameters
    ----------
    kind : str
        One of ``"square_well"``, ``"exp"``, ``"table"``.
    params : dict
        Closed-form parameters (empty for tables).
    L_V : float
        Support bound; V(x) = 0 for x > L_V.
    dx : float
        Grid spacing of the sampled representation.
    x, v : ndarray
        Node samples. For closed-form kinds these are materialized for
        inspection; evaluation uses the closed form.
    """

    kind: str
    params: dict
    L_V: float
    dx: float
    x: np.ndarray
    v: np.ndarray
    name: str = "potential"
    _tabs: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("square_well", "exp", "table"):
            raise DataError(f"unknown potential kind {self.kind!r}")
        if not (self.L_V > 0 and math.isfinite(self.L_V)):
            raise DataError("L_V must be positive and finite")
        if not (self.dx > 0 and math.isfinite(self.dx)):
            raise DataError("dx must be positive and finite")
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape or x.ndim != 1 or x.size < 2:
            raise DataError("x and v must be equal-length 1d arrays")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise DataError("potential samples must be finite")
        steps = np.diff(x)
        if np.any(steps <= 0) or np.max(np.abs(steps - self.dx)) > 1e-9 * self.dx:
            raise DataError("x must be uniform with spacing dx")
        if abs(x[0]) > 1e-12 or abs(x[-1] - self.L_V) > 1e-9:
            raise DataError("samples must span [0, L_V]")
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    # -- evaluation ------------------------------------------------------

    def __call__(self, x):
        """Evaluate V at x (scalar or array); zero outside [0, L_V]."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        inside = (x >= 0.0) & (x <= self.L_V)
        xi = x[inside]
        if self.kind == "square_well":
            v0, a = self.params["V0"], self.params["a"]
            out[inside] = np.where(xi < a, -v0, 0.0)
        elif self.kind == "exp":
            c, mu = self.params["amplitude"], self.params["rate"]
            out[inside] = c * np.exp(-mu * xi)
        else:
            out[inside] = np.interp(xi, self.x, self.v)
        return out[0] if scalar else out

    def integral_to(self, x):
        """Exact antiderivative W(x) = int_0^x V(y) dy (scalar or array)."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xc = np.clip(np.atleast_1d(x), 0.0, self.L_V)
        if self.kind == "square_well":
            v0, a = self.params["V0"], self.params["a"]
            out = -v0 * np.minimum(xc, a)
        elif self.kind == "exp":
            c, mu = self.params["amplitude"], self.params["rate"]
            out = c * (1.0 - np.exp(-mu * xc)) / mu
        else:
            w_nodes = np.concatenate(
                [[0.0], np.cumsum((self.v[:-1] + self.v[1:]) / 2 * self.dx)])
            idx = np.clip((xc / self.dx).astype(int), 0, self.v.size - 2)
            s = xc - self.x[idx]
            slope = (self.v[idx + 1] - self.v[idx]) / self.dx
            out = w_nodes[idx] + self.v[idx] * s + slope * s * s / 2.0
        return float(out[0]) if scalar else out

    @property
    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.v))) if self.v.size else 0.0

    def preferred_delta(self) -> float:
        # lattice error scales like (sup|V| * delta)^2; refine until the
        # roughness target is met or quadratic kernel storage gets large
        denom = _DELTA_BASE_DENOM
        while (denom < _DELTA_FLOOR_DENOM
               and self.sup_abs / denom > _ROUGHNESS_TARGET
               and self.L_V * (2 * denom) <= _KERNEL_NODE_BUDGET):
            denom *= 2
        return 1.0 / denom

    def tabulation(self, delta: float | None = None) -> "PotentialTabulation":
        """Uniform-cell tabulation at cell width ``delta`` (cached)."""
        if delta is None:
            delta = self.preferred_delta()
        key = float(delta)
        tab = self._tabs.get(key)
        if tab is None:
            tab = PotentialTabulation(self, key)
            self._tabs[key] = tab
        return tab

    def is_trivial(self) -> bool:
        return bool(np.all(self.v == 0.0))


def _materialize(kind: str, params: dict, L_V: float, dx: float) -> tuple:
    n = _as_grid_count(L_V, dx)
    x = np.linspace(0.0, L_V, n + 1)
    if kind == "square_well":
        v = np.where(x < params["a"], -params["V0"], 0.0)
    else:
        v = params["amplitude"] * np.exp(-params["rate"] * x)
    return x, v


def square_well(V0: float, a: float, dx: float = 1.0 / 512.0,
                name: str = "square-well") -> Potential:
    x, v = _materialize("square_well", {"V0": V0, "a": a}, a, dx)
    return Potential("square_well", {"V0": float(V0), "a": float(a)},
                     float(a), float(dx), x, v, name=name)


def exp_well(amplitude: float, rate: float, L_V: float,
             dx: float = 1.0 / 512.0, name: str = "exp") -> Potential:
    params = {"amplitude": float(amplitude), "rate": float(rate)}
    x, v = _materialize("exp", params, L_V, dx)
    return Potential("exp", params, float(L_V), float(dx), x, v, name=name)


def table_potential(x, v, name: str = "table") -> Potential:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.size < 2:
        raise DataError("table needs at least two samples")
    dx = float(x[1] - x[0])
    return Potential("table", {}, float(x[-1]), dx, x, v, name=name)


# -- presets -------------------------------------------------------------

def _gauss_bump_table() -> Potential:
    dx = 1.0 / 64.0
    x = np.arange(0, int(round(4.5 / dx)) + 1) * dx
    v = -1.8 * np.exp(-((x - 2.0) ** 2) / (2 * 0.5**2))
    return table_potential(x, v, name="gauss-bump")


_PRESETS: dict[str, Callable[[], Potential]] = {
    "free": lambda: square_well(0.0, 1.0, name="free"),
    "shallow-well": lambda: square_well(1.0, 1.0, name="shallow-well"),
    "deep-well": lambda: square_well(20.0, 1.0, name="deep-well"),
    "exp-decay": lambda: exp_well(-2.5, 3.0, 6.5, name="exp-decay"),
    "gauss-bump": _gauss_bump_table,
    # exact zero-energy resonance of the unit-width well; used to test
    # that downstream modules refuse it
    "resonant-well": lambda: square_well(math.pi**2 / 4.0, 1.0,
                                         name="resonant-well"),
    "two-state-well": lambda: square_well(60.0, 1.0, name="two-state-well"),
}

PRESET_NAMES = tuple(sorted(_PRESETS))


@lru_cache(maxsize=None)
def _preset_cached(name: str) -> Potential:
    return _PRESETS[name]()


def preset(name: str) -> Potential:
    # instances are immutable; sharing them shares tabulation caches
    try:
        return _preset_cached(name)
    except KeyError:
        raise DataError(f"unknown preset {name!r}; have {PRESET_NAMES}") from None


# -- tabulation ----------------------------------------------------------

def _refining_cell_integrals(f: Callable, edges: np.ndarray) -> np.ndarray:
    """Exact-per-cell integrals of f by trapezoid refinement.

    Halves the sub-step until the total changes by less than 1e-10
    relative; piecewise-linear integrands converge at the first check.
    """
    left = edges[:-1]
    widths = np.diff(edges)
    eta = 1e-9 * widths  # endpoint nudge: jumps on edges sampled one-sided
    vals = None
    prev_total = None
    for level in range(_QUAD_MAX_LEVEL + 1):
        m = 2**level
        u = np.linspace(0.0, 1.0, m + 1)
        y = left[:, None] + widths[:, None] * u[None, :]
        y[:, 0] = left + eta
        y[:, -1] = left + widths - eta
        fy = f(y)
        cell = np.trapezoid(fy, dx=1.0, axis=1) * (widths / m)
        total = float(np.sum(cell))
        if prev_total is not None:
            scale = max(abs(total), abs(prev_total), 1e-300)
            if abs(total - prev_total) <= _QUAD_REL_TOL * scale:
                return cell
        prev_total = total
        vals = cell
    return vals


@dataclass(frozen=True, eq=False)
class PotentialTabulation:
    """Uniform-cell view of a potential with exact cell integrals.

    Arrays are laid out over n cells [x_i, x_{i+1}], x_i = i*delta,
    covering [0, L_V]. ``v_node`` carries node values with the midpoint
    convention at jump nodes, which keeps trapezoid sums second order
    across discontinuities.
    """

    potential: Potential
    delta: float
    n: int = field(init=False)
    vl: np.ndarray = field(init=False)
    vr: np.ndarray = field(init=False)
    v_node: np.ndarray = field(init=False)
    cell_int: np.ndarray = field(init=False)
    cell_abs: np.ndarray = field(init=False)
    cell_absmom: np.ndarray = field(init=False)
    sigma_node: np.ndarray = field(init=False)
    sigma1_node: np.ndarray = field(init=False)
    hard_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        pot, delta = self.potential, self.delta
        n = _as_grid_count(pot.L_V, delta)
        if pot.kind == "table":
            ratio = pot.dx / delta
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise DataError("tabulation delta must divide the table dx")
        edges = np.arange(n + 1) * delta
        eps = 1e-9 * delta
        vl = pot(np.minimum(edges[:-1] + eps, pot.L_V))
        vr = pot(np.maximum(edges[1:] - eps, 0.0))
        if pot.kind == "square_well":
            # snap one-sided limits exactly for the piecewise-constant well
            a = pot.params["a"]
            inside = edges[:-1] < a - 0.5 * delta
            vl = np.where(inside, -pot.params["V0"], 0.0)
            vr = vl.copy()

        cell_int = _refining_cell_integrals(pot, edges)
        cell_abs = _refining_cell_integrals(lambda y: np.abs(pot(y)), edges)
        left = edges[:-1]
        cell_absmom = _refining_cell_integrals(
            lambda y: np.abs(pot(y)) * (y - left[:, None]), edges
        )

        # node values, midpoint at interior jump nodes
        v_node = np.empty(n + 1)
        v_node[0] = vl[0]
        v_node[1:-1] = 0.5 * (vr[:-1] + vl[1:])
        v_node[-1] = 0.5 * vr[-1]  # support edge: average with the 0 outside

        # sigma at nodes: suffix sums of |V| cell masses
        sigma_node = np.zeros(n + 1)
        sigma_node[:-1] = np.cumsum(cell_abs[::-1])[::-1]
        # per-cell integral of sigma: delta*sigma(right edge) + first moment
        cell_sigma_int = delta * sigma_node[1:] + cell_absmom
        sigma1_node = np.zeros(n + 1)
        sigma1_node[:-1] = np.cumsum(cell_sigma_int[::-1])[::-1]

        # threshold well above the slope*eps artifact of the one-sided
        # endpoint nudge, well below any genuine discontinuity
        jump_tol = 1e-6 * (float(np.max(np.abs(v_node))) + 1.0)
        jumps = edges[1:-1][np.abs(vr[:-1] - vl[1:]) > jump_tol]
        hard = np.concatenate(([0.0], jumps, [pot.L_V]))

        for name, arr in [
            ("vl", vl), ("vr", vr), ("v_node", v_node),
            ("cell_int", cell_int), ("cell_abs", cell_abs),
            ("cell_absmom", cell_absmom), ("sigma_node", sigma_node),
            ("sigma1_node", sigma1_node), ("hard_nodes", hard),
        ]:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n", n)

    # -- moment evaluation ----------------------------------------------

    def sigma(self, x):
        """sigma(x) = integral_x^inf |V|; exact suffix integral."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if np.any(x < 0):
            raise DomainError("sigma is defined for x >= 0")
        out = np.zeros_like(x)
        inside = x < self.potential.L_V
        xi = x[inside]
        idx = np.minimum((xi / self.delta).astype(int), self.n - 1)
        # exact partial-cell integral of |V| from x to the cell's right edge
        partial = _partial_abs_from(self, idx, xi)
        out[inside] = self.sigma_node[idx + 1] + partial
        return out[0] if scalar else out

    def sigma1(self, x):
        """sigma1(x) = integral_x^inf sigma; exact partial-cell quadrature."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if np.any(x < 0):
            raise DomainError("sigma1 is defined for x >= 0")
        out = np.zeros_like(x)
        inside = x < self.potential.L_V
        xi = x[inside]
        idx = np.minimum((xi / self.delta).astype(int), self.n - 1)
        right = (idx + 1) * self.delta
        # integral of sigma over [x, right] = sigma(right)*(right - x)
        # plus the first moment of |V| about x on that span (Fubini)
        sig_r = self.sigma_node[idx + 1]
        mom = _partial_abs_from(self, idx, xi, moment=True)
        out[inside] = self.sigma1_node[idx + 1] + sig_r * (right - xi) + mom
        return out[0] if scalar else out

    @property
    def first_moment(self) -> float:
        left = np.arange(self.n) * self.delta
        return float(np.sum(left * self.cell_abs + self.cell_absmom))


def _partial_abs_from(tab: PotentialTabulation, idx: np.ndarray,
                      x: np.ndarray, moment: bool = False) -> np.ndarray:
    """integral_x^{right edge} |V| within cell idx (optionally weighted by
    y - x), by refinement quadrature consistent with the cell integrals."""
    pot = tab.potential
    right = (idx + 1) * tab.delta
    widths = right - x
    out = np.zeros_like(x)
    live = widths > 1e-15
    if not np.any(live):
        return out
    xl, wl = x[live], widths[live]
    eta = 1e-9 * wl
    prev = None
    for level in range(_QUAD_MAX_LEVEL + 1):
        m = 2**level
        u = np.linspace(0.0, 1.0, m + 1)
        y = xl[:, None] + wl[:, None] * u[None, :]
        y[:, 0] = xl + eta
        y[:, -1] = xl + wl - eta
        fy = np.abs(pot(y))
        if moment:
            fy = fy * (y - xl[:, None])
        cur = np.trapezoid(fy, dx=1.0, axis=1) * (wl / m)
        if prev is not None:
            scale = max(float(np.max(np.abs(cur))), 1e-300)
            if float(np.max(np.abs(cur - prev))) <= _QUAD_REL_TOL * scale:
                break
        prev = cur
    out[live] = cur
    return out


@dataclass(frozen=True, eq=False)
class MomentProfile:
    """Decay moments of |V|: sigma, sigma1 and the first moment.

    ``sigma``/``sigma1`` are callables backed by exact cell integrals;
    ``x_nodes`` carries the tabulation lattice for grid-level checks.
    """

    potential: Potential
    x_nodes: np.ndarray
    sigma_values: np.ndarray
    sigma1_values: np.ndarray
    first_moment: float
    _tab: PotentialTabulation

    def sigma(self, x):
        return self._tab.sigma(x)

    def sigma1(self, x):
        return self._tab.sigma1(x)


# -- public operations ---------------------------------------------------

def sigma(potential: Potential, x) -> float:
    """Tail mass of |V| from x to infinity."""
    return potential.tabulation().sigma(x)


def first_moment(potential: Potential) -> float:
    """First moment integral of x |V(x)|; finiteness gates every solver."""
    if not np.all(np.isfinite(potential.v)):
        raise DataError("potential has non-finite samples")
    return potential.tabulation().first_moment


def moment_profile(potential: Potential, delta: float | None = None) -> MomentProfile:
    tab = potential.tabulation(delta)
    nodes = np.arange(tab.n + 1) * tab.delta
    return MomentProfile(
        potential=potential,
        x_nodes=nodes,
        sigma_values=tab.sigma_node,
        sigma1_values=tab.sigma1_node,
        first_moment=tab.first_moment,
        _tab=tab,
    )


def local_l1_sup(potential: Potential) -> float:
    """sup over window starts of the unit-window L1 mass of |V|.

    The window mass W(s) is piecewise quadratic in the start s on the
    tabulation lattice (|V| is piecewise linear), so the supremum is taken
    exactly: per cell the candidates are the cell ends and the interior
    stationary point of W. Within cells where V changes sign the piecewise
    linear model of |V| is an O(delta^2) approximation.
    """
    tab = potential.tabulation()
    delta, n = tab.delta, tab.n
    m = int(round(1.0 / delta))
    if abs(m * delta - 1.0) > 1e-9:
        raise DataError("tabulation delta must divide the unit window")
    # pad with zero cells so windows may hang off the support
    al = np.abs(np.concatenate([tab.vl, np.zeros(m + 1)]))
    ar = np.abs(np.concatenate([tab.vr, np.zeros(m + 1)]))
    mass = np.concatenate([tab.cell_abs, np.zeros(m + 1)])
    cum = np.concatenate([[0.0], np.cumsum(mass)])

    best = 0.0
    # W(s), s = (i + u/delta)*delta: quadratic in u on each cell
    for i in range(n):
        j = i + m
        w0 = cum[j] - cum[i]
        # dW/du = |V(s+1)| - |V(s)| with both legs linear in u
        d0 = al[j] - al[i]
        d1 = ar[j] - ar[i]
        # W(u) = w0 + d0*u + (d1-d0)*u^2/(2*delta), u in [0, delta]
        cand = [w0, w0 + 0.5 * (d0 + d1) * delta]
        if abs(d1 - d0) > 1e-300:
            u_star = -d0 * delta / (d1 - d0)
            if 0.0 < u_star < delta:
                cand.append(w0 + d0 * u_star + (d1 - d0) * u_star**2 / (2 * delta))
        best = max(best, max(cand))
    return best


# -- serialization -------------------------------------------------------

def potential_document(potential: Potential) -> dict:
    """JSON-ready description; inverse of potential_from_document."""
    doc = {
        "kind": potential.kind,
        "params": potential.params,
        "L_V": potential.L_V,
        "dx": potential.dx,
        "name": potential.name,
    }
    if potential.kind == "table":
        doc["x"] = potential.x.tolist()
        doc["v"] = potential.v.tolist()
    return doc


def potential_from_document(doc: dict) -> Potential:
    try:
        kind = doc["kind"]
        L_V = float(doc["L_V"])
        dx = float(doc["dx"])
        name = doc.get("name", "potential")
        if kind == "table":
            return table_potential(doc["x"], doc["v"], name=name)
        params = {k: float(vv) for k, vv in doc["params"].items()}
        x, v = _materialize(kind, params, L_V, dx)
        return Potential(kind, params, L_V, dx, x, v, name=name)
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed potential description: {exc}") from exc


def save_potential(potential: Potential, path) -> None:
    with open(path, "w") as fh:
        json.dump(potential_document(potential), fh, indent=1)


def load_potential(path) -> Potential:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read potential file {path}: {exc}") from exc
    return potential_from_document(doc)
