"""Controls, trajectories, costs and total variation.

The double integrator (x1' = x2, x2' = u) is propagated by its exact
polynomial flow per constant-control arc; any other registered dynamics
falls back to a fixed-step classical Runge-Kutta integrator.  Everything
here is a pure function of immutable inputs, so values can be shared
freely across threads and sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EquiboundViolation

DOUBLE_INTEGRATOR = "double-integrator"
#: model ids accepted for the built-in double integrator
_DI_ALIASES = (DOUBLE_INTEGRATOR, "fuller")

#: default fraction of the horizon used as RK4 step for generic dynamics
GENERIC_STEP_FRACTION = 1e-4

#: tolerance below which a state-constraint value counts as a violation
CONSTRAINT_TOL = -1e-9


# ---------------------------------------------------------------------------
# controls
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseConstantControl:
    """A finite switching structure: strictly increasing breakpoints and one
    control value per interval.  Total variation is finite by construction.
    """

    breakpoints: tuple[float, ...]
    values: tuple  # one scalar (or one vector, as a tuple) per interval

    def __post_init__(self):
        bp = tuple(float(t) for t in self.breakpoints)
        vals = tuple(
            tuple(float(c) for c in v) if _is_vector(v) else float(v)
            for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(bp) < 2:
            raise ValueError("control needs at least one arc")
        if len(vals) != len(bp) - 1:
            raise ValueError("need exactly one value per interval")
        if bp[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        for a, b in zip(bp, bp[1:]):
            if not b > a:
                raise ValueError("breakpoints must be strictly increasing")

    @property
    def duration(self) -> float:
        return self.breakpoints[-1]

    @property
    def n_arcs(self) -> int:
        return len(self.values)

    def value_at(self, t: float) -> float:
        """Control value at time t; arcs are half open, the last one closed."""
        bp = self.breakpoints
        if t < bp[0] or t > bp[-1]:
            raise ValueError(f"t={t} outside [0, {bp[-1]}]")
        for i in range(len(self.values)):
            if t < bp[i + 1]:
                return self.values[i]
        return self.values[-1]

    def restrict(self, t_end: float) -> "PiecewiseConstantControl":
        """Restriction to [0, t_end]; a cut exactly at a breakpoint keeps the
        arc ending there and drops the zero-length remainder."""
        if not 0.0 < t_end <= self.duration:
            raise ValueError("t_end must lie in (0, duration]")
        bp = [0.0]
        vals = []
        for i, v in enumerate(self.values):
            right = self.breakpoints[i + 1]
            if right < t_end:
                bp.append(right)
                vals.append(v)
            else:
                bp.append(t_end)
                vals.append(v)
                break
        return PiecewiseConstantControl(tuple(bp), tuple(vals))

    def split(self, t: float) -> tuple["PiecewiseConstantControl", "PiecewiseConstantControl"]:
        """Head on [0, t] and tail re-based to start at 0."""
        head = self.restrict(t)
        bp = [0.0]
        vals = []
        for i, v in enumerate(self.values):
            right = self.breakpoints[i + 1]
            if right <= t:
                continue
            bp.append(right - t)
            vals.append(v)
        if not vals:
            raise ValueError("split point at or beyond the final time")
        return head, PiecewiseConstantControl(tuple(bp), tuple(vals))

    def concat(self, other: "PiecewiseConstantControl") -> "PiecewiseConstantControl":
        """Concatenation u (+) v: v shifted to start where u ends."""
        t0 = self.duration
        bp = self.breakpoints + tuple(t0 + t for t in other.breakpoints[1:])
        return PiecewiseConstantControl(bp, self.values + other.values)


def constant_control(value: float, duration: float) -> PiecewiseConstantControl:
    return PiecewiseConstantControl((0.0, float(duration)), (value,))


def _is_vector(v) -> bool:
    return isinstance(v, (tuple, list, np.ndarray))


def _jump(a, b) -> float:
    if _is_vector(a) or _is_vector(b):
        return math.sqrt(sum((y - x) ** 2 for x, y in zip(a, b)))
    return abs(b - a)


def tv(control: PiecewiseConstantControl) -> float:
    """Total variation: sum of jump magnitudes between consecutive arc
    values, Euclidean norm for vector-valued controls."""
    vals = control.values
    return sum(_jump(a, b) for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Arc:
    """One constant-control arc of the double integrator, propagated exactly:
    x2(s) = x2 + u s,  x1(s) = x1 + x2 s + u s^2 / 2.
    """

    t0: float
    duration: float
    x0: tuple[float, float]
    u: float

    def state_at(self, s: float) -> tuple[float, float]:
        a, b = self.x0
        return (a + b * s + 0.5 * self.u * s * s, b + self.u * s)

    @property
    def end_state(self) -> tuple[float, float]:
        return self.state_at(self.duration)

    def sup_abs(self) -> float:
        """Exact sup over the arc of max(|x1|, |x2|)."""
        a, b = self.x0
        d = self.duration
        x1e, x2e = self.end_state
        m = max(abs(a), abs(x1e), abs(b), abs(x2e))
        if self.u != 0.0:
            s_vertex = -b / self.u
            if 0.0 < s_vertex < d:
                x1v, _ = self.state_at(s_vertex)
                m = max(m, abs(x1v))
        return m

    def cost_x1sq(self) -> float:
        """Exact integral of x1(s)^2 over the arc (quintic in the duration)."""
        a, b = self.x0
        c = 0.5 * self.u
        d = self.duration
        return d * (a * a
                    + d * (a * b
                           + d * ((b * b + 2.0 * a * c) / 3.0
                                  + d * (b * c / 2.0
                                         + d * (c * c / 5.0)))))


@dataclass(frozen=True)
class SampledArc:
    """One constant-control arc of a generic dynamics, stored as the RK4 grid."""

    t0: float
    duration: float
    u: float
    times: np.ndarray
    states: np.ndarray

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    @property
    def end_state(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, s: float) -> np.ndarray:
        t = self.t0 + s
        return np.array([np.interp(t, self.times, col) for col in self.states.T])

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.states)))


@dataclass(frozen=True)
class Trajectory:
    """State history of x' = f(x, u) under a piecewise-constant control."""

    arcs: tuple
    final_state: tuple

    @property
    def duration(self) -> float:
        last = self.arcs[-1]
        return last.t0 + last.duration

    def state_at(self, t: float):
        if t < 0.0 or t > self.duration * (1.0 + 1e-12) + 1e-300:
            raise ValueError(f"t={t} outside [0, {self.duration}]")
        for arc in self.arcs:
            if t <= arc.t0 + arc.duration:
                return arc.state_at(t - arc.t0)
        return self.arcs[-1].state_at(self.arcs[-1].duration)

    def sup_abs(self) -> float:
        return max(arc.sup_abs() for arc in self.arcs)


# ---------------------------------------------------------------------------
# problem specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Dynamics, cost model, initial state and admissibility data.

    dynamics: "double-integrator" (alias "fuller") or a callable f(x, u) with
        f(0, 0) = 0; the equilibrium property is checked at construction.
    lagrangian: "x1sq" for the built-in L = x1^2 (closed-form on double
        integrator arcs) or a callable L(t, x, u) integrated by quadrature.
    equibound: admissible candidates must satisfy t_u + sup|x| <= equibound.
    """

    x0: tuple[float, ...]
    dynamics: str | Callable = DOUBLE_INTEGRATOR
    lagrangian: str | Callable = "x1sq"
    control_bounds: tuple[float, float] = (-1.0, 1.0)
    state_constraints: tuple[Callable, ...] = ()
    equibound: float = 1e3

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if self.equibound <= 0.0:
            raise ValueError("equibound must be positive")
        lo, hi = self.control_bounds
        if not lo < hi:
            raise ValueError("control bounds must satisfy lo < hi")
        if callable(self.dynamics):
            origin = np.zeros(len(self.x0))
            res = np.asarray(self.dynamics(origin, 0.0), dtype=float)
            if np.max(np.abs(res)) > 1e-12:
                raise ValueError("dynamics must vanish at (x, u) = (0, 0)")
        elif self.dynamics not in _DI_ALIASES:
            raise ValueError(f"unknown dynamics id {self.dynamics!r}")

    @property
    def is_double_integrator(self) -> bool:
        return not callable(self.dynamics) and self.dynamics in _DI_ALIASES

    def check_value(self, v) -> bool:
        lo, hi = self.control_bounds
        if _is_vector(v):
            return all(lo - 1e-12 <= c <= hi + 1e-12 for c in v)
        return lo - 1e-12 <= v <= hi + 1e-12


def _rk4_arc(f: Callable, t0: float, x0: np.ndarray, u: float, duration: float,
             step: float) -> SampledArc:
    n_steps = max(2, int(math.ceil(duration / step)))
    if n_steps % 2:
        n_steps += 1  # even count so composite Simpson applies cleanly
    h = duration / n_steps
    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, len(x0)))
    times[0] = t0
    states[0] = x0
    x = np.asarray(x0, dtype=float)
    for k in range(n_steps):
        k1 = np.asarray(f(x, u), dtype=float)
        k2 = np.asarray(f(x + 0.5 * h * k1, u), dtype=float)
        k3 = np.asarray(f(x + 0.5 * h * k2, u), dtype=float)
        k4 = np.asarray(f(x + h * k3, u), dtype=float)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        times[k + 1] = t0 + (k + 1) * h
        states[k + 1] = x
    return SampledArc(t0, duration, u, times, states)


def simulate(spec: ProblemSpec, control: PiecewiseConstantControl) -> Trajectory:
    """Propagate spec.x0 under the control; exact arcs for the double
    integrator, fixed-step RK4 (step <= 1e-4 * horizon) otherwise.

    Raises EquiboundViolation when t_u + sup|x| exceeds spec.equibound.
    """
    for v in control.values:
        if not spec.check_value(v):
            raise ValueError(f"control value {v} outside admissible set")
    arcs = []
    if spec.is_double_integrator:
        if len(spec.x0) != 2:
            raise ValueError("double integrator needs a planar initial state")
        if any(_is_vector(v) for v in control.values):
            raise ValueError("double integrator takes scalar control values")
        x = spec.x0
        for i, u in enumerate(control.values):
            t0 = control.breakpoints[i]
            d = control.breakpoints[i + 1] - t0
            arc = Arc(t0, d, x, u)
            arcs.append(arc)
            x = arc.end_state
        traj = Trajectory(tuple(arcs), x)
    else:
        step = GENERIC_STEP_FRACTION * control.duration
        x = np.asarray(spec.x0, dtype=float)
        for i, u in enumerate(control.values):
            t0 = control.breakpoints[i]
            d = control.breakpoints[i + 1] - t0
            arc = _rk4_arc(spec.dynamics, t0, x, u, d, step)
            arcs.append(arc)
            x = arc.end_state
        traj = Trajectory(tuple(arcs), tuple(float(v) for v in x))
    excess = control.duration + traj.sup_abs()
    if excess > spec.equibound:
        raise EquiboundViolation(
            f"t_u + sup|x| = {excess:.6g} exceeds equibound {spec.equibound:.6g}")
    return traj


def _simpson(times: np.ndarray, values: np.ndarray) -> float:
    """Composite Simpson over a uniform grid with an even interval count."""
    n = len(times) - 1
    h = (times[-1] - times[0]) / n
    if n % 2:  # uniform grids from _rk4_arc are always even; guard anyway
        head = _simpson(times[:-1], values[:-1]) if n > 1 else 0.0
        return head + 0.5 * h * (values[-2] + values[-1])
    acc = values[0] + values[-1] + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-1:2].sum()
    return float(acc * h / 3.0)


def lagrangian_cost(traj: Trajectory, control: PiecewiseConstantControl,
                    spec: ProblemSpec) -> float:
    """Running cost of the trajectory.

    The built-in L = x1^2 on double-integrator arcs uses the exact quintic
    antiderivative; anything else is integrated by composite Simpson on the
    integrator grid (or on a dense closed-form sample grid for exact arcs).
    """
    if len(traj.arcs) != control.n_arcs:
        raise ValueError("trajectory was not produced from this control")
    builtin = not callable(spec.lagrangian) and spec.lagrangian == "x1sq"
    total = 0.0
    for arc, u in zip(traj.arcs, control.values):
        if builtin and isinstance(arc, Arc):
            total += arc.cost_x1sq()
            continue
        if isinstance(arc, Arc):
            n = 200
            times = np.linspace(arc.t0, arc.t0 + arc.duration, n + 1)
            states = np.array([arc.state_at(t - arc.t0) for t in times])
        else:
            times, states = arc.times, arc.states
        if builtin:
            vals = states[:, 0] ** 2
        else:
            vals = np.array([spec.lagrangian(t, x, u) for t, x in zip(times, states)])
        total += _simpson(times, vals)
    return total


def regularized_cost(traj: Trajectory, control: PiecewiseConstantControl,
                     spec: ProblemSpec, epsilon: float) -> float:
    """Running cost plus epsilon times the control's total variation."""
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    return lagrangian_cost(traj, control, spec) + epsilon * tv(control)


def check_state_constraints(traj: Trajectory, spec: ProblemSpec,
                            samples_per_arc: int = 100) -> bool:
    """True iff every registered h_i stays >= -1e-9 at junctions and on a
    dense per-arc sample grid."""
    if not spec.state_constraints:
        return True
    for arc in traj.arcs:
        for k in range(samples_per_arc + 1):
            s = arc.duration * k / samples_per_arc
            x = arc.state_at(s)
            for h in spec.state_constraints:
                if h(x) < CONSTRAINT_TOL:
                    return False
    return True


# ---------------------------------------------------------------------------
# double-integrator helpers shared by the synthesis and solver modules
# ---------------------------------------------------------------------------

def di_flow(x: tuple[float, float], u: float, d: float) -> tuple[float, float]:
    """End state of one exact double-integrator arc."""
    a, b = x
    return (a + b * d + 0.5 * u * d * d, b + u * d)


def di_cost_x1sq(x: tuple[float, float], u: float, d: float) -> float:
    """Exact arc integral of x1^2 (see Arc.cost_x1sq)."""
    a, b = x
    c = 0.5 * u
    return d * (a * a + d * (a * b + d * ((b * b + 2.0 * a * c) / 3.0
                                          + d * (b * c / 2.0 + d * (c * c / 5.0)))))
