"""Switching-time optimization of the TV-regularized double-integrator problem.

Candidates are alternating bang-bang controls: an initial sign and one
duration per arc.  The last two durations are always eliminated exactly
through the terminal constraint, so only the leading durations are free.
Each extra switch adds 2 to the total variation, which prices it at
2 * epsilon in the regularized objective; the solver sweeps the switch
count and keeps the cheapest feasible candidate.

For fixed arc count the duration optimum does not depend on epsilon (the
penalty is an additive constant), so a sweep over epsilons can reuse one
optimization per arc count; `regularization_path` exploits that to make the
monotonicity and concavity of the value function exact to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controls import PiecewiseConstantControl, ProblemSpec
from .errors import AllStartsInfeasible, Infeasible
from .fuller import FullerSynthesis, default_synthesis, synthesize_chattering
from .truncation import min_time_to_origin, steer_durations

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0

#: duration search interval per free arc, as a multiple of the minimum time
DURATION_CAP_FACTOR = 3.0


def solve_terminal_arcs(state, first_sign: float):
    """Durations of the final two arcs steering `state` to the origin exactly,
    applying first_sign then -first_sign.

    Raises Infeasible when the quadratic elimination has no nonnegative
    solution for that sign (the caller then tries the opposite sign).
    """
    if state[0] == 0.0 and state[1] == 0.0:
        raise ValueError("state must differ from the origin")
    if first_sign not in (-1.0, 1.0):
        raise ValueError("first_sign must be -1 or +1")
    pair = steer_durations(state, first_sign)
    if pair is None:
        raise Infeasible(f"no terminal pair from {state} with sign {first_sign:+.0f}")
    return pair


def _arc_cost(x1: float, x2: float, u: float, d: float) -> float:
    c = 0.5 * u
    return d * (x1 * x1 + d * (x1 * x2 + d * ((x2 * x2 + 2.0 * x1 * c) / 3.0
                                              + d * (x2 * c / 2.0 + d * (c * c / 5.0)))))


def _arc_sup(x1: float, x2: float, u: float, d: float) -> float:
    e1 = x1 + x2 * d + 0.5 * u * d * d
    e2 = x2 + u * d
    m = max(abs(x1), abs(e1), abs(x2), abs(e2))
    if u != 0.0:
        s = -x2 / u
        if 0.0 < s < d:
            m = max(m, abs(x1 + x2 * s + 0.5 * u * s * s))
    return m


def _tv_of(durations, sign: float) -> float:
    """Total variation of the materialized control: zero-length arcs collapse
    before jumps are summed."""
    prev = None
    acc = 0.0
    u = sign
    for d in durations:
        if d > 0.0:
            if prev is not None:
                acc += abs(u - prev)
            prev = u
        u = -u
    return acc


@dataclass(frozen=True)
class BangBangCandidate:
    """Alternating bang-bang candidate: initial sign plus one duration per
    arc (terminal two solved exactly), with its evaluated costs."""

    initial_sign: float
    durations: tuple[float, ...]
    lagrangian: float
    tv: float
    terminal_residual: float

    @property
    def n_switches(self) -> int:
        return len(self.durations) - 1

    @property
    def total_time(self) -> float:
        return sum(self.durations)

    def value(self, epsilon: float) -> float:
        return self.lagrangian + epsilon * self.tv

    def control(self) -> PiecewiseConstantControl:
        bp = [0.0]
        vals = []
        u = self.initial_sign
        for d in self.durations:
            if d > 0.0:
                bp.append(bp[-1] + d)
                vals.append(u)
            u = -u
        if not vals:
            raise ValueError("candidate has no positive-duration arc")
        return PiecewiseConstantControl(tuple(bp), tuple(vals))


def _evaluate(x0, sign: float, free, equibound: float):
    """Cost data of the candidate with the given free durations, or None when
    the terminal solve fails, a duration is negative, or the equibound is
    violated.  Returns (lagrangian, tv, durations, residual, sup, total_t)."""
    x1, x2 = x0
    cost = 0.0
    sup = 0.0
    total = 0.0
    u = sign
    for d in free:
        if d < 0.0:
            return None
        cost += _arc_cost(x1, x2, u, d)
        sup = max(sup, _arc_sup(x1, x2, u, d))
        x1, x2 = x1 + x2 * d + 0.5 * u * d * d, x2 + u * d
        total += d
        u = -u
    if x1 == 0.0 and x2 == 0.0:
        a = b = 0.0
    else:
        pair = steer_durations((x1, x2), u)
        if pair is None:
            return None
        a, b = pair
    cost += _arc_cost(x1, x2, u, a)
    sup = max(sup, _arc_sup(x1, x2, u, a))
    x1, x2 = x1 + x2 * a + 0.5 * u * a * a, x2 + u * a
    cost += _arc_cost(x1, x2, -u, b)
    sup = max(sup, _arc_sup(x1, x2, -u, b))
    x1, x2 = x1 + x2 * b - 0.5 * u * b * b, x2 - u * b
    total += a + b
    if total + sup > equibound:
        return None
    durations = tuple(free) + (a, b)
    return (cost, _tv_of(durations, sign), durations,
            math.hypot(x1, x2), sup, total)


def _golden(fun, lo: float, hi: float, xtol: float):
    h = hi - lo
    a = lo + _INVPHI2 * h
    b = lo + _INVPHI * h
    fa, fb = fun(a), fun(b)
    while h > xtol:
        if fa <= fb:
            hi = b
            b, fb = a, fa
            h = hi - lo
            a = lo + _INVPHI2 * h
            fa = fun(a)
        else:
            lo = a
            a, fa = b, fb
            h = hi - lo
            b = lo + _INVPHI * h
            fb = fun(b)
    return (a, fa) if fa <= fb else (b, fb)


def _build_starts(n_free: int, x0, synth: FullerSynthesis, seed: int, cap: float,
                  extra_starts):
    """Eight multistarts: the chattering prefix, a uniform split, two
    geometric ladders at the synthesis contraction ratio, a sign-flip seed
    (vanishing first arc, then the prefix), and seeded jitters."""
    t_min = min_time_to_origin(x0)
    rho = synth.rho
    control, _ = synthesize_chattering(x0, synth)
    fuller = [control.breakpoints[i + 1] - control.breakpoints[i]
              for i in range(control.n_arcs)]

    def geometric(first):
        return [first * rho ** k for k in range(n_free)]

    def pad(base):
        out = list(base[:n_free])
        while len(out) < n_free:
            out.append((out[-1] if out else t_min / (n_free + 2)) * rho)
        return out

    ladder_scale = t_min * (1.0 - rho) / (1.0 - rho ** (n_free + 2))
    starts = [
        pad(fuller),
        [t_min / (n_free + 2)] * n_free,
        geometric(ladder_scale),
        pad([1e-9 * t_min] + fuller),
    ]
    rng = np.random.default_rng(seed)
    for base in list(starts):
        jitter = np.exp(0.35 * rng.standard_normal(n_free))
        starts.append([d * j for d, j in zip(base, jitter)])
    for warm in extra_starts:
        starts.append(pad(list(warm)))
    return [[min(max(d, 0.0), cap) for d in s] for s in starts]


def optimize_durations(n_switches: int, sign: float, epsilon: float,
                       spec: ProblemSpec, *, synth: FullerSynthesis | None = None,
                       seed: int = 0, extra_starts=(), trace: list | None = None,
                       max_passes: int = 60) -> BangBangCandidate:
    """Best alternating bang-bang candidate with the given switch count and
    initial sign, by multistart coordinate descent with golden-section line
    searches; the terminal two durations are eliminated exactly at every
    evaluation.

    Passing a list as `trace` records, per start, the objective after every
    accepted improvement (one weakly decreasing sublist per feasible start).
    Raises AllStartsInfeasible when no start yields a feasible candidate.
    """
    if n_switches < 1:
        raise ValueError("need at least one switch")
    if not spec.is_double_integrator or callable(spec.lagrangian) \
            or spec.lagrangian != "x1sq":
        raise ValueError("duration optimization covers the built-in model only")
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    sign = float(sign)
    if sign not in (-1.0, 1.0):
        raise ValueError("sign must be -1 or +1")
    synth = synth or default_synthesis()
    x0 = spec.x0
    cap = DURATION_CAP_FACTOR * min_time_to_origin(x0)
    n_free = n_switches - 1

    def objective(free):
        res = _evaluate(x0, sign, free, spec.equibound)
        if res is None:
            return math.inf, None
        return res[0] + epsilon * res[1], res

    if n_free == 0:
        val, res = objective(())
        if res is None:
            raise AllStartsInfeasible(f"sign {sign:+.0f} cannot reach the origin")
        if trace is not None:
            trace.append([val])
        return BangBangCandidate(sign, res[2], res[0], res[1], res[3])

    best_val = math.inf
    best_res = None
    scan = [cap * k / 16.0 for k in range(17)]
    xtol = 1e-11 * (1.0 + cap)
    for theta0 in _build_starts(n_free, x0, synth, seed, cap, extra_starts):
        theta = list(theta0)
        val, res = objective(theta)
        run_trace = []
        if val < math.inf:
            run_trace.append(val)
        for _ in range(max_passes):
            prev = val
            for j in range(n_free):
                def along(t, j=j):
                    probe = theta.copy()
                    probe[j] = t
                    return objective(probe)[0]

                cand_t, cand_f = theta[j], val
                for t in scan:
                    f = along(t)
                    if f < cand_f:
                        cand_t, cand_f = t, f
                lo = max(0.0, cand_t - cap / 16.0)
                hi = min(cap, cand_t + cap / 16.0)
                g_t, g_f = _golden(along, lo, hi, xtol)
                if g_f < cand_f:
                    cand_t, cand_f = g_t, g_f
                if cand_f < val:
                    theta[j] = cand_t
                    val = cand_f
                    run_trace.append(val)
            if not val < prev - 1e-14 * (1.0 + abs(prev)):
                break
        if trace is not None and run_trace:
            trace.append(run_trace)
        if val < best_val:
            best_val = val
            best_res = objective(theta)[1]
    if best_res is None:
        raise AllStartsInfeasible(
            f"all starts infeasible for {n_switches} switches, sign {sign:+.0f}")
    return BangBangCandidate(sign, best_res[2], best_res[0], best_res[1], best_res[3])


def solve_regularized(epsilon: float, spec: ProblemSpec, *, n_max: int = 40,
                      seed: int = 0, synth: FullerSynthesis | None = None,
                      cache: dict | None = None) -> BangBangCandidate:
    """Minimize running cost + epsilon * TV over switch counts and both
    initial signs.

    The sweep stops early once, for two consecutive counts, adding two more
    switches buys less running cost than the 4 * epsilon they charge.  Ties
    between equal-value candidates go to the lower switch count.

    For a fixed switch count the penalty term is an additive constant, so
    each (count, sign) subproblem minimizes the running cost alone and the
    penalty prices candidates only at selection time; collapsed-switch
    candidates are already represented by lower counts.  A dict passed as
    `cache` memoizes these subproblems across calls, which a sweep over
    epsilons uses for warm starting.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    synth = synth or default_synthesis()
    if cache is None:
        cache = {}
    best = None
    best_jl = {}
    streak = 0
    infeasible_streak = 0
    warm: dict[float, tuple] = {}
    for n in range(1, n_max + 1):
        jl_n = math.inf
        for sign in (-1.0, 1.0):
            key = (n, sign)
            if key not in cache:
                extra = (warm[sign],) if sign in warm else ()
                try:
                    cache[key] = optimize_durations(
                        n, sign, 0.0, spec, synth=synth, seed=seed,
                        extra_starts=extra)
                except AllStartsInfeasible:
                    cache[key] = None
            cand = cache[key]
            if cand is None:
                continue
            warm[sign] = cand.durations
            jl_n = min(jl_n, cand.lagrangian)
            value = cand.value(epsilon)
            if best is None or value < best[0] - 1e-12 \
                    or (abs(value - best[0]) <= 1e-12 and n < best[1]):
                best = (value, n, cand)
        if math.isfinite(jl_n):
            best_jl[n] = jl_n
            infeasible_streak = 0
        elif best is None:
            # nothing feasible yet and this count failed too; a few such
            # counts in a row means the problem itself is inadmissible
            infeasible_streak += 1
            if infeasible_streak >= 3:
                raise AllStartsInfeasible(
                    "no feasible candidate for any switch count")
        if n >= 3 and n in best_jl and (n - 2) in best_jl:
            if best_jl[n - 2] - best_jl[n] < 4.0 * epsilon:
                streak += 1
            else:
                streak = 0
            if streak >= 2:
                break
    if best is None:
        raise AllStartsInfeasible("no feasible candidate for any switch count")
    return best[2]


def _vector_eval(x0, sign: float, free_grids, equibound: float):
    """Vectorized running cost and collapsed total variation of candidates
    over a grid of free durations; infeasible entries come back as +inf."""
    x1 = np.full(free_grids[0].shape, x0[0], dtype=float)
    x2 = np.full(free_grids[0].shape, x0[1], dtype=float)
    cost = np.zeros_like(x1)
    sup = np.maximum(np.abs(x1), np.abs(x2))
    total = np.zeros_like(x1)
    u = sign

    def arc(x1, x2, u, d):
        c = 0.5 * u
        a_cost = d * (x1 * x1 + d * (x1 * x2 + d * ((x2 * x2 + 2.0 * x1 * c) / 3.0
                                                    + d * (x2 * c / 2.0 + d * (c * c / 5.0)))))
        e1 = x1 + x2 * d + 0.5 * u * d * d
        e2 = x2 + u * d
        s = np.maximum(np.maximum(np.abs(e1), np.abs(e2)), np.abs(x1))
        if u != 0.0:
            tv_ = -x2 / u
            inside = (tv_ > 0.0) & (tv_ < d)
            vert = x1 + x2 * tv_ + 0.5 * u * tv_ * tv_
            s = np.where(inside, np.maximum(s, np.abs(vert)), s)
        return a_cost, e1, e2, s

    durations = []
    for d in free_grids:
        a_cost, x1, x2, s = arc(x1, x2, u, d)
        cost += a_cost
        sup = np.maximum(sup, s)
        total += d
        durations.append(d)
        u = -u
    disc = 0.5 * x2 * x2 - u * x1
    feasible = disc >= 0.0
    root = np.sqrt(np.where(feasible, disc, 0.0))
    a = -u * x2 + root
    feasible &= a >= 0.0
    a = np.where(feasible, a, 0.0)
    b = np.where(feasible, root, 0.0)
    a_cost, x1, x2, s = arc(x1, x2, u, a)
    cost += a_cost
    sup = np.maximum(sup, s)
    a_cost, x1, x2, s = arc(x1, x2, -u, b)
    cost += a_cost
    sup = np.maximum(sup, s)
    total += a + b
    feasible &= total + sup <= equibound
    durations.extend([a, b])
    # collapsed total variation: zero-length arcs drop out, and two retained
    # arcs an even index apart carry the same sign (base signs alternate)
    prev_idx = np.full(cost.shape, -1, dtype=int)
    tv_grid = np.zeros_like(cost)
    for i, d in enumerate(durations):
        kept = np.asarray(d) > 0.0
        jump = kept & (prev_idx >= 0) & (((i - prev_idx) % 2) == 1)
        tv_grid = np.where(jump, tv_grid + 2.0, tv_grid)
        prev_idx = np.where(kept, i, prev_idx)
    return np.where(feasible, cost, np.inf), tv_grid


def brute_force_oracle(n_switches: int, sign: float, epsilon: float,
                       spec: ProblemSpec, resolution: float = 1e-3) -> BangBangCandidate:
    """Exhaustive grid search over the free durations (switch count <= 3),
    terminal arcs eliminated exactly, then one local refinement pass around
    the best cell.  Serves as the independent optimality oracle.
    """
    if n_switches > 3:
        raise ValueError("the oracle covers at most 3 switches")
    if n_switches < 1:
        raise ValueError("need at least one switch")
    sign = float(sign)
    x0 = spec.x0
    cap = DURATION_CAP_FACTOR * min_time_to_origin(x0)
    cells = max(2, int(round(1.0 / resolution)))
    axis = np.linspace(0.0, cap, cells + 1)
    n_free = n_switches - 1

    def objective(free):
        res = _evaluate(x0, sign, free, spec.equibound)
        if res is None:
            return math.inf, None
        return res[0] + epsilon * res[1], res

    if n_free == 0:
        theta = []
    else:
        grids = np.meshgrid(*([axis] * n_free), indexing="ij")
        cost, tv_grid = _vector_eval(x0, sign, grids, spec.equibound)
        value = cost + epsilon * tv_grid
        flat = int(np.argmin(value))
        if not np.isfinite(value.flat[flat]):
            raise AllStartsInfeasible(
                f"no feasible grid cell for sign {sign:+.0f}")
        idx = np.unravel_index(flat, value.shape)
        theta = [float(axis[i]) for i in idx]
    # local refinement around the best cell: coordinate golden sections,
    # iterated to convergence inside the one-cell trust region
    cell = cap / cells
    xtol = 1e-12 * (1.0 + cap)
    val = objective(theta)[0]
    for _ in range(8):
        prev = val
        for j in range(n_free):
            def along(t, j=j):
                probe = list(theta)
                probe[j] = t
                return objective(probe)[0]

            lo = max(0.0, theta[j] - cell)
            hi = min(cap, theta[j] + cell)
            g_t, g_f = _golden(along, lo, hi, xtol)
            if g_f < val:
                theta[j] = g_t
                val = g_f
        if not val < prev - 1e-15 * (1.0 + abs(prev)):
            break
    val, res = objective(theta)
    if res is None:
        raise AllStartsInfeasible(f"sign {sign:+.0f} infeasible")
    return BangBangCandidate(sign, res[2], res[0], res[1], res[3])


@dataclass(frozen=True)
class PathPoint:
    epsilon: float
    n_switches: int
    lagrangian: float
    tv: float
    value: float
    candidate: BangBangCandidate


@dataclass(frozen=True)
class SolutionPath:
    """Per-epsilon solutions of the regularized problem, largest epsilon
    first.  The value function is a pointwise minimum of affine functions of
    epsilon, hence concave and nondecreasing."""

    records: tuple[PathPoint, ...]

    def laws(self, tol: float = 1e-9) -> dict:
        """Monotonicity and concavity checks along the path (epsilon
        ascending): value nondecreasing and concave via divided differences,
        total variation nonincreasing, running cost nondecreasing."""
        recs = sorted(self.records, key=lambda r: r.epsilon)
        eps = [r.epsilon for r in recs]
        val = [r.value for r in recs]
        tvs = [r.tv for r in recs]
        jls = [r.lagrangian for r in recs]
        slopes = [(v2 - v1) / (e2 - e1)
                  for (e1, v1), (e2, v2) in zip(zip(eps, val), zip(eps[1:], val[1:]))]
        return {
            "value_nondecreasing": all(b >= a - tol for a, b in zip(val, val[1:])),
            "value_concave": all(s2 <= s1 + tol for s1, s2 in zip(slopes, slopes[1:])),
            "tv_nonincreasing": all(b <= a + tol for a, b in zip(tvs, tvs[1:])),
            "lagrangian_nondecreasing": all(b >= a - tol for a, b in zip(jls, jls[1:])),
        }


def regularization_path(epsilons, spec: ProblemSpec, *, n_max: int = 40,
                        seed: int = 0,
                        synth: FullerSynthesis | None = None) -> SolutionPath:
    """Solve the regularized problem over a descending grid of penalty
    weights, one solve per weight with memoized per-switch-count optima.

    After the sweep each point is re-selected as the argmin over every
    optimized (count, sign) pair, so all points minimize over the identical
    candidate table and the exchange inequalities hold to roundoff.
    """
    eps = [float(e) for e in epsilons]
    if not eps:
        raise ValueError("epsilon grid must be nonempty")
    if any(e <= 0.0 for e in eps):
        raise ValueError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be sorted descending")
    synth = synth or default_synthesis()
    cache: dict = {}
    for e in eps:
        solve_regularized(e, spec, n_max=n_max, seed=seed, synth=synth, cache=cache)
    table = [(n, cand) for (n, _sign), cand in sorted(
        cache.items(), key=lambda kv: (kv[0][0], kv[0][1])) if cand is not None]
    points = []
    for e in eps:
        best = None
        for n, cand in table:
            v = cand.value(e)
            if best is None or v < best[0] - 1e-12 \
                    or (abs(v - best[0]) <= 1e-12 and n < best[1]):
                best = (v, n, cand)
        value, n, cand = best
        points.append(PathPoint(epsilon=e, n_switches=n, lagrangian=cand.lagrangian,
                                tv=cand.tv, value=value, candidate=cand))
    return SolutionPath(tuple(points))
