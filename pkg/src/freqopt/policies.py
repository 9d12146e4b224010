"""Deadline-constrained frequency-scaling policies that minimize energy.

Three policies are provided: fix the computing frequency at its maximum and
scale memory (computing-prior), the mirror image (memory-prior), and joint
scaling of both axes.  Energy is not assumed convex over the frequency box,
so the joint solver uses a feasible multi-start coarse grid plus projected
gradient descent, with an exhaustive grid oracle available for verification.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass

import numpy as np

from .models import (
    FrequencyDomain,
    FrequencyPair,
    LatencyModel,
    PowerModel,
    _check_positive,
    invert_latency_for_com,
    invert_latency_for_mem,
)

DEADLINE_RTOL = 1e-9       # feasible means latency <= deadline * (1 + DEADLINE_RTOL)
ENUM_LIMIT = 1_000_000     # max level cross-product enumerated exactly
_GRID = 32                 # multi-start coarse grid per axis
_SCAN = 96                 # samples along the deadline-active curve
_STEP_TOL = 1e-6           # GHz; projected-descent convergence threshold


class Policy(enum.Enum):
    COMPUTING_PRIOR = "computing-prior"
    MEMORY_PRIOR = "memory-prior"
    JOINT = "joint"


@dataclass(frozen=True)
class PolicyResult:
    """Chosen operating point with its predicted latency, power, and energy.

    When infeasible, f is the fastest admissible point and
    min_achievable_latency reports the latency there.
    """

    policy: Policy
    f: FrequencyPair
    latency: float
    power: float
    energy: float
    feasible: bool
    min_achievable_latency: float | None = None


def meets_deadline(latency: float, deadline: float) -> bool:
    return latency <= deadline * (1.0 + DEADLINE_RTOL)


def _make_result(policy, lat, power, deadline, f_mem, f_com, min_lat):
    t = lat.latency(f_mem, f_com)
    p = power.power(f_mem, f_com)
    feasible = meets_deadline(t, deadline)
    return PolicyResult(policy, FrequencyPair(f_mem, f_com), t, p, t * p, feasible,
                        None if feasible else min_lat)


def _snap_up(levels, required: float) -> float:
    """Smallest level >= required; the top level when none is."""
    if math.isinf(required):
        return levels[-1]
    i = bisect.bisect_left(levels, required * (1.0 - 1e-12))
    return levels[i] if i < len(levels) else levels[-1]


def _clamp(x, lo, hi):
    return min(max(x, lo), hi)


def solve_computing_prior(lat: LatencyModel, power: PowerModel, dom: FrequencyDomain,
                          deadline: float) -> PolicyResult:
    """Fix computing frequency at its maximum, scale memory to the minimum feasible."""
    _check_positive("deadline", deadline)
    f_com = dom.com_max
    required = invert_latency_for_mem(lat, f_com, deadline)
    if dom.mem_levels:
        f_mem = _snap_up(dom.mem_levels, required)
    else:
        f_mem = _clamp(required, *dom.mem_range)
    min_lat = lat.latency(dom.mem_max, dom.com_max)
    return _make_result(Policy.COMPUTING_PRIOR, lat, power, deadline, f_mem, f_com, min_lat)


def solve_memory_prior(lat: LatencyModel, power: PowerModel, dom: FrequencyDomain,
                       deadline: float) -> PolicyResult:
    """Fix memory frequency at its maximum, scale computing to the minimum feasible."""
    _check_positive("deadline", deadline)
    f_mem = dom.mem_max
    required = invert_latency_for_com(lat, f_mem, deadline)
    if dom.com_levels:
        f_com = _snap_up(dom.com_levels, required)
    else:
        f_com = _clamp(required, *dom.com_range)
    min_lat = lat.latency(dom.mem_max, dom.com_max)
    return _make_result(Policy.MEMORY_PRIOR, lat, power, deadline, f_mem, f_com, min_lat)


def _energy(lat, power, fm, fc):
    return lat.latency(fm, fc) * power.power(fm, fc)


def _energy_grad(lat, power, fm, fc):
    t = lat.latency(fm, fc)
    p = power.power(fm, fc)
    dt_m = -lat.mem_coeff * lat.mem_exp * fm ** (-lat.mem_exp - 1.0)
    dt_c = -lat.com_coeff * lat.com_exp * fc ** (-lat.com_exp - 1.0)
    return (3.0 * power.mem_coeff * fm * fm * t + p * dt_m,
            3.0 * power.com_coeff * fc * fc * t + p * dt_c)


def _project_feasible(lat, mem_range, com_range, deadline, fm, fc):
    """Clamp into the box, then restore the deadline by raising one axis.

    Returns the nearest of the two single-axis closed-form fixes, or None when
    the point cannot be made feasible.
    """
    fm = _clamp(fm, *mem_range)
    fc = _clamp(fc, *com_range)
    if meets_deadline(lat.latency(fm, fc), deadline):
        return (fm, fc)
    cands = []
    rm = invert_latency_for_mem(lat, fc, deadline)
    if rm <= mem_range[1]:
        nm = _clamp(rm, *mem_range)
        if meets_deadline(lat.latency(nm, fc), deadline):
            cands.append((nm, fc))
    rc = invert_latency_for_com(lat, fm, deadline)
    if rc <= com_range[1]:
        nc = _clamp(rc, *com_range)
        if meets_deadline(lat.latency(fm, nc), deadline):
            cands.append((fm, nc))
    if not cands:
        return None
    return min(cands, key=lambda q: (q[0] - fm) ** 2 + (q[1] - fc) ** 2)


def _descend(lat, power, mem_range, com_range, deadline, f0):
    """Projected gradient descent with step halving from a feasible start."""
    fm, fc = f0
    e = _energy(lat, power, fm, fc)
    span = max(mem_range[1] - mem_range[0], com_range[1] - com_range[0])
    eta = 0.25 * span
    iters = 0
    while eta >= _STEP_TOL and iters < 500:
        iters += 1
        gm, gc = _energy_grad(lat, power, fm, fc)
        norm = math.hypot(gm, gc)
        if norm == 0.0:
            break
        cand = _project_feasible(lat, mem_range, com_range, deadline,
                                 fm - eta * gm / norm, fc - eta * gc / norm)
        if cand is not None:
            ce = _energy(lat, power, *cand)
            if ce < e:
                fm, fc = cand
                e = ce
                eta = min(eta * 1.3, 0.25 * span)
                continue
        eta *= 0.5
    return fm, fc, e


def _solve_joint_continuous(lat, power, dom, deadline, seeds):
    """Multi-start search over the continuous box; assumes the corner is feasible."""
    mem_range, com_range = dom.mem_range, dom.com_range
    fm_axis = np.linspace(*mem_range, _GRID)
    fc_axis = np.linspace(*com_range, _GRID)
    T = lat.latency(fm_axis[:, None], fc_axis[None, :])
    E = power.power(fm_axis[:, None], fc_axis[None, :]) * T
    feas = T <= deadline * (1.0 + DEADLINE_RTOL)
    masked = np.where(feas, E, np.inf)
    starts = []
    for idx in np.argsort(masked, axis=None)[:6]:
        i, j = divmod(int(idx), _GRID)
        if feas[i, j]:
            starts.append((float(fm_axis[i]), float(fc_axis[j])))

    # scan the latency-equals-deadline curve, where constrained optima live
    curve = []
    for fc in np.linspace(*com_range, _SCAN):
        rm = invert_latency_for_mem(lat, float(fc), deadline)
        if rm <= mem_range[1]:
            fm = _clamp(rm, *mem_range)
            if meets_deadline(lat.latency(fm, float(fc)), deadline):
                curve.append((fm, float(fc)))
    curve.sort(key=lambda q: (_energy(lat, power, *q), q[1], q[0]))
    starts.extend(curve[:4])

    for s in seeds:
        proj = _project_feasible(lat, mem_range, com_range, deadline, s[0], s[1])
        if proj is not None:
            starts.append(proj)

    best = None
    for f0 in dict.fromkeys(starts):
        fm, fc, e = _descend(lat, power, mem_range, com_range, deadline, f0)
        key = (e, fc, fm)
        if best is None or key < best:
            best = key
    return best[2], best[1]


def _lex_argmin(E, fm_axis, fc_axis):
    """Index of the minimum of E; exact ties prefer lower f_com, then lower f_mem."""
    emin = np.min(E)
    ii, jj = np.nonzero(E == emin)
    k = np.lexsort((fm_axis[ii], fc_axis[jj]))[0]
    return int(ii[k]), int(jj[k])


def _solve_joint_enumerate(lat, power, dom, deadline):
    fm_axis = np.asarray(dom.mem_levels, dtype=float)
    fc_axis = np.asarray(dom.com_levels, dtype=float)
    T = lat.latency(fm_axis[:, None], fc_axis[None, :])
    E = power.power(fm_axis[:, None], fc_axis[None, :]) * T
    masked = np.where(T <= deadline * (1.0 + DEADLINE_RTOL), E, np.inf)
    i, j = _lex_argmin(masked, fm_axis, fc_axis)
    return float(fm_axis[i]), float(fc_axis[j])


def _solve_joint_discrete_snap(lat, power, dom, deadline, seeds):
    """Level grids too large to enumerate: snap the continuous optimum upward
    and search its +/-2-level neighborhood."""
    box = FrequencyDomain(dom.mem_range, dom.com_range)
    cm, cc = _solve_joint_continuous(lat, power, box, deadline, seeds)
    mem_levels, com_levels = dom.mem_levels, dom.com_levels
    im = bisect.bisect_left(mem_levels, cm * (1.0 - 1e-12))
    ic = bisect.bisect_left(com_levels, cc * (1.0 - 1e-12))
    cands = {(mem_levels[-1], com_levels[-1])}
    for di in range(-2, 3):
        for dj in range(-2, 3):
            i = min(max(im + di, 0), len(mem_levels) - 1)
            j = min(max(ic + dj, 0), len(com_levels) - 1)
            cands.add((mem_levels[i], com_levels[j]))
    best = None
    for fm, fc in cands:
        if not meets_deadline(lat.latency(fm, fc), deadline):
            continue
        key = (_energy(lat, power, fm, fc), fc, fm)
        if best is None or key < best:
            best = (key[0], key[1], key[2])
    return best[2], best[1]


def _golden_min(fn, a, b, iters=70):
    """Golden-section minimization of fn on [a, b]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fd, fc_ = fn(d), fn(c)
    for _ in range(iters):
        if b - a < 1e-13:
            break
        if fc_ < fd:
            b, d, fd = d, c, fc_
            c = b - inv_phi * (b - a)
            fc_ = fn(c)
        else:
            a, c, fc_ = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    x = (a + b) / 2.0
    return x, fn(x)


def _min_energy_on_com_segment(lat, power, fm, com_range, deadline):
    """Best f_com for a fixed f_mem over the feasible part of the com range."""
    rc = invert_latency_for_com(lat, fm, deadline)
    lo = _clamp(rc, *com_range)
    if not meets_deadline(lat.latency(fm, lo), deadline):
        return None
    hi = com_range[1]
    xs = np.linspace(lo, hi, 65)
    es = power.power(fm, xs) * lat.latency(fm, xs)
    i = int(np.argmin(es))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    if a == b:
        return float(xs[i]), float(es[i])
    x, e = _golden_min(lambda c: _energy(lat, power, fm, c), float(a), float(b))
    if es[i] < e:
        return float(xs[i]), float(es[i])
    return x, e


def _min_energy_on_mem_segment(lat, power, fc, mem_range, deadline):
    rm = invert_latency_for_mem(lat, fc, deadline)
    lo = _clamp(rm, *mem_range)
    if not meets_deadline(lat.latency(lo, fc), deadline):
        return None
    hi = mem_range[1]
    xs = np.linspace(lo, hi, 65)
    es = power.power(xs, fc) * lat.latency(xs, fc)
    i = int(np.argmin(es))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    if a == b:
        return float(xs[i]), float(es[i])
    x, e = _golden_min(lambda m: _energy(lat, power, m, fc), float(a), float(b))
    if es[i] < e:
        return float(xs[i]), float(es[i])
    return x, e


def _solve_joint_mixed(lat, power, dom, deadline):
    """One axis discrete, the other continuous: 1-D solve per level."""
    best = None
    if dom.mem_levels:
        for fm in dom.mem_levels:
            got = _min_energy_on_com_segment(lat, power, fm, dom.com_range, deadline)
            if got is None:
                continue
            fc, e = got
            key = (e, fc, fm)
            if best is None or key < best:
                best = key
    else:
        for fc in dom.com_levels:
            got = _min_energy_on_mem_segment(lat, power, fc, dom.mem_range, deadline)
            if got is None:
                continue
            fm, e = got
            key = (e, fc, fm)
            if best is None or key < best:
                best = key
    return (best[2], best[1]) if best else None


def solve_joint(lat: LatencyModel, power: PowerModel, dom: FrequencyDomain,
                deadline: float, seeds=()) -> PolicyResult:
    """Minimize energy over both frequencies subject to the deadline.

    Continuous domains use a feasible 32x32 multi-start grid plus projected
    gradient descent (deadline restored via the closed-form inversions, step
    halving, convergence below 1e-6 GHz).  Fully discrete domains are
    enumerated exactly up to ENUM_LIMIT combinations, beyond that a snapped
    neighborhood of the continuous solution is searched.  seeds are optional
    (f_mem, f_com) warm-start hints; the computing-prior and memory-prior
    operating points are always included, so the joint result never loses to
    either policy.
    """
    _check_positive("deadline", deadline)
    min_lat = lat.latency(dom.mem_max, dom.com_max)
    if not meets_deadline(min_lat, deadline):
        return _make_result(Policy.JOINT, lat, power, deadline,
                            dom.mem_max, dom.com_max, min_lat)

    cp = solve_computing_prior(lat, power, dom, deadline)
    mp = solve_memory_prior(lat, power, dom, deadline)
    all_seeds = [(r.f.f_mem, r.f.f_com) for r in (cp, mp) if r.feasible]
    all_seeds.extend((float(s[0]), float(s[1])) for s in seeds)

    if dom.mem_levels and dom.com_levels:
        if len(dom.mem_levels) * len(dom.com_levels) <= ENUM_LIMIT:
            fm, fc = _solve_joint_enumerate(lat, power, dom, deadline)
        else:
            fm, fc = _solve_joint_discrete_snap(lat, power, dom, deadline, all_seeds)
    elif dom.mem_levels or dom.com_levels:
        fm, fc = _solve_joint_mixed(lat, power, dom, deadline)
    else:
        fm, fc = _solve_joint_continuous(lat, power, dom, deadline, all_seeds)

    # never report worse than a policy operating point that is also admissible
    best = (_energy(lat, power, fm, fc), fc, fm)
    for sm, sc in all_seeds:
        if dom.contains(FrequencyPair(sm, sc)) and meets_deadline(lat.latency(sm, sc), deadline):
            key = (_energy(lat, power, sm, sc), sc, sm)
            if key < best:
                best = key
    return _make_result(Policy.JOINT, lat, power, deadline, best[2], best[1], min_lat)


def grid_oracle(lat: LatencyModel, power: PowerModel, dom: FrequencyDomain,
                deadline: float, resolution: int) -> PolicyResult:
    """Exhaustive feasible-minimum energy over a dense uniform grid.

    Discrete axes use their level lists instead of the uniform spacing.  This
    is the verification oracle for solve_joint and shares none of its search
    machinery.
    """
    _check_positive("deadline", deadline)
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    fm_axis = (np.asarray(dom.mem_levels, dtype=float) if dom.mem_levels
               else np.linspace(*dom.mem_range, resolution))
    fc_axis = (np.asarray(dom.com_levels, dtype=float) if dom.com_levels
               else np.linspace(*dom.com_range, resolution))
    T = lat.latency(fm_axis[:, None], fc_axis[None, :])
    E = power.power(fm_axis[:, None], fc_axis[None, :]) * T
    feas = T <= deadline * (1.0 + DEADLINE_RTOL)
    if not feas.any():
        return _make_result(Policy.JOINT, lat, power, deadline,
                            float(fm_axis[-1]), float(fc_axis[-1]), float(T[-1, -1]))
    i, j = _lex_argmin(np.where(feas, E, np.inf), fm_axis, fc_axis)
    return _make_result(Policy.JOINT, lat, power, deadline,
                        float(fm_axis[i]), float(fc_axis[j]),
                        lat.latency(dom.mem_max, dom.com_max))


def compare_policies(lat: LatencyModel, power: PowerModel, dom: FrequencyDomain,
                     deadline: float) -> list[PolicyResult]:
    """Run all three policies; ordered computing-prior, memory-prior, joint."""
    return [
        solve_computing_prior(lat, power, dom, deadline),
        solve_memory_prior(lat, power, dom, deadline),
        solve_joint(lat, power, dom, deadline),
    ]
