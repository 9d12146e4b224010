"""Latency, power, and energy models over (memory, computing) frequency pairs.

Inference time follows a two-term power law, device power is cubic per
frequency axis plus a constant floor, and energy is their product.  All
frequencies are in GHz, times in seconds, power in watts, energy in joules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def _check_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")


def _check_nonnegative(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
        raise ValueError(f"{name} must be a nonnegative finite number, got {value!r}")


class MissingPowerModelError(LookupError):
    """Raised when an operation needs power coefficients a device does not have."""


@dataclass(frozen=True)
class FrequencyPair:
    """A (memory, computing) frequency operating point, both in GHz."""

    f_mem: float
    f_com: float

    def __post_init__(self):
        _check_positive("f_mem", self.f_mem)
        _check_positive("f_com", self.f_com)


@dataclass(frozen=True)
class LatencyModel:
    """Two-term power-law inference-time model for one (DNN, device) pair.

    latency(f) = mem_coeff * f_mem**-mem_exp + com_coeff * f_com**-com_exp

    Coefficients are in seconds * GHz**exponent, exponents dimensionless.
    Zero exponents (the term degenerates to a constant) and zero coefficients
    are accepted so fits may sit on the boundary; negatives are rejected.
    """

    mem_coeff: float
    mem_exp: float
    com_coeff: float
    com_exp: float

    def __post_init__(self):
        _check_nonnegative("mem_coeff", self.mem_coeff)
        _check_nonnegative("mem_exp", self.mem_exp)
        _check_nonnegative("com_coeff", self.com_coeff)
        _check_nonnegative("com_exp", self.com_exp)

    def latency(self, f_mem, f_com):
        """Inference time in seconds; accepts scalars or numpy arrays."""
        return self.mem_coeff * f_mem ** -self.mem_exp + self.com_coeff * f_com ** -self.com_exp


@dataclass(frozen=True)
class PowerModel:
    """Cubic-in-frequency device power model with a constant floor.

    power(f) = mem_coeff * f_mem**3 + com_coeff * f_com**3 + static_power,
    coefficients in W/GHz^3, static_power in W.
    """

    mem_coeff: float
    com_coeff: float
    static_power: float

    def __post_init__(self):
        _check_nonnegative("mem_coeff", self.mem_coeff)
        _check_nonnegative("com_coeff", self.com_coeff)
        _check_nonnegative("static_power", self.static_power)

    def power(self, f_mem, f_com):
        """Device power draw in watts; accepts scalars or numpy arrays."""
        return self.mem_coeff * f_mem ** 3 + self.com_coeff * f_com ** 3 + self.static_power


@dataclass(frozen=True)
class WorkloadModel:
    """Classic cycles-based workload description: FLOP count and FLOPs per cycle."""

    flops: float
    flops_per_cycle: float

    def __post_init__(self):
        _check_positive("flops", self.flops)
        _check_positive("flops_per_cycle", self.flops_per_cycle)


def _as_ascending_tuple(name: str, levels, lo: float, hi: float):
    out = tuple(float(x) for x in levels)
    if not out:
        raise ValueError(f"{name} must be a nonempty list when given")
    prev = None
    for x in out:
        _check_positive(f"{name} entry", x)
        if not (lo <= x <= hi):
            raise ValueError(f"{name} entry {x} outside range [{lo}, {hi}]")
        if prev is not None and x <= prev:
            raise ValueError(f"{name} must be strictly ascending")
        prev = x
    return out


@dataclass(frozen=True)
class FrequencyDomain:
    """Admissible frequency box, optionally restricted to discrete DVFS levels.

    Ranges are (min, max) in GHz per axis.  Level lists, when present, must be
    strictly ascending and lie inside their range.
    """

    mem_range: tuple[float, float]
    com_range: tuple[float, float]
    mem_levels: tuple[float, ...] | None = None
    com_levels: tuple[float, ...] | None = None

    def __post_init__(self):
        for axis, rng in (("mem_range", self.mem_range), ("com_range", self.com_range)):
            lo, hi = rng
            _check_positive(f"{axis} min", lo)
            _check_positive(f"{axis} max", hi)
            if lo > hi:
                raise ValueError(f"{axis} min {lo} exceeds max {hi}")
            object.__setattr__(self, axis, (float(lo), float(hi)))
        if self.mem_levels is not None:
            object.__setattr__(self, "mem_levels",
                               _as_ascending_tuple("mem_levels", self.mem_levels, *self.mem_range))
        if self.com_levels is not None:
            object.__setattr__(self, "com_levels",
                               _as_ascending_tuple("com_levels", self.com_levels, *self.com_range))

    @property
    def mem_min(self) -> float:
        return self.mem_levels[0] if self.mem_levels else self.mem_range[0]

    @property
    def mem_max(self) -> float:
        return self.mem_levels[-1] if self.mem_levels else self.mem_range[1]

    @property
    def com_min(self) -> float:
        return self.com_levels[0] if self.com_levels else self.com_range[0]

    @property
    def com_max(self) -> float:
        return self.com_levels[-1] if self.com_levels else self.com_range[1]

    def contains(self, f: FrequencyPair, rtol: float = 1e-9) -> bool:
        """True when f lies in the box (and on the level lists when discrete)."""

        def on_axis(x, rng, levels):
            lo, hi = rng
            if not (lo * (1 - rtol) <= x <= hi * (1 + rtol)):
                return False
            if levels is None:
                return True
            return any(math.isclose(x, lv, rel_tol=rtol, abs_tol=0.0) for lv in levels)

        return on_axis(f.f_mem, self.mem_range, self.mem_levels) and \
            on_axis(f.f_com, self.com_range, self.com_levels)


@dataclass(frozen=True)
class DeviceProfile:
    """Per-device bundle: frequency domain, power coefficients, latency models by DNN name.

    Power coefficients are optional; operations that need them raise
    MissingPowerModelError via require_power().
    """

    name: str
    domain: FrequencyDomain
    power: PowerModel | None = None
    models: dict[str, LatencyModel] = field(default_factory=dict)

    def require_power(self) -> PowerModel:
        if self.power is None:
            raise MissingPowerModelError(
                f"device {self.name!r} has no power coefficients configured")
        return self.power

    def model(self, dnn: str) -> LatencyModel:
        try:
            return self.models[dnn]
        except KeyError:
            raise KeyError(f"device {self.name!r} has no latency model for DNN {dnn!r}") from None


def eval_latency(model: LatencyModel, f: FrequencyPair) -> float:
    """Predicted inference time in seconds at the operating point f."""
    return model.latency(f.f_mem, f.f_com)


def eval_baseline_latency(workload: WorkloadModel, f_com: float) -> float:
    """Cycles-based baseline time: flops / (flops_per_cycle * f_com), f_com in GHz.

    Kept for comparison reports only; the optimizers use LatencyModel.
    """
    _check_positive("f_com", f_com)
    return workload.flops / (workload.flops_per_cycle * f_com * 1e9)


def eval_power(model: PowerModel, f: FrequencyPair) -> float:
    """Predicted device power in watts at the operating point f."""
    return model.power(f.f_mem, f.f_com)


def eval_energy(lat: LatencyModel, power: PowerModel, f: FrequencyPair) -> float:
    """Energy per inference in joules: power(f) * latency(f)."""
    return eval_power(power, f) * eval_latency(lat, f)


def latency_gradient(model: LatencyModel, f: FrequencyPair) -> tuple[float, float]:
    """Analytic partials of latency w.r.t. (f_mem, f_com); both are <= 0."""
    d_mem = -model.mem_coeff * model.mem_exp * f.f_mem ** (-model.mem_exp - 1.0)
    d_com = -model.com_coeff * model.com_exp * f.f_com ** (-model.com_exp - 1.0)
    return (d_mem, d_com)


def invert_latency_for_mem(model: LatencyModel, f_com: float, deadline: float) -> float:
    """Minimum memory frequency meeting the deadline at a fixed computing frequency.

    Returns math.inf when no finite memory frequency can meet the deadline
    (the computing-frequency term alone reaches or exceeds it), and 0.0 when
    every positive memory frequency meets it (memory term constant or absent).
    """
    _check_positive("f_com", f_com)
    _check_positive("deadline", deadline)
    budget = deadline - model.com_coeff * f_com ** -model.com_exp
    if model.mem_coeff == 0.0 or model.mem_exp == 0.0:
        # mem term is the constant mem_coeff: either always feasible or never
        return 0.0 if model.mem_coeff <= budget else math.inf
    if budget <= 0.0:
        return math.inf
    return (model.mem_coeff / budget) ** (1.0 / model.mem_exp)


def invert_latency_for_com(model: LatencyModel, f_mem: float, deadline: float) -> float:
    """Mirror of invert_latency_for_mem: minimum computing frequency at fixed f_mem."""
    _check_positive("f_mem", f_mem)
    _check_positive("deadline", deadline)
    budget = deadline - model.mem_coeff * f_mem ** -model.mem_exp
    if model.com_coeff == 0.0 or model.com_exp == 0.0:
        return 0.0 if model.com_coeff <= budget else math.inf
    if budget <= 0.0:
        return math.inf
    return (model.com_coeff / budget) ** (1.0 / model.com_exp)
