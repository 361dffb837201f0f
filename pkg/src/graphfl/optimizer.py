"""Per-round scheduling of local epochs, data fraction and gradient sparsity.

The round deadline is the slowest device's latency at the smallest allowed
``(alpha, q, z)``.  Each device then maximizes

    mu1 * alpha / alpha_max + mu2 * q + mu3 * chi(z) / chi_max

subject to finishing by the deadline and staying within its energy budget.
Sample counts ``ceil(q |D|)`` and kept entries ``ceil(z B)`` are integers, so
the per-device problem is solved exactly by enumerating ``alpha`` and the
sample count and filling the leftover time/energy with the largest payload
that fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .learner import subsample_size
from .sysmodel import (
    DEFAULT_N0_DBM_HZ,
    INDEX_BITS,
    VALUE_BITS,
    DeviceSpec,
    payload_size,
    round_costs,
    tran_rate,
)

__all__ = [
    "ScheduleBounds",
    "DevicePlan",
    "RoundPlan",
    "ScheduleError",
    "sparsify",
    "densify",
    "plan_objective",
    "lower_bound_latency",
    "compute_T_opt",
    "solve_device",
    "solve_round_plan",
    "fixed_plan",
]


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleBounds:
    alpha_min: int = 1
    alpha_max: int = 5
    q_min: float = 0.3
    z_min: float = 0.1
    mu1: float = 0.4
    mu2: float = 0.4
    mu3: float = 0.2

    def __post_init__(self):
        if not 1 <= self.alpha_min <= self.alpha_max:
            raise ScheduleError(
                f"need 1 <= alpha_min <= alpha_max, got {self.alpha_min}, {self.alpha_max}"
            )
        if not 0 < self.q_min <= 1:
            raise ScheduleError(f"q_min must lie in (0, 1], got {self.q_min}")
        if not 0 < self.z_min <= 1:
            raise ScheduleError(f"z_min must lie in (0, 1], got {self.z_min}")
        mus = (self.mu1, self.mu2, self.mu3)
        if min(mus) < 0 or abs(sum(mus) - 1.0) > 1e-9:
            raise ScheduleError(f"mu weights must be >= 0 and sum to 1, got {mus}")


@dataclass(frozen=True)
class DevicePlan:
    alpha: int
    q: float
    z: float
    n_samples: int
    payload_bits: int
    predicted_tau: float
    predicted_energy: float
    objective: float


@dataclass(frozen=True)
class RoundPlan:
    T_opt: float
    devices: tuple[DevicePlan, ...]

    @property
    def alphas(self):
        return [d.alpha for d in self.devices]

    @property
    def taus(self) -> np.ndarray:
        return np.array([d.predicted_tau for d in self.devices])


def sparsify(g, z: float):
    """Top-k by magnitude with ``k = ceil(z B)``; ties go to the lower index.

    Returns ``(indices, values)`` with indices ascending.
    """
    g = np.asarray(g, dtype=float).ravel()
    if not 0 < z <= 1:
        raise ValueError(f"z must lie in (0, 1], got {z}")
    k = int(math.ceil(z * g.size - 1e-9))
    if k >= g.size:
        return np.arange(g.size), g.copy()
    keep = np.sort(np.argsort(-np.abs(g), kind="stable")[:k])
    return keep, g[keep]


def densify(indices, values, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[np.asarray(indices, dtype=int)] = values
    return out


def plan_objective(bounds: ScheduleBounds, alpha, q, chi, chi_max) -> float:
    return (
        bounds.mu1 * alpha / bounds.alpha_max
        + bounds.mu2 * q
        + bounds.mu3 * chi / chi_max
    )


def lower_bound_latency(spec: DeviceSpec, data_size: int, num_params: int,
                        bounds: ScheduleBounds, n0=DEFAULT_N0_DBM_HZ) -> float:
    n = subsample_size(data_size, bounds.q_min)
    chi = payload_size(num_params, bounds.z_min)
    return round_costs(spec, bounds.alpha_min, n, chi, n0).tau_total


def compute_T_opt(specs, data_sizes, num_params: int, bounds: ScheduleBounds,
                  n0=DEFAULT_N0_DBM_HZ) -> float:
    """Deadline = largest per-device latency at the lower corner of the boxes."""
    return max(
        lower_bound_latency(s, d, num_params, bounds, n0)
        for s, d in zip(specs, data_sizes)
    )


def _best_payload(spec, alpha, n, num_params, k_min, T, rate, n0):
    """Largest admissible payload for fixed (alpha, n), or None.

    Returns ``(z, chi, costs)``.
    """
    dense = VALUE_BITS * num_params
    pair = VALUE_BITS + INDEX_BITS
    base = round_costs(spec, alpha, n, 0.0, n0)
    bits_time = (T - base.tau_total) * rate
    bits_energy = (spec.E_max - base.energy) * rate / spec.p_tran
    budget = min(bits_time, bits_energy)
    candidates = []
    if budget >= dense * (1 - 1e-12) or pair * k_min >= dense:
        candidates.append((1.0, dense))
    # the float budget is off by a few ulps either way; probe neighbours and
    # let the exact cost check decide
    k_hi = min(int(math.floor(budget / pair)) + 1, (dense - 1) // pair)
    for kk in range(k_hi, max(k_hi - 4, k_min - 1), -1):
        candidates.append((kk / num_params, pair * kk))
    for z, chi in candidates:
        costs = round_costs(spec, alpha, n, chi, n0)
        if costs.tau_total <= T and costs.energy <= spec.E_max:
            return z, chi, costs
    return None


def solve_device(spec: DeviceSpec, data_size: int, num_params: int,
                 bounds: ScheduleBounds, T: float, n0=DEFAULT_N0_DBM_HZ) -> DevicePlan:
    """Best ``(alpha, q, z)`` for one device given the deadline ``T``."""
    rate = tran_rate(spec, n0)
    chi_max = VALUE_BITS * num_params
    n_min = subsample_size(data_size, bounds.q_min)
    k_min = int(math.ceil(bounds.z_min * num_params - 1e-9))
    best = None
    for alpha in range(bounds.alpha_min, bounds.alpha_max + 1):
        for n in range(n_min, data_size + 1):
            found = _best_payload(spec, alpha, n, num_params, k_min, T, rate, n0)
            if found is None:
                # latency and energy grow with n; larger n cannot fit either
                break
            z, chi, costs = found
            q = n / data_size
            obj = plan_objective(bounds, alpha, q, chi, chi_max)
            if best is None or obj > best.objective:
                best = DevicePlan(alpha, q, z, n, chi, costs.tau_total, costs.energy, obj)
    if best is None:
        corner = round_costs(spec, bounds.alpha_min, n_min,
                             payload_size(num_params, bounds.z_min), n0)
        violated = "energy (C2)" if corner.energy > spec.E_max else "deadline (C1)"
        raise ScheduleError(
            f"lower corner infeasible: {violated}; tau={corner.tau_total:.6g}s "
            f"T={T:.6g}s energy={corner.energy:.6g}J E_max={spec.E_max:.6g}J"
        )
    return best


def solve_round_plan(specs, data_sizes, num_params: int, bounds: ScheduleBounds,
                     n0=DEFAULT_N0_DBM_HZ, T: float | None = None) -> RoundPlan:
    """Deadline from the lower corners, then each device's best schedule."""
    T_opt = compute_T_opt(specs, data_sizes, num_params, bounds, n0) if T is None else T
    plans = tuple(
        solve_device(s, d, num_params, bounds, T_opt, n0)
        for s, d in zip(specs, data_sizes)
    )
    return RoundPlan(T_opt, plans)


def fixed_plan(specs, data_sizes, num_params: int, alpha: int, q: float = 1.0,
               z: float = 1.0, n0=DEFAULT_N0_DBM_HZ) -> RoundPlan:
    """Unoptimized schedule: every device uses the same ``(alpha, q, z)``."""
    chi = payload_size(num_params, z)
    devices = []
    for s, d in zip(specs, data_sizes):
        n = subsample_size(d, q)
        costs = round_costs(s, alpha, n, chi, n0)
        devices.append(DevicePlan(alpha, q, z, n, chi, costs.tau_total, costs.energy, float("nan")))
    return RoundPlan(max(p.predicted_tau for p in devices), tuple(devices))
