"""Computation/communication cost model of a device round and the
system-heterogeneity indicator.

Units: seconds, joules, watts, hertz, bits.  Channel gain is stored in dB and
the noise density in dBm/Hz, both converted to linear scale where used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DeviceSpec",
    "RoundCosts",
    "SystemModelError",
    "VALUE_BITS",
    "INDEX_BITS",
    "DEFAULT_N0_DBM_HZ",
    "comp_delay",
    "comp_energy",
    "dbm_per_hz_to_watts",
    "tran_rate",
    "tran_delay",
    "tran_energy",
    "payload_size",
    "round_costs",
    "heterogeneity_indicator",
    "heterogeneity_from_delays",
    "SpecRanges",
    "sample_device_specs",
]

VALUE_BITS = 32
INDEX_BITS = 32
DEFAULT_N0_DBM_HZ = -174.0


class SystemModelError(ArithmeticError):
    pass


@dataclass(frozen=True)
class DeviceSpec:
    rho: float        # CPU cycles per sample
    f: float          # CPU cycles per second
    p_tran: float     # W
    xi_db: float      # channel gain, dB
    b: float          # allocated bandwidth, Hz
    varsigma: float = 1e-28
    E_max: float = 1.0

    def __post_init__(self):
        for name in ("rho", "f", "p_tran", "b", "varsigma", "E_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"DeviceSpec.{name} must be finite and > 0, got {value}")
        if not math.isfinite(self.xi_db):
            raise ValueError("DeviceSpec.xi_db must be finite")

    @property
    def xi(self) -> float:
        return 10.0 ** (self.xi_db / 10.0)


@dataclass(frozen=True)
class RoundCosts:
    tau_comp: float
    tau_tran: float
    E_comp: float
    E_tran: float

    @property
    def tau_total(self) -> float:
        return self.tau_comp + self.tau_tran

    @property
    def energy(self) -> float:
        return self.E_comp + self.E_tran


def comp_delay(spec: DeviceSpec, alpha, n_samples) -> float:
    return alpha * n_samples * spec.rho / spec.f


def comp_energy(spec: DeviceSpec, alpha, n_samples) -> float:
    return spec.varsigma * alpha * n_samples * spec.rho * spec.f ** 2


def dbm_per_hz_to_watts(n0_dbm_per_hz: float) -> float:
    return 10.0 ** ((n0_dbm_per_hz - 30.0) / 10.0)


def tran_rate(spec: DeviceSpec, n0_dbm_per_hz: float = DEFAULT_N0_DBM_HZ) -> float:
    """OFDMA uplink rate ``b log2(1 + xi p / (n0 b))`` in bit/s."""
    snr = spec.xi * spec.p_tran / (dbm_per_hz_to_watts(n0_dbm_per_hz) * spec.b)
    if not snr > 0:
        raise SystemModelError(f"nonpositive SNR {snr}")
    return spec.b * math.log2(1.0 + snr)


def tran_delay(payload_bits, rate) -> float:
    if rate <= 0:
        raise SystemModelError(f"rate must be positive, got {rate}")
    return payload_bits / rate


def tran_energy(spec: DeviceSpec, tau_tran) -> float:
    return spec.p_tran * tau_tran


def payload_size(num_params: int, z: float) -> int:
    """Uplink bits for a top-k sparsified update keeping ``ceil(z B)`` entries.

    Sparse entries cost a value and an index; a dense update costs values only.
    The sender never transmits more than the dense form, so the size saturates
    at ``32 B`` once sparse encoding stops paying off (``z >= 0.5``).
    """
    if not 0 < z <= 1:
        raise ValueError(f"z must lie in (0, 1], got {z}")
    dense = VALUE_BITS * num_params
    if z >= 1:
        return dense
    kept = int(math.ceil(z * num_params - 1e-9))
    return min((VALUE_BITS + INDEX_BITS) * kept, dense)


def round_costs(
    spec: DeviceSpec,
    alpha: int,
    n_samples: int,
    payload_bits: float,
    n0_dbm_per_hz: float = DEFAULT_N0_DBM_HZ,
) -> RoundCosts:
    tau_tran = tran_delay(payload_bits, tran_rate(spec, n0_dbm_per_hz))
    return RoundCosts(
        tau_comp=comp_delay(spec, alpha, n_samples),
        tau_tran=tau_tran,
        E_comp=comp_energy(spec, alpha, n_samples),
        E_tran=tran_energy(spec, tau_tran),
    )


def heterogeneity_from_delays(delays) -> float:
    """``1 - mean(min(tau) / tau_i)``."""
    tau = np.asarray(delays, dtype=float)
    if tau.size == 0 or np.any(tau <= 0):
        raise ValueError("delays must be a nonempty positive vector")
    return float(1.0 - np.mean(tau.min() / tau))


def heterogeneity_indicator(
    specs,
    alpha: int = 1,
    payload_bits: float = 1.0,
    n0_dbm_per_hz: float = DEFAULT_N0_DBM_HZ,
) -> float:
    """Heterogeneity of a device population from each device's one-sample,
    unit-payload round delay (``alpha`` local passes)."""
    delays = [
        comp_delay(s, alpha, 1) + tran_delay(payload_bits, tran_rate(s, n0_dbm_per_hz))
        for s in specs
    ]
    return heterogeneity_from_delays(delays)


@dataclass(frozen=True)
class SpecRanges:
    """Uniform sampling ranges for device hardware.

    Defaults follow the simulation table: rho in cycles/sample, f in Hz,
    p in W, xi in dB, total bandwidth split evenly.
    """

    rho: tuple[float, float] = (1e4, 5e4)
    f: tuple[float, float] = (1e9, 3.5e9)
    p_tran: tuple[float, float] = (0.5, 1.0)
    xi_db: tuple[float, float] = (1.0, 2.0)
    total_bandwidth: float = 20e6
    varsigma: float = 1e-28
    E_max: float = 1.0

    def __post_init__(self):
        for name in ("rho", "f", "p_tran", "xi_db"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is empty: {lo} > {hi}")


def sample_device_specs(rng: np.random.Generator, num_devices: int, ranges: SpecRanges | None = None):
    """Draw ``num_devices`` specs; bandwidth is ``total_bandwidth / K`` each."""
    r = ranges or SpecRanges()
    draws = {
        name: rng.uniform(*getattr(r, name), size=num_devices)
        for name in ("rho", "f", "p_tran", "xi_db")
    }
    b = r.total_bandwidth / num_devices
    return [
        DeviceSpec(
            rho=float(draws["rho"][i]),
            f=float(draws["f"][i]),
            p_tran=float(draws["p_tran"][i]),
            xi_db=float(draws["xi_db"][i]),
            b=b,
            varsigma=r.varsigma,
            E_max=r.E_max,
        )
        for i in range(num_devices)
    ]
