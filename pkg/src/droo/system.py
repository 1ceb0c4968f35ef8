"""Physical constants and per-device computation rates.

All rates are in bits per second; with the default one-second frame the
number of processed bits per frame coincides with the rate.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from droo.errors import DomainError


def default_weights(n: int) -> np.ndarray:
    """1 for odd (1-based) device indices, 1.5 for even ones."""
    idx = np.arange(1, n + 1)
    return np.where(idx % 2 == 1, 1.0, 1.5)


@dataclass(frozen=True)
class SystemParams:
    n: int = 10
    frame_len_s: float = 1.0
    ap_power_w: float = 3.0
    harvest_eff: float = 0.51
    bandwidth_hz: float = 2e6
    noise_w: float = 1e-10
    vu: float = 1.1
    cycles_per_bit: float = 100.0
    energy_coeff: np.ndarray = field(default=None)
    weights: np.ndarray = field(default=None)
    antenna_gain: float = 4.11
    carrier_hz: float = 915e6
    pathloss_exp: float = 2.8

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        k = np.full(n, 1e-26) if self.energy_coeff is None else np.asarray(self.energy_coeff, float)
        w = default_weights(n) if self.weights is None else np.asarray(self.weights, float)
        if k.ndim == 0:
            k = np.full(n, float(k))
        if k.shape != (n,) or w.shape != (n,):
            raise DomainError(f"energy_coeff and weights must have length {n}")
        if not (0.0 < self.harvest_eff < 1.0):
            raise DomainError(f"harvest_eff must lie in (0, 1), got {self.harvest_eff}")
        for name in ("ap_power_w", "bandwidth_hz", "noise_w", "cycles_per_bit", "frame_len_s"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.vu < 1:
            raise DomainError(f"vu must be >= 1, got {self.vu}")
        if np.any(w <= 0) or np.any(k <= 0):
            raise DomainError("weights and energy_coeff must be strictly positive")
        k.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "energy_coeff", k)
        object.__setattr__(self, "weights", w)

    @property
    def eta1(self) -> float:
        return (self.harvest_eff * self.ap_power_w) ** (1.0 / 3.0) / self.cycles_per_bit

    @property
    def snr_coeff(self) -> float:
        """mu * P / N0; the offload SNR is snr_coeff * a * h^2 / tau."""
        return self.harvest_eff * self.ap_power_w / self.noise_w

    def with_weights(self, weights) -> SystemParams:
        return dataclasses.replace(self, weights=np.array(weights, float))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["energy_coeff"] = self.energy_coeff.tolist()
        d["weights"] = self.weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SystemParams:
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class ChannelFrame:
    t: int
    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, float)
        if h.ndim != 1:
            raise DomainError("channel gains must be a vector")
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise DomainError("channel gains must be finite and non-negative")
        object.__setattr__(self, "h", h)


def _check_fraction(a, name="a"):
    a = np.asarray(a, float)
    if np.any(a < 0) or np.any(a > 1):
        raise DomainError(f"{name} must lie in [0, 1]")
    return a


def harvested_energy(h, a, p: SystemParams):
    """Energy (J) harvested during the WPT phase of length a*T."""
    a = _check_fraction(a)
    return p.harvest_eff * p.ap_power_w * np.asarray(h, float) * a * p.frame_len_s


def local_rate(h, k, a, p: SystemParams):
    """Rate of a device that computes locally for the whole frame."""
    k = np.asarray(k, float)
    if np.any(k <= 0):
        raise DomainError("energy coefficient must be positive")
    a = _check_fraction(a)
    return p.eta1 * np.cbrt(np.asarray(h, float) / k) * np.cbrt(a)


def offload_rate(h, a, tau, p: SystemParams):
    """Offloading capacity of a device given WPT fraction a and slot tau.

    Exactly 0 when tau, a or h is 0 (the tau -> 0+ limit).
    """
    h, a, tau = np.broadcast_arrays(np.asarray(h, float), np.asarray(a, float), np.asarray(tau, float))
    if np.any(h < 0) or np.any(a < 0) or np.any(tau < 0):
        raise DomainError("h, a and tau must be non-negative")
    active = (tau > 0) & (a > 0) & (h > 0)
    safe_tau = np.where(active, tau, 1.0)
    energy = np.where(active, p.snr_coeff * a * h**2, 1.0)
    with np.errstate(over="ignore"):
        snr = energy / safe_tau
    # subnormal tau overflows the ratio; log(1 + snr) = log(snr) there
    # energy can underflow to 0; that branch is then discarded, so its log(0) is harmless
    with np.errstate(divide="ignore"):
        nats = np.where(np.isfinite(snr), np.log1p(snr), np.log(energy) - np.log(safe_tau))
    r = p.bandwidth_hz * tau / p.vu * nats / np.log(2.0)
    out = np.where(active, r, 0.0)
    return out[()] if out.ndim == 0 else out


def weighted_sum_rate(frame, x, a, tau, p: SystemParams) -> float:
    h = frame.h if isinstance(frame, ChannelFrame) else np.asarray(frame, float)
    x = np.asarray(x)
    tau = np.asarray(tau, float)
    if not (h.shape == x.shape == tau.shape == (p.n,)):
        raise DomainError(f"h, x and tau must all have length {p.n}")
    loc = local_rate(h, p.energy_coeff, a, p)
    off = offload_rate(h, a, tau, p)
    return float(np.sum(p.weights * np.where(x == 1, off, loc)))
