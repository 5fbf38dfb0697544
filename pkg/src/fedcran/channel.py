"""OFDMA uplink channel model with quantize-and-forward fronthaul.

Devices are placed uniformly in a disk and transmit to M remote radio heads
over disjoint subcarrier sets. Each RRH uniformly quantizes its received
subcarrier signal to C_{m,n} bits before forwarding, which adds quantization
noise 3*(rx_power + noise)*2^(-2C) to that branch; the central unit combines
all M branches, so the per-subcarrier SINR is a sum of per-RRH terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from .convergence import ConvergenceConstants
from .errors import InfeasibleAllocationError, InvalidConfigError

if TYPE_CHECKING:  # pragma: no cover
    from .energy import ChipModel

__all__ = [
    "Scenario",
    "ChannelRealization",
    "Allocation",
    "default_sc_map",
    "sample_topology",
    "pathloss_gain",
    "sample_channels",
    "fronthaul_noise_var",
    "fronthaul_bit_budget",
    "rate_per_sc",
    "device_rate",
    "all_device_rates",
    "rates_from_psi",
    "check_allocation",
    "uniform_power",
    "uniform_bits",
]


def _default_chip():
    from .energy import ChipModel  # lazy: energy imports this module

    return ChipModel()


def default_sc_map(K: int, N: int) -> list[np.ndarray]:
    """Contiguous equal-size subcarrier blocks, one per device."""
    if N % K != 0:
        raise InvalidConfigError(f"N={N} subcarriers not divisible by K={K} devices")
    size = N // K
    return [np.arange(k * size, (k + 1) * size) for k in range(K)]


@dataclass
class Scenario:
    """Static system description: geometry, radio, chip, and convergence constants."""

    K: int = 16                 # devices
    M: int = 5                  # remote radio heads
    N: int = 64                 # subcarriers
    B: float = 300e6            # total bandwidth, Hz
    radius: float = 500.0       # cell radius, m
    T0_db: float = 30.0         # reference pathloss at 1 m, dB
    alpha_pl: float = 3.0       # pathloss exponent
    noise_var: float | np.ndarray = 1e-13  # receiver noise power per SC, W
    P_bar: float | np.ndarray = 0.19952623149688797  # per-device budget, W (23 dBm)
    G_bar: float | np.ndarray = 6e9        # per-RRH fronthaul capacity, bit/s
    P_fl: float | np.ndarray = 1e-10       # fronthaul power per bit/s, W
    sc_map: list[np.ndarray] | None = None
    chip: "ChipModel" = field(default_factory=_default_chip)
    conv: ConvergenceConstants = field(default_factory=ConvergenceConstants)

    def __post_init__(self):
        if self.K < 1 or self.M < 1 or self.N < 1:
            raise InvalidConfigError("K, M, N must be positive")
        if self.B <= 0 or self.radius < 0 or self.alpha_pl < 0:
            raise InvalidConfigError("B must be > 0; radius, alpha_pl >= 0")
        self.P_bar = np.broadcast_to(np.asarray(self.P_bar, float), (self.K,)).copy()
        self.G_bar = np.broadcast_to(np.asarray(self.G_bar, float), (self.M,)).copy()
        self.P_fl = np.broadcast_to(np.asarray(self.P_fl, float), (self.M,)).copy()
        if np.any(self.P_bar <= 0) or np.any(self.G_bar <= 0) or np.any(self.P_fl < 0):
            raise InvalidConfigError("P_bar, G_bar must be > 0; P_fl >= 0")
        if np.any(np.asarray(self.noise_var, float) <= 0):
            raise InvalidConfigError("noise_var must be > 0")
        if self.sc_map is None:
            self.sc_map = default_sc_map(self.K, self.N)
        if len(self.sc_map) != self.K:
            raise InvalidConfigError("sc_map must have one subcarrier set per device")
        self.sc_map = [np.asarray(o, dtype=int) for o in self.sc_map]
        flat = np.concatenate(self.sc_map) if self.sc_map else np.array([], int)
        if sorted(flat.tolist()) != list(range(self.N)):
            raise InvalidConfigError("sc_map must partition the N subcarriers")
        if any(o.size == 0 for o in self.sc_map):
            raise InvalidConfigError("every device needs at least one subcarrier")
        if self.conv.K != self.K:
            raise InvalidConfigError(
                f"conv.K={self.conv.K} disagrees with scenario K={self.K}"
            )
        if self.conv.I != self.chip.I:
            raise InvalidConfigError(
                f"conv.I={self.conv.I} disagrees with chip.I={self.chip.I}"
            )

    def sc_owner(self) -> np.ndarray:
        """Device index owning each subcarrier, shape (N,)."""
        owner = np.empty(self.N, dtype=int)
        for k, o in enumerate(self.sc_map):
            owner[o] = k
        return owner

    def noise_mn(self) -> np.ndarray:
        """Noise power broadcast to (M, N)."""
        return np.broadcast_to(np.asarray(self.noise_var, float), (self.M, self.N))


@dataclass
class ChannelRealization:
    h: np.ndarray           # complex gains, (M, K, N)
    device_pos: np.ndarray  # (K, 2), m
    rrh_pos: np.ndarray     # (M, 2), m


@dataclass
class Allocation:
    """Decision variables: per-SC transmit power, fronthaul bits, upload precision."""

    p: np.ndarray       # (K, N) W, nonzero only on the device's own subcarriers
    c_bits: np.ndarray  # (M, N) integer quantization bits, >= 1
    c_prec: int         # model upload precision, bits

    def copy(self) -> "Allocation":
        return replace(self, p=self.p.copy(), c_bits=self.c_bits.copy())


# ---------------------------------------------------------------- sampling


def sample_topology(scn: Scenario, rng: np.random.Generator):
    """Uniform placements in the disk of radius ``scn.radius``."""

    def disk(n):
        r = scn.radius * np.sqrt(rng.random(n))
        th = 2 * np.pi * rng.random(n)
        return np.column_stack([r * np.cos(th), r * np.sin(th)])

    return disk(scn.K), disk(scn.M)


def pathloss_gain(dist, scn: Scenario):
    """Average power gain 10^(-T0/10) * d^(-alpha); distances clamp at 1 m."""
    d = np.maximum(np.asarray(dist, float), 1.0)
    return 10.0 ** (-scn.T0_db / 10.0) * d ** (-scn.alpha_pl)


def sample_channels(
    scn: Scenario, rng: np.random.Generator, positions=None
) -> ChannelRealization:
    """Rayleigh-faded gains h[m, k, n] with pathloss from the sampled topology."""
    if positions is None:
        device_pos, rrh_pos = sample_topology(scn, rng)
    else:
        device_pos, rrh_pos = positions
        device_pos = np.asarray(device_pos, float)
        rrh_pos = np.asarray(rrh_pos, float)
    dist = np.linalg.norm(rrh_pos[:, None, :] - device_pos[None, :, :], axis=-1)
    gain = pathloss_gain(dist, scn)  # (M, K)
    shape = (scn.M, scn.K, scn.N)
    fading = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    h = np.sqrt(gain)[:, :, None] * fading
    return ChannelRealization(h=h, device_pos=device_pos, rrh_pos=rrh_pos)


# ---------------------------------------------------------------- rates


def fronthaul_noise_var(rx_power, noise_var, c_bits):
    """Quantization noise 3*(rx_power + noise_var)*2^(-2*c_bits) per RRH branch."""
    c = np.asarray(c_bits, dtype=float)
    if np.any(c < 1):
        raise ValueError("fronthaul bits must be >= 1")
    return 3.0 * (np.asarray(rx_power, float) + np.asarray(noise_var, float)) * 2.0 ** (
        -2.0 * c
    )


def fronthaul_bit_budget(scn: Scenario) -> np.ndarray:
    """Per-RRH integer bit budget floor(N * G_bar / (2B)) per aggregation window."""
    return np.floor(scn.N * scn.G_bar / (2.0 * scn.B)).astype(int)


def _per_sc_power(scn: Scenario, p: np.ndarray) -> np.ndarray:
    return p[scn.sc_owner(), np.arange(scn.N)]


def _owner_gain(scn: Scenario, ch: ChannelRealization) -> np.ndarray:
    """|h|^2 from each subcarrier's owner to every RRH, shape (M, N)."""
    return np.abs(ch.h[:, scn.sc_owner(), np.arange(scn.N)]) ** 2


def _sinr_per_sc(scn, ch, p, psi=None, c_bits=None) -> np.ndarray:
    """Combined SINR on every subcarrier, shape (N,).

    Exactly one of psi (continuous 2^(2C) variables, (M, N)) or c_bits
    (integer bits) selects the fronthaul quantization noise form.
    """
    g = _owner_gain(scn, ch)            # (M, N)
    pn = _per_sc_power(scn, p)          # (N,)
    rx = g * pn[None, :]
    sig2 = scn.noise_mn()
    if psi is not None:
        num = rx * psi
        den = sig2 * psi + 3.0 * (rx + sig2)
        return (num / den).sum(axis=0)
    q = fronthaul_noise_var(rx, sig2, c_bits)
    return (rx / (sig2 + q)).sum(axis=0)


def _sc_rates(scn, ch, p, psi=None, c_bits=None) -> np.ndarray:
    return (scn.B / scn.N) * np.log2(1.0 + _sinr_per_sc(scn, ch, p, psi, c_bits))


def rate_per_sc(scn: Scenario, ch: ChannelRealization, alloc: Allocation, k: int, n: int) -> float:
    """Achievable rate of device k on subcarrier n, bit/s."""
    g = np.abs(ch.h[:, k, n]) ** 2
    rx = g * alloc.p[k, n]
    sig2 = scn.noise_mn()[:, n]
    q = fronthaul_noise_var(rx, sig2, alloc.c_bits[:, n])
    sinr = float((rx / (sig2 + q)).sum())
    return (scn.B / scn.N) * float(np.log2(1.0 + sinr))


def device_rate(scn: Scenario, ch: ChannelRealization, alloc: Allocation, k: int) -> float:
    """Total uplink rate of device k over its own subcarriers, bit/s."""
    return float(sum(rate_per_sc(scn, ch, alloc, k, n) for n in scn.sc_map[k]))


def all_device_rates(scn: Scenario, ch: ChannelRealization, alloc: Allocation) -> np.ndarray:
    """Vector of device rates, shape (K,)."""
    sc = _sc_rates(scn, ch, alloc.p, c_bits=alloc.c_bits)
    out = np.zeros(scn.K)
    for k, o in enumerate(scn.sc_map):
        out[k] = sc[o].sum()
    return out


def rates_from_psi(scn: Scenario, ch: ChannelRealization, p: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Device rates with the fronthaul resolution expressed as psi = 2^(2C)."""
    sc = _sc_rates(scn, ch, p, psi=np.asarray(psi, float))
    out = np.zeros(scn.K)
    for k, o in enumerate(scn.sc_map):
        out[k] = sc[o].sum()
    return out


# ---------------------------------------------------------------- feasibility


def check_allocation(scn: Scenario, alloc: Allocation, rtol: float = 1e-9) -> None:
    """Raise InfeasibleAllocationError on any constraint violation."""
    p, c = alloc.p, alloc.c_bits
    if p.shape != (scn.K, scn.N) or c.shape != (scn.M, scn.N):
        raise InfeasibleAllocationError("allocation arrays have wrong shapes")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InfeasibleAllocationError("powers must be finite and >= 0")
    own = np.zeros((scn.K, scn.N), dtype=bool)
    for k, o in enumerate(scn.sc_map):
        own[k, o] = True
    if np.any(p[~own] != 0):
        raise InfeasibleAllocationError("power on a subcarrier the device does not own")
    tot = p.sum(axis=1)
    if np.any(tot > scn.P_bar * (1 + rtol)):
        k = int(np.argmax(tot - scn.P_bar))
        raise InfeasibleAllocationError(
            f"device {k} exceeds its power budget: {tot[k]} > {scn.P_bar[k]}"
        )
    if not np.issubdtype(c.dtype, np.integer):
        raise InfeasibleAllocationError("fronthaul bits must be integers")
    if np.any(c < 1):
        raise InfeasibleAllocationError("every subcarrier needs >= 1 fronthaul bit")
    budget = fronthaul_bit_budget(scn)
    used = c.sum(axis=1)
    if np.any(used > budget):
        m = int(np.argmax(used - budget))
        raise InfeasibleAllocationError(
            f"RRH {m} exceeds its fronthaul bit budget: {used[m]} > {budget[m]}"
        )
    if not (1 <= alloc.c_prec <= scn.chip.c_max):
        raise InfeasibleAllocationError(
            f"c_prec must be in [1, {scn.chip.c_max}], got {alloc.c_prec}"
        )


def uniform_power(scn: Scenario) -> np.ndarray:
    """Equal split of each device's budget over its own subcarriers, (K, N)."""
    p = np.zeros((scn.K, scn.N))
    for k, o in enumerate(scn.sc_map):
        p[k, o] = scn.P_bar[k] / o.size
    return p


def uniform_bits(scn: Scenario) -> np.ndarray:
    """Equal per-SC fronthaul bits floor(budget/N) for every RRH, (M, N)."""
    budget = fronthaul_bit_budget(scn)
    per_sc = budget // scn.N
    if np.any(per_sc < 1):
        m = int(np.argmin(per_sc))
        raise InfeasibleAllocationError(
            f"RRH {m} budget {budget[m]} cannot give every one of {scn.N} subcarriers a bit"
        )
    return np.repeat(per_sc[:, None], scn.N, axis=1).astype(int)
