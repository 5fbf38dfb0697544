"""Per-round energy accounting: on-device compute, uplink, and fronthaul.

Compute energy follows a precision-scalable MAC-array model: one c-bit MAC
costs A*(c/c_max)^alpha, a most-significant-bit memory access costs two MACs,
a least-significant-bit access one, and weight/activation traffic picks up a
sqrt(c/(u*c_max)) data-movement factor from the u-lane array. Transmission
energy is latency * power for the device uplink and for every RRH's fronthaul
link; the expected total scales per-round costs by the sampled fraction of
devices and by the round count needed to reach the accuracy target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .convergence import rounds_for_accuracy
from .errors import AccuracyUnreachableError, InfeasibleAllocationError

if TYPE_CHECKING:  # pragma: no cover
    from .channel import Allocation, ChannelRealization, Scenario

__all__ = [
    "ChipModel",
    "EnergyReport",
    "e_mac",
    "e_compute_device",
    "e_compute_round",
    "payload_bits",
    "upload_latency",
    "fronthaul_latency",
    "e_trans_round",
    "expected_total_energy",
]


@dataclass(frozen=True)
class ChipModel:
    """Precision-scalable QNN accelerator parameters and per-round workload."""

    A: float = 3.7e-12        # full-precision MAC energy, J
    alpha_chip: float = 1.25  # MAC energy precision exponent
    c_max: int = 32           # native full precision, bits
    u: int = 64               # MAC array parallelism (lanes)
    n_mac: float = 0.37e6     # MAC count per local step
    n_w: float = 0.28e6       # weight count (model dimension)
    o_s: float = 2266.0       # largest layer output size
    I: int = 5                # local SGD steps per round

    def __post_init__(self):
        if self.A <= 0 or self.alpha_chip <= 0 or self.c_max < 1 or self.u < 1:
            raise ValueError("A, alpha_chip must be > 0; c_max, u >= 1")
        if self.n_mac < 0 or self.n_w < 0 or self.o_s < 0 or self.I < 0:
            raise ValueError("workload counts must be >= 0")


def _check_prec(c_prec: int, chip: ChipModel):
    if not (1 <= c_prec <= chip.c_max):
        raise ValueError(f"c_prec must be in [1, {chip.c_max}], got {c_prec}")


def e_mac(c_prec: int, chip: ChipModel) -> float:
    """Energy of one c-bit MAC: A * (c/c_max)^alpha, J."""
    _check_prec(c_prec, chip)
    return chip.A * (c_prec / chip.c_max) ** chip.alpha_chip


def e_compute_device(c_prec: int, chip: ChipModel) -> float:
    """Energy of one local step on one device at precision ``c_prec``, J.

    Computation at c bits plus full-precision accumulation of the largest
    layer, plus weight and activation access costs (most-significant half at
    twice the least-significant cost, streaming scaled by sqrt(c/(u*c_max))).
    """
    em = e_mac(c_prec, chip)
    e_lb = em
    e_mb = 2.0 * em
    stream = np.sqrt(c_prec / (chip.u * chip.c_max))
    e_comp = em * chip.n_mac + 3.0 * chip.o_s * chip.A
    e_weights = e_mb * chip.n_w + e_lb * chip.n_mac * stream
    e_acts = 2.0 * e_mb * chip.o_s + e_lb * chip.n_mac * stream
    return float(e_comp + e_weights + e_acts)


def e_compute_round(c_prec: int, chip: ChipModel, n_devices: int) -> float:
    """Compute energy of one round: I local steps on each of ``n_devices``, J."""
    if n_devices < 0:
        raise ValueError("n_devices must be >= 0")
    return chip.I * n_devices * e_compute_device(c_prec, chip)


def payload_bits(chip: ChipModel, c_prec: int) -> float:
    """Uplink payload for one model update at precision ``c_prec``, bits."""
    _check_prec(c_prec, chip)
    return chip.n_w * c_prec


# ---------------------------------------------------------------- latencies


def upload_latency(scn: "Scenario", ch: "ChannelRealization", alloc: "Allocation", k: int) -> float:
    """Seconds for device k to push one quantized update uplink (inf at zero rate)."""
    from .channel import device_rate

    rate = device_rate(scn, ch, alloc, k)
    pay = payload_bits(scn.chip, alloc.c_prec)
    if rate <= 0.0:
        return np.inf if pay > 0 else 0.0
    return pay / rate


def _fronthaul_rates(scn: "Scenario", alloc: "Allocation") -> np.ndarray:
    """Per-RRH fronthaul rate sum_n 2B c_{m,n} / N, bit/s, shape (M,)."""
    return 2.0 * scn.B * alloc.c_bits.sum(axis=1) / scn.N


def fronthaul_latency(scn: "Scenario", alloc: "Allocation", k: int, m: int) -> float:
    """Seconds for RRH m to forward device k's share of the quantized samples."""
    pay = payload_bits(scn.chip, alloc.c_prec)
    c_mk = float(alloc.c_bits[m, scn.sc_map[k]].sum())
    g_m = _fronthaul_rates(scn, alloc)[m]
    if g_m <= 0.0:
        return np.inf if pay * c_mk > 0 else 0.0
    return 2.0 * pay * c_mk / g_m


# ---------------------------------------------------------------- energies


def _trans_components(scn, ch, alloc, devices=None):
    """Uplink and fronthaul energy of one round, per device and per RRH."""
    from .channel import all_device_rates

    if devices is None:
        devices = np.arange(scn.K)
    devices = np.asarray(devices, int)
    rates = all_device_rates(scn, ch, alloc)
    pay = payload_bits(scn.chip, alloc.c_prec)
    p_tot = alloc.p.sum(axis=1)

    e_dev = np.zeros(scn.K)
    for k in devices:
        if p_tot[k] == 0.0:
            continue  # silent device: no upload, no uplink energy
        if rates[k] <= 0.0:
            raise InfeasibleAllocationError(
                f"device {k} transmits with zero achievable rate"
            )
        e_dev[k] = pay / rates[k] * p_tot[k]

    # RRH m forwards at power P_m = G_m * P_fl_m for 2*pay*C_{m,k}/G_m seconds,
    # so the rate G_m cancels and each device costs 2*pay*C_{m,k}*P_fl_m joules
    g_m = _fronthaul_rates(scn, alloc)
    p_m = g_m * scn.P_fl
    e_fh = np.zeros(scn.M)
    for m in range(scn.M):
        for k in devices:
            c_mk = float(alloc.c_bits[m, scn.sc_map[k]].sum())
            if pay * c_mk == 0.0:
                continue
            lat = 2.0 * pay * c_mk / g_m[m]
            e_fh[m] += lat * p_m[m]
    return e_dev, e_fh


def e_trans_round(scn, ch, alloc, devices=None) -> float:
    """Transmission energy of one round over ``devices`` (default: all), J."""
    e_dev, e_fh = _trans_components(scn, ch, alloc, devices)
    return float(e_dev.sum() + e_fh.sum())


@dataclass
class EnergyReport:
    """Expected-energy breakdown; per-round fields carry the K_bar/K sampling weight."""

    rounds_T: float
    e_compute_per_round: float
    e_device_tx_per_round: float
    e_fronthaul_per_round: float
    total: float
    per_device_tx: np.ndarray    # (K,) expected per-round uplink J per device
    per_rrh_fronthaul: np.ndarray  # (M,) expected per-round fronthaul J per RRH
    c_prec: int

    def to_record(self) -> dict:
        return {
            "rounds_T": self.rounds_T,
            "e_compute_per_round": self.e_compute_per_round,
            "e_device_tx_per_round": self.e_device_tx_per_round,
            "e_fronthaul_per_round": self.e_fronthaul_per_round,
            "total": self.total,
            "c_prec": self.c_prec,
            "per_device_tx": [float(x) for x in self.per_device_tx],
            "per_rrh_fronthaul": [float(x) for x in self.per_rrh_fronthaul],
        }


def expected_total_energy(scn, ch, alloc) -> EnergyReport:
    """Expected energy to reach the accuracy target under the given allocation.

    Round count comes from the convergence bound at the allocation's upload
    precision; per-round energy sums compute, uplink, and fronthaul over the
    full population and scales by the sampled fraction K_bar/K.
    """
    from .channel import check_allocation

    check_allocation(scn, alloc)
    t_raw = rounds_for_accuracy(scn.conv, alloc.c_prec)
    if t_raw <= 0.0:
        raise AccuracyUnreachableError(
            f"accuracy target {scn.conv.eps_target} already met at initialization "
            f"(T = {t_raw:.3g} <= 0)"
        )
    rounds = max(t_raw, 1.0)
    weight = scn.conv.K_bar / scn.K
    e_comp = weight * e_compute_round(alloc.c_prec, scn.chip, scn.K)
    e_dev, e_fh = _trans_components(scn, ch, alloc)
    e_dev = weight * e_dev
    e_fh = weight * e_fh
    per_round = e_comp + e_dev.sum() + e_fh.sum()
    return EnergyReport(
        rounds_T=rounds,
        e_compute_per_round=e_comp,
        e_device_tx_per_round=float(e_dev.sum()),
        e_fronthaul_per_round=float(e_fh.sum()),
        total=float(rounds * per_round),
        per_device_tx=e_dev,
        per_rrh_fronthaul=e_fh,
        c_prec=alloc.c_prec,
    )
