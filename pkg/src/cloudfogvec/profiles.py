"""Equipment classes and their default power/capacity parameters.

Processor capacities are in MIPS, network capacities in Mb/s. Marginal
efficiency is derived from the linear power profile, never stored.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Mapping

TAU = 0.06


class DeviceKind(str, enum.Enum):
    SN = "SN"
    AP = "AP"
    ONU = "ONU"
    OLT = "OLT"
    MS = "MS"
    MR = "MR"
    RR = "RR"
    CR = "CR"
    CS = "CS"
    CC = "CC"
    MFR = "MFR"
    MFS = "MFS"
    MF = "MF"
    LFR = "LFR"
    LFS = "LFS"
    LF = "LF"
    NF = "NF"
    VN = "VN"
    VW = "VW"

    @property
    def is_processor(self) -> bool:
        return self in PROCESSING_KINDS


PROCESSING_KINDS = frozenset(
    {DeviceKind.CC, DeviceKind.MF, DeviceKind.LF, DeviceKind.NF, DeviceKind.VN}
)

# kinds whose idle power is only partly attributed to the application
SHARED_KINDS = frozenset(
    {
        DeviceKind.RR,
        DeviceKind.MR,
        DeviceKind.MS,
        DeviceKind.OLT,
        DeviceKind.CR,
        DeviceKind.CS,
        DeviceKind.MFR,
        DeviceKind.MFS,
        DeviceKind.LFR,
        DeviceKind.LFS,
    }
)


@dataclass(frozen=True)
class DeviceProfile:
    kind: DeviceKind
    p_max: float
    p_idle: float
    capacity: float
    idle_fraction: float = 1.0
    pue: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_idle <= self.p_max:
            raise ValueError(f"{self.kind.value}: need 0 <= p_idle <= p_max")
        if self.capacity <= 0:
            raise ValueError(f"{self.kind.value}: capacity must be positive")
        if self.pue < 1.0:
            raise ValueError(f"{self.kind.value}: pue must be >= 1")
        if not 0.0 <= self.idle_fraction <= 1.0:
            raise ValueError(f"{self.kind.value}: idle_fraction must lie in [0, 1]")

    @property
    def marginal(self) -> float:
        """Watts per unit of load (W/MIPS or W/(Mb/s))."""
        return (self.p_max - self.p_idle) / self.capacity

    @property
    def charged_idle(self) -> float:
        """Idle watts charged when the device is activated, PUE included."""
        if self.kind is DeviceKind.VN:
            return 0.0
        return self.pue * self.idle_fraction * self.p_idle


def mips_capacity(cores: float, clock_ghz: float, ipc: float) -> float:
    """Instructions per second of a processor, in MIPS."""
    if cores <= 0 or clock_ghz <= 0 or ipc <= 0:
        raise ValueError("cores, clock and IPC must be positive")
    return cores * clock_ghz * 1000.0 * ipc


PUE_CC = 1.1
PUE_MF = 1.4
PUE_LF = 1.5
PUE_NET = 1.5


def default_profiles(tau: float = TAU) -> dict[DeviceKind, DeviceProfile]:
    K = DeviceKind

    def net(kind, p_max, p_idle, gbps, pue, shared=True):
        frac = tau if shared else 1.0
        return DeviceProfile(kind, p_max, p_idle, gbps * 1000.0, frac, pue)

    profiles = [
        DeviceProfile(K.CC, 115.0, 69.0, mips_capacity(10, 3.6, 4), 1.0, PUE_CC),
        DeviceProfile(K.MF, 85.0, 51.0, mips_capacity(10, 2.2, 4), 1.0, PUE_MF),
        DeviceProfile(K.LF, 85.0, 51.0, mips_capacity(8, 1.7, 4), 1.0, PUE_LF),
        DeviceProfile(K.NF, 15.0, 9.0, mips_capacity(4, 1.5, 1), 1.0, 1.0),
        DeviceProfile(K.VN, 10.0, 6.0, mips_capacity(2, 0.8, 2), 1.0, 1.0),
        net(K.RR, 638.0, 574.2, 40, PUE_NET),
        net(K.MR, 25.0, 22.5, 40, PUE_NET),
        net(K.MS, 500.0, 450.0, 1800, PUE_NET),
        net(K.OLT, 50.0, 45.0, 1920, PUE_NET),
        net(K.ONU, 15.0, 13.5, 10, 1.0, shared=False),
        net(K.AP, 11.0, 4.8, 1.167, 1.0, shared=False),
        net(K.CR, 25.0, 22.5, 40, PUE_CC),
        net(K.CS, 460.0, 414.0, 600, PUE_CC),
        net(K.MFR, 13.0, 11.7, 40, PUE_MF),
        net(K.MFS, 245.0, 220.5, 200, PUE_MF),
        net(K.LFR, 13.0, 11.7, 40, PUE_LF),
        net(K.LFS, 245.0, 220.5, 200, PUE_LF),
        net(K.VW, 2.5, 1.5, 0.0722, 1.0, shared=False),
    ]
    return {p.kind: p for p in profiles}


def apply_overrides(
    profiles: Mapping[DeviceKind, DeviceProfile], overrides: Mapping[str, Mapping]
) -> dict[DeviceKind, DeviceProfile]:
    """Return a copy of ``profiles`` with per-kind field overrides applied.

    ``overrides`` maps a kind code (``"NF"``) to field values, e.g.
    ``{"NF": {"p_idle": 8.0}}``.
    """
    out = dict(profiles)
    for code, fields in overrides.items():
        kind = DeviceKind(code)
        if kind is DeviceKind.SN:
            raise ValueError("source nodes carry no profile")
        unknown = set(fields) - {"p_max", "p_idle", "capacity", "idle_fraction", "pue"}
        if unknown:
            raise ValueError(f"unknown profile fields for {code}: {sorted(unknown)}")
        out[kind] = replace(out[kind], **{k: float(v) for k, v in fields.items()})
    return out
