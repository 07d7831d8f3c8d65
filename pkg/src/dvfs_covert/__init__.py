"""Simulator and codecs for DVFS frequency-modulation covert channels on a
TrustZone-enabled heterogeneous SoC."""

from .attacks import AttackId, AttackReport, AttackScenario, default_scenario, run_attack
from .codec import BurstParams, DwellParams, EdgeParams
from .framing import frame_decode, frame_encode
from .soc import ClockController, ClockId, MasterId

__all__ = [
    "AttackId", "AttackReport", "AttackScenario", "default_scenario", "run_attack",
    "BurstParams", "DwellParams", "EdgeParams",
    "frame_decode", "frame_encode",
    "ClockController", "ClockId", "MasterId",
]
