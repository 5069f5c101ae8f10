"""Deterministic simulator for CT floods interleaved in a TSCH slotframe, with a 6TiSCH-minimal baseline."""

from .core import Frame, FrameKind, Rng, Topology
from .phy import CtTiming, PhyMode, messages_per_slotframe
from .scenario import ScenarioConfig, ScenarioError, load_scenario, parse_scenario
from .simengine import RunResult, run, run_matrix
from .tschmac import MacMode

__all__ = [
    "CtTiming", "Frame", "FrameKind", "MacMode", "PhyMode", "Rng", "RunResult",
    "ScenarioConfig", "ScenarioError", "Topology", "load_scenario",
    "messages_per_slotframe", "parse_scenario", "run", "run_matrix",
]
__version__ = "0.1.0"
