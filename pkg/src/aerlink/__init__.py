"""Simulator and bounded model checker for a bi-directional AER bus link."""

from .checker import ExplorationBound, Mutations, check_all, explore
from .errors import (AerLinkError, CalibrationError, ConfigurationError, OscillationError,
                     ProtocolViolation, SimulationViolation)
from .harness import (Workload, calibrate, measure_energy, run_workload, saturated_workload,
                      workload_from_dict)
from .kernel import NS, DelayProfile, Kernel, Level
from .link import BusLink, make_link, switch_episodes
from .transceiver import Mode, ResetConfig, Transceiver, TransceiverState, sw_control_outputs

__all__ = [
    "AerLinkError", "BusLink", "CalibrationError", "ConfigurationError", "DelayProfile",
    "ExplorationBound", "Kernel", "Level", "Mode", "Mutations", "NS", "OscillationError",
    "ProtocolViolation", "ResetConfig", "SimulationViolation", "Transceiver", "TransceiverState",
    "Workload", "calibrate", "check_all", "explore", "make_link", "measure_energy", "run_workload",
    "saturated_workload", "switch_episodes", "sw_control_outputs", "workload_from_dict",
]
