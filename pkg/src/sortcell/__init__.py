"""Digital twin of a conveyor color-sorting workcell.

A PLC node, a robot controller, an Arduino filter/LED controller, and a
monochrome vision model cooperate over a simulated cyclic I/O bus to sort
colored parts. Runs are deterministic: a scenario and seed always reproduce
the same event trace.
"""

from .engine import Engine, SimEvent
from .scenario import Scenario, ScenarioInvalid, load as load_scenario

__version__ = "0.1.0"

__all__ = ["Engine", "SimEvent", "Scenario", "ScenarioInvalid", "load_scenario"]
