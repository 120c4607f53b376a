"""Minimum-power task placement over cloud, fog and vehicular edge tiers."""

from .harness import RunRecord, check_invariants, report, run_grid, run_sweep, savings
from .milp import MilpModel, build_model, export_model, read_lp, read_mps
from .power import LoadAssignment, PowerBreakdown, device_power, linear_power, total_power
from .profiles import DeviceKind, DeviceProfile, default_profiles, mips_capacity
from .solver import Solution, brute_force, solve, verify
from .topology import Topology, build, build_multi_zone, build_one_zone
from .workload import Scenario, Task, availability_mask, generate_tasks, make_scenario

__version__ = "0.1.0"

__all__ = [
    "DeviceKind", "DeviceProfile", "default_profiles", "mips_capacity",
    "Topology", "build", "build_one_zone", "build_multi_zone",
    "linear_power", "device_power", "total_power", "LoadAssignment", "PowerBreakdown",
    "Task", "Scenario", "availability_mask", "generate_tasks", "make_scenario",
    "MilpModel", "build_model", "export_model", "read_lp", "read_mps",
    "Solution", "solve", "verify", "brute_force",
    "RunRecord", "run_sweep", "run_grid", "savings", "report", "check_invariants",
]
