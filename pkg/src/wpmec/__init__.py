"""Online scheduling for wireless-powered mobile edge computing.

A single access point charges devices over the air, then collects their
offloaded task bits over shared uplink time. The main scheduler runs a
drift-plus-penalty rule per slot, with a variant that tolerates outdated
network-side queue knowledge; several myopic baselines are included for
comparison.
"""

from .baselines import step_eot_on, step_gan, step_hdo_on, step_pfn
from .config import (ALGORITHMS, ConfigError, NetworkConfig, default_config,
                     load_config, save_config)
from .env import Environment, SlotState, mean_gain, sample_slot
from .harness import (Trace, run, seed_mean, summary_csv, sweep, trace_csv)
from .metrics import (RunSummary, jain_index, summarize, time_average,
                      utility, verify_invariants)
from .model import (harvested_energy, offload_bits, type1_power,
                    update_ap_queue, update_battery, update_device_queue)
from .scheduler import (FeedbackState, SlotDecision, SystemState, TraceRecord,
                        compute_theta, feedback_update, step_ers_on,
                        step_ers_rn)
from .solver import (AllocationInstance, AllocationResult, InfeasibleError,
                     SolverError, grid_oracle, objective_value,
                     optimal_collection, prune, solve_joint)

__all__ = [
    "ALGORITHMS", "AllocationInstance", "AllocationResult", "ConfigError",
    "Environment", "FeedbackState", "InfeasibleError", "NetworkConfig",
    "RunSummary", "SlotDecision", "SlotState", "SolverError", "SystemState",
    "Trace", "TraceRecord", "compute_theta", "default_config",
    "feedback_update", "grid_oracle", "harvested_energy", "jain_index",
    "load_config", "mean_gain", "objective_value", "offload_bits",
    "optimal_collection", "prune", "run", "sample_slot", "save_config",
    "seed_mean", "step_eot_on", "step_ers_on", "step_ers_rn", "step_gan",
    "step_hdo_on", "step_pfn", "summarize", "summary_csv", "sweep",
    "time_average", "trace_csv", "type1_power", "update_ap_queue",
    "update_battery", "update_device_queue", "utility", "verify_invariants",
]

__version__ = "0.1.0"
