"""Fault diagnosis of timed automata: static and dynamic observers,
observer synthesis, and mean-cost analysis."""
from .core import (FAULT, TAU, TRUE, Atom, Edge, Guard, InvalidRun, Run, State, TAError,
                   TimedAutomaton, TimedWord, random_run, simulate, validate_run)
from .constructions import (Mask, apply_mask, build_fault_monitor, hide, identity_mask, product,
                            restrict_nonfaulty)
from .modelio import ModelError, load_ta, parse_ta, serialize_ta
from .region import Region, RegionGraph, RegionSpace, build_region_graph
from .diagnosis import (Verdict, Witness, check_delta_diag, check_diag, check_mask_diag,
                        min_cardinality, min_delta, min_mask, min_mask_size, min_sensor_set)
from .observer import (Observer, ObserverError, always_observe, check_obs_diag, load_observer,
                       min_delta_obs, observe, parse_observer, product_obs, validate_observer)
from .synthesis import (Resource, build_game, build_universal, extract_template, instantiate,
                        minimal_guards, solve_safety, synthesize)
from .cost import (ZenoCycleError, max_mean_cost, min_mean_cost, observer_cost, run_cost)

__version__ = "0.1.0"
