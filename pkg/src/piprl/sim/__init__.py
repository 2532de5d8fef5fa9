from .floorplan import CELL_SIZE, FloorPlan, MapFormatError, dump_map, load_map, read_map
from .propagation import (DEFAULT_MODEL, NO_SIGNAL, PathLossModel, PropagationResult, RayPath,
                          compute_snr, trace_paths)
from .env import (A_F, A_L, A_R, ACTIONS, FORWARD_STEP, GOAL_RADIUS, TURN_STEP, AgentState,
                  NoiseModel, Observation, PropagationConfig, observe, propagate, step_agent,
                  target_found)
