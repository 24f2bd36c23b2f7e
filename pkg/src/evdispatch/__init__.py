"""EV charging dispatch testbed.

A road network with congestion-dependent speeds, a one-day mesoscopic
traffic/charging simulator, an episodic environment where a single EV picks
a charging station, baseline dispatch policies, and numpy implementations
of DQN and Dueling Double-DQN to learn the dispatch.
"""
from .backend import COMPILED, backend_name
from .dqn import (AdamState, DuelingParams, MlpParams, QTrainer, ReplayBuffer,
                  TargetCopy, TrainConfig, Transition, adam_step, backward,
                  ddqn_target, dqn_target, dueling_forward, forward,
                  load_checkpoint, mse_loss, q_values, save_checkpoint,
                  sync_target, train)
from .env import (ChargingEnv, EnvConfig, EpisodeConfig, Observation,
                  StepResult, episode_reward)
from .network import (Edge, NetworkParseError, NetworkValidationError, Node,
                      Path, RoadNetwork, Station, gen_grid, load_network,
                      network_to_doc, save_network, shortest_path,
                      station_distances, validate_network)
from .policies import (GreedyPolicy, NoReachableStationError, QPolicy,
                       RandomPolicy, epsilon_greedy, greedy_action)
from .sim import (DemandProfile, SimParams, Vehicle, WorldState, charge_demand,
                  enroute_counts, station_load, step, world_init)

__version__ = "0.1.0"

__all__ = [
    "COMPILED", "backend_name", "__version__",
    "Node", "Edge", "Station", "Path", "RoadNetwork",
    "NetworkParseError", "NetworkValidationError",
    "load_network", "save_network", "network_to_doc", "validate_network",
    "gen_grid",
    "shortest_path", "station_distances",
    "SimParams", "DemandProfile", "WorldState", "Vehicle",
    "world_init", "step", "station_load", "enroute_counts", "charge_demand",
    "ChargingEnv", "EnvConfig", "EpisodeConfig", "Observation", "StepResult",
    "episode_reward",
    "RandomPolicy", "GreedyPolicy", "QPolicy", "NoReachableStationError",
    "epsilon_greedy", "greedy_action",
    "MlpParams", "DuelingParams", "forward", "dueling_forward", "q_values",
    "backward", "mse_loss", "dqn_target", "ddqn_target", "Transition",
    "ReplayBuffer", "TargetCopy", "sync_target", "AdamState", "adam_step",
    "TrainConfig", "QTrainer", "train", "save_checkpoint", "load_checkpoint",
]
