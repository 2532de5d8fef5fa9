"""Tasks, training, evaluation, baselines, ablations and the CLI."""
from .config import ConfigError, RunConfig, load_config, parse_config
from .evaluate import EvalReport, evaluate
from .tasks import CATEGORIES, TaskSpec, generate_tasks, shortest_actions
from .train import TrainResult, train

__all__ = [
    "ConfigError", "RunConfig", "load_config", "parse_config", "EvalReport", "evaluate",
    "CATEGORIES", "TaskSpec", "generate_tasks", "shortest_actions", "TrainResult", "train",
]
