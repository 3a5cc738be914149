from .rewards import RewardSpec, reward
from .policy import PolicyParams, act, init_params, load_checkpoint, save_checkpoint
from .ppo import Batch, PPOConfig, TrainingError, loss_and_grad, ppo_update
from .gae import gae
from .env import SessionEnv
from .train import TrainResult, evaluate_policy, fine_tune_from_logs, train

__all__ = [
    "RewardSpec", "reward",
    "PolicyParams", "act", "init_params", "load_checkpoint", "save_checkpoint",
    "Batch", "PPOConfig", "TrainingError", "loss_and_grad", "ppo_update",
    "gae", "SessionEnv",
    "TrainResult", "evaluate_policy", "fine_tune_from_logs", "train",
]
