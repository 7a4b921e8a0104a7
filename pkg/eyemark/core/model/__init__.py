from .network import EyeLandmarkNet, ModelConfig, ModelOutput
from .optimizer import OptimizerConfig, OptimizerState, rmsprop_update
from .checkpoint import CheckpointManifest, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, TrainingResult, train
from .ablation import AblationConfig, AblationReport, run_ablation
