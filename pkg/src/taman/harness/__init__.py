"""Data formats, class maps, synthetic data, training, evaluation and ablations."""

from .ablation import AblationRow, format_table, run_ablation
from .evaluation import EvalReport, evaluate
from .formats import Checkpoint, Manifest, load_checkpoint, load_manifest
from .synthetic import SyntheticSpec, generate_synthetic, synthesize
from .training import RunConfig, TrainResult, train
