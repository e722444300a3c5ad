"""Multi-source video domain adaptation with temporal attentive moment alignment."""

from .alignment import DomainBatchSet, LossBreakdown, MomentConfig, moment_discrepancy, taman_loss
from .attention import AttentionWeights, combine_weights, confidence_weight, dominance_weights, target_weights
from .ensemble import ensemble_predict, ensemble_variant, prediction_weights
from .model import ModelParams
from .temporal import ScaleConfig, local_temporal_feature, sample_clips

__version__ = "0.1.0"
