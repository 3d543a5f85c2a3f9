"""Networks, loss, optimizer and training loop."""
from fishingnet.model.adam import AdamState, MissingGradError, adam_step
from fishingnet.model.gridnet import GridNet, GridNetConfig, probs_to_sequences, sequences_to_probs
from fishingnet.model.loss import LossWeights, loss, per_class_loss, sequence_loss
from fishingnet.model.train import (MODALITIES, CheckpointMismatchError, DivergenceError, TrainConfig,
                                    TrainResult, build_network, load_model, predict, prepare_inputs,
                                    prepare_labels, save_model, train)
from fishingnet.model.visionnet import OrthoConfig, OrthoTransform, VisionNet, VisionNetConfig, ortho_transform

__all__ = [
    "AdamState", "CheckpointMismatchError", "DivergenceError", "GridNet", "GridNetConfig", "LossWeights",
    "MODALITIES", "MissingGradError", "OrthoConfig", "OrthoTransform", "TrainConfig", "TrainResult",
    "VisionNet", "VisionNetConfig", "adam_step", "build_network", "load_model", "loss", "ortho_transform",
    "per_class_loss", "predict", "prepare_inputs", "prepare_labels", "probs_to_sequences",
    "save_model", "sequence_loss", "sequences_to_probs", "train",
]
