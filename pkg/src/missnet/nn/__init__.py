from .layers import (
    Layer,
    NeutralizerMatrix,
    activate,
    backward,
    dense_forward,
    export_neutralizers,
    forward,
    nan_dense_backward,
    nan_dense_forward,
    stabilize,
    substituted_preactivation,
)
from .network import Head, Network, build_network, preset
from .optim import Adam, OptimizerConfig, SGD, optimizer_step
from .serialize import load_network, neutralizer_tables, save_network, write_neutralizers
from .train import TrainConfig, TrainHistory, train

__all__ = [
    "Layer", "NeutralizerMatrix", "activate", "backward", "dense_forward", "export_neutralizers",
    "forward", "nan_dense_backward", "nan_dense_forward", "stabilize", "substituted_preactivation",
    "Head", "Network", "build_network", "preset", "Adam", "OptimizerConfig", "SGD",
    "optimizer_step", "load_network", "neutralizer_tables", "save_network", "write_neutralizers",
    "TrainConfig", "TrainHistory", "train",
]
