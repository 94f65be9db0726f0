"""Traction-separation networks with thermodynamic consistency penalties."""

from ._tcnn import (
    Dataset,
    Error,
    InvalidArgument,
    IoError,
    PPRParams,
    TractionModel,
    WeightFactors,
    audit,
    gen_synthetic_dataset,
    optimize_weights,
    ppr_potential,
    ppr_traction,
    reparam_to_weights,
    train,
    weights_to_reparam,
)

__all__ = [
    "Dataset",
    "Error",
    "InvalidArgument",
    "IoError",
    "PPRParams",
    "TractionModel",
    "WeightFactors",
    "audit",
    "gen_synthetic_dataset",
    "optimize_weights",
    "ppr_potential",
    "ppr_traction",
    "reparam_to_weights",
    "train",
    "weights_to_reparam",
]
