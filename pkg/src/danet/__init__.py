"""Shallow domain-adaptive neural classifier with an MMD penalty."""

from .core import RandomStream, as_matrix, augment, bernoulli_mask, map_elementwise, matmul, rand_uniform, transpose
from .data import (
    Dataset,
    NormStats,
    ShiftSpec,
    gen_synthetic_shift,
    load_csv,
    one_hot,
    save_csv,
    zscore_apply,
    zscore_fit,
)
from .errors import (
    ConfigError,
    DanetError,
    DataError,
    DegenerateBandwidthError,
    NonFiniteError,
    ShapeError,
)
from .kernel import (
    KernelConfig,
    gaussian_kernel,
    gram,
    median_heuristic_bandwidth,
    mmd_sq_biased,
    mmd_sq_grad_u1,
)
from .network import (
    DannParams,
    ForwardCache,
    Velocity,
    backward,
    forward,
    init_u1,
    init_u2,
    l2_penalty,
    nll_loss,
    parse_model,
    predict,
    print_model,
    sgd_momentum_step,
    softmax,
    softplus,
)
from .pretrain import (
    DaeParams,
    DaeResult,
    DaeTrainConfig,
    NoiseSpec,
    corrupt,
    dae_train,
    init_dae_params,
    init_from_dae,
    parse_dae,
    print_dae,
)
from .trainer import (
    TrainConfig,
    TrainReport,
    evaluate,
    pretrain_stream,
    report_to_csv,
    semi_supervised_select,
    train_dann,
    train_nn,
)

__all__ = [
    "ConfigError",
    "DanetError",
    "DannParams",
    "DaeParams",
    "DaeResult",
    "DaeTrainConfig",
    "DataError",
    "Dataset",
    "DegenerateBandwidthError",
    "ForwardCache",
    "KernelConfig",
    "NoiseSpec",
    "NonFiniteError",
    "NormStats",
    "RandomStream",
    "ShapeError",
    "ShiftSpec",
    "TrainConfig",
    "TrainReport",
    "Velocity",
    "as_matrix",
    "augment",
    "backward",
    "bernoulli_mask",
    "corrupt",
    "dae_train",
    "evaluate",
    "forward",
    "gaussian_kernel",
    "gen_synthetic_shift",
    "gram",
    "init_dae_params",
    "init_from_dae",
    "init_u1",
    "init_u2",
    "l2_penalty",
    "load_csv",
    "map_elementwise",
    "matmul",
    "median_heuristic_bandwidth",
    "mmd_sq_biased",
    "mmd_sq_grad_u1",
    "nll_loss",
    "one_hot",
    "parse_dae",
    "parse_model",
    "predict",
    "pretrain_stream",
    "print_dae",
    "print_model",
    "rand_uniform",
    "report_to_csv",
    "save_csv",
    "semi_supervised_select",
    "sgd_momentum_step",
    "softmax",
    "softplus",
    "train_dann",
    "train_nn",
    "transpose",
    "zscore_apply",
    "zscore_fit",
]

__version__ = "0.1.0"
