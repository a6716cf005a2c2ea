"""Inter-layer collision (IC) neurons and MP baselines in plain numpy."""

__version__ = "0.1.0"

from .errors import (ConfigError, ContractError, DimensionError, DivergenceError, FormatError,
                     ICNetError, LabelError, NumericError, VocabularyError)
from .numerics import Activation, activate, activate_grad, matmul, softmax, softmax_cross_entropy
from .ic_core import (XOR_CLOSED_FORM, ICParams, collision_unit, hyperplane_cos_angle,
                      ic_output, ic_preactivation, piecewise_branches)
from .layers import (Conv2D, Dense, LayerSpec, Linear, Network, Recurrent, build_network,
                     load_params, mp_twin, save_params)
from .grad import GradReport, finite_diff, gradcheck
from .train import RunRecord, TrainConfig, adadelta_step, evaluate, smooth_curve, train, train_repeats
from .cost import CostReport, compare_to_twin, count_macs, count_params
from .data import Dataset, load_mnist_idx, load_uci_csv, make_xor, split
