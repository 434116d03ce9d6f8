"""Thermodynamics-aware neural networks for incremental constitutive
modeling, with the analytic elasto-plastic generators and the standard
two-network baseline they are measured against."""

__version__ = "0.1.0"

from .activations import ACTIVATION_TAGS, activation_eval
from .materials import MATERIAL_CASES, MaterialState, Model1D, Model3D
from .network import AffineNorm, DenseLayer, Network, forward, input_jacobian
from .losses import LossSpec, LossTerm, param_gradients
from .optimizer import Nadam, nadam_step
from .training import TrainConfig, train
from .integrator import incremental_rates, integrate_step
from .sampling import Dataset, GenConfig, generate_dataset, sample_initial_state
from .paths import loading_path
from .tann_model import TannModel, tann_forward, tann_train, recall, consistency_check
from .baseline import BaselineModel, ann_forward, ann_train, reconstruct_thermo
