"""Particle-filter bridge interpolation in autoencoder latent spaces."""

from .bridge import Path, bridge_step, linear_path, sample_bridge, sample_bridge_joint_oracle
from .discriminator import DiscriminatorNet, LatentDataset, PriorSpec, TrainConfig, forward, train
from .errors import PfbiError
from .kernel import KernelParams, TimeGrid, build_covariance, kernel_eval
from .metrics import evaluate_method, mean_score, smoothness_score, variability_score
from .mvn import RngState, cholesky_jitter, condition, sample_mvn
from .smc import WeightSchedule, ess, resample_multinomial, smc_interpolate, step_weights
from .synthdata import SynthSpec, generate

__version__ = "1.0.0"
