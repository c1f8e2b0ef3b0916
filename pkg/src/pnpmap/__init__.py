"""Plug-and-play MAP estimation for imaging inverse problems.

A numpy library implementing four plug-and-play solvers (stochastic
gradient, ADMM, forward-backward and backward-backward splitting) with
closed-form MMSE denoisers that make score identities and convergence
behaviour exactly checkable at desk scale.
"""

from .denoisers import (GaussianMMSEDenoiser, GmmMMSEDenoiser,
                        LipschitzProbeReport, NonLocalMeansDenoiser,
                        denoiser_score, probe_lipschitz)
from .diagnostics import (GateReport, check_tweedie, gate_admm_ryu,
                          gate_fbs_ryu, gate_xu_mmse, mmse_gap,
                          neg_log_posterior_smoothed)
from .exceptions import (AdapterError, ConfigurationError, DivergenceError,
                         NumericError, ShapeMismatchError)
from .external import ExternalDenoiser
from .harness import (ExperimentConfig, MetricsRow, degrade, initial_guess,
                      run_experiment)
from .io import read_image, write_image
from .likelihoods import GaussianLikelihood, HardConstraintLikelihood
from .metrics import psnr, ssim
from .operators import (CircularConvolution, Identity, Mask, MaskSplit,
                        operator_norm_ata, uniform_kernel)
from .solvers import (FixedIterations, PsnrPlateau, ResidualTolerance,
                      RunTrace, SolverConfig, StepSchedule, coarse_to_fine,
                      delta_stable, pnp_admm, pnp_bbs, pnp_fbs, pnp_sgd,
                      reduced_space_sgd)
from .tv import total_variation, tv_l2

__version__ = "0.1.0"
