"""Posterior sampling for linear inverse problems with (latent) diffusion priors
in the linear-subspace model: DPS, GML-DPS and PSLD with exact-recovery checks."""

from .diffusion import (DiffusionSchedule, TwoStepDenoiser, closed_form_theta, forward_step,
                        posterior_mean_x0, posterior_mean_z0, regression_fit_theta)
from .errors import AssumptionViolation, ConfigError, DimensionError, RankDeficiencyError
from .estimators import MeasurementTransformer, SubspacePosteriorSampler, fit_subspace
from .linmodel import (AnalyticVae, LinearVae, SubspaceModel, make_subspace_model, sample_signal,
                       sample_signals, vae_decode, vae_empirical_losses, vae_encode)
from .metrics import psnr, ssim
from .operators import (Measurement, MeasurementOperator, check_assumption2, make_box_inpaint,
                        make_destripe, make_gaussian_blur, make_identity, make_motion_blur,
                        make_random_inpaint, make_super_resolution, measure, operator_from_dict)
from .oracle import oracle_recover, relative_error
from .samplers import (MatrixStep, SamplerConfig, SampleTrace, dps_multi_step, dps_two_step,
                       gml_dps_multi_step, gml_dps_two_step, latent_dps_multi_step,
                       psld_multi_step, psld_two_step, run_sampler, solve_gluing)

__version__ = "0.1.0"
