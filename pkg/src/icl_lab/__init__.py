"""In-context weight-prediction lab for linear regression with linear attention.

Pipeline: pretraining initialization in closed form, supervised (SFT) and
outcome-supervised (OS) post-training, exact and Monte-Carlo post-test error
evaluation, and a random-matrix asymptotic predictor for the error as a
function of the data aspect ratio.
"""

from .errors import (ConfigError, DivergenceError, DomainError, IclLabError,
                     NumericalError, PoleError, SingularityError)
from .evaluator import ErrorReport, posttest_error_exact, posttest_error_mc
from .harness import (EXPERIMENTS, SCHEMAS, ExperimentConfig, run_experiment,
                      validate_config, write_csv)
from .lsa import LsaParams, Rollout, cot_rollout, lsa_forward_embedding, pretrained_init
from .numerics import RngStream, pinv, psd_root, sample_gaussian, spectral_radius
from .os_sup import (OsConfig, StabilityReport, os_gd, os_grad,
                     os_hessian_bound, os_loss, stability_report)
from .sft import (SftConfig, c_k, sft_closed_form, sft_first_order, sft_gd,
                  sft_loss, sft_population_limit)
from .taskdata import (CovarianceSpec, PromptBatch, build_phi, gamma0,
                       gen_prompt_batch, materialize)
from .theory import (TheoryComponents, TheoryConstants, TheoryInputs, solve_q,
                     theory_components, theory_constants, theory_endpoints)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
