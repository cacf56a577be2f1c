"""Singular-layer PINNs for convection-dominated singularly perturbed
convection-diffusion problems on channel, circular, and elliptical domains.

The ansatz multiplies a small hard-constraint network by boundary masks
and enriches it with the analytic boundary-layer corrector, so the stiff
layer content never has to be learned; training minimizes the strong-form
residual on a uniform collocation grid.
"""

from .analysis import (ErrorReport, ErrorRow, PRESETS, epsilon_sweep,
                       lemma_norm_scaling, relative_l2_error, run_benchmark,
                       scaled_exponential_l1_mass)
from .correctors import (AnsatzSpec, CutoffFn, assemble_ansatz, corrector_factor,
                         cutoff_eval, regularizer_C)
from .domains import (DomainSpec, SampleGrid, elliptic_parameters, metric_H,
                      split_layer_region, to_cartesian, uniform_grid)
from .nets import (DerivativeBundle, MlpNet, NetworkParams, TwoLayerNet,
                   eval_network, init_params, make_network,
                   param_gradient_of_bundle)
from .reference import (asymptotic_reference, channel_exact, compatibility_check,
                        limit_solution, make_forcing, oscillation_exact,
                        time_circle_exact)
from .residuals import (ProblemSpec, ResidualProgram, apply_operator,
                        expanded_residual, psi_dominant)
from .training import TrainConfig, TrainReport, loss, loss_gradient, train

__version__ = "0.1.0"
