"""Certified ReLU network approximations built from Fourier features residual networks."""
from .calculus import compose, compose_padded, linear_combine, linear_combine_width, shift_input
from .cosine import W_COS, build_cosine, build_periodizer, build_product, build_square
from .exceptions import (CertificationError, CompositionDomainError, ConversionError, DataError,
                         DocumentError, DomainError, FFReluError, FittingError, ShapeError)
from .fourier import (CosineTerm, FourierFeaturesNetwork, FourierFeaturesRegressor, beta_evaluate,
                      ff_evaluate, ff_intermediate_bound, fit_ff_layerwise, to_cosine_form)
from .harness import (TargetFunction, alpha, alpha_table, bound_rhs, l2_error, sine_integral,
                      sup_error, target_library)
from .network import (AffineLayer, DomainBox, PiecewiseLinear1D, ReluNetwork, constant_net,
                      exact_pwl_1d, extend_depth, identity_net, pad_width, validate)
from .pipeline import (ApproxReport, ComplexityLedger, EpsBudget, ReluApproximator,
                       approximate_target, build_beta_net, build_dot_product_net,
                       build_ff_approx, build_z_net)
from .special import (ChannelLayout, SpecialNetwork, special_iterated_sum, special_recursive,
                      special_sum, to_standard)

__version__ = "0.1.0"
