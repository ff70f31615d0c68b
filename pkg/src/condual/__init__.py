"""Conditional extension of finite-dimensional dual pairs over finite Boolean algebras."""

__version__ = "0.1.0"

from .algebra import AlgebraMismatchError, Condition, Partition, PartitionError, all_conditions, is_partition, refine
from .values import (
    CondExtReal,
    CondReal,
    IndeterminateFormError,
    RestrictedValue,
    StepValue,
    agreement,
    concatenate,
    ess_inf,
    ess_sup,
    restrict,
    sub_inf_convention,
)
from .metric import CondSequence, CondVector, NotCauchyError, cond_limit, embed, is_cauchy, step_metric
from .pairing import DualPairConfig, SeparationError, dual_norm_c, norm_c, pairing_c, pairing_s, separate
from .functions import (
    BoxIndicator,
    Constant,
    FunctionDescriptor,
    MaxAffine,
    PiecewiseAffine1D,
    Quadratic,
    ScaledNorm,
)
from .conjugate import (
    GridFunction,
    GridSpec,
    NotProperError,
    biconjugate,
    check_duality,
    conjugate_brute,
    conjugate_fast,
    convex_envelope,
    is_lsc_convex,
    sample,
    tol_disc,
)
from .lsc import NotConvexError, WeakNeighborhood, cond_extend, is_lsc_at, lsc_value_weak, step_lift
from .bochner import FiniteMeasureSpace, L0Element, iso_to_cond, measure_algebra
