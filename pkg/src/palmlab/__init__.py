"""Exact Palm calculus for stationary random measures on finite Abelian groups."""

from .algebra import (
    ONE,
    SQRT2,
    ZERO,
    FiniteAbelianGroup,
    GMeasure,
    Scalar,
    cyclic,
    parse_group,
)
from .errors import (
    CapExceeded,
    ConfigError,
    InternalDefect,
    PalmLabError,
    PreconditionError,
)
from .existence import ExistenceVerdict, check_condition_5_1, construct_balancing_kernel
from .massstat import (
    check_theorem_7_2,
    example_6_5,
    example_7_1,
    is_mass_stationary,
    kernel_T_C,
    kernel_T_CD,
)
from .palm import (
    check_campbell,
    check_mecke,
    inversion,
    is_palm_oracle,
    modified_palm,
    palm_measure,
    sample_intensity,
)
from .space import (
    FlowSpace,
    Model,
    OmegaMeasure,
    RandomMeasure,
    configuration_space,
    make_exactly_k_field,
    make_mark_field,
    product_space,
)
from .transport import (
    AllocationRule,
    TransportKernel,
    check_exchange,
    check_neveu,
    check_theorem_4_1,
    inverse_kernel,
    is_balancing,
    is_invariant_kernel,
    push,
)
from .verdict import Verdict

__version__ = "0.1.0"

__all__ = [
    "ONE",
    "SQRT2",
    "ZERO",
    "AllocationRule",
    "CapExceeded",
    "ConfigError",
    "ExistenceVerdict",
    "FiniteAbelianGroup",
    "FlowSpace",
    "GMeasure",
    "InternalDefect",
    "Model",
    "OmegaMeasure",
    "PalmLabError",
    "PreconditionError",
    "RandomMeasure",
    "Scalar",
    "TransportKernel",
    "Verdict",
    "check_campbell",
    "check_condition_5_1",
    "check_exchange",
    "check_mecke",
    "check_neveu",
    "check_theorem_4_1",
    "check_theorem_7_2",
    "configuration_space",
    "construct_balancing_kernel",
    "cyclic",
    "example_6_5",
    "example_7_1",
    "inverse_kernel",
    "inversion",
    "is_balancing",
    "is_invariant_kernel",
    "is_mass_stationary",
    "is_palm_oracle",
    "kernel_T_C",
    "kernel_T_CD",
    "make_exactly_k_field",
    "make_mark_field",
    "modified_palm",
    "palm_measure",
    "parse_group",
    "product_space",
    "push",
    "sample_intensity",
]
