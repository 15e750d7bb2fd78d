"""Mean-field Blume-Capel model: phase diagram, exact and Monte Carlo laws of
the spin sum, and scaling limits near the critical curves."""

__version__ = "0.1.0"

from .free_energy import (  # noqa: F401
    ModelParams,
    c_beta,
    c_beta_derivs,
    free_energy_G,
    free_energy_G_deriv,
    free_energy_G_derivs,
)
from .phase_diagram import (  # noqa: F401
    BETA_C,
    K_C,
    Region,
    classify,
    first_order_K1,
    global_minimizers,
    magnetization,
    second_order_K,
)
from .gl_sequences import SequenceKind, SequenceSpec, default_spec, gl_profile, sequence_point  # noqa: F401
from .exact_distribution import spin_sum_pmf  # noqa: F401
