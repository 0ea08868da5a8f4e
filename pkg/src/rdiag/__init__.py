"""Numerical laboratory for free entropy of R-diagonal elements."""
from __future__ import annotations

__version__ = "0.1.0"

from .cumulants import (
    CumulantTable,
    MomentTable,
    circular_table,
    cumulants_to_moments,
    gamma_split,
    haar_multiply,
    haar_table,
    is_r_diagonal,
    moments_to_cumulants,
    semicircular_table,
)
from .entropy import (
    CHI_CONSTANT,
    EntropyValue,
    changevar_defect,
    chi_rdiag,
    chi_sa_one,
    chi_symmetric_identity_defect,
    chi_upper_bound,
    log_energy,
    log_energy_estimator,
)
from .geometry import (
    jacobian_dp,
    jacobian_ds,
    limck_residual,
    polar_decompose,
    push_measure_check,
    volume_ck,
)
from .laws import make_law
from .microstates import (
    EntropyEstimate,
    GammaSpec,
    amplification_constant,
    block_embed,
    chi_curve,
    entry_split,
    gamma_membership,
    log_volume_estimate,
    log_volume_splitting,
)
from .models import (
    RngStream,
    freeness_defect,
    freeness_defect_model,
    ginibre,
    haar_unitary,
    mixed_moment_estimate,
    positive_with_spectrum,
    rdiag_sample,
)
from .spectral import Atoms, FunctionSpec, GridDensity, esd, pushforward
