"""Shell cascade laboratory.

Finite quadratic shell models on a geometric ladder of scales: exact
coupling-table builders for several model families, symbolic and sampled
conservation audits, stationary-profile residual scans over the coupling
exponent, and deterministic time integration with drift tracking.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .dynamics import (
    CascadeSystem,
    GoyCheckReport,
    GoyCorrespondence,
    IntegratorSpec,
    SpectrumReport,
    Trajectory,
    check_goy_correspondence,
    drift_report,
    goy_map,
    integrate,
    step_rk4,
    time_avg_spectrum,
)
from .errors import CascadeError, ConfigurationError, IntegrationError, NumericError
from .invariants import (
    DEFAULT_TOL,
    AuditReport,
    InvariantBasis,
    MonomialResidual,
    WeightMatrix,
    audit_conservation,
    energy,
    helicity,
    quadratic_derivative,
    solve_invariant_weights,
)
from .models import (
    CouplingComparison,
    CouplingEntry,
    CouplingTable,
    DissipationSpec,
    ForcingSpec,
    HMatrix,
    ModelFamily,
    ModelSpec,
    ShellState,
    as_shell_array,
    build_general,
    build_goy,
    build_s2_diag,
    build_s2_offdiag,
    build_s3_diag,
    compare_couplings,
    eval_rhs,
    h_diag,
    h_offdiag,
)
from .stationary import (
    CLAIMED_STATIONARY_GAMMAS,
    BulkResidual,
    ScanReport,
    ScanRoot,
    bulk_residual,
    energy_slope,
    gamma_scan,
    spectrum_exponent,
    stationary_profile,
)

__all__ = [
    "__version__",
    "AuditReport",
    "BulkResidual",
    "CLAIMED_STATIONARY_GAMMAS",
    "CascadeError",
    "CascadeSystem",
    "ConfigurationError",
    "CouplingComparison",
    "CouplingEntry",
    "CouplingTable",
    "DEFAULT_TOL",
    "DissipationSpec",
    "ForcingSpec",
    "GoyCheckReport",
    "GoyCorrespondence",
    "HMatrix",
    "IntegrationError",
    "IntegratorSpec",
    "InvariantBasis",
    "ModelFamily",
    "ModelSpec",
    "MonomialResidual",
    "NumericError",
    "ScanReport",
    "ScanRoot",
    "ShellState",
    "SpectrumReport",
    "Trajectory",
    "WeightMatrix",
    "as_shell_array",
    "audit_conservation",
    "build_general",
    "build_goy",
    "build_s2_diag",
    "build_s2_offdiag",
    "build_s3_diag",
    "bulk_residual",
    "check_goy_correspondence",
    "compare_couplings",
    "drift_report",
    "energy",
    "energy_slope",
    "eval_rhs",
    "gamma_scan",
    "goy_map",
    "h_diag",
    "h_offdiag",
    "helicity",
    "integrate",
    "quadratic_derivative",
    "solve_invariant_weights",
    "spectrum_exponent",
    "stationary_profile",
    "step_rk4",
    "time_avg_spectrum",
]
