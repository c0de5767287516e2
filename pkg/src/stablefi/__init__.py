"""Functional inequalities for stable-like Dirichlet forms."""
__version__ = "0.1.0"

from .errors import (ConfigError, CriterionInapplicable, DisjointWindows, GridTooCoarse,
                     InvalidParam, NonIntegrable, QuadDiverged, SmoothnessViolation,
                     SolverFailure, StableFIError)
from .potential import Family, Measure, Potential, normalize
from .criteria import (CLOSED_FORMS, CriterionProfile, RateCurve, build_profile,
                       closed_form_curve, rate_curve, slope_fit)
from .nonlocal_form import (TestFunction, bump, canonical_test_functions, carre, dirichlet_form,
                            drift_functional, generator, lyapunov_check, pairing)
from .spectral import (BoundaryMode, FormMatrix, assemble, local_poincare_constant,
                       semigroup_decay, spectral_gap, super_poincare_probe)
from .sharpness import (make_reference, poincare_disproof, sp_sharpness_cor13, sup_carre,
                        wp_sharpness)

__all__ = [
    "ConfigError", "CriterionInapplicable", "DisjointWindows", "GridTooCoarse", "InvalidParam",
    "NonIntegrable", "QuadDiverged", "SmoothnessViolation", "SolverFailure", "StableFIError",
    "Family", "Measure", "Potential", "normalize",
    "CLOSED_FORMS", "CriterionProfile", "RateCurve", "build_profile", "closed_form_curve",
    "rate_curve", "slope_fit",
    "TestFunction", "bump", "canonical_test_functions", "carre", "dirichlet_form",
    "drift_functional", "generator", "lyapunov_check", "pairing",
    "BoundaryMode", "FormMatrix", "assemble", "local_poincare_constant", "semigroup_decay",
    "spectral_gap", "super_poincare_probe",
    "make_reference", "poincare_disproof", "sp_sharpness_cor13", "sup_carre", "wp_sharpness",
]
