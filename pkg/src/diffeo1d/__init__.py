"""Distortion, generating fields, Mather invariants and deformation paths
for diffeomorphisms of the interval and the circle."""

__version__ = "0.1.0"

from ._base import DiffeoError, Diffeo1D  # noqa: E402
from .core import (commutation_defect, compose, evaluate, identity, invert,  # noqa: E402
                   iterate, var_log_D, var_log_D_estimate)
from .pl import PLMap  # noqa: E402
from .analytic import MobiusFlow, FlowMap  # noqa: E402
from .distortion import (asymptotic_distortion, pl_exact_distortion,  # noqa: E402
                         CocycleInstance, cocycle_drift, homogeneity_check)
from .szekeres import szekeres_field  # noqa: E402
from .mather import mather_diffeo, mather_homomorphism, fundamental_check  # noqa: E402
from .paths import deform, path_report  # noqa: E402
from .gallery import gallery, record  # noqa: E402

__all__ = [
    "DiffeoError", "Diffeo1D", "PLMap", "MobiusFlow", "FlowMap",
    "identity", "evaluate", "invert", "compose", "iterate", "var_log_D",
    "var_log_D_estimate", "commutation_defect",
    "asymptotic_distortion", "pl_exact_distortion", "CocycleInstance", "cocycle_drift",
    "homogeneity_check", "szekeres_field", "mather_diffeo", "mather_homomorphism",
    "fundamental_check", "deform", "path_report", "gallery", "record",
]
