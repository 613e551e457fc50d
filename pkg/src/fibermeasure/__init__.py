"""Certified disintegrations of self-conformal measures into doubling, affinely decaying fibers."""
from .analysis import (
    AffineSubspace,
    approximation_window,
    ball_mass_bracket,
    counterexample_schedule,
    decay_scan,
    doubling_scan,
    plan_fiber,
    slab_mass_upper,
)
from .config import ConfigDocument, parse_config
from .construction import (
    DisintegrationPlan,
    build_family_affine,
    build_family_conformal,
    decay_exponent,
    doubling_bound,
    find_separated_pair,
)
from .disintegration import (
    FiberMeasure,
    OmegaStream,
    SubsetFamily,
    build_selector,
    chaos_game,
    cylinder_mass,
    disintegration_residual,
    fiber_measure,
    sample_fiber,
)
from .diophantine import ApproxFunction, dirichlet_profile, psi_hits, pv_condition, wpsi_scan
from .errors import CertificationError, InputError
from .ifs import IfsSystem
from .maps import ConformalIntervalMap, SimilarityMap
from .report import ReportRecord
from .systems import named

__all__ = [name for name in dir() if not name.startswith("_")]
