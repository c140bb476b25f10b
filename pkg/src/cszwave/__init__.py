"""Pseudospectral gravity water waves on the torus with bottom forcing.

Surface evolution in the two-unknown potential-flow formulation, a
Fourier x Chebyshev elliptic solver for the straightened fluid strip,
and diagnostics for exponentially weighted norms and the analyticity
radius of the solution.
"""

import threadpoolctl as _threadpoolctl

# the per-mode vertical solves are 48x48: BLAS threading only thrashes there
_blas_limit = _threadpoolctl.threadpool_limits(limits=1, user_api="blas")

from .errors import BlowUp, ConfigError, DiffeomorphismFailure, NoContraction, NormOverflow
from .spectral import (
    AnalyticIndex,
    Lattice,
    MollifierSpec,
    SpectralField,
    analytic_norm,
    apply_multiplier,
    dn_symbol,
    forward_transform,
    from_modes,
    holo_extend_eval,
    inverse_transform,
    load_snapshot,
    lp_block,
    mollify,
    paraproduct,
    product,
    save_snapshot,
    zero_field,
)
from .strip import (
    StripField,
    SurfaceGeometry,
    VerticalGrid,
    apply_R,
    build_geometry,
    lift_dirichlet,
    residual,
    solve_elliptic,
    solve_flat,
    strip_norm,
)
from .dn import (
    DNResult,
    check_divV_identity,
    check_gradient_identity,
    compute_dn,
    dn_lipschitz_probe,
    surface_second_derivatives,
)

from .evolution import (
    BottomSource,
    RadiusSchedule,
    RunConfig,
    WaveState,
    picard_solve,
    radius_schedule_eval,
    rhs,
    run,
    step_rk4,
)
from .diagnostics import (
    RadiusEstimate,
    ReformulatedState,
    RunRecord,
    conservation_report,
    energy_Es,
    estimate_radius,
    norms_snapshot,
    radius_decay_experiment,
    reformulate,
)

from .cli import Scenario, config_hash, emit_config, parse_config, run_scenario

__all__ = [name for name in dir() if not name.startswith("_")]
