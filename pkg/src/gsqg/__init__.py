"""Pseudo-spectral simulator for the generalized surface quasi-geostrophic
family and its compressible companion, with a contraction-mapping
fixed-point engine, Littlewood-Paley/Besov diagnostics and an empirical
functional-inequality suite."""

__version__ = "0.1.0"

from .spectral import (  # noqa: F401
    GridSpec,
    RealField,
    SpectralField,
    VectorField,
    VelocityLaw,
    apply_multiplier,
    compute_velocity,
    dealias,
    divergence,
    forward_transform,
    fractional_laplacian,
    gradient,
    inverse_transform,
    project_mean_zero,
    riesz_transform,
)
from .littlewood_paley import (  # noqa: F401
    BesovParams,
    DyadicPartition,
    besov_norm,
    build_partition,
    dyadic_block,
    lp_norm,
    sobolev_norm,
)
from .transport import (  # noqa: F401
    AnalyticVelocity,
    FrozenVelocity,
    Trajectory,
    TransportError,
    advection_rhs,
    besov_velocity_norm,
    growth_bound_check,
    rk4_step,
    solve_nonlinear,
    solve_transport,
    stable_dt,
)
from .picard import (  # noqa: F401
    BallSpec,
    ContractionReport,
    HorizonError,
    ball_membership,
    constant_trajectory,
    contraction_factor,
    picard_iterate,
    picard_map,
    select_horizon,
)
from .inequalities import (  # noqa: F401
    CheckReport,
    EnsembleSpec,
    check_bernstein,
    check_cz,
    check_embedding,
    check_gradvel_bound,
    check_hls,
    check_l2_conservation,
    check_uniqueness_gronwall,
    sample_field,
)
from .config import ConfigError, ExperimentConfig, parse_config  # noqa: F401
from .snapshots import (  # noqa: F401
    SnapshotError,
    emit_diagnostics,
    read_snapshot,
    write_snapshot,
)
