"""Holographic MIMO channel generation and reduced-subspace channel estimation."""

__version__ = "0.1.0"

from .channel import (  # noqa: E402
    ChannelRealization,
    PlaneWaveModel,
    build_plane_wave_model,
    generate_correlated,
    generate_planewave,
    make_rng,
    receive_response,
    sample_cscg,
    transmit_response,
)
from .correlation import (  # noqa: E402
    ArrayGeometry,
    CorrelationMatrix,
    Retention,
    Subspace,
    asymptotic_rank,
    clarke_correlation_matrix,
    effective_rank,
    eigen_subspace,
    truncated_correlation,
)
from .estimation import (  # noqa: E402
    EstimatorKind,
    EstimatorSpec,
    PilotObservation,
    analytic_nmse,
    ls_estimate,
    mmse_estimate,
    observe_pilot,
    rs_ls_estimate,
)
from .spectral import (  # noqa: E402
    WavenumberLattice,
    WavenumberPatch,
    bessel_acf,
    build_lattice_ellipse,
    isotropic_patch_integral,
    sinc_acf,
)
