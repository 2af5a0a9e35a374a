"""Two-photon scattering and delay-resolved photon correlations for emitter arrays.

Quick start::

    >>> from arrayg2 import square_array, default_tau_grid, persistence
    >>> sc = square_array(a=0.1, theta=0.7853981633974483, detuning=3.9)
    >>> trace = sc.trace(default_tau_grid())
    >>> round(persistence(trace).tau_half)
    18
"""

__version__ = "0.1.0"

from ._backend import NAME as BACKEND
from .environment import (
    AtomArray,
    EffectiveHamiltonian,
    WaveguideParams,
    build_heff_free_space,
    build_heff_waveguide,
    free_space_dyadic_green,
)
from .errors import (
    ArrayG2Error,
    CoincidentPointsError,
    GridTooCoarseError,
    InfeasibleError,
    LinearAmplitudeZeroError,
    NearDefectiveError,
    QuadratureError,
    SingularKernelError,
    ValidationError,
)
from .kernel import (
    TwoExcitationData,
    build_two_excitation,
    kernel_q,
    kernel_q_two_exc,
    sigma_eigen,
    sigma_quadrature,
)
from .scattering import (
    CorrelationTrace,
    PhotonMode,
    ScatteringSetup,
    amplitudes_s,
    c_constants,
    coupling_free_space,
    coupling_waveguide,
    g2_trace,
    t_matrix_single,
)
from .scenarios import Scenario, build_scenario, chiral_chain, single_atom, square_array
from .spectral import SpectralData, eigendecompose, green_single
from .sweep import (
    PersistenceMetric,
    SweepResult,
    default_tau_grid,
    map_g2_tau,
    map_g2_zero,
    optimize,
    persistence,
)
