"""Min-max variational solver for the one-electron Dirac-Coulomb problem."""

__version__ = "0.1.0"

from .core import (
    C_CODATA,
    DEFAULT_CONSTANTS,
    BasisError,
    BranchError,
    Component,
    Constants,
    ConvergenceError,
    DiracError,
    DomainError,
    PotentialSpec,
    RadialFunction,
    RadialTerm,
    SpinorTrial,
    charge_conjugate,
    gamma_kappa,
    orbital_l,
    sigma_p_apply,
)
from .driver import (
    MinMaxResult,
    Scan1DConfig,
    ScanRecord,
    TrialFamily,
    dft_fallacy_scan,
    fig5_scan,
    inner_maximize,
    maxmin_spurious,
    outer_minimize,
    shower_scan,
    virial_check,
)
from .functional import (
    EnergyBreakdown,
    Explicit,
    KineticBalance,
    PaperKappa,
    SameRadial,
    coupling_curvature,
    energy,
    trial_energy,
)
from .integrals import QuadratureConfig, overlap, potential_element, radial_density, resolvent_element
from .matrix import (
    BasisSet,
    MatrixBlocks,
    SpectrumClassification,
    build_blocks,
    collapse_demo,
    diagonalize,
    kinetic_balance_basis,
    nepp_apply,
    partitioned_minmax,
)
from .rosicky_mark import (
    SeriesEnergy,
    StationarySolution,
    optimal_lower,
    series_energy,
    stationary_negative,
    stationary_positive,
)
