"""Bond-dimension witnesses for matrix product states.

Structural subspaces of bounded-bond-dimension states (spanning dimensions,
annihilating polynomial identities, central-polynomial quotients), the
cut-and-glue operators built from them, and certified energy lower bounds
and feasibility tests via a self-contained semidefinite solver.
"""

__version__ = "0.1.0"

from .mps import (  # noqa: F401
    IMPSSpec,
    LocalHamiltonian,
    MPSSpec,
    build_state,
    fixed_point,
    imps_rdm,
    injective_pair,
    injectivity_order,
    normalize_channel,
    overlap,
    parent_hamiltonian,
)
from .ncpoly import (  # noqa: F401
    NCPolynomial,
    is_central,
    is_mpi,
    prop1_separating_poly,
    standard_identity,
)
from .numerics import (  # noqa: F401
    ResourceBudgetError,
    hermitian_min_eig,
    make_rng,
    partial_transpose,
    rational_rank,
)
from .sdp import (  # noqa: F401
    SDPProblem,
    SDPResult,
)
from .spans import (  # noqa: F401
    SubspaceBasis,
    commutator_span_basis,
    dim_upper_bound,
    imps_rdm_span,
    mps_span_basis,
    mps_span_dim_exact,
    peps_annihilator_exists,
    project_operator,
    quotient_basis,
    quotient_dim_exact,
)
from .witness import (  # noqa: F401
    CutGlueOperator,
    DualCertificate,
    FeasibilityReport,
    WitnessBound,
    cut_and_glue,
    feasibility_test,
    heisenberg,
    imps_lower_bound,
    majumdar_ghosh,
    mps_lower_bound,
    prop1_family,
    prop1_hamiltonian,
    simplified_bound,
    variational_upper_bound,
)
