"""Separability certification from the inside via adaptive polytopes.

Certified lower bounds on white-noise visibilities for bipartite and
multiparticle separability classes, dual entanglement witnesses, robustness
measures and see-saw searches for extremal states.
"""

from .hermitian import (
    HermitianOp,
    PartitionedState,
    kron,
    load_matrix,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
    save_matrix,
    swap_subsystems,
)
from .states import (
    StateSpec,
    gamma_family,
    make_state,
    mix_with_white_noise,
    parse_state_spec,
    random_density,
    random_pure,
    spec_to_string,
)
from .polytopes import (
    Polytope,
    ProductPolytope,
    outer_qubit_polytope,
    polytope_from_operators,
    random_inner_polytope,
    load_polytope,
    save_polytope,
)
from .conic import SdpProblem, SdpSolution, SolverError, embed_complex, solve
from .bipartite import (
    CertificationReport,
    RobustnessReport,
    Witness,
    absolute_robustness_adaptive,
    adaptive_visibility,
    dual_witness_fixed,
    generalized_robustness,
    generalized_robustness_adaptive,
    outer_upper_bound,
    ppt_visibility,
    visibility_fixed,
)
from .multiparty import (
    MultipartyReport,
    SeparabilityClass,
    adaptive_multiparty,
    bsep_visibility_fixed,
    fbsep_visibility_fixed,
    fsep_dual_witness,
    fsep_visibility_fixed,
    parse_class,
)
from .seesaw import (
    SeesawTrace,
    gamma_scan,
    minimize_witness_over_fbsep,
    minimize_witness_over_ppt,
    seesaw_robust_fbsep,
    seesaw_robust_ppt,
)

__version__ = "0.1.0"
