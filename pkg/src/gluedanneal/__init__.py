"""Stoquastic annealing on the glued-trees graph, simulated in the column subspace."""
from .column_model import (
    DEFAULT_ALPHA,
    ColumnState,
    TridiagonalHamiltonian,
    basis_state,
    column_hamiltonian,
    column_sizes,
    u_eigenvalue,
    u_residual,
    uniform_state,
    vertex_count,
)
from .dynamics import (
    EvolutionResult,
    Schedule,
    evolve,
    full_basis_crosscheck,
    make_schedule,
    randomized_init_run,
    staged_run,
    transfer_fidelity,
    transfer_matrix,
)
from .glued_graph import (
    GluedTreesInstance,
    OracleSession,
    build_full_hamiltonian,
    check_stoquastic,
    classical_random_walk,
    generate_instance,
    oracle_neighbors,
)
from .spectral import (
    EigenPair,
    QuantizationRoot,
    all_roots,
    analytic_F,
    analytic_G,
    analytic_gap10,
    ansatz_vector,
    crossing_point,
    eigen_low,
    f_quant,
    gap_profile,
    min_gap10,
    solve_quantization,
    stage_boundaries,
)

__version__ = "0.1.0"
