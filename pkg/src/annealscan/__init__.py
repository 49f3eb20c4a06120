"""Spectral analysis of quantum annealing Hamiltonians.

The package splits along the workflow: :mod:`annealscan.hamiltonian` holds
Pauli terms, term-file parsing, schedules and matrix-free application;
:mod:`annealscan.problems` generates reference instances;
:mod:`annealscan.eigensolve` and :mod:`annealscan.sweep` compute lowest
eigenpairs across the schedule and track branches;
:mod:`annealscan.derived` turns sweeps into gaps, matrix elements and the
adiabatic ratio; :mod:`annealscan.runstore` persists runs;
:mod:`annealscan.figs` renders figures from the exported CSV series; and
:mod:`annealscan.cli` ties everything into the command line.
"""

from .hamiltonian import (
    AnnealOperator,
    HamiltonianSpec,
    LINEAR_SCHEDULE,
    PauliTerm,
    QuboSpec,
    Schedule,
    TermFormatError,
    make_driver,
    materialize_dense,
    parse_hamiltonian,
    parse_schedule,
    qubo_to_ising,
    serialize_hamiltonian,
)
from .eigensolve import EigensolverError, lowest_eigenpairs
from .problems import (
    GeneratorParams,
    MQOInstance,
    classical_ground_state,
    decode_selection,
    gen_fim,
    gen_hw,
    gen_mqo,
    gen_sk,
    mqo_cost,
    mqo_optimum,
    mqo_to_qubo,
    sample_mqo_4x2,
)
from .sweep import (
    SpectralSnapshot,
    SpectralSweep,
    SweepConfig,
    TrackedBranches,
    correlations_zz,
    observables_z,
    sweep,
    track_branches,
)
from .derived import (
    AdiabaticSeries,
    EnsembleSummary,
    GapSeries,
    MatrixElementSeries,
    MinGapSummary,
    adiabatic_ratio,
    ensemble_summary,
    gaps,
    matrix_elements,
    min_gap,
)
from .runstore import (
    LoadedRun,
    RunStoreError,
    export_csv,
    read_eigvec_file,
    read_run,
    write_eigvec_file,
    write_run,
)

__version__ = "0.1.0"

__all__ = [
    "AdiabaticSeries",
    "AnnealOperator",
    "EigensolverError",
    "EnsembleSummary",
    "GapSeries",
    "GeneratorParams",
    "HamiltonianSpec",
    "LINEAR_SCHEDULE",
    "LoadedRun",
    "MQOInstance",
    "MatrixElementSeries",
    "MinGapSummary",
    "PauliTerm",
    "QuboSpec",
    "RunStoreError",
    "Schedule",
    "SpectralSnapshot",
    "SpectralSweep",
    "SweepConfig",
    "TermFormatError",
    "TrackedBranches",
    "adiabatic_ratio",
    "classical_ground_state",
    "correlations_zz",
    "decode_selection",
    "ensemble_summary",
    "export_csv",
    "gaps",
    "gen_fim",
    "gen_hw",
    "gen_mqo",
    "gen_sk",
    "lowest_eigenpairs",
    "make_driver",
    "materialize_dense",
    "matrix_elements",
    "min_gap",
    "mqo_cost",
    "mqo_optimum",
    "mqo_to_qubo",
    "observables_z",
    "parse_hamiltonian",
    "parse_schedule",
    "qubo_to_ising",
    "read_eigvec_file",
    "read_run",
    "sample_mqo_4x2",
    "serialize_hamiltonian",
    "sweep",
    "track_branches",
    "write_eigvec_file",
    "write_run",
]
