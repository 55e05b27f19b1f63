"""Periodic Parareal steady-state solver for eddy-current type DAEs.

The periodic-coarse variant solves its block-circulant coarse system one
harmonic at a time after an FFT along the time index.
"""
from .cable import CoaxCableParams, ReluctivityCurve, build_coax_cable
from .engine import (
    ConvergenceHistory,
    PararealSettings,
    SolverVariant,
    classic_parareal,
    frozen_coarse_linearization,
    jump_norm,
    ppic_solve,
    pppc_solve,
    run_variant,
)
from .problem import (
    Excitation,
    PeriodicProblem,
    build_dae_pair,
    build_scalar_test,
    eval_excitation,
    load_problem,
)
from .propagators import (
    NewtonSettings,
    TimeMesh,
    coarse_propagate,
    coarse_step,
    fine_propagate,
    newton_step,
    sequential_steady_state,
)
from .spectral import (
    CyclicSystem,
    HarmonicSpectrum,
    assemble_rhs,
    forward_dft,
    frequency_set,
    harmonic_block,
    inverse_dft,
    solve_cyclic_direct,
    solve_cyclic_fixed_point,
    solve_cyclic_multiharmonic,
)

__version__ = "0.1.0"
