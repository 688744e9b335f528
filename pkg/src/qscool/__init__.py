"""Quantum simulated cooling toolkit.

Prepares molecular ground states by optimally controlling the time
evolution of an emulated qubit register, with a quantum-speed-limit
estimator, a measurement-cost model, and an annealing baseline.
"""

from .molham import FermionCoeffs, IntegralSet, build_core_hamiltonian, parse_integral_file
from .pauli import PauliSum, SparseOperator, exact_ground_state, expectation, hf_state, jordan_wigner, to_sparse_matrix
from .control import ControlPoint, ControlSchedule, assemble_perturbation, control_at, init_parameters
from .dynamics import ControlBasis, Trajectory, expmv, propagate
from .objective import ObjectiveEvaluation, ProblemContext, energy_objective, evaluate, gradient, make_context
from .optimize import DiffEvoOptions, LbfgsOptions, OptimizationReport, run_diffevo, run_lbfgs
from .analysis import CostReport, QslReport, cost_model, mean_driving_norm, qsl_estimate
from .anneal import AnnealConfig, anneal_run, build_hf_hamiltonian, h2_scaling_perturbation

__version__ = "0.1.0"
