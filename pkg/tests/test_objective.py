import numpy as np
import pytest

from qscool.control import ControlPoint, ControlSchedule, init_parameters
from qscool.errors import DataError
from qscool.molham import IntegralSet, Nucleus, parse_integral_file
from qscool.objective import (
    ObjectiveEvaluation,
    energy_objective,
    evaluate,
    finite_difference_gradient,
    gradient,
    make_context,
)

from conftest import fixture_path, masked_relative_error


def _randomized(schedule, scale, seed):
    rng = np.random.default_rng(seed)
    x = schedule.to_vector() + scale * rng.normal(size=schedule.n_parameters)
    return schedule.with_vector(x)


def test_idle_objective_is_hf_energy(h2_ints, h2_ctx):
    s = init_parameters(total_time=1.0, n_ctrl=2, n_steps=20, n_nuclei=2, seed=0)
    pts = tuple(ControlPoint(0.0, p.b0, p.mu, p.rho, p.zeff) for p in s.points)
    idle = ControlSchedule(total_time=1.0, n_steps=20, points=pts)
    assert energy_objective(idle, h2_ctx) == pytest.approx(h2_ctx.e_hf, abs=1e-10)


def test_variational_lower_bound(h2_ctx):
    for seed in range(4):
        s = _randomized(
            init_parameters(total_time=1.0, n_ctrl=4, n_steps=20, n_nuclei=2, seed=seed),
            0.8,
            seed,
        )
        assert energy_objective(s, h2_ctx) >= h2_ctx.e_fci - 1e-9


def test_adjoint_vs_fd_h2(h2_ctx):
    s = _randomized(
        init_parameters(total_time=1.0, n_ctrl=5, n_steps=20, n_nuclei=2, seed=7),
        0.5,
        5,
    )
    adj = gradient(s, h2_ctx, engine="krylov")
    fd = finite_difference_gradient(s, h2_ctx)
    assert masked_relative_error(adj, fd) <= 1e-5


def test_adjoint_vs_fd_h4_tight_tol():
    # seed pair chosen so every masked entry sits above the central-difference
    # noise floor; the comparison is then a real test of the adjoint path
    ints = parse_integral_file(fixture_path("h4_square_r1.2"))
    ctx = make_context(ints, compute_fci=False, expmv_tol=1e-12)
    s = _randomized(
        init_parameters(total_time=0.5, n_ctrl=4, n_steps=12, n_nuclei=4, seed=3),
        1.0,
        5,
    )
    adj = gradient(s, ctx, engine="krylov")
    fd = finite_difference_gradient(s, ctx)
    assert masked_relative_error(adj, fd) <= 1e-5


def test_dense_and_krylov_engines_agree(h2_ctx):
    s = _randomized(
        init_parameters(total_time=1.0, n_ctrl=3, n_steps=6, n_nuclei=2, seed=1),
        0.4,
        3,
    )
    g_dense = gradient(s, h2_ctx, engine="dense")
    g_krylov = gradient(s, h2_ctx, engine="krylov")
    assert np.abs(g_dense - g_krylov).max() < 1e-9


def test_directional_derivative_matches_fd(h2_ctx):
    s = _randomized(
        init_parameters(total_time=1.0, n_ctrl=3, n_steps=6, n_nuclei=2, seed=4),
        0.3,
        8,
    )
    g = gradient(s, h2_ctx)
    x0 = s.to_vector()
    h = 1e-5
    rng = np.random.default_rng(0)
    e = rng.normal(size=x0.size)
    e /= np.linalg.norm(e)
    plus = energy_objective(s.with_vector(x0 + h * e), h2_ctx)
    minus = energy_objective(s.with_vector(x0 - h * e), h2_ctx)
    assert (plus - minus) / (2 * h) == pytest.approx(float(g @ e), abs=1e-7)


def test_commuting_toy_gradient_vanishes():
    """Diagonal molecular Hamiltonian + diagonal perturbation: the reference
    determinant is stationary, so every direction has zero gradient."""
    n = 2
    kinetic = -2.0 * np.diag([1.3, 2.1])
    attraction = np.stack([np.diag([0.7, 0.4])])
    ints = IntegralSet(
        n_spatial=n,
        n_electrons=2,
        nuclei=(Nucleus("H", 1.0, (0.0, 0.0, 0.0)),),
        e_nuc=0.1,
        hf_energy=0.0,
        orbital_energies=np.array([1.0, 2.0]),
        kinetic=kinetic,
        attraction=attraction,
        eri=np.zeros((n, n, n, n)),
    )
    ctx = make_context(ints, compute_fci=False)
    s = init_parameters(total_time=0.5, n_ctrl=2, n_steps=10, n_nuclei=1, seed=0)
    g = gradient(s, ctx)
    assert np.abs(g).max() < 1e-10


def test_cross_validation_flag_passes(h2_ctx):
    s = _randomized(
        init_parameters(total_time=1.0, n_ctrl=2, n_steps=4, n_nuclei=2, seed=6),
        0.5,
        6,
    )
    g = gradient(s, h2_ctx, cross_validate=True)
    assert g.shape == (s.n_parameters,)


def test_unknown_method_rejected(h2_ctx):
    s = init_parameters(total_time=1.0, n_ctrl=2, n_steps=4, n_nuclei=2, seed=0)
    with pytest.raises(DataError):
        gradient(s, h2_ctx, method="parameter_shift")


def test_evaluate_consistent_with_objective(h2_ctx):
    s = _randomized(
        init_parameters(total_time=1.0, n_ctrl=3, n_steps=6, n_nuclei=2, seed=2),
        0.5,
        2,
    )
    ev = evaluate(s, h2_ctx)
    assert isinstance(ev, ObjectiveEvaluation)
    assert ev.value == pytest.approx(energy_objective(s, h2_ctx), abs=1e-12)
    assert ev.gradient.shape == (s.n_parameters,)
