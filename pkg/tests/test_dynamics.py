"""Evolution, measurement, reconstruction, and picture conversion."""

import numpy as np
import pytest

from spintomo import dynamics as dy
from spintomo import models as md
from spintomo import pauli as sp
from spintomo.dynamics import (
    InitialStateEnsemble,
    OperatorSeries,
    TimeGrid,
    add_noise,
    conjugate_series,
    evolve_ensemble,
    evolve_propagator,
    evolve_state,
    gen_initial_states,
    heisenberg_to_schrodinger,
    measure_expectations,
    reconstruct_heisenberg,
)
from spintomo.errors import (
    ContractError,
    InputError,
    IntegratorAccuracyError,
    RankDeficiencyError,
    SizeError,
)

PSI_UP_PLUS_I_DOWN = np.array([1.0, 1.0j]) / np.sqrt(2)  # (|1> + i|0>)/sqrt(2)


def analytic_one_spin_state(t):
    theta = 1 - np.cos(t)
    u = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * sp.PAULI_X
    return u @ PSI_UP_PLUS_I_DOWN


def analytic_one_spin_heisenberg(t, a):
    theta = 1 - np.cos(t)
    u = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * sp.PAULI_X
    return u.conj().T @ a @ u


def test_time_grid():
    grid = TimeGrid(0, 5, 100)
    assert grid.times[0] == 0 and grid.times[-1] == 5 and len(grid.times) == 100
    assert abs(grid.spacing - 5 / 99) < 1e-15
    assert TimeGrid.from_dict(grid.as_dict()) == grid
    with pytest.raises(InputError):
        TimeGrid(1, 1, 100)
    with pytest.raises(InputError):
        TimeGrid(0, 5, 1)
    with pytest.raises(InputError):
        TimeGrid(0, 5, 100, 0)


def test_gen_initial_states_basic():
    ens = gen_initial_states(3, 100, np.random.default_rng(0))
    assert ens.states.shape == (100, 8)
    assert np.abs(np.linalg.norm(ens.states, axis=1) - 1).max() < 1e-12
    with pytest.raises(InputError):
        gen_initial_states(2, 0, np.random.default_rng(0))


def test_gen_initial_states_draw_order_golden():
    """Per state: the radii vector, then the phase vector."""
    ens = gen_initial_states(1, 2, np.random.default_rng(123))
    rng = np.random.default_rng(123)
    for s in range(2):
        r = rng.random(2)
        theta = rng.random(2)
        psi = np.sqrt(r) * np.exp(2j * np.pi * theta)
        psi /= np.linalg.norm(psi)
        assert np.array_equal(ens.states[s], psi)


def test_ensemble_validation():
    with pytest.raises(ContractError):
        InitialStateEnsemble(1, np.array([[1.0, 1.0]]))
    with pytest.raises(SizeError):
        InitialStateEnsemble(2, np.eye(2, dtype=complex))


def test_evolve_one_spin_analytic():
    """H(t) = sigma_x sin t self-commutes, so the propagator is closed-form."""
    spec = md.one_spin_x()
    grid = TimeGrid(0, 5, 100)
    traj = evolve_state(spec, PSI_UP_PLUS_I_DOWN, grid)
    expected = np.stack([analytic_one_spin_state(t) for t in grid.times])
    assert np.abs(traj - expected).max() < 1e-8


def test_evolve_zero_hamiltonian():
    spec = md.HamiltonianSpec(2, "two_body", np.zeros(16), np.zeros(16),
                              md.DrivingFunction(1.0, 0.0), md.NetworkTopology.empty(2))
    psi0 = np.zeros(4, dtype=complex)
    psi0[2] = 1
    traj = evolve_state(spec, psi0, TimeGrid(0, 5, 20))
    assert np.abs(traj - psi0).max() == 0


def test_evolve_toffoli_flip():
    """Both controls in the sigma_z = -1 state flip the third spin by t=1."""
    spec = md.gate_hamiltonian("toffoli")
    grid = TimeGrid(0, 1, 100)
    state_000 = np.eye(8, dtype=complex)[7]
    traj = evolve_state(spec, state_000, grid)
    assert abs(abs(traj[-1][6]) - 1) < 1e-8
    state_110 = np.eye(8, dtype=complex)[1]
    traj2 = evolve_state(spec, state_110, grid)
    assert abs(abs(traj2[-1][1]) - 1) < 1e-8


@pytest.mark.parametrize("n,seeds", [(3, range(4)), (4, range(3))])
def test_norm_preservation_default_substeps(n, seeds):
    """Norm drift below 1e-8 at default settings for generated networks."""
    for seed in seeds:
        rng = np.random.default_rng(seed)
        spec = md.gen_two_body(md.NetworkTopology.cyclic(n), rng)
        ens = gen_initial_states(n, 8, rng)
        traj = evolve_ensemble(spec, ens, TimeGrid())
        assert np.abs(np.linalg.norm(traj, axis=1) - 1).max() < 1e-8


def test_integrator_accuracy_error():
    rng = np.random.default_rng(0)
    base = md.gen_two_body(md.NetworkTopology.cyclic(3), rng)
    wild = md.HamiltonianSpec(3, "two_body", 40 * base.c1, 40 * base.c2,
                              base.driving, base.topology)
    psi0 = gen_initial_states(3, 1, rng).states[0]
    with pytest.raises(IntegratorAccuracyError, match="substeps"):
        evolve_state(wild, psi0, TimeGrid(0, 5, 100, 1))


def test_measure_one_spin_start():
    """At t=0 with (|1>+i|0>)/sqrt(2): <sx>=0, <sy>=1, <sz>=0."""
    spec = md.one_spin_x()
    ens = InitialStateEnsemble(1, PSI_UP_PLUS_I_DOWN[None, :])
    obs = measure_expectations(spec, ens, md.default_observables(1, {1}),
                               TimeGrid(0, 5, 50), "exact")
    assert np.allclose(obs.values[0, :, 0], [0.0, 1.0, 0.0], atol=1e-12)
    assert np.abs(obs.values).max() <= 1 + 1e-10


def test_measure_zero_hamiltonian_derivatives():
    spec = md.HamiltonianSpec(1, "two_body", np.zeros(4), np.zeros(4),
                              md.DrivingFunction(1.0, 0.0))
    ens = gen_initial_states(1, 3, np.random.default_rng(1))
    for mode in ("exact", "finite_diff"):
        obs = measure_expectations(spec, ens, md.default_observables(1, {1}),
                                   TimeGrid(0, 5, 30), mode)
        assert np.abs(obs.derivatives).max() < 1e-14


def test_measure_imaginary_residue():
    rng = np.random.default_rng(4)
    spec = md.gen_two_body(md.NetworkTopology.cyclic(3), rng)
    ens = gen_initial_states(3, 5, rng)
    grid = TimeGrid(0, 5, 40)
    traj = evolve_ensemble(spec, ens, grid)
    mats = np.stack([a.matrix() for a in md.default_observables(3, {1})])
    raw = np.einsum("tds,kde,tes->skt", traj.conj(), mats, traj)
    assert np.abs(raw.imag).max() < 1e-10


def test_measure_hidden_spin_contract():
    rng = np.random.default_rng(2)
    spec = md.gen_two_body(md.NetworkTopology.chain(3), rng)
    ens = gen_initial_states(3, 4, rng)
    bad = [sp.PauliString.from_label("IXI")]
    with pytest.raises(ContractError):
        measure_expectations(spec, ens, bad, TimeGrid(0, 5, 20), observed={1})


def test_finite_diff_second_order():
    """Finite-difference derivatives converge at second order in the spacing,
    and match exact mode to 1e-2 for weak coupling at 100 samples."""
    rng = np.random.default_rng(0)
    base = md.gen_two_body(md.NetworkTopology.cyclic(3), rng)
    ens = gen_initial_states(3, 8, rng)
    obsv = md.default_observables(3, {1})
    gaps = {}
    for ns in (100, 1000):
        grid = TimeGrid(0, 5, ns)
        exact = measure_expectations(base, ens, obsv, grid, "exact")
        fd = measure_expectations(base, ens, obsv, grid, "finite_diff")
        gaps[ns] = np.abs(exact.derivatives - fd.derivatives).max()
    assert gaps[100] / gaps[1000] > 50

    weak = md.HamiltonianSpec(3, "two_body", 0.2 * base.c1, 0.2 * base.c2,
                              base.driving, base.topology)
    grid = TimeGrid(0, 5, 100)
    exact = measure_expectations(weak, ens, obsv, grid, "exact")
    fd = measure_expectations(weak, ens, obsv, grid, "finite_diff")
    assert np.abs(exact.derivatives - fd.derivatives).max() < 0.01


def test_add_noise_zero_sigma():
    rng = np.random.default_rng(3)
    spec = md.gen_two_body(md.NetworkTopology.chain(2), rng)
    ens = gen_initial_states(2, 5, rng)
    obs = measure_expectations(spec, ens, md.default_observables(2, {1}),
                               TimeGrid(0, 5, 30), "exact")
    noisy = add_noise(obs, 0.0, np.random.default_rng(0))
    assert np.array_equal(noisy.values, obs.values)
    assert noisy.derivative_mode == "finite_diff"
    assert noisy.noise_sigma == 0.0
    fd = measure_expectations(spec, ens, md.default_observables(2, {1}),
                              TimeGrid(0, 5, 30), "finite_diff")
    assert np.abs(noisy.derivatives - fd.derivatives).max() < 1e-14


def test_add_noise_statistics():
    """Sample variance of the added noise matches sigma^2 within 5%."""
    rng = np.random.default_rng(5)
    spec = md.gen_two_body(md.NetworkTopology.cyclic(3), rng)
    ens = gen_initial_states(3, 100, rng)
    obs = measure_expectations(spec, ens, md.default_observables(3, {1}),
                               TimeGrid(0, 5, 100), "exact")
    sigma = 0.06
    noisy = add_noise(obs, sigma, np.random.default_rng(7))
    delta = noisy.values - obs.values
    assert delta.size >= 3e4
    assert abs(delta.var() / sigma**2 - 1) < 0.05
    assert noisy.noise_sigma == sigma
    with pytest.raises(InputError):
        add_noise(obs, -0.1, rng)


def one_spin_record(seed=14, n_states=4, mode="exact"):
    spec = md.one_spin_x()
    grid = TimeGrid(0, 5, 100)
    ens = gen_initial_states(1, n_states, np.random.default_rng(seed))
    obs = measure_expectations(spec, ens, md.default_observables(1, {1}), grid, mode)
    return spec, grid, ens, obs


def test_reconstruct_one_spin_analytic():
    """Four well-spread states recover the closed-form A^H to 1e-6."""
    _, grid, ens, obs = one_spin_record()
    rec = reconstruct_heisenberg(obs, ens)
    paulis = [sp.PAULI_X, sp.PAULI_Y, sp.PAULI_Z]
    for k, a in enumerate(paulis):
        expected = np.stack([analytic_one_spin_heisenberg(t, a) for t in grid.times])
        assert np.abs(rec.operators[k].matrices - expected).max() < 1e-6
    # derivative series: d A^H/dt = i sin(t) [sigma_x, A^H]
    for k, a in enumerate(paulis):
        for j in (0, 33, 99):
            t = grid.times[j]
            ah = analytic_one_spin_heisenberg(t, a)
            dah = 1j * np.sin(t) * (sp.PAULI_X @ ah - ah @ sp.PAULI_X)
            assert np.abs(rec.derivatives[k].matrices[j] - dah).max() < 1e-5


def test_reconstruct_at_time_zero():
    _, _, ens, obs = one_spin_record()
    rec = reconstruct_heisenberg(obs, ens)
    for k, a in enumerate([sp.PAULI_X, sp.PAULI_Y, sp.PAULI_Z]):
        assert np.abs(rec.operators[k].matrices[0] - a).max() < 1e-8
        assert rec.operators[k].label == ["X", "Y", "Z"][k]


def test_reconstruct_overdetermined_residual():
    """100 states for n=3: overdetermined solve with tiny residual."""
    rng = np.random.default_rng(6)
    spec = md.gen_two_body(md.NetworkTopology.cyclic(3), rng)
    ens = gen_initial_states(3, 100, rng)
    obs = measure_expectations(spec, ens, md.default_observables(3, {1}),
                               TimeGrid(0, 5, 50), "exact")
    rec = reconstruct_heisenberg(obs, ens)
    assert rec.max_residual < 1e-8
    for series in rec.operators + rec.derivatives:
        m = series.matrices
        assert np.abs(m - np.conj(np.swapaxes(m, -1, -2))).max() < 1e-10


def test_reconstruct_insufficient_states():
    _, _, _, obs = one_spin_record(n_states=3)
    ens3 = gen_initial_states(1, 3, np.random.default_rng(14))
    with pytest.raises(SizeError):
        reconstruct_heisenberg(obs, ens3)


def test_reconstruct_rank_deficient():
    """Duplicated states cannot span the operator space."""
    spec = md.one_spin_x()
    grid = TimeGrid(0, 5, 20)
    one = gen_initial_states(1, 1, np.random.default_rng(0)).states[0]
    ens = InitialStateEnsemble(1, np.stack([one, one, one, one]))
    obs = measure_expectations(spec, ens, md.default_observables(1, {1}), grid, "exact")
    with pytest.raises(RankDeficiencyError, match="condition"):
        reconstruct_heisenberg(obs, ens)


def test_conversion_constant_series():
    rng = np.random.default_rng(8)
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (b + b.conj().T) / 2
    grid = TimeGrid(0, 5, 60)
    hh = OperatorSeries(grid, "HH", np.broadcast_to(h, (60, 4, 4)).copy())
    back = heisenberg_to_schrodinger(hh)
    assert np.abs(back.matrices - h).max() < 1e-12


def test_conversion_one_spin_round_trip():
    """Self-commuting H: pictures coincide, round trip is exact."""
    spec = md.one_spin_x()
    grid = TimeGrid(0, 5, 100)
    u = evolve_propagator(spec, grid)
    hs = spec.hamiltonian(grid.times)
    hh = OperatorSeries(grid, "HH", conjugate_series(u, hs))
    assert np.abs(hh.matrices - hs).max() < 1e-8  # H^H = H here
    back = heisenberg_to_schrodinger(hh)
    assert np.abs(back.matrices - hs).max() < 1e-6


def test_conversion_round_trip_three_spins():
    """Forward (evolve) then backward (convert) recovers H(t) to 1e-5."""
    rng = np.random.default_rng(0)
    base = md.gen_two_body(md.NetworkTopology.cyclic(3), rng)
    spec = md.HamiltonianSpec(3, "two_body", 0.25 * base.c1, 0.25 * base.c2,
                              base.driving, base.topology)
    grid = TimeGrid(0, 5, 2001)
    u = evolve_propagator(spec, grid)
    hs = spec.hamiltonian(grid.times)
    hh = OperatorSeries(grid, "HH", conjugate_series(u, hs))
    back, gap = heisenberg_to_schrodinger(hh, return_unitarity=True)
    assert np.abs(back.matrices - hs).max() < 1e-5
    assert gap < 1e-9


def test_heisenberg_equation_consistency():
    """dA^H/dt matches i[H^H, A^H] when both come from the true H."""
    rng = np.random.default_rng(0)
    spec = md.gen_two_body(md.NetworkTopology.cyclic(3), rng)
    grid = TimeGrid(0, 0.5, 5001, 1)
    u = evolve_propagator(spec, grid)
    ah = conjugate_series(u, sp.PauliString.from_label("XII").matrix())
    hh = conjugate_series(u, spec.hamiltonian(grid.times))
    dah = np.gradient(ah, grid.times, axis=0, edge_order=2)
    comm = 1j * (np.einsum("tde,tef->tdf", hh, ah) - np.einsum("tde,tef->tdf", ah, hh))
    assert np.abs(dah - comm)[1:-1].max() < 1e-4


def test_observation_set_validation():
    grid = TimeGrid(0, 5, 10)
    obsv = tuple(md.default_observables(1, {1}))
    vals = np.zeros((2, 3, 10))
    dy.ObservationSet(grid, obsv, vals, vals, "exact")
    with pytest.raises(SizeError):
        dy.ObservationSet(grid, obsv, np.zeros((2, 3, 9)), np.zeros((2, 3, 9)), "exact")
    with pytest.raises(SizeError):
        dy.ObservationSet(grid, obsv, vals, np.zeros((2, 3, 9)), "exact")
    with pytest.raises(InputError):
        dy.ObservationSet(grid, obsv, vals, vals, "spectral")
    with pytest.raises(InputError):
        dy.ObservationSet(grid, obsv, vals, vals, "exact", noise_sigma=-1)
