import numpy as np
import pytest

from pinblock import netmodel, stability as st
from pinblock.errors import BlowUpError, ValidationError
from pinblock.hatdecomp import hat_transform
from pinblock.sbdcore import sbd_transform

SHORT = st.IntegrationParams(t_transient=200.0, t_measure=2000.0)


@pytest.fixture(scope="module")
def rossler_traj():
    osc = st.preset("fig2")
    return osc, st.target_trajectory(osc, t_span=SHORT.t_measure)


def test_zero_field_is_constant():
    osc = st.linear_oscillator(np.zeros((2, 2)), g=(1, 0), h=(0, 1), x0=(0.3, -2.0))
    traj = st.target_trajectory(osc, t_transient=1.0, t_span=5.0, dt=0.01)
    assert np.all(traj.xs == np.array([0.3, -2.0]))


def test_rk4_is_fourth_order():
    osc = st.linear_oscillator([[-1.0]], g=(1,), h=(1,), x0=(1.0,))
    errs = []
    for dt in (0.1, 0.05, 0.025):
        x1 = st.target_trajectory(osc, t_transient=0.0, t_span=1.0, dt=dt).xs[-1, 0]
        errs.append(abs(x1 - np.exp(-1.0)))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(14.0 < r < 18.0 for r in ratios)


def test_rossler_attractor_bounded(rossler_traj):
    _, traj = rossler_traj
    assert np.abs(traj.xs[:, 0]).max() < 40.0
    assert np.all(np.isfinite(traj.xs))


def test_blowup_detected():
    osc = st.linear_oscillator([[1.0]], g=(1,), h=(1,), x0=(1.0,))
    with pytest.raises(BlowUpError):
        st.target_trajectory(osc, t_transient=0.0, t_span=20.0, dt=0.01)


def test_linear_scalar_mle_equals_rate():
    lam = -0.7
    osc = st.linear_oscillator([[lam]], g=(1,), h=(1,), x0=(1e-3,))
    traj = st.target_trajectory(osc, t_transient=0.0, t_span=50.0, dt=0.01)
    bv = st.BlockVariational(L=[[0.0]], R=[[0.0]])
    assert st.block_mle(bv, osc, traj) == pytest.approx(lam, abs=1e-9)


def test_linear_block_mle_with_coupling():
    # eta' = (a + l - gamma) eta for a scalar system with g = h = 1
    osc = st.linear_oscillator([[0.2]], g=(1,), h=(1,), x0=(1e-3,))
    traj = st.target_trajectory(osc, t_transient=0.0, t_span=40.0, dt=0.01)
    L = np.array([[-1.0, 1.0], [1.0, -1.0]])
    R = np.diag([1.0, 0.0])
    gamma = 0.5
    expected = 0.2 + np.linalg.eigvalsh(L - gamma * R).max()
    got = st.block_mle(st.BlockVariational(L, R, gamma), osc, traj, t_discard=10.0)
    assert got == pytest.approx(expected, abs=1e-3)


def test_block_variational_validation():
    with pytest.raises(ValidationError):
        st.BlockVariational(L=np.zeros((2, 3)), R=np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        st.BlockVariational(L=[[0.0]], R=[[0.0]], gamma=-1.0)


def test_uncoupled_rossler_mle_positive(rossler_traj):
    osc, traj = rossler_traj
    mle = st.block_mle(st.BlockVariational([[0.0]], [[0.0]]), osc, traj)
    assert 0.0 < mle < 0.3


def test_zero_crossings():
    g = np.array([0.0, 1.0, 2.0, 3.0])
    assert st.zero_crossings(g, [1.0, -1.0, -1.0, 1.0]) == [(0.5, "down"), (2.5, "up")]
    assert st.zero_crossings(g, [1.0, 1.0, 1.0, 1.0]) == []


def test_default_grid():
    g = st.default_gammas()
    assert g.size == 61 and g[0] == 0.0 and g[-1] == 3.0
    assert st.default_gammas(1.0, 1.0, 0.05).tolist() == [1.0]


def test_presets():
    assert list(st.preset("fig2").g) == [1.0, 0.0, 0.0]
    assert list(st.preset("sf").g) == [1.0, 1.0, 0.0]
    assert list(st.preset("sf").h) == [0.0, 1.0, 0.0]
    with pytest.raises(ValidationError):
        st.preset("nope")


def test_undriven_flat_and_sweep_shape(fig2_pair, rossler_traj):
    osc, traj = rossler_traj
    dec = hat_transform(fig2_pair)
    gammas = np.array([0.0, 1.0, 2.0])
    curve = st.gamma_sweep(dec, osc, gammas, SHORT, traj=traj, jobs=1)
    assert curve.mle.shape == (4, 3)
    for i, b in enumerate(curve.blocks):
        if not b.driven:
            assert np.ptp(curve.mle[i]) < 0.02
    # undriven blocks genuinely simulated per gamma agree as well
    ud = [b for b in curve.blocks if not b.driven][0]
    vals = [st.block_mle(st.BlockVariational(ud.L, ud.R, g), osc, traj) for g in gammas]
    assert np.ptp(vals) < 0.02
    assert curve.max_curve[0] > 0
    assert len(list(curve.rows())) == 12


def test_sweep_is_schedule_independent(fig2_pair, rossler_traj):
    osc, traj = rossler_traj
    dec = sbd_transform(fig2_pair)
    gammas = np.array([0.5, 1.5])
    a = st.gamma_sweep(dec, osc, gammas, SHORT, traj=traj, jobs=1)
    b = st.gamma_sweep(dec, osc, gammas, SHORT, traj=traj, jobs=4)
    assert np.array_equal(a.mle, b.mle)


def test_initial_direction_independence(fig2_pair, rossler_traj):
    osc, traj = rossler_traj
    blk = hat_transform(fig2_pair).blocks[0]
    bv = st.BlockVariational(blk.L, blk.R, 1.5)
    vals = [st.block_mle(bv, osc, traj, seed=s) for s in range(3)]
    assert np.ptp(vals) < 0.01


@pytest.mark.slow
def test_full_system_matches_max_block(fig2_pair, rossler_traj):
    osc, traj = rossler_traj
    dec = hat_transform(fig2_pair)
    for gamma in (0.5, 1.5):
        full = st.block_mle(st.BlockVariational(fig2_pair.L, fig2_pair.R, gamma), osc, traj)
        per_block = [st.block_mle(st.BlockVariational(b.L, b.R, gamma), osc, traj) for b in dec.blocks]
        assert abs(full - max(per_block)) < 0.02


@pytest.mark.slow
def test_dt_halving_changes_mle_little(fig2_pair):
    osc = st.preset("fig2")
    blk = hat_transform(fig2_pair).blocks[0]
    bv = st.BlockVariational(blk.L, blk.R, 1.5)
    out = []
    for dt in (0.005, 0.0025):
        traj = st.target_trajectory(osc, t_span=2000.0, dt=dt)
        out.append(st.block_mle(bv, osc, traj))
    assert abs(out[0] - out[1]) < 0.01


def test_identical_initial_states_stay_synchronized(fig2_pair):
    osc = st.preset("fig2")
    out = st.simulate_network(fig2_pair, osc, 0.7, t_span=50.0, identical=True)
    assert np.all(out.errors == 0.0)
    assert out.synchronized


def test_uncontrolled_network_does_not_synchronize(fig2_pair):
    out = st.simulate_network(fig2_pair, st.preset("fig2"), 0.0, t_span=500.0)
    assert not out.synchronized and not out.diverged
    assert np.all(out.errors >= 0)


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [1.2, 1.5, 1.8])
def test_interior_window_synchronizes(fig2_pair, gamma):
    out = st.simulate_network(fig2_pair, st.preset("fig2"), gamma, t_span=5000.0)
    assert out.synchronized


def test_simulate_accepts_network_object():
    net = netmodel.fixture_fig2()
    out = st.simulate_network(net, st.preset("fig2"), 1.5, t_span=10.0, sample_every=0.5)
    assert out.errors.shape == (21, 5)
    with pytest.raises(ValidationError):
        st.simulate_network(net, st.preset("fig2"), -1.0)
