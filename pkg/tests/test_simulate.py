import math
import warnings

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from symbiotic.model import SymbioticConfig, assemble_closed_loop
from symbiotic.model import LtiSystem
from symbiotic.simulate import (
    Constant,
    DivergenceError,
    FilteredSquareWave,
    Sinusoid,
    Trajectory,
    Zero,
    eval_signal,
    integrate,
    quadratic_cost,
    rk4,
    simulate_lti,
)


def make_traj(t, e):
    """Trajectory whose only nonzero content is the error channel."""
    N, n = e.shape
    z = np.zeros((N, 1))
    return Trajectory(t=t, x=e, x_n=np.zeros((N, n)), e=e, u=z, u_n=z, u_f=z, u_a=z, u_fl=z, d_hat=z, d=z)


def richardson_order(run):
    a, b, c = (run(h) for h in (1e-3, 5e-4, 2.5e-4))
    return math.log2(np.max(np.abs(a - b)) / np.max(np.abs(b - c)))


def test_zero_trajectory(plant, gains, nfg):
    traj = integrate(assemble_closed_loop(plant, gains, nfg), Zero(), Zero(), t_final=2.0)
    assert np.all(traj.table()[:, 1:] == 0.0)
    assert quadratic_cost(traj) == 0.0


@pytest.mark.parametrize("driver", ["generic", "lti"])
def test_rk4_scalar_decay(driver):
    def final(dt):
        t = dt * np.arange(int(round(1.0 / dt)) + 1)
        if driver == "generic":
            return rk4(lambda _, z: -z, [1.0], t)[-1, 0]
        sys = LtiSystem([[-1.0]], [[0.0]], [[1.0]], [[0.0]])
        return simulate_lti(sys, [1.0], lambda s: np.zeros((len(s), 1)), t)[0][-1, 0]

    err = [abs(final(dt) - math.exp(-1.0)) for dt in (0.1, 0.05)]
    assert err[0] < 1e-5
    assert 14.0 < err[0] / err[1] < 17.0


def test_rk4_order_on_example_loop(plant, gains, nfg):
    model = assemble_closed_loop(plant, gains, nfg)

    def run(dt):
        traj = integrate(model, FilteredSquareWave(), Constant(10.0), t_final=10.0, dt=dt)
        return traj.table()[:: int(round(1e-3 / dt)), 1:]

    assert richardson_order(run) >= 3.8


def test_superposition(plant, gains, nfg):
    model = assemble_closed_loop(plant, gains, nfg)
    a = integrate(model, FilteredSquareWave(1.0), Sinusoid(10.0, 2.0), t_final=50.0)
    b = integrate(model, FilteredSquareWave(2.0), Sinusoid(20.0, 4.0), t_final=50.0)
    A, B = a.table()[:, 1:], b.table()[:, 1:]
    assert np.max(np.abs(B - 2 * A)) <= 1e-9 * np.max(np.abs(B))
    r_only = integrate(model, FilteredSquareWave(1.0), Zero(), t_final=50.0).table()[:, 1:]
    d_only = integrate(model, Zero(), Sinusoid(10.0, 2.0), t_final=50.0).table()[:, 1:]
    assert np.max(np.abs(r_only + d_only - A)) <= 1e-9 * np.max(np.abs(A))


def test_deterministic(plant, gains, nfg):
    model = assemble_closed_loop(plant, gains, nfg)
    runs = [integrate(model, FilteredSquareWave(), Constant(10.0), t_final=10.0) for _ in range(2)]
    assert np.array_equal(runs[0].table(), runs[1].table())
    assert runs[0].to_csv() == runs[1].to_csv()


@pytest.mark.slow
def test_bounded_under_time_varying_disturbance(plant, gains):
    cfg = SymbioticConfig(alpha=10.0, mu1=0.1)
    traj = integrate(assemble_closed_loop(plant, gains, cfg), FilteredSquareWave(), Sinusoid(10.0, 2.0), t_final=500.0)
    tab = np.abs(traj.table()[:, 1:])
    assert np.all(np.isfinite(tab))
    half = len(traj.t) // 2
    # no growth: the second half stays within the first half's envelope,
    # up to the beat between the square wave and the sinusoid
    assert np.all(tab[half:].max(axis=0) <= 1.01 * tab[:half].max(axis=0) + 1e-9)


def test_coarse_step_warns(plant, gains, nfg):
    model = assemble_closed_loop(plant, gains, nfg)
    with pytest.warns(UserWarning, match="too coarse"):
        integrate(model, Zero(), Zero(), t_final=0.2, dt=0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        integrate(model, Zero(), Zero(), t_final=0.2)


def test_divergence_detected():
    sys = LtiSystem([[2000.0]], [[0.0]], [[1.0]], [[0.0]])
    t = 1e-3 * np.arange(2001)
    with pytest.raises(DivergenceError, match="divergence at t="):
        simulate_lti(sys, [1.0], lambda s: np.zeros((len(s), 1)), t)


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(dt=1e-3, t_final=1e-4)])
def test_bad_grid(plant, gains, nfg, kwargs):
    with pytest.raises(ValueError):
        integrate(assemble_closed_loop(plant, gains, nfg), Zero(), Zero(), **kwargs)


def test_cost_examples():
    t = 1e-3 * np.arange(2001)
    assert quadratic_cost(make_traj(t, np.zeros((len(t), 2)))) == 0.0
    ones = np.column_stack([np.ones_like(t), np.zeros_like(t)])
    assert quadratic_cost(make_traj(t, ones)) == pytest.approx(2.0, rel=1e-12)
    t = np.linspace(0.0, 2 * math.pi, int(round(2 * math.pi / 1e-3)) + 1)
    s = np.column_stack([np.sin(t), np.zeros_like(t)])
    assert abs(quadratic_cost(make_traj(t, s)) - math.pi) <= 1e-4


def test_cost_partial_window():
    t = 1e-3 * np.arange(2001)
    traj = make_traj(t, np.ones((len(t), 1)))
    assert quadratic_cost(traj, 1.2345) == pytest.approx(1.2345, rel=1e-12)
    with pytest.raises(ValueError, match="beyond"):
        quadratic_cost(traj, 2.5)


def test_trajectory_checks_error_consistency():
    t = np.arange(3.0)
    with pytest.raises(ValueError, match="inconsistent"):
        z = np.zeros((3, 1))
        Trajectory(t=t, x=np.ones((3, 1)), x_n=z, e=z, u=z, u_n=z, u_f=z, u_a=z, u_fl=z, d_hat=z, d=z)


def test_signal_examples():
    assert np.all(eval_signal(Constant(10.0), np.linspace(0, 50, 7)) == 10.0)
    assert eval_signal(FilteredSquareWave(1.0, 2.0, 0.5), 0.0)[0] == 0.0
    assert eval_signal(FilteredSquareWave(1.0, 2.0, 200.0), 0.5)[0] == pytest.approx(1.0, abs=1e-12)
    assert eval_signal(FilteredSquareWave(1.0, 2.0, 200.0), 1.5)[0] == pytest.approx(-1.0, abs=1e-12)
    assert eval_signal(Zero(), [1.0, 2.0], dim=3).shape == (2, 3)
    assert eval_signal(Sinusoid(10.0, 2.0), math.pi / 2)[0] == pytest.approx(12.0)
    with pytest.raises(ValueError):
        eval_signal(Constant(1.0), -0.1)
    with pytest.raises(ValueError):
        FilteredSquareWave(period_s=0.0)
    with pytest.raises(ValueError):
        FilteredSquareWave(filter_pole=-1.0)


def test_square_wave_matches_lag_ode():
    sig = FilteredSquareWave(1.5, 40.0, 0.5)
    half = 20.0
    s = 0.0
    for k in range(6):
        level = 1.5 if k % 2 == 0 else -1.5
        seg = np.linspace(k * half, (k + 1) * half, 201)
        sol = solve_ivp(lambda _, y: -0.5 * (y - level), (seg[0], seg[-1]), [s], t_eval=seg, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(sig.values(seg[:-1]), sol.y[0, :-1], atol=1e-9)
        s = sol.y[0, -1]
    assert sig.bound() == 1.5
    assert np.max(np.abs(np.diff(sig.values(np.linspace(0, 120, 120001))) / 1e-3)) <= sig.rate_bound()


def test_csv_export(tmp_path, plant, gains, nfg):
    traj = integrate(assemble_closed_loop(plant, gains, nfg), FilteredSquareWave(), Constant(10.0), t_final=1.0)
    path = tmp_path / "traj.csv"
    text = traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert text == path.read_text()
    assert lines[0] == "t,x1,x2,xn1,xn2,e1,e2,u,un,uf,ua,ufl,dhat,d"
    assert len(lines) == len(traj.t) + 1
    parsed = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.array_equal(parsed, traj.table())
