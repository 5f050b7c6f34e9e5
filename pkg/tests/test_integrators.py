import numpy as np
import pytest

from fracvi.bench import global_error
from fracvi.errors import ConfigurationError, InvalidOrderError, StepFailure
from fracvi.integrators import (
    FviProblem,
    FviStepper,
    el_residuals,
    fvi_reversed_check,
    fvi_run,
)
from fracvi.models import GalerkinScheme, MidpointLagrangian, discrete_lagrangian, get_model
from fracvi.newton import NewtonConfig


def osc(N=128, p=1, **kw):
    return FviProblem.from_model("damped-osc", p, N=N, **kw)


def test_problem_validation():
    with pytest.raises(InvalidOrderError):
        osc(p=7)
    with pytest.raises(ConfigurationError):
        osc(mu=-1.0)
    with pytest.raises(ConfigurationError):
        FviProblem.from_model("damped-osc", 1, h=0.3)
    with pytest.raises(ConfigurationError):
        FviProblem.from_model("damped-osc", 1, h=0.5, N=32)
    assert osc().frac_order == 1.0 and osc(p=3).corr_degree == 2


def test_first_step_from_momentum():
    pr = osc()
    tr = fvi_run(pr)
    D = MidpointLagrangian(pr.model, pr.h).partials(tr.interval(0), 0.0)
    np.testing.assert_allclose(-D[0], pr.p_x0, atol=1e-12)


@pytest.mark.parametrize("scheme", [None, GalerkinScheme.gauss(2), GalerkinScheme.gauss(3)])
def test_residual_certification(scheme):
    pr = FviProblem.from_model("torvik-14", 2, N=32)
    tr = fvi_run(pr, scheme)
    assert np.max(el_residuals(pr, tr, scheme)) < 1e-11
    assert np.max(tr.residuals) < 1e-11


def test_history_causality():
    pr = osc(N=40, p=2)
    tr = fvi_run(pr)
    st = FviStepper(pr, discrete_lagrangian(pr.model, pr.h))
    k = 20
    main = np.array(tr.main)
    main[k + 1 :] = 1e3  # garbage in the future
    inner = np.array(tr.inner)
    nodes, _ = st.solve_step(main, inner, k)
    assert nodes[-1, 0] == pytest.approx(tr.main[k + 1, 0], abs=1e-13)


def test_conservative_run_conserves_energy():
    from fracvi.bench import energy_trace

    pr = osc(mu=0.0)
    tr = fvi_run(pr)
    e = energy_trace(tr, pr.model).values
    assert np.max(np.abs(e - e[0])) < 1e-12


def test_trajectory_read_only():
    tr = fvi_run(osc(N=16))
    with pytest.raises(ValueError):
        tr.main[0, 0] = 1.0
    assert tr.times[-1] == pytest.approx(16.0)


def test_midpoint_scheme_degenerates():
    pr = osc()
    a = fvi_run(pr)
    b = fvi_run(pr, GalerkinScheme.midpoint())
    assert np.max(np.abs(a.main - b.main)) < 1e-10


@pytest.mark.parametrize("scheme", [None, GalerkinScheme.gauss(2)])
def test_time_reversal(scheme):
    pr = osc()
    tr = fvi_run(pr, scheme)
    rep = fvi_reversed_check(pr, tr, scheme)
    assert rep.max_residual < 1e-8
    # a random trajectory is far from satisfying it
    rng = np.random.default_rng(0)
    from fracvi.integrators import Trajectory

    fake = Trajectory.from_main(rng.normal(size=tr.main.shape), pr.h)
    assert fvi_reversed_check(pr, fake).max_residual > 1e-2


def test_corrected_joint_start():
    pr = FviProblem.from_model("torvik-34", 4, N=32, use_starting_correction=True)
    assert pr.corr_degree == 3
    sc = GalerkinScheme.gauss(2)
    tr = fvi_run(pr, sc)
    assert np.max(el_residuals(pr, tr, sc)) < 1e-10
    assert global_error(tr, pr.model.exact_solution) < 2 * pr.h**2


def test_torvik_accuracy_bdf2():
    pr = FviProblem.from_model("torvik-14", 2, N=256)
    tr = fvi_run(pr)
    assert global_error(tr, pr.model.exact_solution) < 5 * pr.h**2


def test_step_failure_reports_index():
    # no Newton iterations allowed: the very first solve must fail
    m = get_model("damped-osc")
    pr = FviProblem(m, 0.2, 0.5, 0.5, 1, 8, 2.0, np.zeros(1), np.array([1.2]),
                    newton=NewtonConfig(max_iter=0))
    with pytest.raises(StepFailure) as ei:
        fvi_run(pr)
    assert ei.value.step == 0
