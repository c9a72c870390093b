import numpy as np
import pytest

from crmsim.errors import ConfigError, DimensionMismatch, InvalidConfig
from crmsim.models import (
    IdentifierSpec,
    ObserverSpec,
    ReferenceModelSpec,
    crm_rhs,
    identifier_rhs,
    ltv_plant_from_schedule,
    observer_rhs,
    orm_rhs,
    plant_from_matching,
    plant_rhs,
    prescribed_identifier_mu,
)
from crmsim.signals import PiecewiseLinearMatrixSchedule

A_M = np.array([[-1.0]])
B = np.array([1.0])


def test_matching_construction():
    plant = plant_from_matching(A_M, B, np.array([-2.0]))
    assert plant.A_p[0, 0] == pytest.approx(1.0)
    assert plant.theta_star_at(0.0) == pytest.approx(np.array([-2.0]))
    assert plant.kind == "lti"
    assert plant.n == 1


def test_matching_vector_case():
    A_m = np.array([[0.0, 1.0], [-2.0, -3.0]])
    b = np.array([0.0, 1.0])
    theta = np.array([1.0, -0.5])
    plant = plant_from_matching(A_m, b, theta)
    assert np.allclose(plant.A_p, A_m - np.outer(b, theta))


def test_matching_dimension_errors():
    with pytest.raises(DimensionMismatch):
        plant_from_matching(A_M, np.array([1.0, 2.0]), np.array([-2.0]))
    with pytest.raises(DimensionMismatch):
        plant_from_matching(np.ones((2, 3)), B, np.array([-2.0]))


def test_ltv_schedule_derives_matching_gain():
    sched = PiecewiseLinearMatrixSchedule([20.0, 24.0], [[[1.0]], [[2.0]]])
    plant = ltv_plant_from_schedule(A_M, B, sched)
    assert plant.kind == "ltv"
    # theta* = -1 - A_p(t) for the scalar pair
    assert plant.theta_star_at(0.0)[0] == pytest.approx(-2.0)
    assert plant.theta_star_at(22.0)[0] == pytest.approx(-2.5)
    assert plant.theta_star_at(30.0)[0] == pytest.approx(-3.0)
    assert plant.A_at(22.0)[0, 0] == pytest.approx(1.5)


def test_ltv_schedule_rejects_unmatchable_knot():
    A_m = -np.eye(2)
    b = np.array([1.0, 0.0])
    # identity difference is not rank one along b
    sched = PiecewiseLinearMatrixSchedule([0.0, 1.0],
                                          [-2.0 * np.eye(2), -np.eye(2)])
    with pytest.raises(ConfigError):
        ltv_plant_from_schedule(A_m, b, sched)


def test_plant_rhs_and_measurement():
    plant = plant_from_matching(A_M, B, np.array([-2.0]))
    dx, x_meas = plant_rhs(plant, 0.0, np.array([0.5]), u=1.0)
    # A_p x + b u = 0.5 + 1.0
    assert dx[0] == pytest.approx(1.5)
    assert x_meas[0] == pytest.approx(0.5)
    dx, x_meas = plant_rhs(plant, 0.0, np.array([0.5]), u=1.0,
                           d_value=np.array([0.1]), n_value=np.array([-0.2]))
    assert dx[0] == pytest.approx(1.6)
    assert x_meas[0] == pytest.approx(0.3)


def test_reference_model_rhs():
    rm = ReferenceModelSpec(A_m=A_M, b=B, ell=10.0)
    # A_m x_m + b r + ell (x - x_m)
    out = crm_rhs(rm, np.array([0.0]), np.array([0.5]), r=0.0)
    assert out[0] == pytest.approx(5.0)
    out = crm_rhs(rm, np.array([1.0]), np.array([1.0]), r=2.0)
    assert out[0] == pytest.approx(1.0)
    assert orm_rhs(rm, np.array([1.0]), r=2.0)[0] == pytest.approx(1.0)


def test_reference_model_validation():
    with pytest.raises(InvalidConfig):
        ReferenceModelSpec(A_m=A_M, b=B, ell=-1.0)
    with pytest.raises(DimensionMismatch):
        ReferenceModelSpec(A_m=A_M, b=np.array([1.0, 0.0]), ell=0.0)


def test_identifier_rhs_scalar():
    spec = IdentifierSpec(mu=11.0)
    out = identifier_rhs(spec, np.array([1.0]), np.array([0.0]),
                         np.array([0.0]), u=0.0, A_m=A_M, b=B)
    assert out[0] == pytest.approx(-11.0)
    # regressor is the measurement, not the identifier state
    out = identifier_rhs(spec, np.array([1.0]), np.array([1.0]),
                         np.array([2.0]), u=2.0, A_m=A_M, b=B)
    assert out[0] == pytest.approx(-1.0 - 2.0 + 2.0)


def test_observer_rhs_scalar():
    spec = ObserverSpec(mu=10.0)
    out = observer_rhs(spec, np.array([1.0]), np.array([1.0]),
                       np.array([2.0]), u=2.0, A_m=A_M, b=B)
    # -mu*0 + A_m x_o - b theta_hat' x_o + b u = -1 - 2 + 2
    assert out[0] == pytest.approx(-1.0)
    # injection reacts to the gap
    out = observer_rhs(spec, np.array([1.0]), np.array([0.0]),
                       np.array([0.0]), u=0.0, A_m=A_M, b=B)
    assert out[0] == pytest.approx(-11.0)


def test_gain_specs():
    assert prescribed_identifier_mu(A_M, 10.0) == pytest.approx(11.0)
    with pytest.raises(InvalidConfig):
        IdentifierSpec(mu=0.0)
    # zero observer gain is legal (open-loop observer)
    assert ObserverSpec(mu=0.0).mu == 0.0
    with pytest.raises(InvalidConfig):
        ObserverSpec(mu=-1.0)
