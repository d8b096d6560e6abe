"""Vector field of the three-state larva growth / temperature model.

States are ``x1`` (dry biomass per larva, mg), ``x2`` (medium temperature,
degC) and ``x3`` (air temperature, degC).  Inputs are the ventilator command
``u1`` and the heater/cooler command ``u2``; the outside temperature ``d`` is a
measured disturbance.  The outputs are the two temperatures.

All functions accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .params import LoganParameters, LumpedParameters


class State(NamedTuple):
    x1: float
    x2: float
    x3: float


class ControlInput(NamedTuple):
    u1: float
    u2: float


class Output(NamedTuple):
    y1: float
    y2: float


# the outside temperature enters as a bare float
Disturbance = float


def _logan_terms(T, lg: LoganParameters):
    cold = lg.k_gamma * np.exp(-lg.k_rhoT * (T - lg.k_Tbase))
    hot = np.exp(-(lg.k_Tmax - T) / lg.k_DeltaT)
    return cold, hot


def temp_rate(T, logan: LoganParameters):
    """Logan-10 temperature rate ``r_T``; strictly positive for finite ``T``."""
    cold, hot = _logan_terms(np.asarray(T, dtype=float), logan)
    return logan.k_rmaxT / (1.0 + cold + hot)


def temp_rate_derivative(T, logan: LoganParameters):
    """Closed-form ``d r_T / dT``."""
    cold, hot = _logan_terms(np.asarray(T, dtype=float), logan)
    denom = 1.0 + cold + hot
    ddenom = -logan.k_rhoT * cold + hot / logan.k_DeltaT
    return -logan.k_rmaxT * ddenom / denom**2


def assim_rate(x1, T, params: LumpedParameters):
    return (1.0 - np.asarray(x1, dtype=float) / params.k2) * temp_rate(T, params.logan) / params.logan.k_rmaxT


def maint_rate(T, params: LumpedParameters):
    return temp_rate(T, params.logan) / params.logan.k_rmaxT


def dynamics(x, u, d, params: LumpedParameters) -> np.ndarray:
    """Right-hand side ``[dx1, dx2, dx3]``.

    ``x`` is ``(x1, x2, x3)``, ``u`` is ``(u1, u2)``.  No clamping is applied;
    the biomass interval ``[0, k2]`` is invariant under the flow itself.
    """
    p = params
    x1, x2, x3 = x
    u1, u2 = u
    rT = temp_rate(x2, p.logan)
    logistic = 1.0 - x1 / p.k2
    dx1 = (p.k1 * logistic - p.k3) * rT * x1
    dx2 = -p.k4 * x2 + p.k5 * x3 + p.k6 * logistic * rT * x1 + p.k7 * rT * x1 - p.k8 * d
    dx3 = p.k9 * x2 - p.k10 * x3 + p.k11 * u2 - p.k12 * x3 * u1 + p.k13 * d + p.k12 * d * u1
    return np.array([dx1, dx2, dx3], dtype=float)


def output(x) -> Output:
    return Output(x[1], x[2])


def jacobian_x(x, u, d, params: LumpedParameters) -> np.ndarray:
    """Analytic ``d f / d x`` (3x3)."""
    p = params
    x1, x2, x3 = (float(v) for v in x)
    u1 = float(u[0])
    rT = float(temp_rate(x2, p.logan))
    drT = float(temp_rate_derivative(x2, p.logan))
    growth = p.k1 * (1.0 - x1 / p.k2) - p.k3
    heat = p.k6 * (1.0 - x1 / p.k2) + p.k7
    return np.array(
        [
            [(growth - p.k1 * x1 / p.k2) * rT, growth * x1 * drT, 0.0],
            [(heat - p.k6 * x1 / p.k2) * rT, -p.k4 + heat * x1 * drT, p.k5],
            [0.0, p.k9, -p.k10 - p.k12 * u1],
        ]
    )


def jacobian_d(x, u, params: LumpedParameters) -> np.ndarray:
    """``d f / d d`` for the outside temperature."""
    return np.array([0.0, -params.k8, params.k13 + params.k12 * float(u[0])])


def jacobian_u(x, u, d, params: LumpedParameters) -> np.ndarray:
    """``d f / d u`` (3x2)."""
    x3 = float(x[2])
    return np.array([[0.0, 0.0], [0.0, 0.0], [-params.k12 * x3 + params.k12 * float(d), params.k11]])


def growth_equilibrium(params: LumpedParameters) -> float:
    """Nonzero biomass equilibrium ``k2 (1 - k3/k1)``."""
    return params.k2 * (1.0 - params.k3 / params.k1)
