"""Discrete LQG design at a given sampling period and stationary cost evaluation.

Gains are designed once at nominal noise intensity (r = 1) and reused across
disturbance levels; only the evaluation intensity changes.  The estimator is
the current-estimator form: measure, update, then feed back, with the
measurement taken while the previous input is still held (so any feedthrough
D cancels out of the innovation and the closed loop).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plant import DiscretePlant, PlantModel, discretize
from .riccati import (DesignError, dare_residual, dlyap_residual, solve_dare,
                      solve_dlyap, spectral_radius)


@dataclass(frozen=True)
class LqgController:
    """Stationary LQG controller for one sampling period.

    K is the state-feedback gain on the updated estimate; Kf the stationary
    measurement-update Kalman gain; S_innov the innovation covariance at
    r = 1 (the per-rate normalizer of the intensity estimator).  The
    estimator recurrence is
        xupd = xhat + Kf (y - C xhat);  u = -K xupd;
        xhat+ = Phi xupd + Gamma u.
    """

    dp: DiscretePlant
    K: np.ndarray
    Kf: np.ndarray
    P_ctrl: np.ndarray
    P_pred: np.ndarray
    S_innov: np.ndarray
    control_residual: float
    filter_residual: float

    @property
    def h(self) -> float:
        return self.dp.h


@dataclass(frozen=True)
class CostBreakdown:
    """Affine decomposition J = a * r + b of the stationary cost."""

    a: float
    b: float
    J: float


def design(plant: PlantModel, h: float) -> LqgController:
    """Design the LQG controller for ``plant`` at period ``h`` seconds.

    Raises DesignError when a Riccati solve fails or the resulting loop is
    unstable.
    """
    dp = discretize(plant, h)
    nx, nu = plant.nx, plant.nu
    q1d = dp.Qd[:nx, :nx]
    q12 = dp.Qd[:nx, nx:]
    q2d = dp.Qd[nx:, nx:]
    if np.linalg.eigvalsh(0.5 * (q2d + q2d.T)).min() <= 0.0:
        raise DesignError(f"input-weight block of the lifted cost is singular at h={h}")
    p_ctrl = solve_dare(dp.Phi, dp.Gamma, q1d, q2d, S=q12)
    k = np.linalg.solve(q2d + dp.Gamma.T @ p_ctrl @ dp.Gamma,
                        dp.Gamma.T @ p_ctrl @ dp.Phi + q12.T)
    p_pred = solve_dare(dp.Phi.T, plant.C.T, dp.R1d, plant.R2)
    s_innov = plant.C @ p_pred @ plant.C.T + plant.R2
    try:
        kf = np.linalg.solve(s_innov.T, (p_pred @ plant.C.T).T).T
    except np.linalg.LinAlgError as exc:
        raise DesignError(f"singular innovation covariance at h={h}") from exc
    ctrl = LqgController(
        dp=dp, K=k, Kf=kf, P_ctrl=p_ctrl, P_pred=p_pred, S_innov=s_innov,
        control_residual=dare_residual(p_ctrl, dp.Phi, dp.Gamma, q1d, q2d, q12),
        filter_residual=dare_residual(p_pred, dp.Phi.T, plant.C.T, dp.R1d, plant.R2),
    )
    rho = spectral_radius(closed_loop_matrix(plant, ctrl))
    if rho >= 1.0:
        raise DesignError(f"closed loop unstable at h={h} (spectral radius {rho:.6f})")
    return ctrl


def closed_loop_matrix(plant: PlantModel, ctrl: LqgController) -> np.ndarray:
    """Transition matrix of the stacked [plant state; predicted estimate]."""
    acl, _, _, _ = _loop_operators(plant, ctrl)
    return acl


def _loop_operators(plant: PlantModel, ctrl: LqgController):
    nx, ny = plant.nx, plant.ny
    phi, gamma = ctrl.dp.Phi, ctrl.dp.Gamma
    gk = gamma @ ctrl.K
    m = ctrl.Kf @ plant.C
    eye = np.eye(nx)
    acl = np.block([
        [phi - gk @ m, -gk @ (eye - m)],
        [(phi - gk) @ m, (phi - gk) @ (eye - m)],
    ])
    # measurement noise enters the state through the fed-back innovation
    ge = np.vstack([-gk @ ctrl.Kf, (phi - gk) @ ctrl.Kf])
    # instantaneous [x; u] as a function of [x; xhat] and of e
    t_map = np.block([
        [eye, np.zeros((nx, nx))],
        [-ctrl.K @ m, -ctrl.K @ (eye - m)],
    ])
    te = np.vstack([np.zeros((nx, ny)), -ctrl.K @ ctrl.Kf])
    return acl, ge, t_map, te


def _stationary_cost(plant: PlantModel, ctrl: LqgController, r: float) -> float:
    acl, ge, t_map, te = _loop_operators(plant, ctrl)
    nx = plant.nx
    w = ge @ plant.R2 @ ge.T
    w[:nx, :nx] += r * ctrl.dp.R1d
    z = solve_dlyap(acl, w)
    per_step = float(np.trace(ctrl.dp.Qd @ (t_map @ z @ t_map.T + te @ plant.R2 @ te.T)))
    return (per_step + r * ctrl.dp.jbar1) / ctrl.dp.h


def evaluate_cost(plant: PlantModel, ctrl: LqgController, r: float) -> CostBreakdown:
    """Stationary per-time quadratic cost of the closed loop at intensity ``r``.

    Solves the discrete Lyapunov equation for the stationary covariance of
    the plant + estimator state, contracts with the lifted cost, and divides
    by the period.  Returns the affine decomposition alongside the directly
    evaluated J(r).
    """
    if r < 0.0:
        raise ValueError(f"noise intensity must be non-negative, got {r}")
    rho = spectral_radius(closed_loop_matrix(plant, ctrl))
    if rho >= 1.0:
        raise DesignError(f"cannot evaluate cost: closed loop unstable (rho={rho:.6f})")
    b = _stationary_cost(plant, ctrl, 0.0)
    a = _stationary_cost(plant, ctrl, 1.0) - b
    j = _stationary_cost(plant, ctrl, float(r))
    # a and b are exact quadratic-form traces; clip roundoff-level negatives
    if a < 0.0:
        if a < -1e-9 * max(1.0, abs(j)):
            raise DesignError(f"negative noise-cost slope {a:.3e}")
        a = 0.0
    if b < 0.0:
        if b < -1e-9 * max(1.0, abs(j)):
            raise DesignError(f"negative noise-free cost {b:.3e}")
        b = 0.0
    return CostBreakdown(a=a, b=b, J=j)


def lyapunov_residual(plant: PlantModel, ctrl: LqgController, r: float = 1.0) -> float:
    """Residual of the stationary-covariance solve used by evaluate_cost."""
    acl, ge, _, _ = _loop_operators(plant, ctrl)
    nx = plant.nx
    w = ge @ plant.R2 @ ge.T
    w[:nx, :nx] += r * ctrl.dp.R1d
    z = solve_dlyap(acl, w)
    return dlyap_residual(z, acl, w)
