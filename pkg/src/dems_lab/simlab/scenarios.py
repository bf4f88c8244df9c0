"""Plants and input signals used by the experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..datasets import Dataset
from ..gencoord import LinearPlant
from ..noise_model import NoiseSpec
from .simulate import simulate_lti

I_XX = 3.4e-3  # kg m^2, roll inertia
C_B_PHI = 1.274e-3  # N m, thrust coefficient


def scenario_paper_system() -> LinearPlant:
    """Random stable 2-state, 1-input, 4-output benchmark system."""
    A = np.array([[0.0484, 0.7535], [-0.7617, -0.2187]])
    B = np.array([[0.3604], [0.0776]])
    C = np.array(
        [
            [0.2265, -0.4786],
            [0.4066, -0.2641],
            [0.3871, 0.3817],
            [-0.1630, -0.9290],
        ]
    )
    return LinearPlant(A, B, C)


def scenario_quadrotor() -> LinearPlant:
    """Linearized roll dynamics driven by four motor PWM signals."""
    g = C_B_PHI / I_XX
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0, 0.0, 0.0, 0.0], [g, -g, -g, g]])
    C = np.array([[1.0, 0.0]])
    return LinearPlant(A, B, C)


def gaussian_bump(t):
    t = np.asarray(t, dtype=float)
    return np.exp(-0.25 * (t - 12.0) ** 2)[..., None]


class HoverController:
    """PD roll stabilizer mapping roll error to differential PWM around a trim."""

    def __init__(self, kp=4.0, kd=3.0, trim=1.0):
        self.kp, self.kd, self.trim = kp, kd, trim
        self.gain = C_B_PHI / I_XX

    def __call__(self, t, x):
        tau = -(self.kp * x[0] + self.kd * x[1]) / (4.0 * self.gain)
        return np.array([self.trim + tau, self.trim - tau, self.trim - tau, self.trim + tau])


@dataclass(frozen=True)
class Scenario:
    """A plant with its inputs, noise levels and default observer orders.

    ``noise_gain`` maps the generated process noise into the state equation;
    the observers always assume isotropic precisions ``e**log_prec_w I_n`` and
    ``e**log_prec_z I_m``.
    """

    name: str
    plant: LinearPlant
    T: float
    dt: float
    log_prec_w: float
    log_prec_z: float
    p: int
    d: int
    input_fn: Optional[Callable] = None
    controller: Optional[Callable] = None
    noise_gain: Optional[np.ndarray] = None

    def observer_noise(self, s: float, seed: int = 0) -> NoiseSpec:
        return NoiseSpec.isotropic(s, self.plant.n, self.plant.m, self.log_prec_w, self.log_prec_z, seed)

    def generation_noise(self, s: float, seed: int = 0) -> NoiseSpec:
        k = self.plant.n if self.noise_gain is None else np.asarray(self.noise_gain).shape[1]
        return NoiseSpec(
            s,
            np.exp(self.log_prec_w) * np.eye(k),
            np.exp(self.log_prec_z) * np.eye(self.plant.m),
            seed,
        )

    def simulate(self, s: float, seed: int, T: Optional[float] = None, dt: Optional[float] = None) -> Dataset:
        return simulate_lti(
            self.plant,
            self.input_fn,
            self.generation_noise(s, seed),
            self.T if T is None else T,
            self.dt if dt is None else dt,
            noise_gain=self.noise_gain,
            controller=self.controller,
            meta={"scenario": self.name},
        )


SCENARIOS = {
    "paper_system": Scenario(
        "paper_system", scenario_paper_system(), 32.0, 0.1, 6.0, 6.0, 6, 2, input_fn=gaussian_bump
    ),
    # wind enters as a roll torque, so only the angular-acceleration row is noisy
    "quadrotor": Scenario(
        "quadrotor", scenario_quadrotor(), 15.0, 0.0083, 4.0, 10.0, 2, 2,
        controller=HoverController(), noise_gain=np.array([[0.0], [1.0]]),
    ),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
