"""Mechanical limits and energy weights for motion synthesis."""

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError

EPS_R_CAP = 0.05  # radial strain stays within +-5 %


@dataclass
class MechanicalConstraints:
    theta_max_deg: float = 90.0
    r_min_mm: float = 1.0
    eps_max: float = 0.05
    youngs_modulus_mpa: float = 1.5
    delta_max_mm: float = None  # None: 5 % of the model bounding-box diagonal
    eps_r_cap: float = EPS_R_CAP
    strict: bool = False
    enforce_delta: bool = False

    def validate(self):
        for name in ("theta_max_deg", "r_min_mm", "eps_max", "youngs_modulus_mpa", "eps_r_cap"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"constraints.{name} must be a positive number, got {v!r}")
        if self.delta_max_mm is not None and not (np.isfinite(self.delta_max_mm) and self.delta_max_mm > 0):
            raise ConfigError(f"constraints.delta_max_mm must be positive, got {self.delta_max_mm!r}")
        return self

    def delta_for(self, points):
        if self.delta_max_mm is not None:
            return float(self.delta_max_mm)
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return 0.05 * float(np.linalg.norm(np.ptp(pts, axis=0)))

    def to_dict(self):
        return asdict(self)


@dataclass
class EnergyWeights:
    omega1: float = 1.0
    omega2: float = 1.0
    lambda_smooth: float = 10.0

    def validate(self):
        for name in ("omega1", "omega2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ConfigError(f"energy.{name} must be a nonnegative number, got {v!r}")
        if not self.omega1 + self.omega2 > 0:
            raise ConfigError("energy.omega1 + energy.omega2 must be positive")
        if not (np.isfinite(self.lambda_smooth) and self.lambda_smooth > 0):
            raise ConfigError(f"energy.lambda_smooth must be positive, got {self.lambda_smooth!r}")
        return self

    def to_dict(self):
        return asdict(self)
