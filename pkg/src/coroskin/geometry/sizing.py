from dataclasses import dataclass

import numpy as np

from ..errors import InputError


@dataclass
class MeshSizingParams:
    h_min_mm: float = 0.2
    h_max_mm: float = 1.0
    # curvature sensitivity, mm
    alpha_sizing: float = 1.0

    def validate(self):
        for name in ("h_min_mm", "h_max_mm", "alpha_sizing"):
            if not getattr(self, name) > 0:
                raise InputError(f"MeshSizingParams.{name} must be > 0, got {getattr(self, name)}")
        if self.h_min_mm > self.h_max_mm:
            raise InputError(f"MeshSizingParams.h_min_mm ({self.h_min_mm}) exceeds h_max_mm ({self.h_max_mm})")
        return self


def local_mesh_size(kappa, params):
    """Target edge length for curvature ``kappa`` (1/mm).

    Decays from ``h_max`` on flat regions to ``h_min`` as curvature grows.
    """
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0):
        raise InputError("curvature must be non-negative")
    h = params.h_min_mm + (params.h_max_mm - params.h_min_mm) * np.exp(-params.alpha_sizing * kappa)
    return float(h) if h.ndim == 0 else h
