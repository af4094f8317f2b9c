from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError


@dataclass
class VoxelVolume:
    """Scalar image on a regular grid.

    ``values`` is indexed ``[i, j, k]`` along x, y, z. Physical position of a
    voxel centre is ``origin_mm + index * spacing_mm``.
    """

    values: np.ndarray
    spacing_mm: tuple = (1.0, 1.0, 1.0)
    origin_mm: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.spacing_mm = tuple(float(s) for s in self.spacing_mm)
        self.origin_mm = tuple(float(o) for o in self.origin_mm)
        self.validate()

    def validate(self):
        if self.values.ndim != 3:
            raise InputError(f"volume values must be 3-D, got shape {self.values.shape}")
        if min(self.values.shape) < 2:
            raise InputError(f"volume dims must all be >= 2, got {self.values.shape}")
        if len(self.spacing_mm) != 3 or any(not s > 0 for s in self.spacing_mm):
            raise InputError(f"spacing_mm must be three positive values, got {self.spacing_mm}")
        if len(self.origin_mm) != 3:
            raise InputError(f"origin_mm must have three components, got {self.origin_mm}")
        return self

    @property
    def dims(self):
        return tuple(int(n) for n in self.values.shape)

    @property
    def spacing(self):
        return np.asarray(self.spacing_mm)

    @property
    def origin(self):
        return np.asarray(self.origin_mm)

    def index_to_mm(self, idx):
        idx = np.asarray(idx, dtype=float)
        return self.origin + idx * self.spacing

    def mm_to_index(self, pos):
        return (np.asarray(pos, dtype=float) - self.origin) / self.spacing

    def like(self, values):
        """New volume on the same grid."""
        return VoxelVolume(values, self.spacing_mm, self.origin_mm)


@dataclass
class FrangiParams:
    alpha: float = 0.5
    beta: float = 0.5
    # None -> half the largest Hessian norm over all scales
    c: float = None
    sigma_min_mm: float = 0.5
    sigma_max_mm: float = 2.5
    n_scales: int = 5
    bright: bool = True

    def validate(self):
        for name in ("alpha", "beta", "sigma_min_mm", "sigma_max_mm"):
            if not getattr(self, name) > 0:
                raise InputError(f"FrangiParams.{name} must be > 0, got {getattr(self, name)}")
        if self.c is not None and not self.c > 0:
            raise InputError(f"FrangiParams.c must be > 0, got {self.c}")
        if self.sigma_min_mm > self.sigma_max_mm:
            raise InputError(
                f"FrangiParams.sigma_min_mm ({self.sigma_min_mm}) exceeds sigma_max_mm ({self.sigma_max_mm})"
            )
        if int(self.n_scales) != self.n_scales or self.n_scales < 1:
            raise InputError(f"FrangiParams.n_scales must be an integer >= 1, got {self.n_scales}")
        return self

    def scales(self):
        return np.geomspace(self.sigma_min_mm, self.sigma_max_mm, int(self.n_scales))
