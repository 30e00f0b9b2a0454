from dataclasses import dataclass, field
from typing import List, Optional, Tuple
import numpy as np
from pydantic import BaseModel, Field


class NoiseConfig(BaseModel):
    """Euler-Maruyama protocol settings"""
    sigma: float = Field(0.0, ge=0, description="Additive noise intensity on the resource")
    dt: float = Field(0.01, gt=0)
    t_max: float = Field(300.0, gt=0)
    seed: int = Field(20240611, ge=0, lt=2**64)
    initial_state: Tuple[float, float] = (1.5, 0.3)
    y_extinction: float = Field(1e-4, gt=0, description="Consumer extinction threshold")
    x_extinction: float = Field(1e-4, gt=0, description="Resource threshold, diagnostics only")
    blowup: float = Field(1e3, gt=0)
    chunk_steps: int = Field(500, ge=1, description="Noise draws generated per block")

    class Config:
        frozen = True

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class RealizationResult:
    survived: bool
    extinction_time: Optional[float]
    blowup: bool = False
    resource_extinction_time: Optional[float] = None
    clamped_steps: int = 0
    times: Optional[np.ndarray] = None
    states: Optional[np.ndarray] = None


@dataclass(frozen=True)
class EnsembleCell:
    cell_index: int
    sigma: float
    xe: float
    n: int
    n_extinct: int
    n_blowup: int
    n_clamped: int
    mean_ext_time: Optional[float]
    std_ext_time: Optional[float]

    @property
    def survival(self) -> float:
        return (self.n - self.n_extinct) / self.n


@dataclass(frozen=True)
class EnsembleResult:
    """Per-cell survival and extinction statistics over a (sigma, xe) grid"""
    F: float
    sigma_values: Tuple[float, ...]
    xe_values: Tuple[float, ...]
    cells: List[EnsembleCell]
    base_seed: int
    config: dict = field(default_factory=dict)

    def cell(self, sigma: float, xe: float) -> EnsembleCell:
        for candidate in self.cells:
            if candidate.sigma == sigma and candidate.xe == xe:
                return candidate
        raise KeyError((sigma, xe))

    def survival_matrix(self) -> np.ndarray:
        """Rows follow sigma_values, columns xe_values"""
        matrix = np.empty((len(self.sigma_values), len(self.xe_values)))
        for i, sigma in enumerate(self.sigma_values):
            for j, xe in enumerate(self.xe_values):
                matrix[i, j] = self.cell(sigma, xe).survival
        return matrix

    def threshold_xe(self, sigma: float, level: float = 0.5) -> Optional[float]:
        """Smallest xe above which survival stays at or above level"""
        row = self.survival_matrix()[self.sigma_values.index(sigma)]
        xs = np.asarray(self.xe_values)
        below = np.flatnonzero(row < level)
        if below.size == 0:
            return float(xs[0])
        last = below[-1]
        if last == len(xs) - 1:
            return None
        return float(xs[last + 1])
