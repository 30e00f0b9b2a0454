from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional
import numpy as np
from pydantic import BaseModel, Field


class SmoothRegion(str, Enum):
    """Parameter-space regions of the smooth model"""
    OMEGA1 = "Omega1-static"
    OMEGA2 = "Omega2-oscillation"
    OMEGA3 = "Omega3-heteroclinic"
    OMEGA4 = "Omega4-collapse"


class RegionLabel(BaseModel):
    label: SmoothRegion
    margin: float = Field(..., ge=0, description="Distance in xe to the nearest region boundary")
    xe_h: Optional[float] = Field(None, description="Heteroclinic abscissa at this F, when solved")

    class Config:
        frozen = True


class SolveDiagnostics(BaseModel):
    iterations: int
    residual_gap: float
    bracket_width: float
    offset_shift: Optional[float] = Field(None, description="Crossing-height change when the separatrix offset is halved")

    class Config:
        frozen = True


class HeteroclinicSolution(BaseModel):
    F: float
    xe_h: float
    diagnostics: SolveDiagnostics

    class Config:
        frozen = True


@dataclass(frozen=True)
class BifurcationCurve:
    """Sampled one-parameter locus with per-point solver diagnostics"""
    parameter_name: str
    parameters: np.ndarray
    values: np.ndarray
    diagnostics: List[Optional[SolveDiagnostics]]
    lower_bound: float
    upper_bound: float
    failures: List[dict] = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def solved(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def __len__(self) -> int:
        return len(self.parameters)


class CycleOutcome(str, Enum):
    CYCLE = "cycle"
    STATIC = "static"
    COLLAPSE = "collapse"
    INCONCLUSIVE = "inconclusive"


class CycleSweepRow(BaseModel):
    xe: float
    outcome: CycleOutcome
    x_amplitude: Optional[float] = None
    y_amplitude: Optional[float] = None
    period: Optional[float] = None

    class Config:
        frozen = True
