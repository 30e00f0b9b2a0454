import math
from typing import Callable, Optional
from pydantic import BaseModel, Field, model_validator

# =============================================================================
# PARAMETERIZATIONS
# =============================================================================

class OriginalParams(BaseModel):
    """Ecological parameters of the facilitation model before rescaling"""
    alpha: float = Field(..., ge=0, description="Facilitated growth rate (1/time)")
    D: float = Field(..., ge=0, lt=1, description="Habitat-loss fraction")
    eps: float = Field(..., gt=0, description="Resource mortality (1/time)")
    epsS: float = Field(..., ge=0, description="Consumption rate")
    mu: float = Field(..., ge=0, le=1, description="Conversion efficiency")
    delta: float = Field(..., ge=0, description="Consumer mortality (1/time)")

    class Config:
        frozen = True


class RescaledParams(BaseModel):
    """Dimensionless parameters of the rescaled system"""
    A: float = Field(..., ge=0)
    B: float = Field(..., ge=0)
    F: float = Field(..., ge=0)
    G: float = Field(..., ge=0)

    class Config:
        frozen = True

    @property
    def is_generic(self) -> bool:
        return self.B * self.B - 4.0 * self.A > 0


class SaddlePair(BaseModel):
    """Vegetation-only equilibria x0 < x1; the base of every parameter sweep"""
    x0: float = Field(..., gt=0, description="Unstable vegetation equilibrium")
    x1: float = Field(..., gt=0, description="Stable vegetation equilibrium")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _ordered(self):
        if not self.x0 < self.x1:
            raise ValueError(f"x0 must be below x1 (got x0={self.x0}, x1={self.x1})")
        return self

    def with_consumer(self, xe: float, F: float) -> "SmoothParams":
        return SmoothParams(x0=self.x0, x1=self.x1, xe=xe, F=F)


class SmoothParams(BaseModel):
    """Parameters (x0, x1, xe, F) of the smooth model"""
    x0: float = Field(..., gt=0, description="Lower vegetation equilibrium")
    x1: float = Field(..., gt=0, description="Upper vegetation equilibrium")
    xe: float = Field(..., gt=0, description="Resource level at coexistence")
    F: float = Field(..., gt=0, description="Consumer to resource rate ratio")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _finite_and_ordered(self):
        for name in ("x0", "x1", "xe", "F"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.x0 > self.x1:
            raise ValueError(f"x0 must not exceed x1 (got x0={self.x0}, x1={self.x1})")
        return self

    @property
    def is_generic(self) -> bool:
        return self.x0 < self.x1

    @property
    def base(self) -> SaddlePair:
        return SaddlePair(x0=self.x0, x1=self.x1)

    @property
    def x_H(self) -> float:
        return 0.5 * (self.x0 + self.x1)

    @property
    def y_e(self) -> float:
        """Consumer level at the coexistence point (negative outside x0 < xe < x1)"""
        return (self.x1 - self.xe) * (self.xe - self.x0) / (self.x0 * self.x1)

    def replace(self, **changes) -> "SmoothParams":
        return self.model_copy(update=changes)

# =============================================================================
# DERIVED LOCI AND CONSTANTS
# =============================================================================

class LocusSet(BaseModel):
    """Closed-form bifurcation loci of the smooth model"""
    x0: float
    x1: float
    x_c: float = Field(..., description="Harmonic mean, collapse threshold")
    x_H: float = Field(..., description="Arithmetic mean, Hopf abscissa")
    x_geo: float = Field(..., description="Geometric mean")
    D_SN: Optional[float] = Field(None, description="Saddle-node habitat threshold")

    class Config:
        frozen = True

    def F_FN(self, xe: float) -> float:
        """Focus-node boundary F_FN(xe)"""
        x0, x1 = self.x0, self.x1
        if not x0 < xe < x1:
            return math.inf
        return xe * (x0 + x1 - 2 * xe) ** 2 / (4 * x0 * x1 * (x1 - xe) * (xe - x0))


class HabitatRatios(BaseModel):
    """Relative widths of the collapse, oscillation and static bands in (x0, x1)"""
    R_c: float
    R_o: float
    R_s: float

    class Config:
        frozen = True


class HopfConstants(BaseModel):
    L1: float = Field(..., description="First Lyapunov coefficient")
    T0: float = Field(..., description="Leading period of the Hopf cycle")
    dT: float = Field(..., description="Linear period coefficient")

    class Config:
        frozen = True


class TranscriticalReport(BaseModel):
    """Stability of the pairs exchanged at xe = x0 and xe = x1"""
    ordering: str
    coexistence: Optional[str]
    lower_vegetation: str
    upper_vegetation: str

    class Config:
        frozen = True
