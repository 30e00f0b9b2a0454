import math
from enum import Enum
from typing import Optional, Tuple
from pydantic import BaseModel, Field, model_validator


class PwlParams(BaseModel):
    """Parameters of the piecewise-linear Filippov model"""
    x0: float = Field(..., gt=0)
    x1: float = Field(..., gt=0)
    xe: float = Field(..., gt=0)
    F: float = Field(..., gt=0)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _ordered(self):
        if not self.x0 < self.xe < self.x1:
            raise ValueError(f"PWL model needs x0 < xe < x1 (got {self.x0}, {self.xe}, {self.x1})")
        return self

    @property
    def x_H(self) -> float:
        return 0.5 * (self.x0 + self.x1)

    @property
    def lam(self) -> float:
        """Distance of the switching line from the fold, xe - x_H"""
        return self.xe - self.x_H

    @property
    def fold_height(self) -> float:
        return (self.x1 - self.x0) ** 2 / (2 * self.x0 * self.x1)

    @property
    def x_geo(self) -> float:
        return math.sqrt(self.x0 * self.x1)


class PwlMode(str, Enum):
    """Filippov mode of a state"""
    REGION1 = "region1"
    REGION2 = "region2"
    SLIDING = "sliding"


MODE_TOLERANCE = 1e-12


class PwlState(BaseModel):
    x: float = Field(..., ge=0)
    y: float = Field(..., ge=0)
    mode: PwlMode

    class Config:
        frozen = True

    def check_mode(self, xe: float) -> None:
        if self.mode is PwlMode.SLIDING and abs(self.x - xe) > MODE_TOLERANCE:
            raise ValueError(f"sliding state must lie on x = {xe}")
        if self.mode is PwlMode.REGION1 and self.x > xe + MODE_TOLERANCE:
            raise ValueError("region1 state must satisfy x <= xe")
        if self.mode is PwlMode.REGION2 and self.x < xe - MODE_TOLERANCE:
            raise ValueError("region2 state must satisfy x >= xe")


class SlidingStability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    DEGENERATE = "degenerate"


class SlidingData(BaseModel):
    """Tangencies and pseudo-equilibrium, heights relative to the fold point"""
    T1: float
    T2: float
    P_lambda: Optional[float]
    stability: SlidingStability

    class Config:
        frozen = True


class PwlLoci(BaseModel):
    x0: float
    x1: float
    x_H: float
    x_geo: float
    F: Optional[float] = None
    xe: Optional[float] = None
    V1: Optional[float] = Field(None, description="Pseudo-Hopf Lyapunov constant, needs F")
    xe_het: Optional[float] = Field(None, description="Heteroclinic abscissa at F")
    F_het: Optional[float] = Field(None, description="Heteroclinic rate at xe")
    F_B1: Optional[float] = None
    F_B2: Optional[float] = None
    slope_at_hopf: float = Field(..., description="dF_het/dxe at x_H")

    class Config:
        frozen = True


class PwlRegion(str, Enum):
    """Parameter-space regions of the PWL model"""
    OMEGA1 = "Omega1"
    OMEGA2 = "Omega2"
    OMEGA3 = "Omega3"
    OMEGA4 = "Omega4"
    OMEGA5 = "Omega5"
    OMEGA6 = "Omega6"
    OMEGA7 = "Omega7"


class SaddleEigenReport(BaseModel):
    pwl_lower: Tuple[float, float]
    pwl_upper: Tuple[float, float]
    smooth_lower: Tuple[float, float]
    smooth_upper: Tuple[float, float]
    pwl_ratio: float
    smooth_ratio: float
    match: bool

    class Config:
        frozen = True


class HabitatEffect(BaseModel):
    D: float
    F: float
    xe_het: float
    x_H: float
    d_o: float = Field(..., description="Horizontal distance x_H - xe_het")
    dxe_het_dD: float
    dxe_het_dD_numeric: float
    d_o_prime_sign: int

    class Config:
        frozen = True
