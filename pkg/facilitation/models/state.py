import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple
from pydantic import BaseModel, Field, field_validator


class State(BaseModel):
    """Planar state (resource x, consumer y)"""
    x: float = Field(..., ge=0, description="Resource density")
    y: float = Field(..., ge=0, description="Consumer density")

    class Config:
        frozen = True

    @field_validator("x", "y")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("state coordinates must be finite")
        return value

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)

# =============================================================================
# EQUILIBRIA
# =============================================================================

class EquilibriumKind(str, Enum):
    """Linear type of an equilibrium"""
    STABLE_NODE = "stable-node"
    STABLE_FOCUS = "stable-focus"
    UNSTABLE_NODE = "unstable-node"
    UNSTABLE_FOCUS = "unstable-focus"
    SADDLE = "saddle"


class EquilibriumName(str, Enum):
    EXTINCTION = "extinction"
    LOWER_VEGETATION = "lower-vegetation"
    UPPER_VEGETATION = "upper-vegetation"
    COEXISTENCE = "coexistence"


class Eigenpair(BaseModel):
    real: float
    imag: float = 0.0
    vector: Optional[Tuple[float, float]] = Field(None, description="Present only for real eigenvalues")

    class Config:
        frozen = True

    @property
    def value(self) -> complex:
        return complex(self.real, self.imag)


class EquilibriumReport(BaseModel):
    name: EquilibriumName
    point: State
    kind: EquilibriumKind
    trace: float
    det: float
    discriminant: float
    eigenpairs: Tuple[Eigenpair, Eigenpair]
    rotation: Optional[str] = Field(None, description="clockwise / counterclockwise for complex eigenvalues")
    flags: List[str] = Field(default_factory=list)

    class Config:
        frozen = True

    @property
    def eigenvalues(self) -> Tuple[complex, complex]:
        return (self.eigenpairs[0].value, self.eigenpairs[1].value)

    @property
    def eigenvectors(self) -> Optional[Tuple[Tuple[float, float], Tuple[float, float]]]:
        if any(pair.vector is None for pair in self.eigenpairs):
            return None
        return (self.eigenpairs[0].vector, self.eigenpairs[1].vector)

# =============================================================================
# COMPACTIFICATION
# =============================================================================

class Chart(str, Enum):
    """Poincare compactification charts"""
    U1 = "U1"
    U2 = "U2"
    U3 = "U3"


@dataclass(frozen=True)
class ChartField:
    chart: Chart
    vector_field: Callable[[float, float], Tuple[float, float]]

    def __call__(self, u: float, v: float) -> Tuple[float, float]:
        return self.vector_field(u, v)
