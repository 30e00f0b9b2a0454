from dataclasses import dataclass, field
from enum import Enum
from typing import List, Literal, Optional, Tuple, Union
import numpy as np
from pydantic import BaseModel, Field, model_validator

# =============================================================================
# EVENTS
# =============================================================================

class EventKind(str, Enum):
    SECTION = "section"
    AXIS = "axis"
    BOUNDARY = "boundary"
    EQUILIBRIUM = "equilibrium"
    ESCAPE = "escape"
    COLLAPSE = "collapse"
    MODE = "mode"


class LineCrossing(BaseModel):
    """Event on the oriented line normal . (s - point) = 0"""
    type: Literal["line"] = "line"
    kind: EventKind = EventKind.SECTION
    point: Tuple[float, float]
    normal: Tuple[float, float]
    direction: int = Field(0, ge=-1, le=1, description="+1 increasing, -1 decreasing, 0 both")
    terminal: bool = True

    class Config:
        frozen = True


class NormThreshold(BaseModel):
    """Event when |s - center| crosses radius"""
    type: Literal["norm"] = "norm"
    kind: EventKind = EventKind.EQUILIBRIUM
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = Field(..., gt=0)
    inward: bool = Field(True, description="Fire on entering the ball; otherwise on leaving it")
    terminal: bool = True

    class Config:
        frozen = True


EventSpec = Union[LineCrossing, NormThreshold]


class IntegratorConfig(BaseModel):
    """Adaptive Dormand-Prince settings and event definitions"""
    rel_tol: float = Field(1e-9, gt=0)
    abs_tol: float = Field(1e-11, gt=0)
    max_step: float = Field(0.5, gt=0)
    min_step: float = Field(1e-12, gt=0)
    t_max: float = Field(200.0, gt=0)
    events: List[EventSpec] = Field(default_factory=list)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _steps_ordered(self):
        if self.min_step > self.max_step:
            raise ValueError("min_step must not exceed max_step")
        return self

    def with_events(self, *events: EventSpec, t_max: Optional[float] = None) -> "IntegratorConfig":
        update = {"events": [*self.events, *events]}
        if t_max is not None:
            update["t_max"] = t_max
        return self.model_copy(update=update)

# =============================================================================
# RESULTS
# =============================================================================

@dataclass(frozen=True)
class TrajectoryEvent:
    time: float
    kind: str
    state: Tuple[float, float]


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped states; time_direction -1 marks a reversed-time integration"""
    times: np.ndarray
    states: np.ndarray
    events: List[TrajectoryEvent] = field(default_factory=list)
    time_direction: int = 1
    modes: Optional[List[str]] = None
    meta: dict = field(default_factory=dict)

    @property
    def final_state(self) -> Tuple[float, float]:
        return (float(self.states[-1, 0]), float(self.states[-1, 1]))

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def first_event(self, kind: str) -> Optional[TrajectoryEvent]:
        for event in self.events:
            if event.kind == kind:
                return event
        return None


@dataclass(frozen=True)
class LimitCycle:
    section_point: Tuple[float, float]
    period: float
    samples: np.ndarray
    amplitude: Tuple[float, float, float, float]
    residual: float
    seeds: List[float] = field(default_factory=list)
    fixed_points: List[float] = field(default_factory=list)
    iterations: int = 0
    multiplier: Optional[float] = None

    @property
    def x_amplitude(self) -> float:
        return self.amplitude[1] - self.amplitude[0]

    @property
    def y_amplitude(self) -> float:
        return self.amplitude[3] - self.amplitude[2]
