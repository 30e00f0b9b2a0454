from enum import Enum
from typing import Any, Dict, List, Optional
from pydantic import BaseModel, Field, model_validator
from facilitation.models.dynamics import IntegratorConfig
from facilitation.models.state import Chart
from facilitation.models.stochastic import NoiseConfig

SMOOTH_KEYS = frozenset({"x0", "x1", "xe", "F"})
ORIGINAL_KEYS = frozenset({"alpha", "D", "eps", "epsS", "mu", "delta"})


class ModelKind(str, Enum):
    SMOOTH = "smooth"
    PWL = "pwl"


class GridConfig(BaseModel):
    F_grid: Optional[List[float]] = None
    xe_grid: Optional[List[float]] = None
    sigma: Optional[List[float]] = None
    F_values: Optional[List[float]] = None

    class Config:
        frozen = True


class RunConfig(BaseModel):
    """Everything a subcommand needs; hashed for provenance"""
    command: str
    model: ModelKind = ModelKind.SMOOTH
    params: Dict[str, float] = Field(default_factory=dict)
    grids: GridConfig = Field(default_factory=GridConfig)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    n: int = Field(90, ge=1, description="Realizations per stochastic cell")
    chart: Optional[Chart] = None
    compare: bool = False
    record_path: bool = False
    out_dir: str = "out"

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _one_parameter_form(self):
        keys = set(self.params)
        has_smooth = bool(keys & SMOOTH_KEYS - {"F"})
        has_original = bool(keys & ORIGINAL_KEYS)
        if has_smooth and has_original:
            raise ValueError("params mix original and smooth forms")
        return self

    @property
    def parameter_form(self) -> str:
        return "original" if set(self.params) & ORIGINAL_KEYS else "smooth"

    def hashable(self) -> Dict[str, Any]:
        payload = self.model_dump(mode="json")
        payload.pop("out_dir", None)
        return payload
