import logging
import math
from typing import Mapping, Union
from pydantic import ValidationError
from facilitation.core.exceptions import (
    ConsumerDecoupledError,
    DomainError,
    GenericRegimeError,
    ParameterError,
    TranscriticalError,
)
from facilitation.models.params import (
    HabitatRatios,
    HopfConstants,
    LocusSet,
    OriginalParams,
    RescaledParams,
    SaddlePair,
    SmoothParams,
    TranscriticalReport,
)
from facilitation.models.run import ORIGINAL_KEYS, SMOOTH_KEYS

logger = logging.getLogger(__name__)

AnyParams = Union[OriginalParams, SmoothParams]


def rescale(p: OriginalParams) -> RescaledParams:
    """A = alpha/eps, B = alpha(1-D)/eps, F = epsS mu/eps, G = delta/eps"""
    return RescaledParams(
        A=p.alpha / p.eps,
        B=p.alpha * (1.0 - p.D) / p.eps,
        F=p.epsS * p.mu / p.eps,
        G=p.delta / p.eps,
    )


def vegetation_equilibria(p: OriginalParams) -> SaddlePair:
    """Roots x0 < x1 of x^2 - (1-D)x + eps/alpha"""
    if p.alpha <= 0:
        raise GenericRegimeError("alpha must be positive for vegetation equilibria", {"alpha": p.alpha})
    half = 0.5 * (1.0 - p.D)
    disc = (1.0 - p.D) ** 2 - 4.0 * p.eps / p.alpha
    if disc <= 0:
        raise GenericRegimeError(
            "Vegetation equilibria are not distinct (D >= D_SN)",
            {"discriminant": disc, "D": p.D, "D_SN": saddle_node_threshold(p)},
        )
    root = 0.5 * math.sqrt(disc)
    x1 = half + root
    # Vieta: x0 x1 = eps/alpha, no cancellation for the small root
    return SaddlePair(x0=(p.eps / p.alpha) / x1, x1=x1)


def to_smooth_params(p: OriginalParams) -> SmoothParams:
    """Exact map from ecological parameters to (x0, x1, xe, F)"""
    pair = vegetation_equilibria(p)
    coupling = p.epsS * p.mu
    if coupling <= 0:
        raise ConsumerDecoupledError(details={"epsS": p.epsS, "mu": p.mu})
    xe = p.delta / coupling
    if xe == pair.x0 or xe == pair.x1:
        raise TranscriticalError(details={"x0": pair.x0, "x1": pair.x1, "xe": xe})
    try:
        return SmoothParams(x0=pair.x0, x1=pair.x1, xe=xe, F=coupling / p.eps)
    except ValidationError as exc:
        raise ParameterError("Derived smooth parameters are invalid", {"errors": exc.errors()}) from exc


def parse_params(data: Mapping[str, float]) -> AnyParams:
    """Build original or smooth parameters, form detected from the key set"""
    keys = set(data)
    try:
        if keys & ORIGINAL_KEYS:
            missing = sorted(ORIGINAL_KEYS - keys)
            if missing:
                raise ParameterError(f"Missing required parameter: {missing[0]}", {"missing": missing})
            return OriginalParams(**{k: data[k] for k in ORIGINAL_KEYS})
        missing = sorted(SMOOTH_KEYS - keys)
        if missing:
            raise ParameterError(f"Missing required parameter: {missing[0]}", {"missing": missing})
        return SmoothParams(**{k: data[k] for k in SMOOTH_KEYS})
    except ValidationError as exc:
        raise ParameterError("Parameter validation failed", {"errors": exc.errors(include_url=False)}) from exc


def parse_base(data: Mapping[str, float]) -> SaddlePair:
    """Vegetation saddles for sweeps; original form needs only alpha, D and eps"""
    keys = set(data)
    try:
        if keys & ORIGINAL_KEYS:
            missing = sorted({"alpha", "D", "eps"} - keys)
            if missing:
                raise ParameterError(f"Missing required parameter: {missing[0]}", {"missing": missing})
            consumer = {"epsS": 0.0, "mu": 0.0, "delta": 0.0}
            consumer.update({k: data[k] for k in ("epsS", "mu", "delta") if k in data})
            return vegetation_equilibria(OriginalParams(alpha=data["alpha"], D=data["D"], eps=data["eps"], **consumer))
        missing = sorted({"x0", "x1"} - keys)
        if missing:
            raise ParameterError(f"Missing required parameter: {missing[0]}", {"missing": missing})
        return SaddlePair(x0=data["x0"], x1=data["x1"])
    except ValidationError as exc:
        raise ParameterError("Parameter validation failed", {"errors": exc.errors(include_url=False)}) from exc


def as_smooth(p: AnyParams) -> SmoothParams:
    return to_smooth_params(p) if isinstance(p, OriginalParams) else p


def saddle_node_threshold(p: OriginalParams) -> float:
    """D_SN = 1 - 2 sqrt(eps/alpha)"""
    return 1.0 - 2.0 * math.sqrt(p.eps / p.alpha)


def _require_generic(x0: float, x1: float) -> None:
    if not 0 < x0 < x1:
        raise GenericRegimeError(details={"x0": x0, "x1": x1})


def loci(p: Union[SmoothParams, SaddlePair], original: OriginalParams = None) -> LocusSet:
    """Harmonic, arithmetic and geometric means of (x0, x1) plus D_SN when available"""
    x0, x1 = p.x0, p.x1
    if not 0 < x0 <= x1:
        raise GenericRegimeError(details={"x0": x0, "x1": x1})
    return LocusSet(
        x0=x0,
        x1=x1,
        x_c=2 * x0 * x1 / (x0 + x1),
        x_H=0.5 * (x0 + x1),
        x_geo=math.sqrt(x0 * x1),
        D_SN=saddle_node_threshold(original) if original is not None else None,
    )


def focus_node_threshold(p: Union[SmoothParams, SaddlePair], xe: float) -> float:
    return loci(p).F_FN(xe)


def hyperbolicity_ratio(p: SmoothParams) -> float:
    """f = (xe - x0) x1 / ((x1 - xe) x0); equals 1 at the harmonic mean"""
    x0, x1, xe = p.x0, p.x1, p.xe
    if not x0 < xe < x1:
        raise DomainError("Hyperbolicity ratio needs x0 < xe < x1", {"x0": x0, "x1": x1, "xe": xe})
    return (xe - x0) * x1 / ((x1 - xe) * x0)


def habitat_ratios(p: Union[AnyParams, SaddlePair]) -> HabitatRatios:
    if isinstance(p, OriginalParams):
        pair = vegetation_equilibria(p)
        x0, x1 = pair.x0, pair.x1
    else:
        x0, x1 = p.x0, p.x1
    _require_generic(x0, x1)
    width = x1 - x0
    R_c = x0 / (x0 + x1)
    # x_H - x_c = (x1 - x0)^2 / (2(x0 + x1))
    R_o = width / (2.0 * (x0 + x1))
    return HabitatRatios(R_c=R_c, R_o=R_o, R_s=0.5)


def hopf_constants(p: SmoothParams) -> HopfConstants:
    x0, x1, F = p.x0, p.x1, p.F
    _require_generic(x0, x1)
    gap2 = (x0 - x1) ** 2
    L1 = -F * gap2 / (6.0 * x0 ** 2 * x1 ** 2)
    T0 = 4.0 * math.pi * math.sqrt(2.0 * (x0 + x1) * x0 * x1 * F * gap2) / (F * (x0 + x1) * gap2)
    return HopfConstants(L1=L1, T0=T0, dT=-T0 / (x0 + x1))


def canard_slope(p: Union[SmoothParams, SaddlePair]) -> float:
    """Coefficient of F in the small-F expansion of the heteroclinic abscissa"""
    x0, x1 = p.x0, p.x1
    if x1 == x0:
        return -math.inf
    return -1.0 / ((x1 - x0) ** 2 * x0 * x1)


def singular_connection_balance(p: SmoothParams) -> float:
    """
    Closing condition of the loop in the large-F limit.

    Zero exactly when xe equals the harmonic mean; positive above it.
    """
    x0, x1, xe = p.x0, p.x1, p.xe
    if not x0 < xe < x1:
        raise DomainError("Singular balance needs x0 < xe < x1", {"xe": xe})
    return x1 / (x1 - xe) - x0 / (xe - x0)


def transcritical_exchanges(p: SmoothParams) -> TranscriticalReport:
    """Stability of the equilibria exchanged through xe = x0 and xe = x1"""
    x0, x1, xe = p.x0, p.x1, p.xe
    if xe < x0:
        return TranscriticalReport(
            ordering="xe<x0",
            coexistence="saddle",
            lower_vegetation="unstable-node",
            upper_vegetation="saddle",
        )
    if xe > x1:
        return TranscriticalReport(
            ordering="xe>x1",
            coexistence="saddle",
            lower_vegetation="saddle",
            upper_vegetation="stable-node",
        )
    if xe == x0 or xe == x1:
        raise TranscriticalError(details={"x0": x0, "x1": x1, "xe": xe})
    return TranscriticalReport(
        ordering="x0<xe<x1",
        coexistence="interior",
        lower_vegetation="saddle",
        upper_vegetation="saddle",
    )
