import logging
import math
from functools import partial
from typing import List, Sequence, Tuple
import numpy as np
from facilitation.core.exceptions import ParameterError
from facilitation.core.parallel import ordered_map
from facilitation.models.params import SaddlePair, SmoothParams
from facilitation.models.state import State
from facilitation.models.stochastic import EnsembleCell, EnsembleResult, NoiseConfig, RealizationResult
from facilitation.services import smooth_model_service

logger = logging.getLogger(__name__)


def realization_rng(base_seed: int, cell_index: int, realization: int) -> np.random.Generator:
    """Philox substream keyed by (base seed, cell, realization); independent of scheduling"""
    sequence = np.random.SeedSequence(entropy=base_seed, spawn_key=(cell_index, realization))
    return np.random.Generator(np.random.Philox(sequence))


def em_step(p: SmoothParams, s: State, cfg: NoiseConfig, noise_draw: float) -> State:
    """One Euler-Maruyama step with additive noise on the resource; negatives clamp to 0"""
    fx, fy = smooth_model_service.field_xy(p, s.x, s.y)
    x = s.x + fx * cfg.dt + cfg.sigma * noise_draw
    y = s.y + fy * cfg.dt
    return State(x=max(x, 0.0), y=max(y, 0.0))


def _simulate(p: SmoothParams, cfg: NoiseConfig, rngs: Sequence[np.random.Generator],
              record: bool = False) -> List[RealizationResult]:
    """Advance all realizations in lockstep; each draws only from its own generator"""
    n = len(rngs)
    x = np.full(n, float(cfg.initial_state[0]))
    y = np.full(n, float(cfg.initial_state[1]))
    alive = np.ones(n, dtype=bool)
    ext_time = np.full(n, np.nan)
    res_time = np.full(n, np.nan)
    blowup = np.zeros(n, dtype=bool)
    clamped = np.zeros(n, dtype=np.int64)
    scale = math.sqrt(cfg.dt)
    steps = cfg.n_steps
    path = np.empty((steps + 1, 2)) if record else None
    if record:
        path[0] = (x[0], y[0])

    done = 0
    while done < steps:
        block = min(cfg.chunk_steps, steps - done)
        draws = np.stack([rng.normal(0.0, scale, block) for rng in rngs])
        for j in range(block):
            fx, fy = smooth_model_service.field_array(p, x, y)
            moving = ~blowup if record else alive
            x_new = np.where(moving, x + fx * cfg.dt + cfg.sigma * draws[:, j], x)
            y_new = np.where(moving, y + fy * cfg.dt, y)
            negative = moving & ((x_new < 0) | (y_new < 0))
            clamped += negative
            x, y = np.maximum(x_new, 0.0), np.maximum(y_new, 0.0)
            t = (done + j + 1) * cfg.dt
            if record:
                path[done + j + 1] = (x[0], y[0])

            res_hit = alive & np.isnan(res_time) & (x < cfg.x_extinction)
            res_time[res_hit] = t
            blown = alive & ((np.abs(x) > cfg.blowup) | (np.abs(y) > cfg.blowup))
            extinct = alive & ((y < cfg.y_extinction) | blown)
            blowup |= blown
            ext_time[extinct] = t
            alive &= ~extinct
        done += block
        if not alive.any() and not record:
            break

    results = []
    for i in range(n):
        survived = bool(alive[i])
        results.append(RealizationResult(
            survived=survived,
            extinction_time=None if survived else float(ext_time[i]),
            blowup=bool(blowup[i]),
            resource_extinction_time=None if np.isnan(res_time[i]) else float(res_time[i]),
            clamped_steps=int(clamped[i]),
            times=np.arange(steps + 1) * cfg.dt if record else None,
            states=path if record else None,
        ))
    return results


def simulate_realization(p: SmoothParams, cfg: NoiseConfig, cell_index: int = 0,
                         realization: int = 0) -> RealizationResult:
    """Single realization from cfg.initial_state to cfg.t_max"""
    rng = realization_rng(cfg.seed, cell_index, realization)
    return _simulate(p, cfg, [rng])[0]


def sample_path(p: SmoothParams, cfg: NoiseConfig, cell_index: int = 0,
                realization: int = 0) -> RealizationResult:
    """Like simulate_realization but keeps the time series; the state keeps evolving after extinction"""
    rng = realization_rng(cfg.seed, cell_index, realization)
    return _simulate(p, cfg, [rng], record=True)[0]


def _run_cell(base: SaddlePair, F: float, n: int, cfg: NoiseConfig,
              cell: Tuple[int, float, float]) -> EnsembleCell:
    cell_index, sigma, xe = cell
    p = base.with_consumer(xe, F)
    noise = cfg.model_copy(update={"sigma": sigma})
    rngs = [realization_rng(cfg.seed, cell_index, r) for r in range(n)]
    results = _simulate(p, noise, rngs)
    times = np.array([r.extinction_time for r in results if not r.survived])
    n_extinct = len(times)
    logger.debug(f"cell {cell_index}: sigma={sigma}, xe={xe}, extinct {n_extinct}/{n}")
    return EnsembleCell(
        cell_index=cell_index,
        sigma=sigma,
        xe=xe,
        n=n,
        n_extinct=n_extinct,
        n_blowup=sum(r.blowup for r in results),
        n_clamped=sum(r.clamped_steps > 0 for r in results),
        mean_ext_time=float(times.mean()) if n_extinct else None,
        std_ext_time=float(times.std()) if n_extinct else None,
    )


def survival_grid(base: SaddlePair, F: float, sigma_grid: Sequence[float], xe_grid: Sequence[float],
                  n: int = 90, cfg: NoiseConfig = NoiseConfig(), workers: int = None) -> EnsembleResult:
    """
    Survival probability over a (sigma, xe) grid, n realizations per cell.

    Cells are indexed sigma-major; the cell index is part of every realization's seed.
    """
    if n < 1:
        raise ParameterError("Ensemble size must be at least 1", {"n": n})
    if not len(sigma_grid) or not len(xe_grid):
        raise ParameterError("Ensemble grids must not be empty",
                             {"sigma": len(sigma_grid), "xe": len(xe_grid)})
    sigmas = tuple(float(s) for s in sigma_grid)
    xes = tuple(float(x) for x in xe_grid)
    cells = [(i * len(xes) + j, sigma, xe) for i, sigma in enumerate(sigmas) for j, xe in enumerate(xes)]
    logger.info(f"Ensemble F={F}: {len(cells)} cells x {n} realizations")
    results = ordered_map(partial(_run_cell, base, float(F), n, cfg), cells, workers)
    return EnsembleResult(
        F=float(F),
        sigma_values=sigmas,
        xe_values=xes,
        cells=results,
        base_seed=cfg.seed,
        config={"n": n, **cfg.model_dump(mode="json")},
    )


def extinction_times(base: SaddlePair, F: float, xe_grid: Sequence[float], sigma_list: Sequence[float],
                     n: int = 90, cfg: NoiseConfig = NoiseConfig(), workers: int = None) -> List[EnsembleCell]:
    """Extinction-time statistics per (xe, sigma), ordered by xe then sigma"""
    result = survival_grid(base, F, sigma_list, xe_grid, n, cfg, workers)
    return sorted(result.cells, key=lambda c: (result.xe_values.index(c.xe), result.sigma_values.index(c.sigma)))
