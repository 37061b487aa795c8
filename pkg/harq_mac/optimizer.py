"""
Derivative-free maximization for the policy objectives.

``maximize_1d`` scans a log-spaced grid and refines the best bracket by
golden-section search. ``maximize_nd`` runs Nelder-Mead from Latin hypercube
starts plus any explicit seed points and keeps the best result.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from harq_mac.exceptions import ArgumentError, EvaluationError

logger = logging.getLogger(__name__)

INVERSE_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizerConfig:
    grid_points: int = 400
    refine_tol: float = 1e-9
    nd_restarts: int = 8
    nd_max_iters: int = 2000
    seed: int = 20110605
    domain: tuple = (1e-6, 60.0)

    def __post_init__(self):
        for field in ("grid_points", "refine_tol", "nd_restarts", "nd_max_iters"):
            if not getattr(self, field) > 0:
                raise ArgumentError(f"OptimizerConfig.{field} must be > 0")
        if not self.domain[0] < self.domain[1]:
            raise ArgumentError(f"Empty search domain {self.domain}")

    @classmethod
    def from_settings(cls, settings):
        return cls(
            grid_points=settings.getint("OPTIMIZER_GRID_POINTS", cls.grid_points),
            refine_tol=settings.getfloat("OPTIMIZER_REFINE_TOL", cls.refine_tol),
            nd_restarts=settings.getint("OPTIMIZER_ND_RESTARTS", cls.nd_restarts),
            nd_max_iters=settings.getint("OPTIMIZER_ND_MAX_ITERS", cls.nd_max_iters),
            seed=settings.getint("OPTIMIZER_SEED", cls.seed),
            domain=tuple(settings.get("THRESHOLD_DOMAIN", cls.domain)),
        )


def _checked(value, argument):
    value = float(value)
    if not math.isfinite(value):
        raise EvaluationError(
            f"Objective returned {value} at argument {argument!r}", argument=argument
        )
    return value


def _grid_values(objective, grid):
    """Evaluate on the whole grid, vectorized when the objective allows it."""
    try:
        values = np.broadcast_to(np.asarray(objective(grid), dtype=float), grid.shape)
    except (TypeError, ValueError):
        values = np.array([float(objective(point)) for point in grid])
    bad = ~np.isfinite(values)
    if bad.any():
        argument = float(grid[np.argmax(bad)])
        raise EvaluationError(
            f"Objective is not finite at argument {argument!r}", argument=argument
        )
    return values


def golden_section(objective, lo, hi, tol=1e-9, max_iters=200):
    """Maximize a unimodal ``objective`` on [lo, hi]; ties keep the left point."""
    x1 = hi - INVERSE_PHI * (hi - lo)
    x2 = lo + INVERSE_PHI * (hi - lo)
    f1 = _checked(objective(x1), x1)
    f2 = _checked(objective(x2), x2)
    for _ in range(max_iters):
        if hi - lo <= tol:
            break
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INVERSE_PHI * (hi - lo)
            f1 = _checked(objective(x1), x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INVERSE_PHI * (hi - lo)
            f2 = _checked(objective(x2), x2)
    if f1 >= f2:
        return x1, f1
    return x2, f2


def maximize_1d(objective, domain=None, config=None):
    """
    Returns (argmax, max) of ``objective`` over ``domain``.

    The objective should accept numpy arrays; scalar-only callables are
    evaluated point by point on the grid.
    """
    config = config or OptimizerConfig()
    lo, hi = domain or config.domain
    if not lo < hi:
        raise ArgumentError(f"Empty search domain ({lo}, {hi})")
    if lo > 0:
        grid = np.geomspace(lo, hi, config.grid_points)
    else:
        grid = np.linspace(lo, hi, config.grid_points)
    values = _grid_values(objective, grid)

    best = int(np.argmax(values))
    best_arg, best_value = float(grid[best]), float(values[best])
    left = float(grid[max(best - 1, 0)])
    right = float(grid[min(best + 1, grid.size - 1)])
    if right > left:
        arg, value = golden_section(objective, left, right, tol=config.refine_tol)
        if value > best_value:
            return arg, value
    return best_arg, best_value


def latin_hypercube(dim, count, box, seed):
    lower, upper = (np.asarray(bound, dtype=float) for bound in zip(*box))
    sampler = qmc.LatinHypercube(d=dim, seed=np.random.default_rng(seed))
    return qmc.scale(sampler.random(count), lower, upper)


def maximize_nd(objective, dim, init_box, config=None, starts=(), bounds=None):
    """
    Returns (argmax vector, max) over R^dim (or ``bounds`` when given).

    ``init_box`` is a sequence of (lo, hi) pairs from which the Latin
    hypercube starts are drawn; ``starts`` are extra seed points that are
    always tried first.
    """
    config = config or OptimizerConfig()
    if dim < 1:
        raise ArgumentError(f"dim must be >= 1, got {dim}")
    if len(init_box) != dim:
        raise ArgumentError(f"init_box has {len(init_box)} entries for dim={dim}")

    def evaluate(x):
        return _checked(objective(np.asarray(x, dtype=float)), tuple(x))

    points = [np.asarray(start, dtype=float) for start in starts]
    points.extend(latin_hypercube(dim, config.nd_restarts, init_box, config.seed))

    best_x, best_value = None, -math.inf
    for start in points:
        if bounds is not None:
            start = np.clip(start, [b[0] for b in bounds], [b[1] for b in bounds])
        start_value = evaluate(start)
        if start_value > best_value:
            best_x, best_value = start.copy(), start_value
        result = optimize.minimize(
            lambda x: -evaluate(x),
            start,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "maxiter": config.nd_max_iters,
                "xatol": config.refine_tol,
                "fatol": 1e-13,
            },
        )
        if not result.success:
            logger.debug(f"Nelder-Mead start {start} stopped: {result.message}")
        if -result.fun > best_value:
            best_x, best_value = np.asarray(result.x, dtype=float), float(-result.fun)
    return best_x, best_value
