"""Grid refinement of weight decay and threshold increment for quantized models.

Each grid point raises ``w_decay`` and/or lowers the per-spike threshold
increment ``theta_inc`` relative to the baseline, retrains a fresh clone of
the untrained model through the dynamic scenario, and is accepted only if
every final-row task beats ``acc_low`` and the overall average stays within
``acc_loss`` of the full-precision baseline.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, IncompleteMatrixError
from .network import SnnModel
from .scenario import AccuracyMatrix, TaskData, run_dynamic

log = logging.getLogger(__name__)

# Absorbs float noise when counting grid steps and comparing averages.
GRID_EPS = 1e-9
AVG_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    step_w: float
    w_decay_upper: float
    step_vth: float
    vth_lower: float
    acc_low: float = 0.20
    acc_loss: float = 0.0
    baseline_avg: float | None = None

    def __post_init__(self):
        errors = self.validation_errors()
        if errors:
            raise ConfigurationError("; ".join(errors))

    def validation_errors(self) -> list[str]:
        errors = []
        if not self.step_w > 0:
            errors.append(f"step_w must be > 0, got {self.step_w}")
        if not self.step_vth > 0:
            errors.append(f"step_vth must be > 0, got {self.step_vth}")
        if not 0.0 < self.acc_low < 1.0:
            errors.append(f"acc_low must lie in (0, 1), got {self.acc_low}")
        if not self.acc_loss >= 0:
            errors.append(f"acc_loss must be >= 0, got {self.acc_loss}")
        if not 0.0 <= self.w_decay_upper < 1.0:
            errors.append(f"w_decay_upper must lie in [0, 1), got {self.w_decay_upper}")
        if not self.vth_lower >= 0:
            errors.append(f"vth_lower must be >= 0, got {self.vth_lower}")
        if self.baseline_avg is not None and not 0.0 <= self.baseline_avg <= 1.0:
            errors.append(f"baseline_avg must lie in [0, 1], got {self.baseline_avg}")
        return errors

    def check_against(self, w_decay: float, threshold_term: float):
        """Reject bounds that would make the grid run the wrong way."""
        errors = []
        if self.w_decay_upper < w_decay - GRID_EPS:
            errors.append(
                f"w_decay_upper ({self.w_decay_upper}) is below the baseline w_decay ({w_decay})"
            )
        if self.vth_lower > threshold_term + GRID_EPS:
            errors.append(
                f"vth_lower ({self.vth_lower}) is above the baseline threshold term ({threshold_term})"
            )
        if errors:
            raise ConfigurationError("; ".join(errors))


@dataclass(frozen=True)
class EvaluatedPoint:
    w_decay: float
    threshold_term: float
    overall_avg: float
    min_task_acc: float
    constraint_pass: bool
    steps: tuple[int, int]  # grid offsets from the baseline (w, threshold)


@dataclass
class SearchResult:
    best_model: SnnModel
    best_matrix: AccuracyMatrix
    chosen_w_decay: float
    chosen_threshold_term: float
    evaluated_points: list[EvaluatedPoint] = field(default_factory=list)
    feasible: bool = True
    baseline_avg: float = math.nan


def _count(span: float, step: float) -> int:
    return int(math.floor(span / step + GRID_EPS)) + 1


def grid_values(start: float, bound: float, step: float, direction: int) -> list[float]:
    """``start, start + direction*step, ...`` without crossing ``bound``."""
    n = _count(abs(bound - start), step)
    return [round(start + direction * k * step, 12) for k in range(n)]


def grid_points(w_decay: float, threshold_term: float, sc: SearchConfig):
    """Outer loop over increasing decay, inner loop over decreasing threshold term."""
    sc.check_against(w_decay, threshold_term)
    ws = grid_values(w_decay, sc.w_decay_upper, sc.step_w, +1)
    qs = grid_values(threshold_term, sc.vth_lower, sc.step_vth, -1)
    return [(p, q, (i, k)) for i, p in enumerate(ws) for k, q in enumerate(qs)]


def check_constraints(m: AccuracyMatrix, sc: SearchConfig, baseline_avg: float | None = None) -> bool:
    """Every final-row task above ``acc_low`` and the average within ``acc_loss`` of baseline."""
    if not m.is_complete:
        raise IncompleteMatrixError("accuracy matrix is missing entries on or below the diagonal")
    baseline = sc.baseline_avg if baseline_avg is None else baseline_avg
    if baseline is None:
        raise ConfigurationError("a baseline average is required to check the loss constraint")
    low_ok = bool(np.all(m.final_row > sc.acc_low))
    avg_ok = m.overall_avg >= baseline - sc.acc_loss - AVG_TOLERANCE
    return low_ok and avg_ok


def _evaluate(model_in: SnnModel, tasks: TaskData, p: float, q: float):
    model = model_in.with_adjustments(w_decay=p, theta_inc=q)
    model, m = run_dynamic(model, tasks)
    return model, m


def _evaluate_job(args):
    return _evaluate(*args)


def select_best(points: list[EvaluatedPoint]) -> int | None:
    """Index of the passing point with the highest average.

    Ties go to the point fewer grid steps from the baseline, then to the one
    evaluated first.
    """
    best = None
    for idx, pt in enumerate(points):
        if not pt.constraint_pass:
            continue
        if best is None:
            best = idx
            continue
        cur = points[best]
        if pt.overall_avg > cur.overall_avg:
            best = idx
        elif pt.overall_avg == cur.overall_avg and sum(pt.steps) < sum(cur.steps):
            best = idx
    return best


def refine_parameters(model_in: SnnModel, tasks: TaskData, sc: SearchConfig,
                      jobs: int = 1) -> SearchResult:
    """Run the dynamic scenario at every grid point and keep the best feasible model.

    ``model_in`` must be untrained; it is never modified.  With no feasible
    point the baseline-parameter model is returned and ``feasible`` is False.
    """
    if sc.baseline_avg is None:
        raise ConfigurationError(
            "baseline_avg must be measured on the full-precision model before searching"
        )
    w0 = model_in.synapses.w_decay
    q0 = model_in.lif_params.theta_inc
    grid = grid_points(w0, q0, sc)
    log.info("searching %d grid points", len(grid))

    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(grid))) as pool:
            outcomes = list(pool.map(_evaluate_job, [(model_in, tasks, p, q) for p, q, _ in grid]))
    else:
        outcomes = [_evaluate(model_in, tasks, p, q) for p, q, _ in grid]

    points = []
    for (p, q, steps), (_, m) in zip(grid, outcomes):
        ok = check_constraints(m, sc)
        points.append(EvaluatedPoint(p, q, m.overall_avg, float(np.min(m.final_row)), ok, steps))
        log.info("w_decay=%g theta_inc=%g avg=%.3f min=%.3f pass=%s",
                 p, q, m.overall_avg, np.min(m.final_row), ok)

    best = select_best(points)
    if best is None:
        # The first point is the baseline parameters.
        model, m = outcomes[0]
        return SearchResult(model, m, w0, q0, points, feasible=False, baseline_avg=sc.baseline_avg)
    model, m = outcomes[best]
    pt = points[best]
    return SearchResult(model, m, pt.w_decay, pt.threshold_term, points, True, sc.baseline_avg)


def baseline_average(model_fp: SnnModel, tasks: TaskData) -> float:
    """Overall average of an untrained full-precision model under the dynamic scenario."""
    if model_fp.format is not None:
        raise ConfigurationError("the baseline model must use full-precision weights")
    _, m = run_dynamic(model_fp.clone(), tasks)
    return m.overall_avg
