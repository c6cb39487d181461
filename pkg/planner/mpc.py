"""
One receding-horizon planning step: imagine, mask, score, optimize.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from models import CandidateBatch, LatentState, PlanConfig, PlanResult
from utils.error_handler import IncompatibleModelError
from utils.structured_logger import get_structured_logger, LogLevel
from worldmodel import ModelSnapshot
from .cem import cem_optimize
from .objectives import score_candidates
from .rollout import rollout_candidates

logger = logging.getLogger(__name__)

_CEM_STREAM = 11


class CandidateScorer:
    """score_fn for CEM; each call is one iteration with its own noise stream."""

    def __init__(self, planner: "ValueGuidedPlanner", start: LatentState, plan_step: int):
        self.planner = planner
        self.start = start
        self.plan_step = plan_step
        self.calls = 0
        self.last_batch = None

    def __call__(self, actions: np.ndarray) -> np.ndarray:
        p = self.planner
        outputs = rollout_candidates(
            p.model, p.params, self.start, actions, p.config,
            plan_step=self.plan_step, iteration=self.calls,
            with_reward=p.config.objective.needs_reward_head, executor=p.executor,
        )
        masked_q, score = score_candidates(
            p.config.objective, outputs.q_hat, outputs.d_hat, outputs.r_hat,
            p.config.gamma, p.config.termination_threshold, p.config.mask_trigger_step,
        )
        self.calls += 1
        self.last_batch = CandidateBatch(actions=actions, q_hat=outputs.q_hat, d_hat=outputs.d_hat,
                                         masked_q=masked_q, score=score, r_hat=outputs.r_hat)
        return score


class ValueGuidedPlanner:
    """
    Sampling MPC over a trained world model.

    Parameters are cast once to the planning precision and never modified,
    so one planner may serve many episodes.
    """

    def __init__(self, snapshot: ModelSnapshot, config: PlanConfig):
        if config.objective.needs_reward_head and not snapshot.has_reward_head:
            raise IncompatibleModelError(
                f"objective '{config.objective.value}' needs a reward head; "
                f"retrain the model with --enable-reward-head")
        self.snapshot = snapshot
        self.config = config
        self.model = snapshot.model
        self.params = snapshot.inference_params(config.dtype)
        self.executor = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
        self.slog = get_structured_logger("planner")

    def plan(self, filtered: LatentState, warm_start: Optional[np.ndarray] = None,
             plan_step: int = 0) -> PlanResult:
        started = time.perf_counter()
        start = filtered.astype(self.config.dtype)
        scorer = CandidateScorer(self, start, plan_step)
        rng = np.random.default_rng([self.config.seed, _CEM_STREAM, plan_step])
        result = cem_optimize(scorer, self.config, warm_start=warm_start, rng=rng,
                              action_dim=self.model.config.act_dim)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        self.slog.log_performance_metric("plan_step_duration", elapsed_ms, "ms", level=LogLevel.DEBUG,
                                         plan_step=plan_step, iterations=scorer.calls)
        logger.debug("plan step %d: score=%.4f action=%s (%.1f ms)",
                     plan_step, result.score, np.round(result.action, 3).tolist(), elapsed_ms)
        return result

    def close(self) -> None:
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def plan_step(snapshot: ModelSnapshot, filtered: LatentState, config: PlanConfig,
              warm_start: Optional[np.ndarray] = None, step_index: int = 0) -> PlanResult:
    """Single planning call; the first element of the returned sequence is the action to execute."""
    with ValueGuidedPlanner(snapshot, config) as planner:
        return planner.plan(filtered, warm_start, step_index)
