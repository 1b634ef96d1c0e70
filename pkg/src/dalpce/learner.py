"""Active domain decomposition with localized expansions.

The learner keeps one experimental design (ED) for the whole run. Each
iteration scores the sub-domains, either splits the best one (when it holds
enough points for a trustworthy expansion) or extends it, adds points chosen
one by one with the local Theta criterion, and refits the working
sub-domain. Every ``n_r`` iterations a single global fit is compared against
the decomposition, which is discarded when the global fit is better.
"""

import logging
import math
import time
from dataclasses import dataclass, field, fields, asdict

import numpy as np

from .domain import Decomposition, DEFAULT_MIN_EDGE
from .errors import (BudgetExceeded, ConfigError, DegenerateEdge, EmptyPool,
                     ModelEvaluationFailure, RankDeficient)
from .polybasis import Box, cardinality
from .sampling import (DENSITY_CONVENTIONS, CandidatePool, RngStreams, ScreeningPool,
                       lhs, select_next_point, select_subdomain, theta_subdomain)
from .surrogate import fit_pce

logger = logging.getLogger(__name__)

ACTIONS = ("split", "extend", "restart")
RESTART_NORMALIZATIONS = ("local", "global")


@dataclass
class LearnerConfig:
    """Settings of one learning run.

    ``n_cg`` and ``n_cl`` default to ``1000 * dim`` and ``5 * P`` where ``P``
    is the size of the total-degree basis of degree ``p_local``.
    """

    dim: int
    budget: int = 200
    p_local: int = 2
    n_sim_factor: float = 1.5
    n_cg: int = None
    n_cl: int = None
    n_iter: int = 10**9
    n_r: int = 20
    q2_stop: float = None
    min_edge: float = DEFAULT_MIN_EDGE
    seed: int = 0
    density_convention: str = "local"
    restart: bool = True
    regenerate_screening: bool = True
    restart_normalization: str = "local"

    def __post_init__(self):
        if self.n_cg is None:
            self.n_cg = 1000 * self.dim
        if self.n_cl is None:
            self.n_cl = 5 * self.n_terms
        self.validate()

    @property
    def n_terms(self):
        return cardinality(self.dim, self.p_local)

    @property
    def n_sim(self):
        return math.ceil(self.n_sim_factor * self.n_terms - 1e-12)

    def validate(self):
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.p_local < 0:
            raise ConfigError("p_local must be >= 0")
        if not 1.0 <= self.n_sim_factor <= 2.0:
            raise ConfigError("n_sim_factor must lie in [1, 2]")
        if self.n_sim < 2:
            raise ConfigError("n_sim must be at least 2; raise p_local or n_sim_factor")
        if self.budget < self.n_sim:
            raise ConfigError(f"budget {self.budget} is smaller than n_sim={self.n_sim}")
        if self.n_cg < 1 or self.n_cl < 1:
            raise ConfigError("candidate pool sizes must be positive")
        if self.n_iter < 0 or self.n_r < 1:
            raise ConfigError("n_iter must be >= 0 and n_r >= 1")
        if self.min_edge <= 0:
            raise ConfigError("min_edge must be positive")
        if self.density_convention not in DENSITY_CONVENTIONS:
            raise ConfigError(f"density_convention must be one of {DENSITY_CONVENTIONS}")
        if self.restart_normalization not in RESTART_NORMALIZATIONS:
            raise ConfigError(f"restart_normalization must be one of {RESTART_NORMALIZATIONS}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class EventRecord:
    iteration: int
    evaluations: int
    n_domains: int
    selected_domain_id: int
    action: str
    q2_local: float
    q2_global: float = None
    wall_ms: float = 0.0


@dataclass
class DalPceState:
    """Everything needed to continue or inspect a run."""

    config: LearnerConfig
    decomposition: Decomposition
    ed_points: np.ndarray
    ed_values: np.ndarray
    rng: RngStreams
    screening: ScreeningPool
    iteration: int = 0
    restarts: int = 0
    restart_evaluations: int = -1
    events: list = field(default_factory=list)
    stop_reason: str = None

    @property
    def evaluations(self):
        return len(self.ed_values)

    @property
    def n_domains(self):
        return len(self.decomposition)

    def predict(self, points):
        return self.decomposition.global_predict(points)


def evaluate_model(model, points):
    """Call ``model`` on an (n, M) batch and validate the result."""
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    try:
        y = np.asarray(model(x), dtype=np.float64).reshape(-1)
    except ModelEvaluationFailure:
        raise
    except Exception as exc:
        raise ModelEvaluationFailure(f"model raised {exc!r}", x) from exc
    if y.size != x.shape[0]:
        raise ModelEvaluationFailure(f"model returned {y.size} values for {x.shape[0]} points", x)
    bad = ~np.isfinite(y)
    if bad.any():
        raise ModelEvaluationFailure(f"non-finite model output at {x[bad].tolist()}", x[bad])
    return y


def _append(state, points, values):
    start = state.evaluations
    state.ed_points = np.vstack([state.ed_points, points])
    state.ed_values = np.concatenate([state.ed_values, values])
    return np.arange(start, state.evaluations)


def _drop_known(state, points):
    """Remove rows already in the ED (exact coordinate equality) or repeated."""
    seen = {row.tobytes() for row in state.ed_points}
    keep = []
    for k, row in enumerate(points):
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(k)
    if len(keep) < len(points):
        logger.warning("dropped %d already evaluated point(s)", len(points) - len(keep))
    return points[keep]


def _new_screening(config, rng):
    return ScreeningPool(lhs(config.n_cg, Box.unit(config.dim), rng["screening"]))


def initialize(model, config):
    """Screening pool, initial LHS design and the first expansion on the unit box."""
    rng = RngStreams(config.seed)
    screening = _new_screening(config, rng)
    unit = Box.unit(config.dim)
    x0 = lhs(config.n_sim, unit, rng["initial"])
    y0 = evaluate_model(model, x0)
    pce = fit_pce(x0, y0, unit, config.p_local)
    decomp = Decomposition(config.dim, pce, np.arange(len(y0)))
    state = DalPceState(config, decomp, x0, y0, rng, screening)
    screening.sync(state.ed_points)
    return state


def _choose_and_split(state, scores):
    """Pick the working sub-domain, splitting it when it holds enough points.

    Returns ``(selected_id, working_id, action)`` or None when every
    sub-domain is frozen.
    """
    cfg = state.config
    decomp = state.decomposition
    while True:
        sid = select_subdomain(scores, decomp)
        if sid is None:
            return None
        sub = decomp[sid]
        if sub.n_members < cfg.n_sim:
            return sid, sid, "extend"
        sobol, _ = sub.pce.sobol_first_order()
        k = scores.decisive[sid]
        decisive = state.screening.points[k] if k >= 0 else sub.box.center
        for axis in np.argsort(-sobol, kind="stable"):
            try:
                work, _ = decomp.split(sid, axis, decisive, state.ed_points, cfg.min_edge)
            except DegenerateEdge:
                continue
            return sid, work, "split"
        logger.info("freezing sub-domain %d: every edge below min_edge", sid)
        sub.frozen = True


def _pick_points(state, work, n_new):
    """Greedy Theta_c selection of ``n_new`` points inside sub-domain ``work``."""
    cfg = state.config
    decomp = state.decomposition
    sub = decomp[work]
    rng = state.rng["local"]
    pool = CandidatePool(lhs(cfg.n_cl, sub.box, rng), sub.box)
    members = state.ed_points[sub.member_ids]
    chosen = []
    retries = 0
    while len(chosen) < n_new:
        if len(members) or chosen:
            scope = np.vstack([members] + chosen) if chosen else members
        else:
            scope = state.ed_points
        try:
            pt = select_next_point(pool, decomp, work, scope, cfg.density_convention)
        except EmptyPool:
            retries += 1
            if retries > 100:
                raise
            pool = CandidatePool(lhs(cfg.n_cl, sub.box, rng), sub.box)
            continue
        chosen.append(pt[None, :])
    return np.vstack(chosen)


def _refit(state, sid):
    cfg = state.config
    sub = state.decomposition[sid]
    ids = sub.member_ids
    pce = fit_pce(state.ed_points[ids], state.ed_values[ids], sub.box, cfg.p_local)
    state.decomposition.set_pce(sid, pce, inherited=False)


def iterate(state, model):
    """One learning iteration, mutating ``state`` in place.

    Returns
    -------
    str or None
        ``"split"`` or ``"extend"``; None when every sub-domain is frozen.

    Raises
    ------
    BudgetExceeded
        When the budget ran out before the working sub-domain reached
        ``n_sim`` points. The state is consistent and the event is logged.
    ModelEvaluationFailure
    """
    t0 = time.perf_counter()
    cfg = state.config
    decomp = state.decomposition
    scores = theta_subdomain(decomp, state.screening, state.ed_points, cfg.density_convention)
    picked = _choose_and_split(state, scores)
    if picked is None:
        return None
    sid, work, action = picked

    need = cfg.n_sim - decomp[work].n_members
    n_new = min(max(need, 0), cfg.budget - state.evaluations)
    if n_new > 0:
        x_new = _drop_known(state, _pick_points(state, work, n_new))
        y_new = evaluate_model(model, x_new)
        ids = _append(state, x_new, y_new)
        owners = decomp.locate(x_new)
        for owner in np.unique(owners):
            decomp.add_members(owner, ids[owners == owner])
        state.screening.sync(state.ed_points)

    complete = decomp[work].n_members >= cfg.n_sim
    if complete:
        _refit(state, work)
    state.iteration += 1
    state.events.append(EventRecord(
        state.iteration, state.evaluations, len(decomp), sid, action,
        decomp.aggregate_q2(), None, (time.perf_counter() - t0) * 1e3))
    if not complete:
        raise BudgetExceeded(f"budget {cfg.budget} reached while extending sub-domain {work}")
    return action


def _restart_q2_local(state):
    """Composite local error used by the restart check."""
    if state.config.restart_normalization == "global":
        var = float(np.var(state.ed_values))
        if var > 0:
            return state.decomposition.aggregate_q2(reference_variance=var)
    return state.decomposition.aggregate_q2()


def maybe_restart(state):
    """Compare the decomposition against one global fit on the whole ED.

    The check is skipped while the ED has not grown since the last restart;
    otherwise a large ED can be re-split without new evaluations and restarted
    forever.

    Returns
    -------
    bool
        True if the decomposition was discarded.
    """
    t0 = time.perf_counter()
    cfg = state.config
    if state.evaluations == state.restart_evaluations:
        return False
    unit = Box.unit(cfg.dim)
    try:
        global_pce = fit_pce(state.ed_points, state.ed_values, unit, cfg.p_local)
    except RankDeficient:
        logger.info("restart check skipped at iteration %d: global fit rank deficient",
                    state.iteration)
        return False
    q2_local = _restart_q2_local(state)
    q2_global = global_pce.q2
    if state.events:
        state.events[-1].q2_global = q2_global
    if not q2_local > q2_global:
        return False
    state.decomposition = Decomposition(cfg.dim, global_pce, np.arange(state.evaluations))
    if cfg.regenerate_screening:
        state.screening = _new_screening(cfg, state.rng)
        state.screening.sync(state.ed_points)
    state.restarts += 1
    state.restart_evaluations = state.evaluations
    logger.info("restart %d at iteration %d: Q2 local %.4g > global %.4g",
                state.restarts, state.iteration, q2_local, q2_global)
    state.events.append(EventRecord(
        state.iteration, state.evaluations, 1, 0, "restart",
        state.decomposition.aggregate_q2(), q2_global, (time.perf_counter() - t0) * 1e3))
    return True


def stop_reason(state):
    cfg = state.config
    if state.evaluations >= cfg.budget:
        return "budget"
    if state.iteration >= cfg.n_iter:
        return "n_iter"
    if cfg.q2_stop is not None and state.decomposition.aggregate_q2() <= cfg.q2_stop:
        return "q2_stop"
    if all(s.frozen for s in state.decomposition):
        return "frozen"
    return None


def resume(state, model, callback=None):
    """Continue a run until a stopping criterion is met."""
    cfg = state.config
    while True:
        reason = stop_reason(state)
        if reason is not None:
            state.stop_reason = reason
            return state
        try:
            action = iterate(state, model)
        except BudgetExceeded:
            state.stop_reason = "budget"
            if callback is not None:
                callback(state)
            return state
        if action is None:
            state.stop_reason = "frozen"
            return state
        if cfg.restart and state.iteration % cfg.n_r == 0:
            maybe_restart(state)
        if callback is not None:
            callback(state)


def run(model, config, callback=None):
    """Full learning loop.

    Parameters
    ----------
    model : callable
        Maps an (n, M) array of points in the unit hypercube to n outputs.
    config : LearnerConfig
    callback : callable, optional
        Called with the state after every iteration.

    Returns
    -------
    DalPceState
    """
    return resume(initialize(model, config), model, callback)
