"""The MAX-MIN Ant System main loop.

Ants are split into contiguous batches, one per thread; each batch runs a
nogil kernel with its own tabu and selection buffers. Every ant draws from
its own (seed, iteration, ant) stream, so results do not depend on the
thread count or on scheduling.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .errors import ConfigError
from .instance import (DistanceMatrix, TspInstance, Tour, build_distance_matrix,
                       build_neighbor_lists, nearest_neighbor_tour, validate_route)
from .local_search import two_opt_kernel
from .pheromone import (DEFAULT_P_BEST, MmasParams, deposit, evaporate,
                        heuristic_matrix, init_limits, init_pheromone, recompute_choice_info, update_limits)
from .rng import draw_unit, stream_key
from .selection import (DEFAULT_CHUNK, SELECTION_KINDS, WRS, inverse_weights, select_full,
                        select_row)
from .tabu import TABU_KINDS, allocate, check_size, tabu_mark, tabu_reset

LS_NEIGHBORS = 32
DEPOSIT_SOURCES = ("iteration_best", "global_best")


@dataclass(frozen=True)
class MmasConfig:
    params: MmasParams = field(default_factory=MmasParams)
    ants: Optional[int] = None  # None: one ant per node
    iterations: int = 100
    cl: Optional[int] = None  # candidate-list length, None or 0 for off
    tabu_kind: str = "BT"
    selection_kind: str = "RWM"
    chunk_or_workers: Optional[int] = None  # None: chunk 32 for RWM_CHUNKED, one WRS lane
    use_local_search: bool = False
    deposit_source: str = "iteration_best"
    seed: int = 0
    threads: int = 1
    p_best: float = DEFAULT_P_BEST

    def __post_init__(self):
        if self.tabu_kind not in TABU_KINDS:
            raise ConfigError(f"unknown tabu kind {self.tabu_kind!r}")
        if self.selection_kind not in SELECTION_KINDS:
            raise ConfigError(f"unknown selection kind {self.selection_kind!r}")
        if self.deposit_source not in DEPOSIT_SOURCES:
            raise ConfigError(f"deposit source must be one of {DEPOSIT_SOURCES}")
        if self.ants is not None and self.ants < 1:
            raise ConfigError("need at least one ant")
        if self.iterations < 1:
            raise ConfigError("need at least one iteration")
        if self.cl is not None and self.cl < 0:
            raise ConfigError("candidate-list length must be non-negative")
        if (self.chunk_or_workers is not None and self.chunk_or_workers < 1) or self.threads < 1:
            raise ConfigError("chunk/workers and threads must be >= 1")

    @property
    def variant(self) -> str:
        return f"MMAS-{self.selection_kind}-{self.tabu_kind}"

    @property
    def chunk(self) -> int:
        return self.chunk_or_workers or DEFAULT_CHUNK

    @property
    def wrs_workers(self) -> int:
        return self.chunk_or_workers or 1

    def ant_count(self, n: int) -> int:
        return n if self.ants is None else self.ants

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MmasConfig":
        d = dict(d)
        d["params"] = MmasParams(**d["params"])
        return cls(**d)


def check_config(config: MmasConfig, n: int) -> None:
    check_size(n)
    if n < 3:
        raise ConfigError("need at least 3 nodes")
    if config.cl and config.cl >= n:
        raise ConfigError(f"candidate-list length {config.cl} must be below n = {n}")


@dataclass
class IterationRecord:
    iteration: int
    iter_best_cost: int
    global_best_cost: int
    construction_ms: float
    local_search_ms: float
    pheromone_ms: float


@dataclass
class BestTracker:
    global_best: Optional[Tour] = None
    iter_best: Optional[Tour] = None
    history: list = field(default_factory=list)

    def offer(self, tour: Tour) -> bool:
        """Record an iteration best; returns True if it improved the global best."""
        self.iter_best = tour
        if self.global_best is None or tour.cost < self.global_best.cost:
            self.global_best = tour
            return True
        return False


@dataclass
class RunResult:
    best: Tour
    history: list
    timings: dict
    wall_ms: float
    nn_cost: int

    def cost_history(self) -> np.ndarray:
        return np.array([(h.iter_best_cost, h.global_best_cost) for h in self.history], dtype=np.int64)


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True, nogil=True)
def ant_key(seed, iteration, ant):
    return stream_key(np.uint64(seed), (np.uint64(iteration) << np.uint64(32)) | np.uint64(ant))


@njit(cache=True, nogil=True)
def construct_one(key, kind, a, b, state, n, sel, chunk, workers, choice, inv_choice, nbr,
                  use_cl, cand, wv, sums, route):
    tabu_reset(kind, a, b, state, n)
    cur = np.int64(draw_unit(key, 0) * n)
    if cur >= n:
        cur = n - 1
    counter = np.int64(1)
    route[0] = cur
    tabu_mark(kind, a, b, state, n, cur)
    for step in range(1, n):
        w = choice[cur]
        iw = inv_choice[cur]
        if use_cl:
            v, counter = select_row(sel, kind, a, b, state, n, nbr[cur], w, iw, key, counter,
                                    chunk, cand, wv, sums)
        else:
            v, counter = select_full(sel, kind, a, b, state, n, w, iw, key, counter,
                                     chunk, workers, cand, wv, sums)
        route[step] = v
        tabu_mark(kind, a, b, state, n, v)
        cur = v


@njit(cache=True, nogil=True)
def route_cost(route, d):
    n = route.shape[0]
    s = np.int64(0)
    for k in range(n - 1):
        s += d[route[k], route[k + 1]]
    return s + d[route[n - 1], route[0]]


def _make_batch_kernel(kind, sel, use_cl):
    # Baking the variant in as closure constants lets LLVM drop the unused
    # branches of the tabu and selection kernels; dispatching on runtime
    # values made construction several times slower.
    @njit(cache=True, nogil=True)
    def batch(lo, hi, seed, iteration, a, b, state, n, chunk, workers,
              choice, inv_choice, nbr, d, cand, wv, sums, routes, costs):
        for ant in range(lo, hi):
            key = ant_key(seed, iteration, ant)
            construct_one(key, kind, a, b, state, n, sel, chunk, workers, choice, inv_choice,
                          nbr, use_cl, cand, wv, sums, routes[ant])
            costs[ant] = route_cost(routes[ant], d)

    return batch


_BATCH_KERNELS = {}


def batch_kernel(kind: int, sel: int, use_cl: bool):
    key = (kind, sel, bool(use_cl))
    if key not in _BATCH_KERNELS:
        _BATCH_KERNELS[key] = _make_batch_kernel(*key)
    return _BATCH_KERNELS[key]


@njit(cache=True, nogil=True)
def improve_batch(lo, hi, routes, costs, d, nbr):
    for ant in range(lo, hi):
        costs[ant] -= two_opt_kernel(routes[ant], d, nbr)


# ---------------------------------------------------------------------------
# colony state


class Workspace:
    """Per-thread tabu and selection buffers."""

    def __init__(self, kind: int, n: int, nbuf: int):
        self.a, self.b, self.state = allocate(kind, n)
        self.cand = np.empty(nbuf, dtype=np.int64)
        self.wv = np.empty(nbuf, dtype=np.float64)
        self.sums = np.empty(nbuf, dtype=np.float64)


class ColonyState:
    def __init__(self, dm: DistanceMatrix, config: MmasConfig):
        n = dm.n
        check_config(config, n)
        self.dm = dm
        self.config = config
        self.n = n
        self.m = config.ant_count(n)
        self.use_cl = bool(config.cl)
        self.nbr_cl = build_neighbor_lists(dm, config.cl) if self.use_cl else None
        ls_len = min(LS_NEIGHBORS, n - 1)
        if self.use_cl and config.cl == ls_len:
            self.nbr_ls = self.nbr_cl
        elif config.use_local_search:
            self.nbr_ls = build_neighbor_lists(dm, ls_len)
        else:
            self.nbr_ls = None
        self.kind = TABU_KINDS[config.tabu_kind]
        self.sel = SELECTION_KINDS[config.selection_kind]
        self.eta_beta = heuristic_matrix(dm, config.params.beta)

        nn = nearest_neighbor_tour(dm)
        self.nn_cost = nn.cost
        self.limits = init_limits(nn.cost, config.params.rho, config.p_best, n)
        self.pheromone = init_pheromone(n, self.limits)
        recompute_choice_info(self.pheromone, dm, config.params, self.eta_beta)

        self.tracker = BestTracker()
        self.iteration = 0
        self.routes = np.empty((self.m, n), dtype=np.int32)
        self.costs = np.empty(self.m, dtype=np.int64)
        threads = min(config.threads, self.m)
        self.batches = np.array_split(np.arange(self.m), threads)
        self.workspaces = [Workspace(self.kind, n, n) for _ in self.batches]
        self.pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
        self._empty_nbr = np.zeros((n, 1), dtype=np.int32)
        # WRS keys use 1 / choice; other selections get a placeholder
        self._inv_buf = np.empty((n, n) if self.sel == WRS else (n, 1), dtype=np.float32)

    def refresh_inverse(self):
        """Recompute the inverse choice matrix after choice_info changes."""
        if self.sel == WRS:
            inverse_weights(self.pheromone.choice, out=self._inv_buf)

    @property
    def inv_choice(self) -> np.ndarray:
        return self._inv_buf

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None

    def _fan_out(self, fn):
        if self.pool is None:
            fn(0)
        else:
            list(self.pool.map(fn, range(len(self.batches))))

    def construct_all(self):
        cfg = self.config
        nbr = self.nbr_cl.nbr if self.use_cl else self._empty_nbr
        choice = self.pheromone.choice
        kernel = batch_kernel(self.kind, self.sel, self.use_cl)
        self.refresh_inverse()

        def work(t):
            batch = self.batches[t]
            if batch.size == 0:
                return
            ws = self.workspaces[t]
            kernel(int(batch[0]), int(batch[-1]) + 1, np.uint64(cfg.seed & 0xFFFFFFFFFFFFFFFF),
                   self.iteration, ws.a, ws.b, ws.state, self.n, cfg.chunk,
                   cfg.wrs_workers, choice, self.inv_choice, nbr, self.dm.d, ws.cand, ws.wv, ws.sums,
                   self.routes, self.costs)

        self._fan_out(work)

    def improve_all(self):
        def work(t):
            batch = self.batches[t]
            if batch.size:
                improve_batch(int(batch[0]), int(batch[-1]) + 1, self.routes, self.costs,
                              self.dm.d, self.nbr_ls.nbr)

        self._fan_out(work)


def select_iteration_best(costs) -> int:
    """Index of the cheapest tour; ties go to the lowest ant index."""
    costs = np.asarray(costs)
    if costs.size == 0:
        raise ValueError("no tours to choose from")
    return int(np.argmin(costs))


def construct_solution(ant_id: int, iteration: int, state: ColonyState) -> Tour:
    """Build one ant's tour from the current choice_info without touching the colony arrays."""
    cfg = state.config
    ws = Workspace(state.kind, state.n, state.n)
    route = np.empty(state.n, dtype=np.int32)
    nbr = state.nbr_cl.nbr if state.use_cl else state._empty_nbr
    state.refresh_inverse()
    key = np.uint64(ant_key(np.uint64(cfg.seed & 0xFFFFFFFFFFFFFFFF), iteration, ant_id))
    construct_one(key, state.kind, ws.a, ws.b, ws.state, state.n, state.sel, cfg.chunk,
                  cfg.wrs_workers, state.pheromone.choice, state.inv_choice, nbr, state.use_cl,
                  ws.cand, ws.wv, ws.sums, route)
    return Tour(route, int(route_cost(route, state.dm.d)))


def run_iteration(state: ColonyState, debug: bool = False) -> IterationRecord:
    cfg = state.config
    t0 = time.perf_counter()
    state.construct_all()
    t1 = time.perf_counter()
    if cfg.use_local_search:
        state.improve_all()
    t2 = time.perf_counter()
    if debug:
        for r in state.routes:
            validate_route(r, state.n)

    best = select_iteration_best(state.costs)
    iter_best = Tour(state.routes[best].copy(), int(state.costs[best]))
    ph = state.pheromone
    if state.tracker.offer(iter_best):
        state.limits = update_limits(state.limits, iter_best.cost, cfg.params.rho, state.n, cfg.p_best)
        ph.limits = state.limits
    source = iter_best if cfg.deposit_source == "iteration_best" else state.tracker.global_best
    evaporate(ph, cfg.params.rho, state.limits)
    deposit(ph, source.route, source.cost, state.limits)
    recompute_choice_info(ph, state.dm, cfg.params, state.eta_beta)
    t3 = time.perf_counter()

    rec = IterationRecord(state.iteration, iter_best.cost, state.tracker.global_best.cost,
                          (t1 - t0) * 1e3, (t2 - t1) * 1e3, (t3 - t2) * 1e3)
    state.tracker.history.append(rec)
    state.iteration += 1
    return rec


def run(instance, config: MmasConfig, debug: bool = False) -> RunResult:
    """Full run on a TspInstance or a prebuilt DistanceMatrix."""
    start = time.perf_counter()
    if isinstance(instance, TspInstance):
        dm = build_distance_matrix(instance)
    elif isinstance(instance, DistanceMatrix):
        dm = instance
    else:
        raise ConfigError("run needs a TspInstance or DistanceMatrix")
    state = ColonyState(dm, config)
    try:
        for _ in range(config.iterations):
            run_iteration(state, debug=debug)
    finally:
        state.close()
    wall_ms = (time.perf_counter() - start) * 1e3
    hist = state.tracker.history
    timings = {
        "construction_ms": sum(h.construction_ms for h in hist),
        "local_search_ms": sum(h.local_search_ms for h in hist),
        "pheromone_ms": sum(h.pheromone_ms for h in hist),
    }
    timings["other_ms"] = max(0.0, wall_ms - sum(timings.values()))
    return RunResult(state.tracker.global_best, hist, timings, wall_ms, state.nn_cost)


def default_threads() -> int:
    env = os.environ.get("MMAS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MMAS_THREADS must be an integer, got {env!r}") from None
    return 1

