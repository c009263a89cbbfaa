"""Bulk samplers and reference implementations used by the tests."""

import itertools

import numpy as np
from numba import njit

from mmas_tsp.instance import DistanceMatrix, TspInstance, build_distance_matrix
from mmas_tsp.rng import stream_key
from mmas_tsp.selection import inverse_weights, select_full, select_row
from mmas_tsp.tabu import (BT, allocate, tabu_get, tabu_is_visited, tabu_length, tabu_mark,
                           tabu_reset)


@njit(cache=True)
def sample_full(sel, kind, a, b, state, n, w, iw, seed, trials, chunk, workers, pre_marked):
    """Counts of the node picked over ``trials`` independent streams.

    Each trial resets the tabu, marks ``pre_marked`` and selects once.
    """
    counts = np.zeros(n, dtype=np.int64)
    cand = np.empty(n, dtype=np.int64)
    wv = np.empty(n, dtype=np.float64)
    sums = np.empty(n, dtype=np.float64)
    for t in range(trials):
        tabu_reset(kind, a, b, state, n)
        for v in pre_marked:
            tabu_mark(kind, a, b, state, n, v)
        key = stream_key(np.uint64(seed), np.uint64(t))
        v, _ = select_full(sel, kind, a, b, state, n, w, iw, key, 0, chunk, workers, cand, wv, sums)
        counts[v] += 1
    return counts


@njit(cache=True)
def sample_row(sel, n, row, w, iw, seed, trials, chunk):
    counts = np.zeros(n, dtype=np.int64)
    a = np.zeros((n + 7) // 8, dtype=np.uint8)
    b = np.empty(0, dtype=np.uint8)
    state = np.zeros(1, dtype=np.int64)
    cand = np.empty(row.shape[0], dtype=np.int64)
    wv = np.empty(row.shape[0], dtype=np.float64)
    sums = np.empty(row.shape[0], dtype=np.float64)
    for t in range(trials):
        tabu_reset(BT, a, b, state, n)
        tabu_mark(BT, a, b, state, n, 0)
        key = stream_key(np.uint64(seed), np.uint64(t))
        v, _ = select_row(sel, BT, a, b, state, n, row, w, iw, key, 0, chunk, cand, wv, sums)
        counts[v] += 1
    return counts


def full_counts(sel, weights, seed, trials, kind=BT, chunk=32, workers=1, pre_marked=()):
    w = np.asarray(weights, dtype=np.float64)
    a, b, state = allocate(kind, w.size)
    return sample_full(sel, kind, a, b, state, w.size, w, inverse_weights(w), seed, trials, chunk, workers,
                       np.asarray(pre_marked, dtype=np.int64))


@njit(cache=True)
def _oracle_kernel(kind, a, b, state, n, seed, sequences, full_checks):
    """Random mark/query sequences against a boolean membership oracle.

    Every sequence marks a random prefix of a random permutation. After each
    mark it checks is_visited on ``full_checks`` nodes (all nodes when
    ``full_checks`` >= n) and compares the sentinel-filtered enumeration with
    the oracle's unvisited set. Returns the number of disagreements.
    """
    np.random.seed(seed)
    seen = np.zeros(n, dtype=np.bool_)
    hit = np.zeros(n, dtype=np.int64)
    bad = 0
    for s in range(sequences):
        tabu_reset(kind, a, b, state, n)
        seen[:] = False
        perm = np.random.permutation(n)
        marks = np.random.randint(0, n + 1)
        for step in range(marks + 1):
            if step > 0:
                v = perm[step - 1]
                tabu_mark(kind, a, b, state, n, v)
                seen[v] = True
            # membership queries
            if full_checks >= n:
                for u in range(n):
                    if tabu_is_visited(kind, a, b, state, n, u) != seen[u]:
                        bad += 1
            else:
                for _ in range(full_checks):
                    u = np.random.randint(0, n)
                    if tabu_is_visited(kind, a, b, state, n, u) != seen[u]:
                        bad += 1
                if step % 97 != 0 and step != marks:
                    continue
            # enumeration: every unvisited node exactly once, nothing else
            hit[:] = 0
            unvisited = 0
            for u in range(n):
                if not seen[u]:
                    unvisited += 1
            length = tabu_length(kind, state, n)
            if length < unvisited:
                bad += 1
            for i in range(length):
                v = tabu_get(kind, a, b, state, n, i)
                if v == n:
                    continue
                if v < 0 or v > n or seen[v]:
                    bad += 1
                else:
                    hit[v] += 1
            for u in range(n):
                if not seen[u] and hit[u] != 1:
                    bad += 1
    return bad


def tabu_oracle_mismatches(kind, n, seed, sequences, full_checks):
    a, b, state = allocate(kind, n)
    return _oracle_kernel(kind, a, b, state, n, seed, sequences, full_checks)


def random_geometric(n, rng, scale=1000.0, name="rand") -> TspInstance:
    coords = rng.uniform(0.0, scale, size=(n, 2))
    return TspInstance(name, n, "EUC_2D", coords=coords)


def random_dm(n, rng, scale=1000.0) -> DistanceMatrix:
    return build_distance_matrix(random_geometric(n, rng, scale))


def brute_force_optimum(dm: DistanceMatrix) -> int:
    """Shortest cycle by enumerating every permutation with node 0 fixed."""
    n = dm.n
    d = dm.d.astype(np.int64)
    if n <= 3:
        return int(sum(d[i, (i + 1) % n] for i in range(n)))
    perms = np.array(list(itertools.permutations(range(1, n))), dtype=np.int64)
    full = np.concatenate([np.zeros((len(perms), 1), dtype=np.int64), perms], axis=1)
    costs = d[full, np.roll(full, -1, axis=1)].sum(axis=1)
    return int(costs.min())


def direct_cost(d, route) -> int:
    """Independent accumulation of a cycle length."""
    total = 0
    for k in range(len(route)):
        total += int(d[int(route[k])][int(route[(k + 1) % len(route)])])
    return total
