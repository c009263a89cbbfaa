import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import chisquare

from helpers import full_counts, sample_row
from mmas_tsp.errors import SelectionError
from mmas_tsp.rng import RandomStream, draw_u64
from mmas_tsp.selection import (RWM, RWM_CHUNKED, WRS, candidate_list_select,
                                chunked_roulette_select, inverse_weights, roulette_select, wrs_key,
                                wrs_select)
from mmas_tsp.tabu import BT, CT, LC, make_tabu

TRIALS = 100_000
ALPHA = 1e-3


def gof_p(counts, weights):
    w = np.asarray(weights, dtype=float)
    return chisquare(counts, TRIALS * w / w.sum()).pvalue


def test_single_candidate_any_method():
    t = make_tabu("BT", 5)
    for v in (0, 1, 3, 4):
        t.mark(v)
    w = np.ones(5)
    rng = RandomStream(1)
    assert roulette_select(t, w, rng) == 2
    assert chunked_roulette_select(t, w, rng, 2) == 2
    assert wrs_select(t, w, rng) == 2


def test_roulette_one_one_two():
    counts = full_counts(RWM, [1, 1, 2], 10, TRIALS)
    assert abs(counts[2] / TRIALS - 0.5) < 0.01
    assert gof_p(counts, [1, 1, 2]) > ALPHA


def test_tiny_weight_still_selected():
    counts = full_counts(RWM, [1.0, 1e-3], 11, TRIALS)
    assert counts[1] > 0


def test_chunked_single_chunk_matches_roulette_draw():
    # one chunk: the second draw decides, exactly like the plain wheel
    w = np.array([0.3, 1.2, 2.0, 0.5])
    for seed in range(50):
        a = RandomStream(seed)
        a.advance(1)
        b = RandomStream(seed)
        assert chunked_roulette_select(range(4), w, b, 32) == roulette_select(range(4), w, a)


def test_chunked_uniform_over_eight():
    counts = full_counts(RWM_CHUNKED, np.ones(8), 12, TRIALS, chunk=4)
    assert gof_p(counts, np.ones(8)) > ALPHA


def test_chunked_one_one_two_four():
    counts = full_counts(RWM_CHUNKED, [1, 1, 2, 4], 13, TRIALS, chunk=2)
    assert abs(counts[3] / TRIALS - 0.5) < 0.01


def test_wrs_two_nodes():
    counts = full_counts(WRS, [1, 3], 14, TRIALS)
    assert abs(counts[1] / TRIALS - 0.75) < 0.01
    # keys r ** (1 / w): the second key has density 3 x**2 and the first
    # key's CDF is x, so P(second wins) = integral of x * 3 x**2 over (0, 1)
    p, _ = quad(lambda x: x * 3 * x ** 2, 0.0, 1.0)
    assert abs(p - 0.75) < 1e-12


def test_wrs_workers_do_not_change_the_pick():
    rng = np.random.default_rng(0)
    for trial in range(200):
        n = int(rng.integers(1, 70))
        w = rng.uniform(0.01, 2.0, n)
        t = make_tabu(["LC", "CT", "BT"][trial % 3], n)
        for v in rng.permutation(n)[: rng.integers(0, n)]:
            t.mark(int(v))
        picks = {wrs_select(t, w, RandomStream(trial, 3), workers) for workers in (1, 2, 3, 8)}
        assert len(picks) == 1


def reference_wrs_pick(tabu, w, key, counter):
    """Argmax of log1p(-u) / w over all positions, straight from the definition."""
    best = None
    for i in range(tabu.length()):
        v = tabu.get_candidate(i)
        if v == tabu.n:
            continue
        h = int(draw_u64(np.uint64(key), counter + i // 2))
        u = (((h >> (32 * (i & 1))) & 0xFFFFFFFF) + 0.5) * 2.0 ** -32
        k = math.log1p(-u) / w[v]
        if best is None or k > best[0] or (k == best[0] and v < best[1]):
            best = (k, v)
    return best[1]


@pytest.mark.parametrize("kind", ["LC", "CT", "BT"])
def test_wrs_matches_exact_keys(kind):
    rng = np.random.default_rng(5)
    for trial in range(150):
        n = int(rng.integers(1, 300))
        # skewed weights over several decades stress the bound screening
        w = 10.0 ** rng.uniform(-6, 3, n)
        t = make_tabu(kind, n)
        for v in rng.permutation(n)[: rng.integers(0, n)]:
            t.mark(int(v))
        stream = RandomStream(trial, 11)
        expected = reference_wrs_pick(t, w, stream.key, stream.counter)
        assert wrs_select(t, w, stream, 1 + trial % 3) == expected


def test_wrs_scaling_invariance():
    rng = np.random.default_rng(1)
    for trial in range(200):
        w = rng.uniform(0.01, 1.0, 20)
        t = make_tabu("BT", 20)
        assert wrs_select(t, w, RandomStream(trial)) == wrs_select(t, 8.0 * w, RandomStream(trial))


def test_wrs_never_picks_visited():
    rng = np.random.default_rng(2)
    for trial in range(300):
        n = int(rng.integers(2, 40))
        t = make_tabu(["LC", "CT", "BT"][trial % 3], n)
        for v in rng.permutation(n)[: n - 1 - rng.integers(0, n - 1)]:
            t.mark(int(v))
        assert not t.is_visited(wrs_select(t, rng.uniform(0.1, 1, n), RandomStream(trial), 1 + trial % 4))


def test_wrs_rng_advances_by_half_the_length():
    t = make_tabu("BT", 9)
    rng = RandomStream(3)
    wrs_select(t, np.ones(9), rng)
    assert rng.counter == 5


def test_wrs_all_visited_raises():
    t = make_tabu("LC", 2)
    t.mark(0)
    t.mark(1)
    with pytest.raises(SelectionError):
        wrs_select(t, np.ones(2), RandomStream(0))


def test_wrs_key_examples():
    assert wrs_key(1.0, 0.5) == -1.0
    assert wrs_key(2.0, 0.5) == -0.5
    assert wrs_key(4.0, 0.25) > wrs_key(2.0, 0.25) > wrs_key(1.0, 0.25)
    assert math.isclose(wrs_key(3.0, 0.3), math.log2(0.3) / 3.0)


def test_wrs_key_rejects_bad_input():
    with pytest.raises(ValueError):
        wrs_key(1.0, 0.0)
    with pytest.raises(ValueError):
        wrs_key(1.0, 1.0)
    with pytest.raises(FloatingPointError):
        wrs_key(0.0, 0.5)


@pytest.mark.parametrize("kind", [LC, CT, BT])
@pytest.mark.parametrize("sel", [RWM, RWM_CHUNKED, WRS])
def test_partial_tabu_distribution(kind, sel):
    # visited nodes take no mass; the rest stay proportional
    w = np.array([1.0, 5.0, 2.0, 3.0, 4.0, 1.0, 0.5, 2.5])
    counts = full_counts(sel, w, 100 + 10 * kind + sel, TRIALS, kind=kind, chunk=3, workers=3,
                         pre_marked=(1, 4))
    assert counts[1] == 0 and counts[4] == 0
    keep = [0, 2, 3, 5, 6, 7]
    assert gof_p(counts[keep], w[keep]) > ALPHA


@pytest.mark.parametrize("method", ["RWM", "RWM_CHUNKED", "WRS"])
def test_candidate_list_fallback_argmax(method):
    weights = np.zeros(6)
    weights[4], weights[5] = 0.1, 0.9
    t = make_tabu("CT", 6)
    for v in (0, 1, 2, 3):
        t.mark(v)
    rng = RandomStream(0)
    assert candidate_list_select(0, [1, 2, 3], t, weights, rng, method) == 5
    assert rng.counter == 0


@pytest.mark.parametrize("kind", ["LC", "CT", "BT"])
def test_fallback_matches_reference(kind):
    rng = np.random.default_rng(9)
    for trial in range(300):
        n = int(rng.integers(3, 120))
        t = make_tabu(kind, n)
        order = rng.permutation(n)
        visited = order[: rng.integers(2, n)]
        for v in visited:
            t.mark(int(v))
        weights = rng.integers(1, 4, n).astype(float)  # few distinct values force ties
        open_nodes = [v for v in range(n) if v not in set(visited.tolist())]
        top = max(weights[v] for v in open_nodes)
        expected = min(v for v in open_nodes if weights[v] == top)
        row = [int(v) for v in visited[1:]]
        got = candidate_list_select(int(visited[0]), row, t, weights, RandomStream(trial),
                                    ["RWM", "WRS"][trial % 2])
        assert got == expected


@pytest.mark.parametrize("method", ["RWM", "RWM_CHUNKED", "WRS"])
def test_candidate_list_single_open_neighbor(method):
    t = make_tabu("BT", 6)
    for v in (0, 1, 3):
        t.mark(v)
    for seed in range(20):
        assert candidate_list_select(0, [1, 2, 3], t, np.ones(6), RandomStream(seed), method) == 2


@pytest.mark.parametrize("sel", [RWM, RWM_CHUNKED, WRS])
def test_candidate_list_distribution(sel):
    w = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 9.0, 9.0])
    row = np.array([1, 2, 3, 4], dtype=np.int64)
    counts = sample_row(sel, 7, row, w, inverse_weights(w), 200 + sel, TRIALS, 2)
    assert counts[5] == counts[6] == 0
    assert gof_p(counts[1:5], w[1:5]) > ALPHA
