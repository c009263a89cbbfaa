"""Proportional next-node selection.

Three methods draw node j with probability w_j / sum(w) over the candidates:

* RWM: one pass gathering candidates and weights, one draw, linear scan.
* RWM_CHUNKED: chunk sums, then a proportional pick of a chunk followed by a
  proportional pick inside it. Two draws, same marginal distribution.
* WRS: every candidate gets key log2(r) / w and the largest key wins, with
  r = 1 - u. The uniform u for candidate position i is the (i & 1) half of
  the 64-bit draw ``counter + i // 2`` of the ant's stream. The assignment
  depends only on the position, so the result does not depend on how
  positions are split among workers. Kernels take the inverse weights and
  compare log1p(-u) / w, the same ordering in natural-log units. A cheap
  vectorized pass bounds the winner's key so only a few candidates need
  the logarithm.

Kernels return ``(node, new_counter)``; callers own the stream counter.
"""

import math

import numpy as np
from numba import njit, types
from numba.extending import intrinsic

from .errors import SelectionError
from .rng import RandomStream, draw_u64, draw_unit
from .tabu import BT, Tabu, tabu_get, tabu_is_visited, tabu_length

RWM, RWM_CHUNKED, WRS = 0, 1, 2
SELECTION_KINDS = {"RWM": RWM, "RWM_CHUNKED": RWM_CHUNKED, "WRS": WRS}
SELECTION_NAMES = {v: k for k, v in SELECTION_KINDS.items()}
DEFAULT_CHUNK = 32
WRS_BLOCK = 16  # position pairs per bound block
SCREEN_SLACK = 1.0 + 1e-6  # keeps rounding in the bound tests on the safe side
_SCREEN_FLAGS = {"nnan", "nsz", "reassoc", "contract"}  # lets the min reduction vectorize
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_INV_2_32 = 2.0 ** -32


@njit(cache=True, nogil=True)
def gather_tabu(kind, a, b, state, n, w, cand, wv):
    """Copy unvisited nodes and their weights into the buffers; returns (count, total)."""
    k = 0
    total = 0.0
    if kind == BT:
        for i in range(n):
            if not (a[i >> 3] >> (i & 7)) & 1:
                x = np.float64(w[i])
                cand[k] = i
                wv[k] = x
                total += x
                k += 1
    else:
        L = state[0]
        for i in range(L):
            v = np.int64(a[i])
            x = np.float64(w[v])
            cand[k] = v
            wv[k] = x
            total += x
            k += 1
    return k, total


@njit(cache=True, nogil=True)
def gather_row(kind, a, b, state, n, row, w, cand, wv):
    """Like gather_tabu but restricted to the unvisited nodes of ``row``."""
    k = 0
    total = 0.0
    for j in range(row.shape[0]):
        v = np.int64(row[j])
        if not tabu_is_visited(kind, a, b, state, n, v):
            x = np.float64(w[v])
            cand[k] = v
            wv[k] = x
            total += x
            k += 1
    return k, total


@njit(cache=True, nogil=True)
def pick_roulette(cand, wv, k, total, u):
    target = u * total
    acc = 0.0
    for i in range(k):
        acc += wv[i]
        if acc > target:
            return cand[i]
    # rounding left the target at the very top of the wheel
    for i in range(k - 1, -1, -1):
        if wv[i] > 0.0:
            return cand[i]
    return cand[k - 1]


@njit(cache=True, nogil=True)
def pick_chunked(cand, wv, k, chunk, sums, u1, u2):
    nchunks = (k + chunk - 1) // chunk
    total = 0.0
    for c in range(nchunks):
        s = 0.0
        for i in range(c * chunk, min(k, (c + 1) * chunk)):
            s += wv[i]
        sums[c] = s
        total += s
    target = u1 * total
    acc = 0.0
    win = nchunks - 1
    for c in range(nchunks):
        acc += sums[c]
        if acc > target:
            win = c
            break
    while sums[win] <= 0.0 and win > 0:
        win -= 1
    lo = win * chunk
    hi = min(k, lo + chunk)
    return pick_roulette(cand[lo:hi], wv[lo:hi], hi - lo, sums[win], u2)


@njit(cache=True, nogil=True)
def wrs_key_value(inv_w, r):
    return math.log2(r) * inv_w


@njit(cache=True, nogil=True)
def wrs_key_from_draw(u, iw):
    """Key for r = 1 - u in natural-log units: log1p(-u) / w, given iw = 1 / w.

    log1p keeps full precision for small u. Dividing by ln 2 would give
    log2(r) / w, a uniform rescaling that leaves the argmax unchanged.
    """
    return math.log1p(-u) * iw


@njit(cache=True, nogil=True)
def half_unit(h, odd):
    """One 32-bit half of a 64-bit draw mapped strictly inside (0, 1)."""
    bits = (h >> _S32) if odd else (h & _LO32)
    return (np.float64(bits) + 0.5) * _INV_2_32


@njit(cache=True, nogil=True)
def position_unit(key, counter, i):
    """Uniform assigned to candidate position i: half (i & 1) of draw counter + i // 2."""
    return half_unit(draw_u64(key, counter + (i >> 1)), i & 1)


@njit(cache=True, nogil=True)
def position_inv(kind, a, n, iw, i):
    """Inverse weight of the node at tabu position i, inf for a sentinel."""
    if kind == BT:
        if (a[i >> 3] >> (i & 7)) & 1:
            return np.inf
        return np.float64(iw[i])
    return np.float64(iw[a[i]])


@intrinsic
def _f64_bits(typingctx, x):
    """Bit pattern of a float64 as int64; orders non-negative values like the floats."""
    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], context.get_value_type(types.int64))
    return types.int64(types.float64), codegen


@intrinsic
def _bits_f64(typingctx, x):
    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], context.get_value_type(types.float64))
    return types.float64(types.int64), codegen


_INF_BITS = 0x7FF0000000000000


@njit(cache=True, nogil=True, fastmath=_SCREEN_FLAGS)
def _wrs_block_bounds(kind, a, n, iw, key, counter, j0, j1):
    """Bounds over position pairs j0 .. j1 - 1; vectorizes.

    On (0, 1/2], u <= -log1p(-u) <= u + u * u, so u / w and (u + u * u) / w
    bound the negated key from below and above. Returns the smallest upper
    bound and the smallest lower bound, both as float bit patterns so the
    reductions are integer min (float min reductions do not vectorize).
    """
    upper = _INF_BITS
    lower = _INF_BITS
    for j in range(j0, j1):
        h = draw_u64(key, counter + j)
        u0 = (np.float64(h & _LO32) + 0.5) * _INV_2_32
        u1 = (np.float64(h >> _S32) + 0.5) * _INV_2_32
        l0 = u0 * position_inv(kind, a, n, iw, 2 * j)
        l1 = u1 * position_inv(kind, a, n, iw, 2 * j + 1)
        c0 = _f64_bits(l0 + u0 * l0) if u0 <= 0.5 else _INF_BITS
        c1 = _f64_bits(l1 + u1 * l1) if u1 <= 0.5 else _INF_BITS
        upper = min(upper, min(c0, c1))
        lower = min(lower, min(_f64_bits(l0), _f64_bits(l1)))
    return upper, lower


@njit(cache=True, nogil=True)
def _wrs_exact(kind, a, b, state, n, iw, key, counter, lo, hi, step, best_k, best_v, bound):
    """Exact keys over positions lo, lo + step, ... < hi whose lower bound u / w
    does not exceed ``bound``."""
    for i in range(lo, hi, step):
        v = tabu_get(kind, a, b, state, n, i)
        if v == n:
            continue
        u = position_unit(key, counter, i)
        x = np.float64(iw[v])
        if u * x <= bound:
            kv = wrs_key_from_draw(u, x)
            if kv > best_k or (kv == best_k and v < best_v):
                best_k = kv
                best_v = v
    return best_k, best_v


@njit(cache=True, nogil=True)
def _wrs_single_lane(kind, a, b, state, n, iw, key, counter, length, block_lb):
    """Two passes: block bounds give a threshold every winner's lower bound
    meets, then exact keys only inside blocks that can hold the winner."""
    npairs = length >> 1
    nblocks = (npairs + WRS_BLOCK - 1) // WRS_BLOCK
    upper = _INF_BITS
    for k in range(nblocks):
        hi = min((k + 1) * WRS_BLOCK, npairs)
        ub, lb = _wrs_block_bounds(kind, a, n, iw, key, counter, k * WRS_BLOCK, hi)
        upper = min(upper, ub)
        block_lb[k] = lb
    bound = _bits_f64(upper)
    if length & 1:
        u = position_unit(key, counter, length - 1)
        x = u * position_inv(kind, a, n, iw, length - 1)
        if u <= 0.5:
            bound = min(bound, x + u * x)
    bound *= SCREEN_SLACK
    best_v = -1
    best_k = -np.inf
    for k in range(nblocks):
        if _bits_f64(block_lb[k]) <= bound:
            hi = min((k + 1) * WRS_BLOCK, npairs)
            best_k, best_v = _wrs_exact(kind, a, b, state, n, iw, key, counter,
                                        2 * k * WRS_BLOCK, 2 * hi, 1, best_k, best_v, bound)
    if length & 1:
        best_k, best_v = _wrs_exact(kind, a, b, state, n, iw, key, counter,
                                    length - 1, length, 1, best_k, best_v, bound)
    return best_v


@njit(cache=True, nogil=True)
def _wrs_lane(kind, a, b, state, n, iw, key, counter, length, lane, workers):
    """One worker's share: positions lane, lane + workers, ..."""
    t = np.inf
    for i in range(lane, length, workers):
        u = position_unit(key, counter, i)
        x = u * position_inv(kind, a, n, iw, i)
        if u <= 0.5:
            t = min(t, x + u * x)
    return _wrs_exact(kind, a, b, state, n, iw, key, counter, lane, length, workers,
                      -np.inf, -1, t * SCREEN_SLACK)


@njit(cache=True, nogil=True)
def wrs_tabu(kind, a, b, state, n, iw, key, counter, workers, scratch):
    """Max-key selection over all tabu positions given inverse weights ``iw``.

    With ``workers`` > 1 the positions are split into strided lanes whose
    winners are reduced by the same max rule, so the pick is the same for any
    lane count. Consumes ceil(length / 2) draws. ``scratch`` is a float64
    buffer of at least length / 2 entries.
    """
    length = tabu_length(kind, state, n)
    used = counter + (length + 1) // 2
    if workers == 1:
        return _wrs_single_lane(kind, a, b, state, n, iw, key, counter, length,
                                scratch.view(np.int64)), used
    best_v = -1
    best_k = -np.inf
    for t in range(workers):
        lane_k, lane_v = _wrs_lane(kind, a, b, state, n, iw, key, counter, length, t, workers)
        if lane_v >= 0 and (lane_k > best_k or (lane_k == best_k and lane_v < best_v)):
            best_k = lane_k
            best_v = lane_v
    return best_v, used


@njit(cache=True, nogil=True)
def wrs_row(kind, a, b, state, n, row, iw, key, counter):
    """Max-key selection over the unvisited nodes of ``row``; returns -1 if none."""
    best_v = -1
    best_k = -np.inf
    bound = np.inf
    for j in range(row.shape[0]):
        v = np.int64(row[j])
        if tabu_is_visited(kind, a, b, state, n, v):
            continue
        u = position_unit(key, counter, j)
        x = np.float64(iw[v])
        if u * x <= bound:
            kv = wrs_key_from_draw(u, x)
            if kv > best_k or (kv == best_k and v < best_v):
                best_k = kv
                best_v = v
                bound = -kv * SCREEN_SLACK
    return best_v, counter + (row.shape[0] + 1) // 2


@njit(cache=True, nogil=True, fastmath=_SCREEN_FLAGS)
def _max_weight_bits(a, length, n, w):
    """Largest weight bit pattern over the live entries a[0..length); vectorizes."""
    m = np.int64(-1)
    for i in range(length):
        v = np.int64(a[i])
        x = _f64_bits(np.float64(w[v if v < n else 0]))
        m = max(m, x if v < n else np.int64(-1))
    return m


@njit(cache=True, nogil=True)
def _smallest_with_bits(a, length, n, w, m):
    best = n
    for i in range(length):
        v = np.int64(a[i])
        hit = v < n and _f64_bits(np.float64(w[v if v < n else 0])) == m
        best = min(best, v if hit else n)
    return best


@njit(cache=True, nogil=True)
def argmax_unvisited(kind, a, b, state, n, w):
    """Heaviest unvisited node, ties to the smaller id; -1 if none.

    Weights are positive, so their float64 bit patterns order like the values.
    """
    if state[0] == 0:
        return -1
    if kind == BT:
        # ids ascend, so a strict comparison keeps the smaller id; full bytes are skipped
        best_v = -1
        best_w = -np.inf
        for k in range(a.shape[0]):
            byte = a[k]
            if byte == 0xFF:
                continue
            for bit in range(8):
                v = 8 * k + bit
                if v < n and not (byte >> bit) & 1:
                    x = np.float64(w[v])
                    if x > best_w:
                        best_w = x
                        best_v = v
        return best_v
    length = state[0]
    m = _max_weight_bits(a, length, n, w)
    return _smallest_with_bits(a, length, n, w, m)


@njit(cache=True, nogil=True)
def select_full(sel, kind, a, b, state, n, w, iw, key, counter, chunk, workers, cand, wv, sums):
    """One step over all unvisited nodes; WRS reads the inverse weights ``iw``."""
    if sel == WRS:
        return wrs_tabu(kind, a, b, state, n, iw, key, counter, workers, wv)
    k, total = gather_tabu(kind, a, b, state, n, w, cand, wv)
    if k == 0:
        return -1, counter
    if sel == RWM:
        return pick_roulette(cand, wv, k, total, draw_unit(key, counter)), counter + 1
    u1 = draw_unit(key, counter)
    u2 = draw_unit(key, counter + 1)
    return pick_chunked(cand, wv, k, chunk, sums, u1, u2), counter + 2


@njit(cache=True, nogil=True)
def select_row(sel, kind, a, b, state, n, row, w, iw, key, counter, chunk, cand, wv, sums):
    """Candidate-list step with fallback to the heaviest unvisited node (no draw)."""
    if sel == WRS:
        v, c2 = wrs_row(kind, a, b, state, n, row, iw, key, counter)
        if v >= 0:
            return v, c2
    else:
        k, total = gather_row(kind, a, b, state, n, row, w, cand, wv)
        if k > 0:
            if sel == RWM:
                return pick_roulette(cand, wv, k, total, draw_unit(key, counter)), counter + 1
            u1 = draw_unit(key, counter)
            u2 = draw_unit(key, counter + 1)
            return pick_chunked(cand, wv, k, chunk, sums, u1, u2), counter + 2
    return argmax_unvisited(kind, a, b, state, n, w), counter


# ---------------------------------------------------------------------------
# Python API


def _check_weights(weights, nodes):
    w = np.asarray(weights, dtype=np.float64)
    vals = w[nodes]
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite selection weight")
    if np.any(vals <= 0):
        raise FloatingPointError("selection weights must be positive")
    return w


def _candidate_array(candidates) -> np.ndarray:
    if isinstance(candidates, Tabu):
        candidates = candidates.candidates()
    cand = np.asarray(list(candidates), dtype=np.int64)
    if cand.size == 0:
        raise SelectionError("no candidate to select")
    return cand


def roulette_select(candidates, weights, rng: RandomStream) -> int:
    """Proportional pick among ``candidates`` (a Tabu or node sequence); one draw."""
    cand = _candidate_array(candidates)
    w = _check_weights(weights, cand)
    wv = w[cand]
    return int(pick_roulette(cand, wv, cand.size, wv.sum(), rng.next_unit_open()))


def chunked_roulette_select(candidates, weights, rng: RandomStream, chunk_size: int = DEFAULT_CHUNK) -> int:
    """Chunk first, then node within the chunk; two draws."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    cand = _candidate_array(candidates)
    w = _check_weights(weights, cand)
    wv = w[cand]
    sums = np.empty((cand.size + chunk_size - 1) // chunk_size, dtype=np.float64)
    u1 = rng.next_unit_open()
    u2 = rng.next_unit_open()
    return int(pick_chunked(cand, wv, cand.size, chunk_size, sums, u1, u2))


def wrs_key(w: float, r: float) -> float:
    if not w > 0:
        raise FloatingPointError("weight must be positive")
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie strictly inside (0, 1)")
    return float(wrs_key_value(1.0 / w, r))


def inverse_weights(weights, out=None):
    """Elementwise 1 / w, inf where w is 0; keeps the input dtype."""
    w = np.asarray(weights)
    with np.errstate(divide="ignore"):
        return np.divide(w.dtype.type(1), w, out=out)


def wrs_select(tabu: Tabu, weights, rng: RandomStream, workers: int = 1) -> int:
    """Max-key pick over the tabu's unvisited nodes; advances ``rng`` by ceil(length() / 2)."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if tabu.unvisited_count == 0:
        raise SelectionError("all nodes are visited")
    w = _check_weights(weights, np.asarray(tabu.candidates(), dtype=np.int64))
    scratch = np.empty(tabu.n // 2 + 1, dtype=np.float64)
    v, counter = wrs_tabu(tabu.kind, tabu.a, tabu.b, tabu.state, tabu.n, inverse_weights(w),
                          np.uint64(rng.key), rng.counter, workers, scratch)
    rng.counter = int(counter)
    if tabu.is_visited(int(v)):
        raise AssertionError("selected a visited node")
    return int(v)


def candidate_list_select(current: int, nbr_row, tabu: Tabu, weights, rng: RandomStream,
                          method: str = "RWM", chunk_size: int = DEFAULT_CHUNK) -> int:
    """Select among the unvisited entries of ``nbr_row`` (the neighbors of ``current``),
    falling back to the heaviest unvisited node when all of them are visited."""
    if tabu.unvisited_count == 0:
        raise SelectionError("all nodes are visited")
    sel = SELECTION_KINDS[method.upper()]
    row = np.asarray(nbr_row, dtype=np.int64)
    if row.size and (row.min() < 0 or row.max() >= tabu.n or np.any(row == current)):
        raise ValueError("neighbor row must list other nodes of the instance")
    w = _check_weights(weights, np.asarray(tabu.candidates(), dtype=np.int64))
    cand = np.empty(max(row.size, 1), dtype=np.int64)
    wv = np.empty(max(row.size, 1), dtype=np.float64)
    sums = np.empty(max(row.size, 1), dtype=np.float64)
    v, counter = select_row(sel, tabu.kind, tabu.a, tabu.b, tabu.state, tabu.n, row, w,
                            inverse_weights(w), np.uint64(rng.key), rng.counter, chunk_size, cand, wv, sums)
    rng.counter = int(counter)
    return int(v)
