"""2-opt with neighbor lists and don't-look bits.

Moves are restricted to those where a new edge joins a node to one of its
nearest neighbors. Active nodes sit in a FIFO queue; a node leaves the queue
(its don't-look bit is set) after a scan finds nothing, and the endpoints of
every applied move are queued again. Each scan covers the whole neighbor row
in both tour directions and applies the first improving move.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .instance import DistanceMatrix, NeighborLists, Tour, validate_route


@njit(cache=True, nogil=True)
def gain(d, a, b, c, e):
    """Length saved by replacing edges (a,b), (c,e) with (a,c), (b,e)."""
    return (np.int64(d[a, b]) + np.int64(d[c, e])
            - np.int64(d[a, c]) - np.int64(d[b, e]))


@njit(cache=True, nogil=True)
def reverse_segment(route, pos, i, j):
    """Reverse positions i..j (walking forward, cyclic); flips the complement
    instead when that side is shorter. Both give the same cycle."""
    n = route.shape[0]
    seg = (j - i + n) % n + 1
    if 2 * seg > n:
        i, j = (j + 1) % n, (i - 1 + n) % n
        seg = n - seg
    for _ in range(seg // 2):
        u = route[i]
        v = route[j]
        route[i] = v
        pos[v] = i
        route[j] = u
        pos[u] = j
        i += 1
        if i == n:
            i = 0
        j -= 1
        if j < 0:
            j = n - 1


@njit(cache=True, nogil=True)
def two_opt_kernel(route, d, nbr):
    """Improve ``route`` in place; returns the total gain."""
    n = route.shape[0]
    pos = np.empty(n, dtype=np.int64)
    for k in range(n):
        pos[route[k]] = k
    queue = np.empty(n, dtype=np.int64)
    queued = np.ones(n, dtype=np.bool_)
    for k in range(n):
        queue[k] = route[k]
    head = 0
    count = n
    total = np.int64(0)
    cl = nbr.shape[1]
    while count > 0:
        a = queue[head]
        head += 1
        if head == n:
            head = 0
        count -= 1
        queued[a] = False
        moved = False
        pa = pos[a]
        sa = np.int64(route[pa + 1 if pa + 1 < n else 0])
        pr = np.int64(route[pa - 1 if pa > 0 else n - 1])
        for k in range(cl):
            c = np.int64(nbr[a, k])
            pc = pos[c]
            dac = np.int64(d[a, c])
            # successor direction: drop (a, succ a) and (c, succ c)
            b = sa
            e = np.int64(route[pc + 1 if pc + 1 < n else 0])
            if c != b and e != a:
                g = np.int64(d[a, b]) + np.int64(d[c, e]) - dac - np.int64(d[b, e])
                if g > 0:
                    reverse_segment(route, pos, pos[b], pc)
                    total += g
                    moved = True
                    break
            # predecessor direction: drop (pred a, a) and (pred c, c)
            b = pr
            e = np.int64(route[pc - 1 if pc > 0 else n - 1])
            if c != b and e != a:
                g = np.int64(d[a, b]) + np.int64(d[c, e]) - dac - np.int64(d[b, e])
                if g > 0:
                    reverse_segment(route, pos, pc, pos[b])
                    total += g
                    moved = True
                    break
        if moved:
            for v in (a, b, c, e):
                if not queued[v]:
                    queued[v] = True
                    tail = head + count
                    if tail >= n:
                        tail -= n
                    queue[tail] = v
                    count += 1
    return total


@dataclass
class TourWithPositions:
    route: np.ndarray
    pos: np.ndarray

    @classmethod
    def from_route(cls, route) -> "TourWithPositions":
        r = np.array(route, dtype=np.int64)
        pos = np.empty_like(r)
        pos[r] = np.arange(len(r))
        return cls(r, pos)

    def consistent(self) -> bool:
        return bool(np.array_equal(self.pos[self.route], np.arange(len(self.route))))


def apply_move(t: TourWithPositions, i: int, j: int) -> None:
    """Reverse the tour between positions i and j inclusive (cyclic, i -> j).
    The shorter side is flipped, so the stored orientation may change."""
    n = len(t.route)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError("positions outside the route")
    reverse_segment(t.route, t.pos, i, j)


def two_opt(tour: Tour, dm: DistanceMatrix, nbr: NeighborLists) -> Tour:
    route = validate_route(tour.route, dm.n).astype(np.int32).copy()
    saved = two_opt_kernel(route, dm.d, nbr.nbr)
    cost = int(tour.cost) - int(saved)
    return Tour(route, cost)


def improving_moves(route, dm: DistanceMatrix, nbr: NeighborLists) -> list:
    """Every neighbor-restricted 2-opt move with positive gain (debug oracle)."""
    r = np.asarray(route, dtype=np.int64)
    n = len(r)
    pos = np.empty(n, dtype=np.int64)
    pos[r] = np.arange(n)
    out = []
    for a in range(n):
        for c in nbr.nbr[a]:
            c = int(c)
            for step in (1, -1):
                b = int(r[(pos[a] + step) % n])
                e = int(r[(pos[c] + step) % n])
                if c == b or e == a or c == a:
                    continue
                g = int(gain(dm.d, a, b, c, e))
                if g > 0:
                    out.append((a, b, c, e, g))
    return out

