"""Visited-node tracking behind a four-operation interface.

Three layouts share the same contract (mark / is_visited / length /
get_candidate): list compression (LC), compact tabu (CT) and bitmask (BT).
Enumerating ``get_candidate(i)`` for ``i < length()`` and dropping the
sentinel value ``n`` yields exactly the unvisited nodes.

The njit kernels below are the implementation; the classes are thin owners
of the arrays so the same code runs inside the construction loop.
"""

import numpy as np
from numba import njit

from .errors import ConfigError

LC, CT, BT = 0, 1, 2
TABU_KINDS = {"LC": LC, "CT": CT, "BT": BT}
TABU_NAMES = {v: k for k, v in TABU_KINDS.items()}

MAX_NODES = 2**16 - 1  # node ids and the sentinel must fit a uint16 entry


def check_size(n: int) -> None:
    if n < 1:
        raise ConfigError("tabu needs at least one node")
    if n > MAX_NODES:
        raise ConfigError(f"16-bit tabu entries support n < 2**16, got n = {n}")


def allocate(kind: int, n: int):
    """Payload arrays (a, b) plus the one-element state array holding L."""
    check_size(n)
    if kind == LC:
        a = np.empty(n, dtype=np.uint16)
        b = np.empty(n, dtype=np.uint16)
    elif kind == CT:
        a = np.empty(n, dtype=np.uint16)
        b = np.empty(0, dtype=np.uint16)
    elif kind == BT:
        a = np.empty((n + 7) // 8, dtype=np.uint8)
        b = np.empty(0, dtype=np.uint8)
    else:
        raise ConfigError(f"unknown tabu kind {kind}")
    state = np.zeros(1, dtype=np.int64)
    tabu_reset(kind, a, b, state, n)
    return a, b, state


@njit(cache=True, nogil=True)
def tabu_reset(kind, a, b, state, n):
    if kind == BT:
        for i in range(a.shape[0]):
            a[i] = 0
    else:
        for i in range(n):
            a[i] = i
        if kind == LC:
            for i in range(n):
                b[i] = i
    state[0] = n


@njit(cache=True, nogil=True)
def tabu_mark(kind, a, b, state, n, v):
    L = state[0]
    if kind == LC:
        # a = unvisited, b = indices; swap v with the last live entry
        i = np.int64(b[v])
        last = np.int64(a[L - 1])
        a[i] = last
        b[last] = i
        a[L - 1] = v
        b[v] = L - 1
        state[0] = L - 1
    elif kind == CT:
        e = np.int64(a[v])
        iv = v if e == v else e
        if iv == L - 1:
            a[iv] = n
        else:
            t = np.int64(a[L - 1])
            a[iv] = t
            a[t] = iv
        L -= 1
        if v >= L:
            # v's own slot is outside the live region: mark it visited
            a[v] = n
        state[0] = L
    else:
        a[v >> 3] |= np.uint8(1 << (v & 7))
        state[0] = L - 1


@njit(cache=True, nogil=True)
def tabu_is_visited(kind, a, b, state, n, v):
    if kind == LC:
        return np.int64(b[v]) >= state[0]
    elif kind == CT:
        return np.int64(a[v]) > v
    return (a[v >> 3] >> (v & 7)) & 1 == 1


@njit(cache=True, nogil=True)
def tabu_length(kind, state, n):
    if kind == BT:
        return n
    return state[0]


@njit(cache=True, nogil=True)
def tabu_get(kind, a, b, state, n, i):
    if kind == BT:
        if (a[i >> 3] >> (i & 7)) & 1:
            return n
        return i
    return np.int64(a[i])


@njit(cache=True, nogil=True)
def tabu_unvisited_count(kind, state):
    return state[0]


class Tabu:
    """Common Python surface over the kernel arrays."""

    kind = -1
    name = "?"

    def __init__(self, n: int):
        self.n = int(n)
        self.a, self.b, self.state = allocate(self.kind, self.n)

    @property
    def sentinel(self) -> int:
        return self.n

    def mark(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise IndexError(f"node {v} outside 0..{self.n - 1}")
        if self.is_visited(v):
            raise ValueError(f"node {v} is already visited")
        tabu_mark(self.kind, self.a, self.b, self.state, self.n, v)

    def is_visited(self, v: int) -> bool:
        if not 0 <= v < self.n:
            raise IndexError(f"node {v} outside 0..{self.n - 1}")
        return bool(tabu_is_visited(self.kind, self.a, self.b, self.state, self.n, v))

    def length(self) -> int:
        return int(tabu_length(self.kind, self.state, self.n))

    def get_candidate(self, i: int) -> int:
        if not 0 <= i < self.length():
            raise IndexError(f"candidate index {i} outside 0..{self.length() - 1}")
        return int(tabu_get(self.kind, self.a, self.b, self.state, self.n, i))

    def reset(self) -> None:
        tabu_reset(self.kind, self.a, self.b, self.state, self.n)

    @property
    def unvisited_count(self) -> int:
        return int(self.state[0])

    def candidates(self) -> list:
        """Generic enumeration: every get_candidate result except the sentinel."""
        out = []
        for i in range(self.length()):
            v = self.get_candidate(i)
            if v != self.sentinel:
                out.append(v)
        return out

    @property
    def payload_arrays(self) -> tuple:
        raise NotImplementedError

    @property
    def payload_nbytes(self) -> int:
        return sum(arr.nbytes for arr in self.payload_arrays)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, unvisited={self.unvisited_count})"


class LcTabu(Tabu):
    """List compression: `unvisited` holds the live nodes in its first L slots,
    `indices[u]` is u's position there. Visited nodes pile up at the tail in
    reverse visiting order."""

    kind = LC
    name = "LC"

    @property
    def unvisited(self):
        return self.a

    @property
    def indices(self):
        return self.b

    @property
    def payload_arrays(self):
        return (self.a, self.b)

    def visit_order(self) -> list:
        """Marked nodes in the order they were marked (n - 1 - indices[u])."""
        L = self.unvisited_count
        visited = [u for u in range(self.n) if self.indices[u] >= L]
        return sorted(visited, key=lambda u: self.n - 1 - int(self.indices[u]))


class CompactTabu(Tabu):
    """Single array: entries[0..L) lists the unvisited nodes; to the right,
    entries[u] stores the position of a relocated node u, or a value > u once
    u has been visited."""

    kind = CT
    name = "CT"

    @property
    def entries(self):
        return self.a

    @property
    def payload_arrays(self):
        return (self.a,)

    def check_invariants(self) -> None:
        e = self.entries.astype(np.int64)
        L = self.unvisited_count
        live = e[:L]
        if len(set(live.tolist())) != L or (L and live.max() >= self.n):
            raise AssertionError("left region is not a set of distinct nodes")
        live_set = set(live.tolist())
        for u in range(self.n):
            if (e[u] > u) != (u not in live_set):
                raise AssertionError(f"entries[{u}] = {e[u]} disagrees with visited state")
            if u in live_set and e[u] != u and not (e[u] < L and e[e[u]] == u):
                raise AssertionError(f"relocated node {u} has a broken back reference")


class BitmaskTabu(Tabu):
    """One bit per node; enumeration scans all n positions."""

    kind = BT
    name = "BT"

    @property
    def bits(self):
        return self.a

    @property
    def payload_arrays(self):
        return (self.a,)


TABU_CLASSES = {"LC": LcTabu, "CT": CompactTabu, "BT": BitmaskTabu}


def make_tabu(kind: str, n: int) -> Tabu:
    try:
        return TABU_CLASSES[kind.upper()](n)
    except KeyError:
        raise ConfigError(f"unknown tabu kind {kind!r}; expected one of LC, CT, BT") from None
