"""Segment-neighborhood dynamic programming over prefix sums of sufficient
statistics.

Per-segment costs are evaluated on demand from prefix sums through a single
scalar kernel shared by every code path (exact scan, grid-restricted scan,
brute-force oracle), so equal partitions always receive bitwise-equal costs.
The kernel and the level scans are compiled with numba when it is available;
the plain-Python definitions are the fallback and the reference semantics.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError
from .families import (
    KC_BINOMIAL,
    KC_CATEGORICAL,
    KC_EXPLIKE,
    KC_GAMMA,
    KC_GAUSSIAN,
    KC_NEGBIN,
    KC_PARETO,
    KC_POISSON,
    Family,
    GaussianPositiveMean,
)

__all__ = [
    "Partition",
    "PrefixStats",
    "CostCurve",
    "build_prefix_stats",
    "segment_neighborhood",
    "dp_on_grid",
    "brute_force_best",
]

_BRUTE_FORCE_MAX_N = 16


@dataclass(frozen=True)
class Partition:
    """A segmentation of {1..n} stored as increasing right endpoints, the
    last of which is n."""

    n: int
    ends: tuple[int, ...]

    def __post_init__(self):
        ends = tuple(int(e) for e in self.ends)
        object.__setattr__(self, "ends", ends)
        if self.n < 1:
            raise ValueError("partition length must be >= 1")
        if not ends or ends[-1] != self.n:
            raise ValueError("last endpoint must equal n")
        if ends[0] < 1 or any(a >= b for a, b in zip(ends, ends[1:])):
            raise ValueError("endpoints must be strictly increasing positive integers")

    @classmethod
    def from_breaks(cls, n: int, breaks) -> "Partition":
        """Build from interior change-points (strictly inside 1..n-1)."""
        return cls(n, tuple(sorted(int(b) for b in breaks)) + (n,))

    @property
    def k(self) -> int:
        return len(self.ends)

    @property
    def interior(self) -> tuple[int, ...]:
        return self.ends[:-1]

    @property
    def lengths(self) -> tuple[int, ...]:
        prev = 0
        out = []
        for e in self.ends:
            out.append(e - prev)
            prev = e
        return tuple(out)

    def segments(self):
        """Yield (start, end) half-open index pairs."""
        prev = 0
        for e in self.ends:
            yield prev, e
            prev = e


@dataclass
class PrefixStats:
    """Cumulative sums of the sufficient statistic: cum[t] = sum_{u<=t} T(y_u)."""

    spec: Family
    cum: np.ndarray

    @property
    def n(self) -> int:
        return self.cum.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.cum.shape[1]

    def segment_sum(self, start: int, end: int) -> np.ndarray:
        return self.cum[end] - self.cum[start]

    def segment_mean(self, start: int, end: int) -> np.ndarray:
        if end <= start:
            raise ValueError("empty segment")
        return (self.cum[end] - self.cum[start]) / (end - start)


@dataclass
class CostCurve:
    """Minimal contrast and optimal partition for each segment count K."""

    kmax: int
    min_len: int
    costs: np.ndarray                     # (kmax+1,), entry 0 unused; +inf = infeasible
    partitions: list                      # Partition | None, indexed by K
    prefix: PrefixStats | None = None
    grid: tuple[int, ...] | None = None   # candidate positions when grid-restricted

    def feasible_ks(self) -> np.ndarray:
        ks = np.arange(1, self.kmax + 1)
        return ks[np.isfinite(self.costs[1:])]

    def cost(self, k: int) -> float:
        return float(self.costs[k])

    def partition(self, k: int) -> Partition:
        p = self.partitions[k]
        if p is None:
            raise InfeasibleError(f"no partition with K={k} segments")
        return p

    def segment_means(self, k: int) -> list[np.ndarray]:
        if self.prefix is None:
            raise ValueError("cost curve carries no prefix statistics")
        return [self.prefix.segment_mean(a, b) for a, b in self.partition(k).segments()]


# ---------------------------------------------------------------------------
# scalar cost kernel and level scans (numba-compiled when available)
# ---------------------------------------------------------------------------


def _seg_cost(code, aux, cum, s, t):
    """Minimal contrast of the segment (s, t] from prefix sums.

    Boundary means of the discrete families use the limiting-likelihood value
    (0 log 0 = 0); degenerate segments of continuous families raise.
    """
    ln = float(t - s)
    if code == KC_POISSON:
        v = cum[t, 0] - cum[s, 0]
        if v <= 0.0:
            return 0.0
        return v - v * math.log(v / ln)
    elif code == KC_EXPLIKE:
        v = cum[t, 0] - cum[s, 0]
        if v <= 0.0:
            raise ValueError("degenerate segment: statistic total is zero")
        return ln * (1.0 + math.log(v / ln))
    elif code == KC_GAUSSIAN:
        m1 = (cum[t, 0] - cum[s, 0]) / ln
        var = (cum[t, 1] - cum[s, 1]) / ln - m1 * m1
        if var <= 0.0:
            raise ValueError("degenerate segment: zero sample variance")
        return ln * 0.5 * (1.0 + math.log(var))
    elif code == KC_PARETO:
        c = (cum[t, 0] - cum[s, 0]) / ln - aux[0]
        if c <= 0.0:
            raise ValueError("degenerate segment: statistic mean at boundary")
        return ln * (1.0 + math.log(c))
    elif code == KC_GAMMA:
        v = cum[t, 0] - cum[s, 0]
        if v <= 0.0:
            raise ValueError("degenerate segment: statistic total is zero")
        return ln * aux[0] * (1.0 + math.log(v / ln / aux[0]))
    elif code == KC_BINOMIAL:
        total = ln * aux[0]
        f = (cum[t, 0] - cum[s, 0]) / total
        cost = 0.0
        if f > 0.0:
            cost -= total * (f * math.log(f))
        if f < 1.0:
            cost -= total * ((1.0 - f) * math.log(1.0 - f))
        return cost
    elif code == KC_NEGBIN:
        mean = (cum[t, 0] - cum[s, 0]) / ln
        phi = aux[0]
        cost = (mean + phi) * math.log(mean + phi) - phi * math.log(phi)
        if mean > 0.0:
            cost -= mean * math.log(mean)
        return ln * cost
    else:
        acc = 0.0
        rest = 1.0
        for i in range(cum.shape[1]):
            f = (cum[t, i] - cum[s, i]) / ln
            rest -= f
            if f > 0.0:
                acc += f * math.log(f)
        if rest > 0.0:
            acc += rest * math.log(rest)
        return -ln * acc


def _kahan_cumsum(stats):
    """Compensated cumulative sums; row t of the result is sum_{u<t} stats[u]."""
    n, dim = stats.shape
    cum = np.zeros((n + 1, dim))
    comp = np.zeros(dim)
    total = np.zeros(dim)
    for t in range(n):
        for j in range(dim):
            y = stats[t, j] - comp[j]
            s = total[j] + y
            comp[j] = (s - total[j]) - y
            total[j] = s
            cum[t + 1, j] = s
    return cum


def _first_level(cum, min_len, code, aux):
    n = cum.shape[0] - 1
    cout = np.full(n + 1, np.inf)
    for t in range(min_len, n + 1):
        cout[t] = _seg_cost(code, aux, cum, 0, t)
    return cout


def _scan_level(cum, cprev, k, min_len, code, aux, prune):
    """One level of the segment-neighborhood recurrence with optional
    candidate pruning.

    A candidate s is scheduled for removal at time t + min_len once
    cprev[s] + cost(s, t) strictly exceeds cprev[t]: from then on the
    position t itself is an always-no-worse predecessor (segment costs never
    decrease under extension splits), so dropping s cannot change any later
    minimum nor the smallest-predecessor tie-break.
    """
    n = cum.shape[0] - 1
    cout = np.full(n + 1, np.inf)
    bout = np.full(n + 1, -1, dtype=np.int64)
    cands = np.empty(n + 1, dtype=np.int64)
    kills = np.empty(n + 1, dtype=np.int64)
    m = 0
    never = n + min_len + 1
    base = (k - 1) * min_len
    for t in range(k * min_len, n + 1):
        s_new = t - min_len
        if s_new >= base and cprev[s_new] < np.inf:
            cands[m] = s_new
            kills[m] = never
            m += 1
        best = np.inf
        bs = -1
        ct = cprev[t]
        do_prune = prune and ct < np.inf
        margin = 1e-9 * (1.0 + abs(ct))
        w = 0
        for j in range(m):
            if kills[j] <= t:
                continue
            sj = cands[j]
            v = cprev[sj] + _seg_cost(code, aux, cum, sj, t)
            kj = kills[j]
            if do_prune and v > ct + margin and t + min_len < kj:
                kj = t + min_len
            cands[w] = sj
            kills[w] = kj
            w += 1
            if v < best:
                best = v
                bs = sj
        m = w
        cout[t] = best
        bout[t] = bs
    return cout, bout


def _scan_grid_level(cum, pos, cprev, min_len, code, aux):
    """One recurrence level restricted to candidate node positions."""
    nn = pos.shape[0]
    cout = np.full(nn, np.inf)
    bout = np.full(nn, -1, dtype=np.int64)
    for j in range(1, nn):
        t = pos[j]
        best = np.inf
        bi = -1
        for i in range(j):
            if t - pos[i] < min_len:
                break
            if cprev[i] == np.inf:
                continue
            v = cprev[i] + _seg_cost(code, aux, cum, pos[i], t)
            if v < best:
                best = v
                bi = i
        cout[j] = best
        bout[j] = bi
    return cout, bout


def _grid_first_level(cum, pos, min_len, code, aux):
    nn = pos.shape[0]
    cout = np.full(nn, np.inf)
    for j in range(1, nn):
        if pos[j] >= min_len:
            cout[j] = _seg_cost(code, aux, cum, 0, pos[j])
    return cout


try:
    from numba import njit as _njit

    _seg_cost = _njit(cache=True)(_seg_cost)
    _kahan_cumsum = _njit(cache=True)(_kahan_cumsum)
    _first_level = _njit(cache=True)(_first_level)
    _scan_level = _njit(cache=True)(_scan_level)
    _scan_grid_level = _njit(cache=True)(_scan_grid_level)
    _grid_first_level = _njit(cache=True)(_grid_first_level)
except ImportError:  # pragma: no cover - numba is a declared dependency
    pass


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def build_prefix_stats(spec: Family, data) -> PrefixStats:
    """Single-pass prefix sums of T(y) with compensated summation."""
    arr = np.asarray(data)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise ValueError("data must be a non-empty 1-D sequence")
    stats = spec.stats_array(arr)
    return PrefixStats(spec=spec, cum=_kahan_cumsum(np.ascontiguousarray(stats, dtype=float)))


def _validate_dp_args(prefix: PrefixStats, kmax: int, min_len: int):
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    if min_len < 1:
        raise ValueError("min_len must be >= 1")
    if isinstance(prefix.spec, GaussianPositiveMean) and min_len < 2:
        raise ValueError("gaussian segments need min_len >= 2 (sample variance)")
    if kmax * min_len > prefix.n:
        raise InfeasibleError(
            f"kmax={kmax} segments of length >= {min_len} do not fit in n={prefix.n}"
        )


def _backtrack_full(b_rows: np.ndarray, k: int, n: int) -> Partition:
    ends = [n]
    t = n
    for level in range(k, 1, -1):
        t = int(b_rows[level, t])
        ends.append(t)
    return Partition(n, tuple(reversed(ends)))


def segment_neighborhood(
    prefix: PrefixStats, kmax: int, min_len: int = 2, prune: bool = True
) -> CostCurve:
    """Exact minimal contrast and optimal partition for every K = 1..kmax.

    Pruning discards provably dominated predecessor candidates and never
    changes the result; disable it only for cross-checking.
    """
    _validate_dp_args(prefix, kmax, min_len)
    n = prefix.n
    cum = np.ascontiguousarray(prefix.cum)
    code = prefix.spec.cost_kernel_id
    aux = np.ascontiguousarray(prefix.spec.cost_kernel_aux, dtype=float)

    costs = np.full(kmax + 1, np.inf)
    b_rows = np.full((kmax + 1, n + 1), -1, dtype=np.int32)
    cprev = _first_level(cum, min_len, code, aux)
    costs[1] = cprev[n]
    for k in range(2, kmax + 1):
        if k * min_len > n:
            break
        c_k, b_k = _scan_level(cum, cprev, k, min_len, code, aux, prune)
        costs[k] = c_k[n]
        b_rows[k] = b_k.astype(np.int32)
        cprev = c_k

    partitions: list = [None] * (kmax + 1)
    if np.isfinite(costs[1]):
        partitions[1] = Partition(n, (n,))
    for k in range(2, kmax + 1):
        if np.isfinite(costs[k]):
            partitions[k] = _backtrack_full(b_rows, k, n)
    return CostCurve(kmax=kmax, min_len=min_len, costs=costs, partitions=partitions, prefix=prefix)


def dp_on_grid(prefix: PrefixStats, candidates, kmax: int, min_len: int = 2) -> CostCurve:
    """Same recurrence as segment_neighborhood with change-points restricted
    to the candidate positions (n is implicitly the final endpoint)."""
    _validate_dp_args(prefix, kmax, min_len)
    n = prefix.n
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.size == 0 and kmax > 1:
        raise ValueError("empty candidate set cannot support kmax > 1")
    if cand.size and (np.any(np.diff(cand) <= 0) or cand[0] < 1 or cand[-1] >= n):
        raise ValueError("candidates must be strictly increasing positions in [1, n-1]")

    pos = np.concatenate([[0], cand, [n]]).astype(np.int64)
    cum = np.ascontiguousarray(prefix.cum)
    code = prefix.spec.cost_kernel_id
    aux = np.ascontiguousarray(prefix.spec.cost_kernel_aux, dtype=float)

    nn = pos.shape[0]
    costs = np.full(kmax + 1, np.inf)
    b_rows = np.full((kmax + 1, nn), -1, dtype=np.int64)
    cprev = _grid_first_level(cum, pos, min_len, code, aux)
    costs[1] = cprev[-1]
    for k in range(2, kmax + 1):
        if k * min_len > n:
            break
        c_k, b_k = _scan_grid_level(cum, pos, cprev, min_len, code, aux)
        costs[k] = c_k[-1]
        b_rows[k] = b_k
        cprev = c_k

    partitions: list = [None] * (kmax + 1)
    if np.isfinite(costs[1]):
        partitions[1] = Partition(n, (n,))
    for k in range(2, kmax + 1):
        if not np.isfinite(costs[k]):
            continue
        ends = [n]
        j = nn - 1
        for level in range(k, 1, -1):
            j = int(b_rows[level, j])
            ends.append(int(pos[j]))
        partitions[k] = Partition(n, tuple(reversed(ends)))
    return CostCurve(
        kmax=kmax,
        min_len=min_len,
        costs=costs,
        partitions=partitions,
        prefix=prefix,
        grid=tuple(int(c) for c in cand),
    )


def brute_force_best(prefix: PrefixStats, k: int, min_len: int = 1) -> tuple[float, Partition]:
    """Exhaustive minimum over partitions with exactly k segments (test
    oracle; guarded to small n)."""
    n = prefix.n
    if n > _BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force is guarded to n <= {_BRUTE_FORCE_MAX_N}")
    if k < 1 or k * min_len > n:
        raise InfeasibleError(f"no partition of n={n} into {k} segments of length >= {min_len}")
    cum = np.ascontiguousarray(prefix.cum)
    code = prefix.spec.cost_kernel_id
    aux = np.ascontiguousarray(prefix.spec.cost_kernel_aux, dtype=float)

    best_cost = math.inf
    best_key = None
    best_ends = None
    for combo in itertools.combinations(range(1, n), k - 1):
        ends = combo + (n,)
        prev = 0
        ok = True
        for e in ends:
            if e - prev < min_len:
                ok = False
                break
            prev = e
        if not ok:
            continue
        cost = 0.0
        prev = 0
        for e in ends:
            cost += _seg_cost(code, aux, cum, prev, e)
            prev = e
        key = tuple(reversed(combo))
        if cost < best_cost or (cost == best_cost and key < best_key):
            best_cost = cost
            best_key = key
            best_ends = ends
    return best_cost, Partition(n, best_ends)
