"""Causal-state reconstruction from redacted (input, output) traces.

Histories are the last ``L`` (input, output) pairs. Each history gets a
one-step morph: for every next input, the empirical distribution of the
next output. Histories whose morphs lie within a total-variation tolerance
are grouped by single-linkage agglomeration, so the clusters are the
connected components of the "within tolerance" graph. A larger tolerance
adds edges and can only merge clusters.

This is a finite-history, one-step-morph construction and assumes the
process is order-1 Markov in its causal state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import PreconditionError, SampleSizeError, SchemaError, ValidationError
from .measures import JointDistribution, conditional_entropy, mutual_information
from .qubit import OUTCOMES
from .simulation import BURN_IN, RedactedTrace, Trace
from .transducer import Transducer

DEFAULT_L = 1
DEFAULT_TOL = 0.05
DEFAULT_MIN_COUNT = 50

HistoryKey = tuple  # ((x, y), ...) oldest first


def _redact(tr) -> RedactedTrace:
    if isinstance(tr, Trace):
        return tr.redacted()
    if not isinstance(tr, RedactedTrace):
        raise ValidationError(f"expected a trace, got {type(tr).__name__}")
    return tr


def _input_alphabet(tr: RedactedTrace) -> tuple:
    if tr.n is not None:
        return tuple(range(1 << tr.n))
    return tuple(int(v) for v in np.unique(tr.x))


class _Coded:
    """Integer codes of a redacted trace: symbols, history codes, next-step columns."""

    def __init__(self, tr: RedactedTrace, L: int, burn_in: int):
        if L < 1:
            raise ValidationError(f"history length must be >= 1, got {L}")
        self.inputs = _input_alphabet(tr)
        pos = {x: i for i, x in enumerate(self.inputs)}
        if tr.n is not None:
            if tr.x.size and (tr.x.min() < 0 or tr.x.max() >= len(self.inputs)):
                raise SchemaError("trace inputs outside the declared alphabet")
            xi = np.asarray(tr.x, dtype=np.int64)
        else:
            xi = np.array([pos[int(v)] for v in tr.x], dtype=np.int64) if tr.x.size else np.zeros(0, np.int64)
        if not np.all(np.isin(tr.y, OUTCOMES)):
            raise SchemaError("trace outcomes must be +1 or -1")
        yb = (np.asarray(tr.y) == -1).astype(np.int64)
        self.L = L
        self.xi, self.yb = xi, yb
        self.base = 2 * len(self.inputs)
        z = xi * 2 + yb
        N = z.size
        # history ending at t covers t-L+1 .. t; code is base-A, oldest most significant
        start = max(burn_in, L - 1)
        self.t = np.arange(start, N)
        code = np.zeros(self.t.size, dtype=np.int64)
        for lag in range(L - 1, -1, -1):
            code = code * self.base + z[self.t - lag]
        self.code = code

    def key(self, code: int) -> HistoryKey:
        out = []
        for _ in range(self.L):
            code, sym = divmod(int(code), self.base)
            out.append((self.inputs[sym // 2], OUTCOMES[sym % 2]))
        return tuple(reversed(out))


@dataclass
class MorphTable:
    """Per-history next-output counts ``counts[h, x, y]`` (y index 0 is +1)."""

    L: int
    inputs: tuple
    keys: list
    codes: np.ndarray
    counts: np.ndarray
    excluded: dict = field(default_factory=dict)  # key -> smallest per-input count
    min_count: int = DEFAULT_MIN_COUNT

    def __len__(self):
        return len(self.keys)

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=(1, 2))

    @property
    def probs(self) -> np.ndarray:
        """``P(y = +1 | history, next input)``, shape ``(histories, inputs)``."""
        per_input = self.counts.sum(axis=2)
        return self.counts[:, :, 0] / per_input

    def morph(self, key) -> dict:
        h = self.keys.index(key)
        per_input = self.counts[h].sum(axis=1)
        return {
            x: {y: float(self.counts[h, i, b] / per_input[i]) for b, y in enumerate(OUTCOMES)}
            for i, x in enumerate(self.inputs)
        }


def estimate_morphs(tr, L: int = DEFAULT_L, min_count: int = DEFAULT_MIN_COUNT, burn_in: int = BURN_IN) -> MorphTable:
    """Empirical next-output distributions for every sufficiently observed history."""
    tr = _redact(tr)
    coded = _Coded(tr, L, burn_in)
    return _morphs(coded, min_count)


def _morphs(coded: _Coded, min_count: int) -> MorphTable:
    if coded.t.size < 2:
        raise SampleSizeError("trace too short for any history", count=0)
    t = coded.t[:-1]
    code = coded.code[: t.size]
    X = len(coded.inputs)
    uniq, inverse = np.unique(code, return_inverse=True)
    flat = (inverse.ravel() * X + coded.xi[t + 1]) * 2 + coded.yb[t + 1]
    counts = np.bincount(flat, minlength=uniq.size * X * 2).reshape(uniq.size, X, 2)
    per_input_min = counts.sum(axis=2).min(axis=1)
    ok = per_input_min >= min_count
    keys = [coded.key(c) for c in uniq]
    excluded = {keys[i]: int(per_input_min[i]) for i in np.flatnonzero(~ok)}
    if not np.any(ok):
        raise SampleSizeError(
            f"no history has {min_count} observations for every next input",
            count=int(per_input_min.max()),
            deficient=sorted(excluded),
        )
    return MorphTable(
        L=coded.L,
        inputs=coded.inputs,
        keys=[keys[i] for i in np.flatnonzero(ok)],
        codes=uniq[ok],
        counts=counts[ok],
        excluded=excluded,
        min_count=min_count,
    )


def morph_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Largest per-input total-variation distance between two binary morphs."""
    return float(np.max(np.abs(p - q)))


def _single_linkage(morphs: MorphTable, tol: float) -> np.ndarray:
    """Cluster id per history; ids numbered by first member in processing order."""
    probs = morphs.probs
    H = len(morphs)
    # descending count, then lexicographic key
    order = sorted(range(H), key=lambda h: (-int(morphs.totals[h]), morphs.keys[h]))
    clusters: list[list[int]] = []
    for h in order:
        hits = []
        for c, members in enumerate(clusters):
            d = np.max(np.abs(probs[members] - probs[h]), axis=1)
            if np.any(d <= tol):
                hits.append(c)
        if not hits:
            clusters.append([h])
            continue
        into = hits[0]
        clusters[into].append(h)
        for c in reversed(hits[1:]):
            clusters[into].extend(clusters.pop(c))
    assign = np.empty(H, dtype=np.int64)
    for c, members in enumerate(clusters):
        assign[members] = c
    return assign


@dataclass
class PartitionMachine:
    """A partition of histories into clusters plus its trace-estimated kernel.

    ``kernel_counts[c, x, y, c2]`` counts steps from a history in cluster
    ``c`` that, on next input ``x`` with output ``y``, land in a history of
    cluster ``c2``.
    """

    L: int
    inputs: tuple
    morphs: MorphTable
    assign: np.ndarray  # cluster id per morph-table history
    kernel_counts: np.ndarray
    occupancy: np.ndarray
    n: int | None = None
    tol: float | None = None
    burn_in: int = BURN_IN
    outputs: tuple = OUTCOMES

    @property
    def n_clusters(self) -> int:
        return int(self.assign.max()) + 1 if self.assign.size else 0

    @property
    def assignment(self) -> dict:
        return {k: int(c) for k, c in zip(self.morphs.keys, self.assign)}

    def members(self, c: int) -> list:
        return [k for k, a in zip(self.morphs.keys, self.assign) if a == c]

    def cluster_morphs(self) -> np.ndarray:
        """Pooled ``P(y = +1 | cluster, x)``, shape ``(clusters, inputs)``."""
        pooled = np.zeros((self.n_clusters,) + self.morphs.counts.shape[1:])
        np.add.at(pooled, self.assign, self.morphs.counts)
        return pooled[:, :, 0] / pooled.sum(axis=2)

    def max_member_distance(self) -> float:
        """Largest morph distance between a history and its cluster's pooled morph."""
        pooled = self.cluster_morphs()
        return float(np.max(np.abs(self.morphs.probs - pooled[self.assign])))

    def to_transducer(self) -> Transducer:
        C = self.n_clusters
        rows = {}
        for c in range(C):
            for i, x in enumerate(self.inputs):
                block = self.kernel_counts[c, i]
                total = block.sum()
                if total == 0:
                    raise SampleSizeError(f"no observed transitions from cluster {c} on input {x}", count=0)
                rows[(c, x)] = [
                    (int(c2), self.outputs[b], block[b, c2] / total) for b, c2 in zip(*np.nonzero(block))
                ]
        return Transducer(range(C), self.inputs, rows, outputs=self.outputs, n=self.n, atol=1e-9)

    def transition_samples(self, tr) -> tuple:
        """Per-step ``(cluster_prev, input index, output index, cluster_next)`` columns."""
        coded = _Coded(_redact(tr), self.L, self.burn_in)
        return _transition_samples(coded, self.morphs.codes, self.assign)


def _transition_samples(coded: _Coded, codes: np.ndarray, assign: np.ndarray):
    lookup = np.searchsorted(codes, coded.code)
    lookup = np.minimum(lookup, codes.size - 1)
    known = codes[lookup] == coded.code
    cl = np.where(known, assign[lookup], -1)
    prev, nxt = cl[:-1], cl[1:]
    live = (prev >= 0) & (nxt >= 0)
    t1 = coded.t[1:][live]
    return prev[live], coded.xi[t1], coded.yb[t1], nxt[live]


def _build_partition(coded: _Coded, morphs: MorphTable, assign: np.ndarray, n, tol, burn_in) -> PartitionMachine:
    C = int(assign.max()) + 1
    X = len(coded.inputs)
    cp, xi, yb, cn = _transition_samples(coded, morphs.codes, assign)
    flat = ((cp * X + xi) * 2 + yb) * C + cn
    kernel = np.bincount(flat, minlength=C * X * 2 * C).reshape(C, X, 2, C)
    occupancy = np.bincount(cp, minlength=C)
    return PartitionMachine(
        L=coded.L,
        inputs=coded.inputs,
        morphs=morphs,
        assign=assign,
        kernel_counts=kernel,
        occupancy=occupancy,
        n=n,
        tol=tol,
        burn_in=burn_in,
    )


def reconstruct(
    tr,
    L: int = DEFAULT_L,
    tol: float = DEFAULT_TOL,
    min_count: int = DEFAULT_MIN_COUNT,
    burn_in: int = BURN_IN,
) -> PartitionMachine:
    """Merge histories with matching one-step morphs into estimated causal states."""
    if tol < 0:
        raise ValidationError(f"tolerance must be >= 0, got {tol}")
    tr = _redact(tr)
    coded = _Coded(tr, L, burn_in)
    morphs = _morphs(coded, min_count)
    assign = _single_linkage(morphs, tol)
    return _build_partition(coded, morphs, assign, tr.n, tol, burn_in)


def history_machine(tr, L: int = DEFAULT_L, min_count: int = DEFAULT_MIN_COUNT, burn_in: int = BURN_IN) -> PartitionMachine:
    """Unmerged partition: every sufficiently observed length-L history is its own state."""
    tr = _redact(tr)
    coded = _Coded(tr, L, burn_in)
    morphs = _morphs(coded, min_count)
    return _build_partition(coded, morphs, np.arange(len(morphs)), tr.n, None, burn_in)


def partition_from_assignment(
    tr,
    assignment: Mapping | Callable,
    L: int = DEFAULT_L,
    min_count: int = DEFAULT_MIN_COUNT,
    burn_in: int = BURN_IN,
) -> PartitionMachine:
    """Partition with a caller-chosen grouping of histories (key -> label)."""
    tr = _redact(tr)
    coded = _Coded(tr, L, burn_in)
    morphs = _morphs(coded, min_count)
    get = assignment if callable(assignment) else assignment.__getitem__
    labels = [get(k) for k in morphs.keys]
    ids: dict = {}
    assign = np.array([ids.setdefault(lab, len(ids)) for lab in labels], dtype=np.int64)
    return _build_partition(coded, morphs, assign, tr.n, None, burn_in)


# -- comparison --------------------------------------------------------------


@dataclass
class ComparisonReport:
    inferred_states: int
    exact_states: int
    state_count_match: bool
    matching: dict  # inferred state -> exact state
    max_row_tv: float
    unmatched_inferred: list
    unmatched_exact: list

    def to_dict(self) -> dict:
        return {
            "inferred_states": self.inferred_states,
            "exact_states": self.exact_states,
            "state_count_match": self.state_count_match,
            "matching": [[a, b] for a, b in self.matching.items()],
            "max_row_tv": self.max_row_tv,
            "unmatched_inferred": self.unmatched_inferred,
            "unmatched_exact": self.unmatched_exact,
        }


def _output_morphs(t: Transducer) -> np.ndarray:
    """``P(y | state, x)`` as an array ``(states, inputs, outputs)``."""
    ka = t.kernel_arrays()
    S, X, _ = ka.prob.shape
    out = np.zeros((S, X, len(t.outputs)))
    idx_s, idx_x, _ = np.indices(ka.prob.shape)
    np.add.at(out, (idx_s.ravel(), idx_x.ravel(), ka.out.ravel()), ka.prob.ravel())
    return out


def compare_machines(inferred, exact: Transducer) -> ComparisonReport:
    """Match inferred states to exact ones and measure kernel disagreement.

    States are paired greedily by output overlap (sum over inputs of the
    overlap of next-output distributions); the reported distance is the
    largest total-variation distance between the rows of matched pairs,
    with successors translated through the matching.
    """
    if isinstance(inferred, PartitionMachine):
        inferred = inferred.to_transducer()
    if set(inferred.inputs) != set(exact.inputs) or set(inferred.outputs) != set(exact.outputs):
        raise SchemaError("machines have different input or output alphabets")
    # align input/output order with the exact machine
    xs = list(exact.inputs)
    ys = list(exact.outputs)
    mi = _output_morphs(inferred)[:, [inferred.input_index(x) for x in xs], :]
    mi = mi[:, :, [inferred.outputs.index(y) for y in ys]]
    me = _output_morphs(exact)
    overlap = np.minimum(mi[:, None], me[None, :]).sum(axis=(2, 3)) / len(xs)
    pairs = sorted(
        ((overlap[a, b], a, b) for a in range(inferred.n_states) for b in range(exact.n_states)),
        key=lambda r: (-r[0], r[1], r[2]),
    )
    match: dict = {}
    used = set()
    for _, a, b in pairs:
        if a in match or b in used:
            continue
        match[a] = b
        used.add(b)
    worst = 0.0
    for a, b in match.items():
        sa, sb = inferred.states[a], exact.states[b]
        for x in xs:
            diff: dict = {}
            for to, y, p in inferred.row(sa, x):
                j = inferred.state_index(to)
                key = (exact.states[match[j]], y) if j in match else ("unmatched", to, y)
                diff[key] = diff.get(key, 0.0) + p
            for to, y, p in exact.row(sb, x):
                diff[(to, y)] = diff.get((to, y), 0.0) - p
            worst = max(worst, 0.5 * sum(abs(v) for v in diff.values()))
    return ComparisonReport(
        inferred_states=inferred.n_states,
        exact_states=exact.n_states,
        state_count_match=inferred.n_states == exact.n_states,
        matching={inferred.states[a]: exact.states[b] for a, b in match.items()},
        max_row_tv=float(worst),
        unmatched_inferred=[inferred.states[a] for a in range(inferred.n_states) if a not in match],
        unmatched_exact=[exact.states[b] for b in range(exact.n_states) if b not in used],
    )


# -- erasure of a partition ----------------------------------------------------


@dataclass(frozen=True)
class PartitionErasure:
    """Erased bits of a partition, or ``bits=None`` when it is not predictive."""

    bits: float | None
    cond_next: float | None  # H(R_next | X, R_prev)
    mutual_next_input: float | None  # I(R_next : X)
    sufficient: bool
    max_member_distance: float


def erased_info_of_partition(p: PartitionMachine, tr, tol: float = DEFAULT_TOL) -> PartitionErasure:
    """``H(R_next | X, R_prev) + I(R_next : X)`` on the trace's empirical joint.

    Partitions that lump histories with different morphs (beyond ``tol``,
    or the partition's own merge tolerance if larger) are not predictive;
    they are flagged and no value is computed.
    """
    gap = p.max_member_distance()
    limit = max(tol, p.tol or 0.0)
    if gap > limit:
        return PartitionErasure(None, None, None, False, gap)
    cp, xi, _, cn = p.transition_samples(tr)
    if cp.size == 0:
        raise SampleSizeError("no transitions between assigned histories", count=0)
    joint = JointDistribution.from_samples(("R_prev", "X", "R_next"), (cp, xi, cn))
    cond = conditional_entropy(joint, "R_next", ("X", "R_prev"))
    mi = mutual_information(joint, "R_next", "X")
    return PartitionErasure(cond + mi, cond, mi, True, gap)


def require_predictive(result: PartitionErasure) -> float:
    if not result.sufficient:
        raise PreconditionError(
            f"partition is not predictive (member morph gap {result.max_member_distance:.3g})"
        )
    return result.bits
