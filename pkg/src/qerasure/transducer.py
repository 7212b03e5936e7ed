"""Input-output machines and the exact epsilon-transducer of the qubit process.

A :class:`Transducer` holds states, an input alphabet, an output alphabet and
a conditional kernel ``P(next_state, y | state, x)`` stored as short
successor lists per ``(state, x)`` row. :func:`build_exact` returns the
machine for a :class:`~qerasure.qubit.MeasurementFamily`, whose rows are
evaluated from the Born rule on demand.

Inputs are always drawn uniformly at random.
"""

from __future__ import annotations

import json
from functools import cached_property
from typing import Mapping, NamedTuple, Sequence

import numba
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConvergenceError,
    PreconditionError,
    RangeError,
    SchemaError,
    SizeError,
    UnreachableTargetError,
    ValidationError,
)
from .measures import Distribution, stable_sum
from .qubit import OUTCOMES, MeasurementFamily, cos2_index

ROW_ATOL = 1e-12
STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 10**6
# dense per-row arrays are cached up to this level; above it rows are lazy
LAZY_ABOVE_N = 6
# largest machine (states * inputs * branches) materialized as arrays
MAX_KERNEL_ENTRIES = 1 << 23
# largest state count for which the averaged transition matrix is built
MAX_POWER_STATES = 1 << 11
_POLISH_STEPS = 2000


class Transition(NamedTuple):
    to: object
    y: int
    p: float


class KernelArrays(NamedTuple):
    """Kernel as padded arrays of shape ``(states, inputs, branches)``.

    ``succ`` holds successor state indices, ``out`` output indices and
    ``prob`` probabilities; padding entries have ``prob == 0``.
    """

    succ: np.ndarray
    out: np.ndarray
    prob: np.ndarray


class Transducer:
    """Finite machine ``(inputs, outputs, states, kernel)``.

    ``transitions`` maps ``(state, x)`` to an iterable of ``(to, y, p)``.
    Every ``(state, x)`` pair must have a row summing to 1.
    """

    n: int | None = None

    def __init__(
        self,
        states: Sequence,
        inputs: Sequence,
        transitions: Mapping,
        outputs: Sequence = OUTCOMES,
        n: int | None = None,
        atol: float = ROW_ATOL,
    ):
        self.states = tuple(states)
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)
        self.n = n
        for name, seq in (("states", self.states), ("inputs", self.inputs), ("outputs", self.outputs)):
            if not seq:
                raise SchemaError(f"empty {name}")
            if len(set(seq)) != len(seq):
                raise SchemaError(f"duplicate entries in {name}")
        state_set, out_set = set(self.states), set(self.outputs)
        rows = {}
        for s in self.states:
            for x in self.inputs:
                if (s, x) not in transitions:
                    raise SchemaError(f"kernel has no row for state {s!r}, input {x!r}")
                merged: dict[tuple, float] = {}
                for to, y, p in transitions[(s, x)]:
                    if to not in state_set:
                        raise SchemaError(f"transition to unknown state {to!r}")
                    if y not in out_set:
                        raise SchemaError(f"transition emits unknown output {y!r}")
                    if p < 0:
                        raise ValidationError(f"negative transition probability {p!r}")
                    if p > 0:
                        merged[(to, y)] = merged.get((to, y), 0.0) + float(p)
                total = stable_sum(list(merged.values()))
                if abs(total - 1.0) > atol:
                    raise ValidationError(f"row ({s!r}, {x!r}) sums to {total!r}")
                rows[(s, x)] = tuple(Transition(to, y, p) for (to, y), p in merged.items())
        extra = set(transitions) - set(rows)
        if extra:
            raise SchemaError(f"kernel rows for unknown (state, input) pairs: {sorted(map(repr, extra))[:5]}")
        self._rows = rows

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def family(self) -> MeasurementFamily | None:
        return None

    @cached_property
    def _state_pos(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def _input_pos(self) -> dict:
        return {x: i for i, x in enumerate(self.inputs)}

    def state_index(self, s) -> int:
        try:
            return self._state_pos[s]
        except KeyError:
            raise RangeError(f"unknown state {s!r}") from None

    def input_index(self, x) -> int:
        try:
            return self._input_pos[x]
        except KeyError:
            raise RangeError(f"unknown input {x!r}") from None

    def row(self, s, x) -> tuple[Transition, ...]:
        self.state_index(s)
        self.input_index(x)
        return self._rows[(s, x)]

    def kernel_size(self) -> int:
        return sum(len(r) for r in self._rows.values())

    def kernel_arrays(self) -> KernelArrays:
        return self._kernel_arrays

    @cached_property
    def _kernel_arrays(self) -> KernelArrays:
        S, X = self.n_states, len(self.inputs)
        B = max(1, max(len(r) for r in self._rows.values()))
        succ = np.zeros((S, X, B), dtype=np.int64)
        out = np.zeros((S, X, B), dtype=np.int64)
        prob = np.zeros((S, X, B))
        out_pos = {y: i for i, y in enumerate(self.outputs)}
        for (s, x), r in self._rows.items():
            i, k = self._state_pos[s], self._input_pos[x]
            for b, (to, y, p) in enumerate(r):
                succ[i, k, b] = self._state_pos[to]
                out[i, k, b] = out_pos[y]
                prob[i, k, b] = p
        return KernelArrays(succ, out, prob)

    def inbound(self, x, target) -> np.ndarray:
        """``P(S_next = target | S_prev = s, X = x)`` for every state ``s``."""
        k = self.input_index(x)
        t = self.state_index(target)
        ka = self.kernel_arrays()
        return np.sum(np.where(ka.succ[:, k, :] == t, ka.prob[:, k, :], 0.0), axis=1)

    def averaged_matrix(self) -> np.ndarray:
        """Input-averaged state transition matrix ``M[i, j]``."""
        if self.n_states > MAX_POWER_STATES:
            raise SizeError(f"{self.n_states} states is too many for a dense transition matrix")
        ka = self.kernel_arrays()
        S, X, _ = ka.prob.shape
        m = np.zeros((S, S))
        rows = np.broadcast_to(np.arange(S)[:, None, None], ka.succ.shape)
        np.add.at(m, (rows.ravel(), ka.succ.ravel()), ka.prob.ravel() / X)
        return m

    def is_strongly_connected(self) -> bool:
        ka = self.kernel_arrays()
        S = self.n_states
        rows = np.broadcast_to(np.arange(S)[:, None, None], ka.succ.shape)
        mask = ka.prob.ravel() > 0
        graph = csr_matrix(
            (np.ones(mask.sum()), (rows.ravel()[mask], ka.succ.ravel()[mask])), shape=(S, S)
        )
        return _strongly_connected(graph)

    @cached_property
    def _stationary(self) -> Distribution:
        return _power_iteration(self)

    def __repr__(self):
        return (
            f"{type(self).__name__}(states={self.n_states}, inputs={len(self.inputs)}, "
            f"outputs={self.outputs}, n={self.n})"
        )


class FamilyTransducer(Transducer):
    """Exact machine of a measurement family; kernel rows from the Born rule.

    States are the integer state indices ``0 .. 2**(n+1)-1`` and inputs the
    observable indices ``0 .. 2**n-1``. Row ``(i, k)`` has the two
    successors ``k`` (outcome +1) and ``k + 2**n`` (outcome -1), with
    weights ``cos^2(pi (j - i) / 2**(n+1))``.
    """

    def __init__(self, family: MeasurementFamily):
        self._family = family
        self.n = family.n
        self.states = range(family.n_states)
        self.inputs = range(family.n_observables)
        self.outputs = OUTCOMES

    @property
    def family(self) -> MeasurementFamily:
        return self._family

    @property
    def n_states(self) -> int:
        return self._family.n_states

    def state_index(self, s) -> int:
        return self._family.check_state(s)

    def input_index(self, x) -> int:
        return self._family.check_observable(x)

    def row(self, s, x) -> tuple[Transition, ...]:
        fam = self._family
        i, k = fam.check_state(s), fam.check_observable(x)
        m = fam.n_states
        out = []
        for y in OUTCOMES:
            j = fam.eigenstate(k, y)
            p = cos2_index(j - i, m)
            if p > 0:
                out.append(Transition(j, y, p))
        return tuple(out)

    def kernel_size(self) -> int:
        return self.n_states * len(self.inputs) * 2

    def kernel_arrays(self) -> KernelArrays:
        if self.n <= LAZY_ABOVE_N:
            return self._kernel_arrays
        return self._compute_kernel_arrays()

    @cached_property
    def _kernel_arrays(self) -> KernelArrays:
        return self._compute_kernel_arrays()

    def _compute_kernel_arrays(self) -> KernelArrays:
        if self.kernel_size() > MAX_KERNEL_ENTRIES:
            raise SizeError(f"kernel of n={self.n} has {self.kernel_size()} entries; too large to materialize")
        fam = self._family
        S, X = fam.n_states, fam.n_observables
        i = np.arange(S)[:, None]
        k = np.arange(X)[None, :]
        succ = np.stack(np.broadcast_arrays(k, k + X), axis=-1).astype(np.int64)
        succ = np.broadcast_to(succ, (S, X, 2)).copy()
        out = np.broadcast_to(np.array([0, 1]), (S, X, 2)).copy()
        prob = cos2_index(succ - i[..., None], S)
        return KernelArrays(succ, out, prob)

    def inbound(self, x, target) -> np.ndarray:
        fam = self._family
        k, t = fam.check_observable(x), fam.check_state(target)
        if fam.eigen_outcome(k, t) is None:
            return np.zeros(fam.n_states)
        return cos2_index(t - np.arange(fam.n_states), fam.n_states)

    def averaged_matrix(self) -> np.ndarray:
        return self._averaged_matrix

    @cached_property
    def _averaged_matrix(self) -> np.ndarray:
        if self.n_states > MAX_POWER_STATES:
            raise SizeError(f"{self.n_states} states is too many for a dense transition matrix")
        # every state is an eigenstate of exactly one observable
        S = self.n_states
        i = np.arange(S)
        return cos2_index(i[None, :] - i[:, None], S) / self.family.n_observables

    def is_strongly_connected(self) -> bool:
        if self.n_states <= MAX_POWER_STATES:
            return _strongly_connected(csr_matrix(self.averaged_matrix() > 0))
        # each state reaches every non-orthogonal state in one step
        return True

    @cached_property
    def _stationary(self) -> Distribution:
        if self.n_states <= MAX_POWER_STATES:
            return _power_iteration(self)
        return uniform_stationary(self)


_CLOSURE_MAX_STATES = 64


def _strongly_connected(graph) -> bool:
    if graph.shape[0] <= _CLOSURE_MAX_STATES:
        # transitive closure by boolean squaring; cheaper than csgraph for tiny graphs
        reach = graph.toarray().astype(np.int64) | np.eye(graph.shape[0], dtype=np.int64)
        for _ in range(max(1, int(graph.shape[0]).bit_length())):
            reach = (reach @ reach > 0).astype(np.int64)
        return bool(reach.all())
    count, _ = connected_components(graph, directed=True, connection="strong")
    return count == 1


def uniform_stationary(t: Transducer) -> Distribution:
    return Distribution(t.states, np.full(t.n_states, 1.0 / t.n_states))


def build_exact(family) -> FamilyTransducer:
    """Exact epsilon-transducer of the measurement family at level ``n``."""
    if not isinstance(family, MeasurementFamily):
        family = MeasurementFamily(family)
    return FamilyTransducer(family)


@numba.njit(cache=True)
def _power_loop(mt, v, tol, max_iter, polish):
    """Iterate ``v <- mt @ v`` until the TV step drops below ``tol``.

    The step size bounds the error only up to the contraction factor, so
    after reaching ``tol`` keep stepping while the step still shrinks, which
    takes the result to rounding level. Returns ``(v, 0)`` or ``(v, 1)`` when
    ``max_iter`` is exhausted.
    """
    delta = np.inf
    converged = False
    for _ in range(max_iter):
        nxt = mt @ v
        nxt /= nxt.sum()
        delta = 0.5 * np.abs(nxt - v).sum()
        v = nxt
        if delta < tol:
            converged = True
            break
    if not converged:
        return v, 1
    for _ in range(polish):
        nxt = mt @ v
        nxt /= nxt.sum()
        step = 0.5 * np.abs(nxt - v).sum()
        v = nxt
        if step >= delta or step == 0.0:
            break
        delta = step
    return v, 0


def _power_iteration(t: Transducer, tol=STATIONARY_TOL, max_iter=STATIONARY_MAX_ITER) -> Distribution:
    if not t.is_strongly_connected():
        raise PreconditionError("machine is not strongly connected under uniform inputs")
    m = t.averaged_matrix()
    # a self-loop makes an irreducible chain aperiodic; otherwise iterate the
    # lazy chain (I + M)/2, which has the same fixed point
    lazy = m if np.any(np.diag(m) > 0) else 0.5 * (m + np.eye(m.shape[0]))
    v = np.zeros(m.shape[0])
    v[0] = 1.0
    v, status = _power_loop(np.ascontiguousarray(lazy.T), v, tol, max_iter, _POLISH_STEPS)
    if status != 0:
        raise ConvergenceError(f"power iteration did not reach tolerance {tol} in {max_iter} steps")
    return Distribution(t.states, v, atol=1e-10)


def stationary_distribution(t: Transducer, method: str = "auto") -> Distribution:
    """Stationary state distribution under uniformly random inputs.

    ``method="power"`` always runs power iteration on the averaged matrix;
    ``"auto"`` does the same except for family machines too large for a
    dense matrix, where the known uniform answer is returned.
    """
    if method == "power":
        return _power_iteration(t)
    if method != "auto":
        raise ValidationError(f"unknown method {method!r}")
    return t._stationary


def statistical_complexity(t: Transducer) -> float:
    """Entropy in bits of the stationary state distribution."""
    return stationary_distribution(t).entropy()


def predecessor_distribution(t: Transducer, x, target, stationary: Distribution | None = None) -> Distribution:
    """``P(S_prev | X = x, S_next = target)`` by Bayes inversion of the kernel."""
    prior = (stationary or stationary_distribution(t)).probs
    joint = prior * t.inbound(x, target)
    total = stable_sum(joint)
    if total <= 0:
        raise UnreachableTargetError(f"state {target!r} is unreachable under input {x!r}")
    return Distribution(t.states, joint / total)


def output_determinism_check(t: Transducer) -> bool:
    """True iff every (input, reached state) pair fixes the output."""
    if t.kernel_size() > MAX_KERNEL_ENTRIES and t.family is not None:
        # family rows are generated from a per-input outcome map that does
        # not depend on the source state; check that map instead
        fam = t.family
        k = np.arange(fam.n_observables)
        plus, minus = k, k + fam.n_observables
        return bool(np.all(plus != minus) and np.all(minus < fam.n_states))
    ka = t.kernel_arrays()
    S, X, _ = ka.prob.shape
    live = ka.prob > 0
    xs = np.broadcast_to(np.arange(X)[None, :, None], ka.succ.shape)
    keys = xs[live] * S + ka.succ[live]
    outs = ka.out[live].astype(np.float64)
    # a (input, state) key is deterministic iff its outputs have zero spread
    count = np.bincount(keys, minlength=S * X)
    total = np.bincount(keys, weights=outs, minlength=S * X)
    square = np.bincount(keys, weights=outs * outs, minlength=S * X)
    return bool(np.all(count * square == total * total))


# -- serialization -----------------------------------------------------------


def transducer_to_dict(t: Transducer) -> dict:
    """Document form ``{n, states, inputs, outputs, transitions}``.

    Probabilities are written with ``repr``, which round-trips doubles
    exactly.
    """
    if t.kernel_size() > MAX_KERNEL_ENTRIES:
        raise SizeError(f"machine has {t.kernel_size()} transitions; too many to serialize")
    transitions = []
    for s in t.states:
        for x in t.inputs:
            for to, y, p in t.row(s, x):
                transitions.append({"from": s, "input": x, "output": y, "to": to, "prob": float(p)})
    return {
        "n": t.n,
        "states": list(t.states),
        "inputs": list(t.inputs),
        "outputs": list(t.outputs),
        "transitions": transitions,
    }


def transducer_from_dict(doc: dict) -> Transducer:
    try:
        states, transitions = doc["states"], doc["transitions"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"machine document missing field: {exc}") from None
    inputs = doc.get("inputs")
    rows: dict = {}
    try:
        if inputs is None:
            inputs = sorted({tr["input"] for tr in transitions})
        for tr in transitions:
            rows.setdefault((tr["from"], tr["input"]), []).append((tr["to"], tr["output"], float(tr["prob"])))
    except KeyError as exc:
        raise SchemaError(f"transition missing field {exc}") from None
    return Transducer(states, inputs, rows, outputs=doc.get("outputs", OUTCOMES), n=doc.get("n"))


def dumps_transducer(t: Transducer) -> str:
    return json.dumps(transducer_to_dict(t), indent=1)


def loads_transducer(text: str) -> Transducer:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a machine document: {exc}") from None
    return transducer_from_dict(doc)
