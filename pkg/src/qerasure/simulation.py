"""Monte Carlo traces of the sequential measurement process.

Random numbers come from numpy's counter-based Philox generator keyed by
``SeedSequence(seed)``. For a config with ``steps = N`` the generator first
draws the ``N`` input indices (``Generator.integers(0, len(inputs), N)``),
then ``N`` uniforms (``Generator.random(N)``); step ``t`` yields ``y = +1``
iff ``u[t] < P(+1 | s[t-1], x[t])``. Fixing this order makes traces
reproducible bit for bit.

Empirical estimators drop the first ``BURN_IN`` steps, since the initial
state is fixed rather than drawn from the stationary distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from ._version import __version__
from .errors import SampleSizeError, SchemaError, ValidationError
from .measures import Distribution, JointDistribution, conditional_entropy, stable_sum
from .qubit import OUTCOMES, MeasurementFamily, cos2_index

BURN_IN = 1000
MIN_CELL_SAMPLES = 100


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    steps: int
    seed: int = 0
    initial_state: int = 0
    inputs: Sequence[int] | None = None  # restricted input set; all observables when None

    def __post_init__(self):
        fam = MeasurementFamily(self.n)
        if isinstance(self.steps, bool) or int(self.steps) != self.steps or self.steps < 1:
            raise ValidationError(f"steps must be a positive integer, got {self.steps!r}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        fam.check_state(self.initial_state)
        if self.inputs is not None:
            if not self.inputs:
                raise ValidationError("input set is empty")
            for k in self.inputs:
                fam.check_observable(k)

    @property
    def family(self) -> MeasurementFamily:
        return MeasurementFamily(self.n)


@dataclass(frozen=True, eq=False)
class RedactedTrace:
    """Inputs and outcomes only; what an inference procedure may see."""

    n: int | None
    x: np.ndarray
    y: np.ndarray
    seed: int | None = None

    def __len__(self):
        return self.x.size

    def records(self):
        for t, (x, y) in enumerate(zip(self.x.tolist(), self.y.tolist())):
            yield t, x, y


@dataclass(frozen=True, eq=False)
class Trace:
    """Full trace including the post-measurement state index ``s``."""

    n: int
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    seed: int | None = None
    initial_state: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.x.size

    def records(self):
        for t, (x, y, s) in enumerate(zip(self.x.tolist(), self.y.tolist(), self.s.tolist())):
            yield t, x, y, s

    def redacted(self) -> RedactedTrace:
        return RedactedTrace(self.n, self.x, self.y, self.seed)

    def is_consistent(self) -> bool:
        """Every recorded state is the collapse of its (input, outcome)."""
        half = 1 << self.n
        expected = np.where(self.y == 1, self.x, self.x + half)
        return bool(np.array_equal(expected, self.s))

    def previous_states(self) -> np.ndarray:
        return np.concatenate(([self.initial_state], self.s[:-1]))


@numba.njit(cache=True)
def _run(x, u, table, s0, half):
    steps = x.size
    m = table.size
    s = np.empty(steps, dtype=np.int64)
    y = np.empty(steps, dtype=np.int8)
    cur = s0
    for t in range(steps):
        k = x[t]
        if u[t] < table[(cur - k) % m]:
            y[t] = 1
            cur = k
        else:
            y[t] = -1
            cur = k + half
        s[t] = cur
    return y, s


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_seeds(seed: int, count: int) -> list[int]:
    """Independent child seeds for repeated trials."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def simulate(cfg: SimulationConfig) -> Trace:
    fam = cfg.family
    rng = generator(cfg.seed)
    inputs = np.arange(fam.n_observables) if cfg.inputs is None else np.asarray(cfg.inputs, dtype=np.int64)
    x = inputs[rng.integers(0, inputs.size, cfg.steps)]
    u = rng.random(cfg.steps)
    table = cos2_index(np.arange(fam.n_states), fam.n_states)
    y, s = _run(x, u, table, cfg.initial_state, fam.n_observables)
    return Trace(fam.n, x, y, s, seed=cfg.seed, initial_state=cfg.initial_state)


# -- summaries ---------------------------------------------------------------


def flip_fraction(tr: Trace, burn_in: int = BURN_IN) -> float:
    """Fraction of steps after burn-in at which the state changed."""
    prev = tr.previous_states()[burn_in:]
    cur = tr.s[burn_in:]
    if cur.size == 0:
        raise SampleSizeError("trace shorter than burn-in", count=0)
    return float(np.mean(prev != cur))


def state_occupancy(tr: Trace, burn_in: int = BURN_IN) -> np.ndarray:
    s = tr.s[burn_in:]
    if s.size == 0:
        raise SampleSizeError("trace shorter than burn-in", count=0)
    return np.bincount(s, minlength=1 << (tr.n + 1)) / s.size


def input_counts(tr, burn_in: int = BURN_IN) -> np.ndarray:
    return np.bincount(tr.x[burn_in:], minlength=1 << tr.n)


# -- empirical erasure -------------------------------------------------------


def _transitions(tr: Trace, burn_in: int):
    start = max(burn_in, 1)
    return tr.s[start - 1 : -1], tr.x[start:], tr.s[start:]


def empirical_predecessor_distribution(
    tr: Trace, x: int, target: int, burn_in: int = BURN_IN, min_samples: int = MIN_CELL_SAMPLES
) -> Distribution:
    """Frequencies of the previous state over steps with input ``x`` landing in ``target``."""
    fam = MeasurementFamily(tr.n)
    fam.check_observable(x)
    fam.check_state(target)
    prev, xs, nxt = _transitions(tr, burn_in)
    hit = prev[(xs == x) & (nxt == target)]
    if hit.size < min_samples:
        raise SampleSizeError(
            f"{hit.size} qualifying transitions for input {x}, state {target}; need {min_samples}",
            count=int(hit.size),
            deficient=[(x, target)],
        )
    counts = np.bincount(hit, minlength=fam.n_states)
    return Distribution(range(fam.n_states), counts / hit.size)


@dataclass(frozen=True)
class ErasureEstimate:
    """Plug-in erased information with a bias bound and standard error, in bits.

    The plug-in entropy is biased low by at most ``bias_bound``;
    ``bracket(z)`` widens ``[estimate, estimate + bias_bound]`` by ``z``
    standard errors on each side.
    """

    estimate: float
    bias_bound: float
    std_error: float
    samples: int

    def bracket(self, z: float = 3.0) -> tuple[float, float]:
        return (self.estimate - z * self.std_error, self.estimate + self.bias_bound + z * self.std_error)


def _cells(tr: Trace, burn_in: int, min_samples: int):
    prev, xs, nxt = _transitions(tr, burn_in)
    if xs.size == 0:
        raise SampleSizeError("no transitions after burn-in", count=0)
    m = 1 << (tr.n + 1)
    cell = xs * m + nxt
    ids, inverse, counts = np.unique(cell, return_inverse=True, return_counts=True)
    low = counts < min_samples
    if np.any(low):
        bad = [(int(c // m), int(c % m)) for c in ids[low]]
        raise SampleSizeError(
            f"{low.sum()} (input, state) cells have fewer than {min_samples} samples",
            count=int(counts.min()),
            deficient=bad,
        )
    return prev, xs, nxt, inverse.ravel(), counts


def empirical_erased_information(tr: Trace, burn_in: int = BURN_IN, min_samples: int = MIN_CELL_SAMPLES) -> float:
    """Plug-in ``H(S_prev | X, S_next)`` weighted over observed cells."""
    prev, xs, nxt, _, _ = _cells(tr, burn_in, min_samples)
    joint = JointDistribution.from_samples(("S_prev", "X", "S_next"), (prev, xs, nxt))
    return conditional_entropy(joint, "S_prev", ("X", "S_next"))


def erased_information_estimate(
    tr: Trace, burn_in: int = BURN_IN, min_samples: int = MIN_CELL_SAMPLES
) -> ErasureEstimate:
    """Estimate plus per-cell bias bound ``log2(1 + (K-1)/N)`` and delta-method error."""
    prev, xs, nxt, cell, counts = _cells(tr, burn_in, min_samples)
    total = counts.sum()
    m = 1 << (tr.n + 1)
    pair = cell * m + prev
    uniq, pair_counts = np.unique(pair, return_counts=True)
    owner = uniq // m
    p = pair_counts / counts[owner]
    logp = np.log2(p)
    weights = counts / total
    h_cell = np.bincount(owner, weights=-p * logp, minlength=counts.size)
    second = np.bincount(owner, weights=p * logp * logp, minlength=counts.size)
    support = np.bincount(owner, minlength=counts.size)
    var_cell = np.maximum(second - h_cell**2, 0.0) / counts
    bias = np.log2(1.0 + (support - 1) / counts)
    return ErasureEstimate(
        estimate=stable_sum(weights * h_cell),
        bias_bound=stable_sum(weights * bias),
        std_error=math.sqrt(stable_sum(weights**2 * var_cell)),
        samples=int(total),
    )


# -- trace files -------------------------------------------------------------
#
# Comment lines ``# key=value`` (version, n, seed, initial_state, redacted),
# then a header row ``t,x,y,s`` (``t,x,y`` when redacted) and one record
# per line. All fields are plain decimal integers; y is written "+1"/"-1".

TRACE_MAGIC = "# qerasure trace"


def write_trace(path, tr, redact: bool = False) -> None:
    redact = redact or isinstance(tr, RedactedTrace)
    meta = {"version": __version__}
    if tr.n is not None:
        meta["n"] = tr.n
    if tr.seed is not None:
        meta["seed"] = tr.seed
    if not redact:
        meta["initial_state"] = tr.initial_state
    meta["redacted"] = "true" if redact else "false"
    t = np.arange(len(tr))
    cols = [t, tr.x, tr.y] if redact else [t, tr.x, tr.y, tr.s]
    fmt = ["%d", "%d", "%+d"] + ([] if redact else ["%d"])
    with open(path, "w", newline="\n") as fh:
        fh.write(TRACE_MAGIC + "\n")
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        fh.write("t,x,y" + ("" if redact else ",s") + "\n")
        np.savetxt(fh, np.column_stack(cols), fmt=fmt, delimiter=",")


def read_trace(path, redact: bool = False):
    """Load a trace file; returns a RedactedTrace when the file (or caller) has no states."""
    meta = {}
    with open(path) as fh:
        line = fh.readline()
        while line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            line = fh.readline()
        header = line.strip().split(",")
        if header not in (["t", "x", "y"], ["t", "x", "y", "s"]):
            raise SchemaError(f"unexpected trace header {line.strip()!r}")
        try:
            data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise SchemaError(f"malformed trace record: {exc}") from None
    if data.size == 0:
        data = np.zeros((0, len(header)), dtype=np.int64)
    if data.shape[1] != len(header):
        raise SchemaError(f"records have {data.shape[1]} fields, header has {len(header)}")
    if not np.array_equal(data[:, 0], np.arange(data.shape[0])):
        raise SchemaError("step column t must count 0, 1, 2, ...")
    try:
        n = int(meta["n"]) if "n" in meta else None
        seed = int(meta["seed"]) if "seed" in meta else None
        initial = int(meta.get("initial_state", 0))
    except ValueError as exc:
        raise SchemaError(f"bad trace metadata: {exc}") from None
    x = data[:, 1].copy()
    if not np.all(np.isin(data[:, 2], OUTCOMES)):
        raise SchemaError("outcome column y must hold only +1 and -1")
    y = data[:, 2].astype(np.int8)
    if x.size and (x.min() < 0 or (n is not None and x.max() >= 1 << n)):
        raise SchemaError("input column x holds an observable index outside the family")
    if len(header) == 3 or redact:
        return RedactedTrace(n, x, y, seed)
    if n is None:
        raise SchemaError("a trace with states must declare n")
    return Trace(n, x, y, data[:, 3].copy(), seed=seed, initial_state=initial, meta=meta)
