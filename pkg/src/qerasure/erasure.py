"""Information erased per measurement and the matching Landauer heat.

The erased information is the entropy of the previous causal state given
the input, output and new causal state. Two independent routes are
provided:

* :func:`erased_information_direct` inverts the kernel for a reached state
  and takes the entropy of the resulting predecessor distribution;
* :func:`erased_information_decomposed` builds the joint of
  ``(S_prev, X, Y, S_next)`` and evaluates
  ``H(S_next | X, S_prev) + I(S_next : X)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConsistencyError, PreconditionError, SchemaError, SizeError, ValidationError
from .measures import JointDistribution, conditional_entropy, entropy_terms, mutual_information, stable_sum
from .qubit import MAX_N, MeasurementFamily, cos2_index
from .transducer import (
    MAX_POWER_STATES,
    Transducer,
    build_exact,
    output_determinism_check,
    predecessor_distribution,
    stationary_distribution,
)

BOLTZMANN_CONSTANT = 1.380649e-23  # J/K, exact in the 2019 SI
AGREEMENT_TOL = 1e-12
DENSE_JOINT_MAX_N = 6
CROSS_CHECK_MAX_N = 8
_CHUNK = 1 << 18

JOINT_VARIABLES = ("S_prev", "X", "Y", "S_next")


def machine_joint(t: Transducer) -> JointDistribution:
    """Stationary joint of ``(S_prev, X, Y, S_next)`` under uniform inputs."""
    pi = stationary_distribution(t).probs
    ka = t.kernel_arrays()
    S, X, B = ka.prob.shape
    mass = pi[:, None, None] * ka.prob / X
    live = mass > 0
    i, k, _ = np.nonzero(live)
    coords = np.stack([i, k, ka.out[live], ka.succ[live]], axis=1)
    return JointDistribution(
        JOINT_VARIABLES,
        coords,
        mass[live],
        cardinalities=(S, X, len(t.outputs), S),
        labels=[t.states, t.inputs, t.outputs, t.states],
        atol=1e-10,
    )


def _require_determinism(t: Transducer):
    if not output_determinism_check(t):
        raise PreconditionError("machine outputs are not determined by (input, next state)")


def _family_representative_entropy(fam: MeasurementFamily) -> float:
    """Entropy of ``P(S_prev | x=0, S_next=0)`` with a uniform prior, streamed in chunks.

    Unnormalized weights are ``cos^2(pi i / m)``; with ``Z`` their sum,
    ``H = log2 Z - sum(w log2 w) / Z``.
    """
    m = fam.n_states
    zs, wlogw = [], []
    for start in range(0, m, _CHUNK):
        w = np.cos(np.arange(start, min(m, start + _CHUNK)) * (np.pi / m))
        w *= w
        zs.append(stable_sum(w))
        wlogw.append(-stable_sum(entropy_terms(w)))
    z = math.fsum(zs)
    return math.log2(z) - math.fsum(wlogw) / z


def erased_information_direct(t: Transducer, cross_check: bool | None = None) -> float:
    """Bits erased per step, from predecessor distributions.

    For a family machine one representative ``(x, reached state)`` cell
    suffices by rotational symmetry; with ``cross_check`` (default for
    ``n <= 8``) the cell-weighted average over all cells is also computed
    and must agree within 1e-12. Other machines always use the weighted
    average.
    """
    _require_determinism(t)
    fam = t.family
    if fam is None:
        return conditional_entropy(machine_joint(t), "S_prev", ("X", "Y", "S_next"))
    if t.n_states <= MAX_POWER_STATES:
        value = predecessor_distribution(t, 0, 0).entropy()
    else:
        value = _family_representative_entropy(fam)
    if cross_check is None:
        cross_check = fam.n <= CROSS_CHECK_MAX_N
    if cross_check:
        avg = conditional_entropy(machine_joint(t), "S_prev", ("X", "Y", "S_next"))
        if abs(avg - value) > AGREEMENT_TOL:
            raise ConsistencyError(f"representative cell gives {value!r}, cell average {avg!r}")
    return value


@dataclass(frozen=True)
class ErasureTerms:
    """Pieces of the erased information for one machine, in bits."""

    cond_next: float  # H(S_next | X, S_prev)
    mutual_next_input: float  # I(S_next : X)
    h_next_given_input: float  # H(S_next | X)
    h_prev_given_input: float  # H(S_prev | X)
    h_prev_given_all: float | None  # H(S_prev | X, Y, S_next); None on the symmetric path

    @property
    def total(self) -> float:
        return self.cond_next + self.mutual_next_input

    @property
    def chain_form(self) -> float:
        return self.cond_next - self.h_next_given_input + self.h_prev_given_input


def erasure_terms_joint(t: Transducer) -> ErasureTerms:
    """All terms from the full stationary joint."""
    j = machine_joint(t)
    return ErasureTerms(
        cond_next=conditional_entropy(j, "S_next", ("X", "S_prev")),
        mutual_next_input=mutual_information(j, "S_next", "X"),
        h_next_given_input=conditional_entropy(j, "S_next", "X"),
        h_prev_given_input=conditional_entropy(j, "S_prev", "X"),
        h_prev_given_all=conditional_entropy(j, "S_prev", ("X", "Y", "S_next")),
    )


def erasure_terms_symmetric(t: Transducer) -> ErasureTerms:
    """Terms for a family machine summed over the single input ``x = 0``.

    All inputs are rotations of each other, so conditioning on ``X`` equals
    conditioning on ``X = 0``; inputs are independent of the state, so
    ``H(S_prev | X) = H(S_prev)``.
    """
    fam = t.family
    if fam is None:
        raise PreconditionError("symmetric evaluation needs a family machine")
    m = fam.n_states
    pi = stationary_distribution(t).probs
    row_h, mass_plus, mass_minus = [], [], []
    for start in range(0, m, _CHUNK):
        i = np.arange(start, min(m, start + _CHUNK))
        prior = pi[start : start + i.size]
        p_plus = cos2_index(0 - i, m)
        p_minus = cos2_index(fam.n_observables - i, m)
        # entropy of row (i, x=0): two branches
        h = np.zeros(i.size)
        for p in (p_plus, p_minus):
            nz = p > 0
            h[nz] -= p[nz] * np.log2(p[nz])
        row_h.append(stable_sum(prior * h))
        mass_plus.append(stable_sum(prior * p_plus))
        mass_minus.append(stable_sum(prior * p_minus))
    h_state = stable_sum(entropy_terms(pi))
    next_given_input = stable_sum(entropy_terms([math.fsum(mass_plus), math.fsum(mass_minus)]))
    return ErasureTerms(
        cond_next=math.fsum(row_h),
        mutual_next_input=h_state - next_given_input,
        h_next_given_input=next_given_input,
        h_prev_given_input=h_state,
        h_prev_given_all=None,
    )


def erasure_terms(t: Transducer) -> ErasureTerms:
    if t.family is not None and t.family.n > DENSE_JOINT_MAX_N:
        return erasure_terms_symmetric(t)
    return erasure_terms_joint(t)


def erased_information_decomposed(t: Transducer) -> float:
    """``H(S_next | X, S_prev) + I(S_next : X)``, checked against the other forms.

    Raises ConsistencyError when the decomposed, chain-rule and (when
    available) direct conditional forms differ by more than 1e-12.
    """
    _require_determinism(t)
    terms = erasure_terms(t)
    total = terms.total
    others = [terms.chain_form]
    if terms.h_prev_given_all is not None:
        others.append(terms.h_prev_given_all)
    for v in others:
        if abs(v - total) > AGREEMENT_TOL:
            raise ConsistencyError(f"erasure forms disagree: {total!r} vs {v!r}")
    return total


# -- Landauer ----------------------------------------------------------------


def landauer_heat_bound(erased_bits: float, temperature: float) -> float:
    """Minimum heat in joules for erasing ``erased_bits`` at ``temperature`` kelvin."""
    if not math.isfinite(erased_bits) or erased_bits < 0:
        raise ValidationError(f"erased bits must be >= 0, got {erased_bits!r}")
    if not math.isfinite(temperature) or temperature < 0:
        raise ValidationError(f"temperature must be >= 0 K, got {temperature!r}")
    return erased_bits * BOLTZMANN_CONSTANT * temperature * math.log(2)


@dataclass(frozen=True)
class ErasureReport:
    n: int | None
    erased_bits: float
    temperature_K: float
    heat_bound_J: float
    third_law_caveat: bool
    erased_bits_decomposed: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [f.name for f in fields(self)]
        writer.writerow(names)
        writer.writerow(["" if getattr(self, k) is None else _csv_cell(getattr(self, k)) for k in names])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, doc: dict) -> "ErasureReport":
        if not isinstance(doc, dict):
            raise SchemaError("report document must be a mapping")
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        missing = names - set(doc) - {"erased_bits_decomposed"}
        if unknown or missing:
            raise SchemaError(f"report fields: unknown {sorted(unknown)}, missing {sorted(missing)}")
        return cls(**{name: doc.get(name) for name in names})

    @classmethod
    def from_json(cls, text: str) -> "ErasureReport":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_csv(cls, text: str) -> "ErasureReport":
        rows = list(csv.DictReader(io.StringIO(text)))
        if len(rows) != 1:
            raise SchemaError(f"expected one report row, got {len(rows)}")
        row = rows[0]
        conv = {
            "n": lambda v: int(v),
            "third_law_caveat": lambda v: v == "true",
        }
        doc = {k: (None if v == "" else conv.get(k, float)(v)) for k, v in row.items()}
        return cls.from_dict(doc)


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def erasure_report(
    n: int | None, erased_bits: float, temperature: float, erased_bits_decomposed: float | None = None
) -> ErasureReport:
    """Report with the Landauer bound; at 0 K the bound is 0 and flagged."""
    heat = landauer_heat_bound(erased_bits, temperature)
    return ErasureReport(
        n=n,
        erased_bits=erased_bits,
        temperature_K=float(temperature),
        heat_bound_J=heat,
        third_law_caveat=temperature == 0,
        erased_bits_decomposed=erased_bits_decomposed,
    )


# -- scaling sweep -----------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    n: int
    erased_bits: float
    excess_over_n: float


def erased_scaling_sweep(n_max: int, cross_check: bool = False) -> list[SweepRow]:
    """Erased bits for ``n = 1 .. n_max`` (at most 24)."""
    if n_max > MAX_N:
        raise SizeError(f"n_max={n_max} exceeds the cap of {MAX_N}")
    if n_max < 1:
        raise ValidationError(f"n_max must be >= 1, got {n_max}")
    rows = []
    for n in range(1, n_max + 1):
        bits = erased_information_direct(build_exact(n), cross_check=cross_check)
        rows.append(SweepRow(n, bits, bits - n))
    return rows
