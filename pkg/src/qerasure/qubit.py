"""Discretized real qubit states and observables on the x-z great circle.

States and observables are identified by integers only; angles are
derived on demand.

* ``MeasurementFamily(n)`` has ``2**n`` observables ``k`` with Bloch angle
  ``pi*k/2**n`` and ``2**(n+1)`` pure states ``j`` with half-angle
  ``pi*j/2**(n+1)``, i.e. ``cos(theta)|0> + sin(theta)|1>``.
* Observable ``k`` has ``+1`` eigenstate ``j = k`` and ``-1`` eigenstate
  ``j = k + 2**n``.

For ``n = 1`` the observables are ``sigma_z`` (k=0) and ``sigma_x`` (k=1) and
the states are ``|0>`` (0), ``|+>`` (1), ``|1>`` (2) and ``|->`` (3).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import RangeError, SizeError, ValidationError

MAX_N = 24
OUTCOMES = (1, -1)
_TABLE_MAX = 1 << 16


def _cos2_direct(r, m):
    """cos^2(pi r/m) for integer array ``r`` already reduced into ``[0, m)``."""
    r = np.minimum(r, m - r)  # cos^2 is even and m-periodic
    half = m // 2
    low = r * 4 <= m
    # cos^2(pi r/m) = sin^2(pi (m/2 - r)/m); use sin near the zero
    out = np.where(
        low,
        np.cos(np.pi * r / m) ** 2,
        np.sin(np.pi * (half - r) / m) ** 2,
    )
    out = np.where(r == 0, 1.0, out)
    return np.where(r == half, 0.0, out)


@lru_cache(maxsize=32)
def _cos2_table(m: int) -> np.ndarray:
    table = _cos2_direct(np.arange(m), m)
    table.setflags(write=False)
    return table


def cos2_index(d, m):
    """``cos(pi*d/m)**2`` for integer ``d`` (scalar or array) and even ``m``.

    The argument is folded into ``[0, m/4]`` before evaluating so that
    symmetric indices give bit-identical values, ``d = 0 mod m`` gives
    exactly 1 and ``d = m/2 mod m`` gives exactly 0.
    """
    r = np.mod(np.asarray(d, dtype=np.int64), m)
    if r.ndim == 0:
        return float(_cos2_direct(r, m))
    if m <= _TABLE_MAX and r.size > m:
        return _cos2_table(m)[r]
    return _cos2_direct(r, m)


@dataclass(frozen=True)
class MeasurementFamily:
    """Discretization level ``n`` of observables and states."""

    n: int

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValidationError(f"n must be an integer, got {self.n!r}")
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if self.n > MAX_N:
            raise SizeError(f"n={self.n} exceeds the cap of {MAX_N}")

    @property
    def n_observables(self) -> int:
        return 1 << self.n

    @property
    def n_states(self) -> int:
        return 1 << (self.n + 1)

    def check_state(self, j: int) -> int:
        if not 0 <= j < self.n_states:
            raise RangeError(f"state index {j} outside [0, {self.n_states}) for n={self.n}")
        return int(j)

    def check_observable(self, k: int) -> int:
        if not 0 <= k < self.n_observables:
            raise RangeError(
                f"observable index {k} outside [0, {self.n_observables}) for n={self.n}"
            )
        return int(k)

    def eigenstate(self, k: int, y: int) -> int:
        """State index of the ``y`` eigenstate of observable ``k``."""
        k = self.check_observable(k)
        check_outcome(y)
        return k if y == 1 else k + self.n_observables

    def eigen_outcome(self, k: int, j: int) -> int | None:
        """Outcome ``y`` such that ``j`` is the ``y`` eigenstate of ``k``, else None."""
        if j == k:
            return 1
        if j == k + self.n_observables:
            return -1
        return None

    def state_vector(self, j: int) -> np.ndarray:
        """Real amplitudes of state ``j``. For display and cross-checks only."""
        theta = np.pi * self.check_state(j) / self.n_states
        return np.array([np.cos(theta), np.sin(theta)])

    def observable_matrix(self, k: int) -> np.ndarray:
        phi = np.pi * self.check_observable(k) / self.n_observables
        return np.array([[np.cos(phi), np.sin(phi)], [np.sin(phi), -np.cos(phi)]])


def check_outcome(y) -> int:
    if y not in OUTCOMES:
        raise RangeError(f"outcome must be +1 or -1, got {y!r}")
    return int(y)


def _family(family) -> MeasurementFamily:
    if isinstance(family, MeasurementFamily):
        return family
    return MeasurementFamily(family)


def outcome_probability(family, state: int, obs: int, y: int) -> float:
    """Born probability of outcome ``y`` when measuring ``obs`` on ``state``."""
    fam = _family(family)
    j = fam.check_state(state)
    k = fam.check_observable(obs)
    y = check_outcome(y)
    m = fam.n_states
    if y == 1:
        return cos2_index(j - k, m)
    return cos2_index(j - k - fam.n_observables, m)


def collapse(family, obs: int, y: int) -> int:
    """Post-measurement state; independent of the pre-measurement state."""
    return _family(family).eigenstate(obs, y)


def closure_check(family) -> bool:
    """True iff every (observable, outcome) collapse lands inside the state set.

    Index membership is checked for every pair; for ``n <= 12`` the landing
    state is additionally checked to be the eigenvector of the observable
    matrix with eigenvalue ``y``.
    """
    fam = _family(family)
    k = np.arange(fam.n_observables)
    for y in OUTCOMES:
        if fam.n <= 12:
            j = np.array([collapse(fam, int(kk), y) for kk in k])
        else:
            j = np.where(y == 1, k, k + fam.n_observables)
        if np.any((j < 0) | (j >= fam.n_states)):
            return False
        if fam.n <= 12:
            phi = np.pi * k / fam.n_observables
            theta = np.pi * j / fam.n_states
            v0, v1 = np.cos(theta), np.sin(theta)
            w0 = np.cos(phi) * v0 + np.sin(phi) * v1
            w1 = np.sin(phi) * v0 - np.cos(phi) * v1
            if not (np.allclose(w0, y * v0, atol=1e-12) and np.allclose(w1, y * v1, atol=1e-12)):
                return False
    return True
