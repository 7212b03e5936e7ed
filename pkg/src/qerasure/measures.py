"""Plug-in information measures over finite distributions, in bits.

``0 log 0`` is handled by dropping zero-probability terms. Sums of entropy
terms are compensated, so reordering the terms does not move the result by
more than a few ulps.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import SchemaError, ValidationError

PROB_ATOL = 1e-12
_FSUM_CHUNK = 1 << 16


def stable_sum(values) -> float:
    """Compensated sum of a 1-d float array.

    Exact (``math.fsum``) up to 65536 terms; beyond that, pairwise-summed
    chunks are combined with ``fsum``.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size <= _FSUM_CHUNK:
        return math.fsum(values.tolist())
    partial = [float(np.sum(values[i : i + _FSUM_CHUNK])) for i in range(0, values.size, _FSUM_CHUNK)]
    return math.fsum(partial)


def entropy_terms(p) -> np.ndarray:
    """``-p log2 p`` for the positive entries of ``p``."""
    p = np.asarray(p, dtype=np.float64).ravel()
    p = p[p > 0]
    return -p * np.log2(p)


def _check_probs(p, atol=PROB_ATOL, normalized=True) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(p)):
        raise ValidationError("probabilities must be finite")
    if np.any(p < 0):
        raise ValidationError(f"negative probability: {p.min()!r}")
    if normalized:
        total = stable_sum(p)
        if abs(total - 1.0) > atol:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
    return p


class Distribution:
    """Probability mass function over an ordered list of labels."""

    def __init__(self, labels: Sequence, probs, atol: float = PROB_ATOL):
        probs = _check_probs(probs, atol=atol)
        if len(labels) != probs.size:
            raise ValidationError(f"{len(labels)} labels for {probs.size} probabilities")
        self.labels = labels
        self.probs = probs
        self._index = None

    @classmethod
    def uniform(cls, labels: Sequence) -> "Distribution":
        return cls(labels, np.full(len(labels), 1.0 / len(labels)))

    def __len__(self):
        return self.probs.size

    def __getitem__(self, label) -> float:
        if self._index is None:
            self._index = {lab: i for i, lab in enumerate(self.labels)}
        i = self._index.get(label)
        return 0.0 if i is None else float(self.probs[i])

    def items(self):
        return zip(self.labels, self.probs.tolist())

    def as_dict(self) -> dict:
        return dict(self.items())

    def entropy(self) -> float:
        return stable_sum(entropy_terms(self.probs))

    def __repr__(self):
        body = ", ".join(f"{lab!r}: {p:.6g}" for lab, p in list(self.items())[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"Distribution({{{body}{more}}})"


def shannon_entropy(d) -> float:
    """Shannon entropy in bits of a Distribution or probability vector."""
    if isinstance(d, Distribution):
        return d.entropy()
    p = _check_probs(d)
    return stable_sum(entropy_terms(p))


def _names(vars_) -> tuple[str, ...]:
    if isinstance(vars_, str):
        return (vars_,)
    return tuple(vars_)


class JointDistribution:
    """Joint pmf over named discrete variables, stored as sparse coordinates.

    ``coords[r, v]`` is the index of row ``r``'s value for variable ``v``
    (into ``labels[v]``); ``probs[r]`` is its mass. Rows with equal
    coordinates are allowed and are pooled by marginalization.
    """

    def __init__(self, variables, coords, probs, cardinalities=None, labels=None, atol=PROB_ATOL):
        self.variables = _names(variables)
        if len(set(self.variables)) != len(self.variables):
            raise SchemaError(f"duplicate variable names in {self.variables}")
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim == 1:
            coords = coords[:, None]
        probs = _check_probs(probs, atol=atol)
        if coords.shape != (probs.size, len(self.variables)):
            raise SchemaError(f"coords shape {coords.shape} does not match {probs.size} x {len(self.variables)}")
        if cardinalities is None:
            cardinalities = tuple(int(c) + 1 for c in coords.max(axis=0)) if probs.size else (0,) * len(self.variables)
        self.cardinalities = tuple(int(c) for c in cardinalities)
        self.labels = labels
        self.coords = coords
        self.probs = probs
        self._entropy_cache: dict = {}

    @classmethod
    def from_dense(cls, table, variables, labels=None) -> "JointDistribution":
        table = np.asarray(table, dtype=np.float64)
        variables = _names(variables)
        if table.ndim != len(variables):
            raise SchemaError(f"table has {table.ndim} axes for {len(variables)} variables")
        idx = np.nonzero(table)
        coords = np.stack(idx, axis=1) if idx else np.zeros((0, 0), dtype=np.int64)
        return cls(variables, coords, table[idx], cardinalities=table.shape, labels=labels)

    @classmethod
    def from_samples(cls, variables, columns) -> "JointDistribution":
        """Empirical joint of integer-coded sample columns (one per variable)."""
        cols = np.stack([np.asarray(c, dtype=np.int64) for c in columns], axis=1)
        if cols.shape[0] == 0:
            raise ValidationError("no samples")
        if np.any(cols < 0):
            raise ValidationError("sample codes must be non-negative")
        card = tuple(int(c) + 1 for c in cols.max(axis=0))
        if math.prod(card) < (1 << 62):
            keys, counts = np.unique(np.ravel_multi_index(cols.T, card), return_counts=True)
            uniq = np.stack(np.unravel_index(keys, card), axis=1)
        else:
            uniq, counts = np.unique(cols, axis=0, return_counts=True)
        return cls(variables, uniq, counts / counts.sum(), cardinalities=card)

    def _axes(self, vars_) -> list[int]:
        axes = []
        for v in _names(vars_):
            if v not in self.variables:
                raise SchemaError(f"unknown variable {v!r}; have {self.variables}")
            if self.variables.index(v) not in axes:
                axes.append(self.variables.index(v))
        return axes

    def _group(self, axes):
        """Distinct value combinations on ``axes`` and each row's group id."""
        sub = self.coords[:, axes]
        card = [self.cardinalities[a] for a in axes]
        if math.prod(card) < (1 << 62):
            keys, inverse = np.unique(np.ravel_multi_index(sub.T, card), return_inverse=True)
            uniq = np.stack(np.unravel_index(keys, card), axis=1)
        else:
            uniq, inverse = np.unique(sub, axis=0, return_inverse=True)
        return uniq.reshape(-1, len(axes)), inverse.ravel()

    def _pooled(self, axes) -> np.ndarray:
        """Masses of the distinct value combinations on ``axes``."""
        if not axes:
            return np.array([stable_sum(self.probs)])
        _, inverse = self._group(axes)
        return np.bincount(inverse, weights=self.probs)

    def marginal(self, vars_) -> "JointDistribution":
        axes = self._axes(vars_)
        uniq, inverse = self._group(axes)
        probs = np.bincount(inverse, weights=self.probs)
        labels = None if self.labels is None else [self.labels[a] for a in axes]
        return JointDistribution(
            [self.variables[a] for a in axes],
            uniq,
            probs,
            cardinalities=[self.cardinalities[a] for a in axes],
            labels=labels,
            atol=1e-9,
        )

    def entropy(self, vars_=None) -> float:
        """Joint entropy of ``vars_`` (all variables when omitted)."""
        axes = list(range(len(self.variables))) if vars_ is None else self._axes(vars_)
        key = tuple(sorted(axes))
        if key not in self._entropy_cache:
            self._entropy_cache[key] = stable_sum(entropy_terms(self._pooled(list(key))))
        return self._entropy_cache[key]


def conditional_entropy(j: JointDistribution, target, given) -> float:
    """``H(target | given) = H(target, given) - H(given)``."""
    target, given = _names(target), _names(given)
    return j.entropy(target + given) - j.entropy(given)


def mutual_information(j: JointDistribution, a, b) -> float:
    """``I(a : b) = H(a) + H(b) - H(a, b)``."""
    a, b = _names(a), _names(b)
    return j.entropy(a) + j.entropy(b) - j.entropy(a + b)


def entropy_of_counts(counts: Iterable[int]) -> float:
    counts = np.asarray(list(counts) if not isinstance(counts, np.ndarray) else counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValidationError("no counts")
    return stable_sum(entropy_terms(counts / total))
