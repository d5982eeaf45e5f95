"""Finite discrete probability calculus.

Two containers live here:

* :class:`JointDistribution` -- a bipartite table ``p(a, b)`` with cached
  marginals and a support mask. Everything in the correlation measures is
  built on top of it.
* :class:`TableDistribution` -- a dense table over several named finite
  variables, plus optional *derived* variables given as integer labels on the
  cells of the table. Entropies and (conditional) mutual informations of any
  mix of axis and derived variables are available.

Entropies use the natural logarithm throughout. Use :func:`nats_to_bits` for
display.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SUPPORT_EPSILON = 1e-12
NORMALIZATION_TOL = 1e-12
TABLE_NORMALIZATION_TOL = 1e-10
MI_CLAMP_TOL = 1e-12
MAX_TABLE_ENTRIES = 10_000_000

_LN2 = math.log(2.0)


class DistributionError(ValueError):
    """Raised for malformed probability tables."""


class TableTooLarge(DistributionError):
    pass


def nats_to_bits(x):
    return x / _LN2


def _entropy_of_weights(w: np.ndarray) -> float:
    w = w[w > 0]
    if w.size == 0:
        return 0.0
    return float(-np.sum(w * np.log(w)))


# ---------------------------------------------------------------------------
# Bipartite distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """A probability table ``probs[a, b]`` on a finite product alphabet.

    Parameters
    ----------
    probs : array_like, shape (a_card, b_card)
        Non-negative entries summing to one within ``1e-12``.

    Notes
    -----
    Instances are immutable; ``probs`` is stored as a read-only copy.
    Real functions on the support are plain arrays of the same shape as
    ``probs``; entries off the support are ignored by every operator.
    """

    probs: np.ndarray
    p_a: np.ndarray = field(init=False, repr=False)
    p_b: np.ndarray = field(init=False, repr=False)
    support: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise DistributionError(f"expected a non-empty 2-d table, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DistributionError("table contains non-finite entries")
        if p.min() < 0:
            idx = np.unravel_index(np.argmin(p), p.shape)
            if p[idx] < -NORMALIZATION_TOL:
                raise DistributionError(f"negative entry {p[idx]:.3e} at {idx}")
            p = np.clip(p, 0.0, None)
        total = p.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DistributionError(f"table sums to {total!r}, not 1")
        p.setflags(write=False)
        p_a = p.sum(axis=1)
        p_b = p.sum(axis=0)
        sup = p > SUPPORT_EPSILON
        for arr in (p_a, p_b, sup):
            arr.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "p_a", p_a)
        object.__setattr__(self, "p_b", p_b)
        object.__setattr__(self, "support", sup)

    @classmethod
    def normalized(cls, weights) -> "JointDistribution":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum())

    @property
    def a_card(self) -> int:
        return self.probs.shape[0]

    @property
    def b_card(self) -> int:
        return self.probs.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    def is_product(self, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.probs - np.outer(self.p_a, self.p_b))) <= tol)

    def transpose(self) -> "JointDistribution":
        return JointDistribution(self.probs.T)

    def expectation(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return float(np.sum(np.where(self.support, self.probs * f, 0.0)))

    def __repr__(self):
        return f"JointDistribution(shape={self.shape})"


def product(p: JointDistribution, q: JointDistribution) -> JointDistribution:
    """Distribution of ``(A1 A2, B1 B2)`` for independent pairs.

    The combined A-symbol is ``a1 * q.a_card + a2`` and likewise on B.
    """
    t = np.einsum("ab,cd->acbd", p.probs, q.probs)
    return JointDistribution(t.reshape(p.a_card * q.a_card, p.b_card * q.b_card))


def apply_local_channels(p: JointDistribution, chan_a, chan_b) -> JointDistribution:
    """Push ``p`` through row-stochastic maps ``chan_a[a, a2]`` and ``chan_b[b, b2]``."""
    chan_a = np.asarray(chan_a, dtype=float)
    chan_b = np.asarray(chan_b, dtype=float)
    out = chan_a.T @ p.probs @ chan_b
    return JointDistribution(out / out.sum())


def conditional_expectation(dist: JointDistribution, f, given: str) -> np.ndarray:
    """Conditional mean of ``f(a, b)``.

    ``given="A"`` returns ``E_{B|A}[f]`` as an array over A; ``given="B"``
    returns ``E_{A|B}[f]`` over B. Symbols with zero marginal mass are not in
    the output domain and are reported as NaN.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != dist.shape:
        raise DistributionError(f"function shape {f.shape} does not match {dist.shape}")
    pf = np.where(dist.support, dist.probs * f, 0.0)
    if given == "A":
        num, den = pf.sum(axis=1), dist.p_a
    elif given == "B":
        num, den = pf.sum(axis=0), dist.p_b
    else:
        raise ValueError("given must be 'A' or 'B'")
    out = np.full(den.shape, np.nan)
    ok = den > SUPPORT_EPSILON
    out[ok] = num[ok] / den[ok]
    return out


@dataclass(frozen=True)
class VarianceDecomposition:
    total: float
    var_of_cond_mean_A: float
    mean_of_cond_var_A: float
    var_of_cond_mean_B: float
    mean_of_cond_var_B: float


def variance_decomposition(dist: JointDistribution, f) -> VarianceDecomposition:
    """Both one-sided laws of total variance for ``f(a, b)``.

    ``total == var_of_cond_mean_A + mean_of_cond_var_A`` and the same on the
    B side.
    """
    f = np.where(dist.support, np.asarray(f, dtype=float), 0.0)
    p = dist.probs
    mean = float(np.sum(p * f))
    total = float(np.sum(p * (f - mean) ** 2))

    def one_side(cond_mean, marg, axis):
        ok = marg > SUPPORT_EPSILON
        cm = np.where(ok, cond_mean, 0.0)
        var_cm = float(np.sum(marg[ok] * (cm[ok] - mean) ** 2))
        dev = f - (cm[:, None] if axis == 0 else cm[None, :])
        mean_cv = float(np.sum(p * dev**2))
        return var_cm, mean_cv

    vA, mA = one_side(conditional_expectation(dist, f, "A"), dist.p_a, 0)
    vB, mB = one_side(conditional_expectation(dist, f, "B"), dist.p_b, 1)
    return VarianceDecomposition(total, vA, mA, vB, mB)


def joint_entropies(dist: JointDistribution) -> tuple[float, float, float]:
    """``(H(A), H(B), H(AB))`` in nats."""
    return (
        _entropy_of_weights(dist.p_a),
        _entropy_of_weights(dist.p_b),
        _entropy_of_weights(dist.probs.ravel()),
    )


# ---------------------------------------------------------------------------
# Multivariate tables
# ---------------------------------------------------------------------------


def _compact(labels: np.ndarray) -> tuple[np.ndarray, int]:
    uniq, inv = np.unique(labels, return_inverse=True)
    return inv.reshape(labels.shape), len(uniq)


def _combine(columns: Sequence[tuple[np.ndarray, int]]) -> tuple[np.ndarray, int]:
    """Mixed-radix combination of flat integer label columns into one label.

    Returns the combined labels and an upper bound on their range.
    """
    key = np.zeros(columns[0][0].shape, dtype=np.int64)
    radix = 1
    for lab, card in columns:
        if radix * card >= 2**62:
            key, radix = _compact(key)
            if radix * card >= 2**62:
                lab, card = _compact(lab)
        key = key * card + lab
        radix *= card
    return key, radix


class TableDistribution:
    """Dense joint table over named finite variables.

    Parameters
    ----------
    variables : sequence of (name, cardinality)
        One entry per axis of ``probs``.
    probs : ndarray
        Non-negative, sums to one within ``1e-10``.
    derived : mapping name -> (labels, cardinality), optional
        Extra variables that are deterministic functions of the cell. The
        label array must broadcast to ``probs.shape``.
    """

    def __init__(self, variables, probs, derived=None):
        variables = [(str(n), int(c)) for n, c in variables]
        names = [n for n, _ in variables]
        if len(set(names)) != len(names):
            raise DistributionError(f"duplicate variable names in {names}")
        probs = np.asarray(probs, dtype=float)
        if probs.shape != tuple(c for _, c in variables):
            raise DistributionError(
                f"table shape {probs.shape} does not match cardinalities "
                f"{tuple(c for _, c in variables)}"
            )
        if probs.size > MAX_TABLE_ENTRIES:
            raise TableTooLarge(
                f"table has {probs.size} entries; the cap is {MAX_TABLE_ENTRIES}"
            )
        if probs.size and probs.min() < -TABLE_NORMALIZATION_TOL:
            raise DistributionError(f"negative entry {probs.min():.3e}")
        total = probs.sum()
        if abs(total - 1.0) > TABLE_NORMALIZATION_TOL:
            raise DistributionError(f"table sums to {total!r}, not 1")
        self.variables = variables
        self.probs = np.clip(probs, 0.0, None)
        self._axis = {n: i for i, n in enumerate(names)}
        self._derived = {}
        self._cache = {}
        for name, (labels, card) in (derived or {}).items():
            self._add_derived(name, labels, card)

    # -- construction helpers ------------------------------------------------

    def _add_derived(self, name, labels, card):
        if name in self._axis or name in self._derived:
            raise DistributionError(f"variable {name!r} already exists")
        labels = np.asarray(labels, dtype=np.int64)
        np.broadcast_shapes(labels.shape, self.probs.shape)
        self._derived[name] = (labels, int(card))

    def with_derived(self, name: str, labels, card: int | None = None) -> "TableDistribution":
        """Return a copy carrying an extra deterministic variable."""
        labels = np.asarray(labels, dtype=np.int64)
        if card is None:
            card = int(labels.max()) + 1 if labels.size else 1
        out = TableDistribution.__new__(TableDistribution)
        out.variables = self.variables
        out.probs = self.probs
        out._axis = self._axis
        out._derived = dict(self._derived)
        # same table and a superset of variables, so every cached entry stays valid
        out._cache = dict(self._cache)
        out._add_derived(name, labels, card)
        return out

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.variables] + list(self._derived)

    def cardinality(self, name: str) -> int:
        if name in self._axis:
            return self.variables[self._axis[name]][1]
        if name in self._derived:
            return self._derived[name][1]
        raise KeyError(f"unknown variable {name!r}")

    def _check(self, names: Iterable[str]) -> list[str]:
        names = list(names)
        for n in names:
            if n not in self._axis and n not in self._derived:
                raise KeyError(f"unknown variable {n!r}")
        return names

    # -- marginals -----------------------------------------------------------

    def marginal(self, names: Sequence[str]) -> "TableDistribution":
        """Marginal table on axis variables ``names`` (in the given order)."""
        names = self._check(names)
        if any(n in self._derived for n in names):
            raise DistributionError("dense marginals are only defined for axis variables")
        keep = [self._axis[n] for n in names]
        drop = tuple(i for i in range(self.probs.ndim) if i not in keep)
        m = self.probs.sum(axis=drop)
        order = sorted(keep)
        m = np.moveaxis(m, [order.index(k) for k in keep], range(len(keep)))
        return TableDistribution([self.variables[k] for k in keep], m)

    def _flat_support(self):
        if "_support" not in self._cache:
            flat = self.probs.ravel()
            mask = flat > 0
            self._cache["_support"] = (mask, flat[mask])
        return self._cache["_support"]

    def _flat_labels(self, name):
        """Labels of ``name`` on the flattened support, cached per variable."""
        if name not in self._cache:
            mask, _ = self._flat_support()
            if name in self._axis:
                ax = self._axis[name]
                shape = [1] * self.probs.ndim
                shape[ax] = self.probs.shape[ax]
                lab = np.arange(self.probs.shape[ax]).reshape(shape)
                card = self.probs.shape[ax]
            else:
                lab, card = self._derived[name]
            lab = np.broadcast_to(lab, self.probs.shape).ravel()[mask]
            self._cache[name] = (lab, card)
        return self._cache[name]

    def _weights(self, names: Sequence[str]) -> np.ndarray:
        """Probability vector of the joint value of ``names`` (zeros dropped)."""
        if not names:
            return np.array([self.probs.sum()])
        if all(n in self._axis for n in names):
            axes = {self._axis[n] for n in names}
            drop = tuple(i for i in range(self.probs.ndim) if i not in axes)
            return self.probs.sum(axis=drop).ravel()
        cols = [self._flat_labels(n) for n in names]
        key, radix = _combine(cols)
        if radix <= max(4 * key.size, 1 << 16):
            w = np.bincount(key, weights=self._flat_support()[1], minlength=radix)
            return w[w > 0]
        _, inv = np.unique(key, return_inverse=True)
        return np.bincount(inv, weights=self._flat_support()[1])

    # -- information measures --------------------------------------------------

    def entropy(self, names: Sequence[str]) -> float:
        """Joint entropy of ``names`` in nats."""
        names = list(dict.fromkeys(self._check(names)))
        return _entropy_of_weights(self._weights(names))

    def conditional_entropy(self, names, given=()) -> float:
        names, given = list(names), list(given)
        return self.entropy(names + given) - self.entropy(given)

    def mutual_information(self, a_vars, b_vars, given=()) -> float:
        """``I(A; B | C)`` in nats, clamped to zero within ``1e-12``."""
        a_vars, b_vars, given = (list(self._check(v)) for v in (a_vars, b_vars, given))
        sa, sb, sc = set(a_vars), set(b_vars), set(given)
        if sa & sb or sa & sc or sb & sc:
            raise DistributionError("variable sets must be disjoint")
        h = self.entropy
        val = h(a_vars + given) + h(b_vars + given) - h(a_vars + b_vars + given) - h(given)
        if -MI_CLAMP_TOL <= val < 0:
            return 0.0
        return val

    def interaction_information(self, a_vars, b_vars, c_vars, given=()) -> float:
        """``I(A; B; C | D) = I(A; B | D) - I(A; B | C D)``."""
        given = list(given)
        return self.mutual_information(a_vars, b_vars, given) - self.mutual_information(
            a_vars, b_vars, list(c_vars) + given
        )

    def __repr__(self):
        return f"TableDistribution({self.names})"


def entropy(dist: TableDistribution, names: Sequence[str]) -> float:
    return dist.entropy(names)


def mutual_information(dist: TableDistribution, a_vars, b_vars, given=()) -> float:
    return dist.mutual_information(a_vars, b_vars, given)
