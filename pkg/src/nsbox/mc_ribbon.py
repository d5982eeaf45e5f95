"""Maximal-correlation ribbon: membership, boundary slices, the inf-ratio link to rho^2.

A point ``(l1, l2)`` belongs to the ribbon of ``p(a, b)`` when, for every
``f(a, b)`` with ``E[f] = 0``::

    E[f^2] - l1 E_A[(E_{B|A} f)^2] - l2 E_B[(E_{A|B} f)^2] >= 0.

In coordinates ``g = sqrt(p) * f`` on the support the two conditional-mean
terms are orthogonal projections ``P_A`` and ``P_B`` (onto functions of A and
of B), so the form is ``I - l1 P_A - l2 P_B``. The constant direction
``sqrt(p)`` is an eigenvector of both projections; it is deflated to
eigenvalue 1, which never changes the minimum because every eigenvalue of the
form is at most 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxes import NoSignalingBox, conditional_joint
from .linalg import eigh
from .hc_ribbon import upsilon
from .maxcorr import rho_value
from .prob import SUPPORT_EPSILON, JointDistribution

PSD_TOLERANCE = 1e-10
INF_RATIO_EPSILON = 1e-6


@dataclass(frozen=True)
class RibbonPoint:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        for v in (self.lambda1, self.lambda2):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"ribbon coordinates must lie in [0, 1], got {v}")

    def __iter__(self):
        return iter((self.lambda1, self.lambda2))


def _as_point(pt) -> RibbonPoint:
    return pt if isinstance(pt, RibbonPoint) else RibbonPoint(float(pt[0]), float(pt[1]))


@dataclass(frozen=True)
class McVerdict:
    """Outcome of an MC-ribbon query.

    ``min_eigenvalue`` is the smallest eigenvalue of the quadratic form on
    zero-mean functions (the margin). ``witness_f`` is a zero-mean function
    on the full ``(a, b)`` grid attaining it when the point is outside.
    ``input_pair`` is set by the box-level query.
    """

    inside: bool
    min_eigenvalue: float
    witness_f: np.ndarray | None = None
    input_pair: tuple[int, int] | None = None


def projection_operators(dist: JointDistribution):
    """Return ``(P_A, P_B, c, cells)`` in sqrt(p)-weighted coordinates on the support."""
    cells = np.argwhere(dist.support)
    pv = dist.probs[dist.support]
    sq = np.sqrt(pv)
    ia, ib = cells[:, 0], cells[:, 1]
    same_a = ia[:, None] == ia[None, :]
    same_b = ib[:, None] == ib[None, :]
    outer = np.outer(sq, sq)
    p_a = np.where(same_a, outer / dist.p_a[ia][:, None], 0.0)
    p_b = np.where(same_b, outer / dist.p_b[ib][:, None], 0.0)
    return p_a, p_b, sq, cells


def quadratic_form(dist: JointDistribution, pt) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deflated form ``I - l1 P_A - l2 P_B`` plus the support cells and ``sqrt(p)``."""
    l1, l2 = _as_point(pt)
    p_a, p_b, sq, cells = projection_operators(dist)
    q = np.eye(len(sq)) - l1 * p_a - l2 * p_b
    q += (l1 + l2) * np.outer(sq, sq)
    return q, cells, sq


def mc_membership(dist: JointDistribution, pt, psd_tolerance: float = PSD_TOLERANCE,
                  method: str = "lapack") -> McVerdict:
    q, cells, sq = quadratic_form(dist, pt)
    w, v = eigh(q, method=method)
    lam = float(w[0])
    if lam >= -psd_tolerance:
        return McVerdict(True, lam)
    g = v[:, 0]
    g = g - (g @ sq) * sq
    f = np.zeros(dist.shape)
    f[cells[:, 0], cells[:, 1]] = g / sq
    return McVerdict(False, lam, f)


def form_value(dist: JointDistribution, f, pt) -> float:
    """``E[f^2] - l1 E_A[(E_{B|A} f)^2] - l2 E_B[(E_{A|B} f)^2]`` by direct summation."""
    l1, l2 = _as_point(pt)
    f = np.where(dist.support, np.asarray(f, dtype=float), 0.0)
    p = dist.probs
    pf = p * f
    ok_a = dist.p_a > SUPPORT_EPSILON
    ok_b = dist.p_b > SUPPORT_EPSILON
    ea = pf.sum(axis=1)[ok_a] ** 2 / dist.p_a[ok_a]
    eb = pf.sum(axis=0)[ok_b] ** 2 / dist.p_b[ok_b]
    return float(np.sum(p * f * f) - l1 * ea.sum() - l2 * eb.sum())


def mc_membership_box(box: NoSignalingBox, pt, psd_tolerance: float = PSD_TOLERANCE) -> McVerdict:
    """Intersection over input pairs; reports the worst pair."""
    worst = None
    for x in range(box.x_card):
        for y in range(box.y_card):
            v = mc_membership(conditional_joint(box, x, y), pt, psd_tolerance)
            if worst is None or v.min_eigenvalue < worst.min_eigenvalue:
                worst = McVerdict(v.inside, v.min_eigenvalue, v.witness_f, (x, y))
    return worst


def _min_eig_fn(dists):
    ops = [projection_operators(d) for d in dists]

    def min_eig(l1, l2):
        out = np.inf
        for p_a, p_b, sq, _ in ops:
            q = np.eye(len(sq)) - l1 * p_a - l2 * p_b + (l1 + l2) * np.outer(sq, sq)
            out = min(out, float(np.linalg.eigvalsh(q)[0]))
        return out

    return min_eig


def _boundary(min_eig, lambda2, tol, psd_tolerance):
    if min_eig(1.0, lambda2) >= -psd_tolerance:
        return 1.0
    # the triangle l1 + l2 <= 1 is always inside
    lo, hi = 1.0 - lambda2, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if min_eig(mid, lambda2) >= -psd_tolerance:
            lo = mid
        else:
            hi = mid
    return lo


def mc_boundary_slice(dist, lambda2: float, tol: float = 1e-10,
                      psd_tolerance: float = PSD_TOLERANCE) -> float:
    """Largest ``l1`` with ``(l1, lambda2)`` in the ribbon, found by bisection.

    Works for a :class:`JointDistribution` or a box (intersection over inputs).
    The returned value is the inside end of the final bracket.
    """
    if not 0.0 <= lambda2 <= 1.0:
        raise ValueError("lambda2 must lie in [0, 1]")
    dists = _conditionals(dist)
    return _boundary(_min_eig_fn(dists), lambda2, tol, psd_tolerance)


def _conditionals(obj):
    if isinstance(obj, NoSignalingBox):
        return [conditional_joint(obj, x, y) for x in range(obj.x_card) for y in range(obj.y_card)]
    return [obj]


def _inf_ratio(dists, n_max, psd_tolerance):
    min_eig = _min_eig_fn(dists)
    ns = np.unique(np.geomspace(1, n_max, num=9).round().astype(int))
    best = np.inf
    for n in ns:
        l2 = 1.0 / n
        l1 = _boundary(min_eig, l2, tol=1e-3 / n * 1e-3, psd_tolerance=psd_tolerance)
        best = min(best, (1.0 - l1) / l2)
    return float(best)


def mc_inf_ratio(dist: JointDistribution, n_max: int = 10_000,
                 psd_tolerance: float = PSD_TOLERANCE) -> float:
    """Estimate ``inf (1 - l1)/l2`` over the ribbon.

    Boundary slices are taken at ``l2 = 1/n`` for ``n`` on a geometric grid up
    to ``n_max``; the ratio at each slice upper-bounds the infimum and the
    slices approach it as ``l2 -> 0``. The estimate does not consult ``rho``.
    """
    return _inf_ratio([dist], n_max, psd_tolerance)


def mc_inf_ratio_box(box: NoSignalingBox, n_max: int = 10_000,
                     psd_tolerance: float = PSD_TOLERANCE) -> float:
    return _inf_ratio(_conditionals(box), n_max, psd_tolerance)


def sequence_point(rho2: float, n: int, eps: float = INF_RATIO_EPSILON) -> RibbonPoint:
    """The point ``(1 - (rho2 + eps)/n, 1/n)``, inside the ribbon for large ``n``."""
    return RibbonPoint(max(0.0, 1.0 - (rho2 + eps) / n), 1.0 / n)


def sequence_ratio_check(dist: JointDistribution, n_max: int = 10_000,
                         eps: float = INF_RATIO_EPSILON) -> list[tuple[int, bool, float]]:
    """Membership of the approaching sequence for ``n`` up to ``n_max``.

    Returns ``(n, inside, ratio)`` rows; the ratio is ``rho^2 + eps``, so
    membership for large ``n`` shows the infimum is not above ``rho^2 + eps``.
    """
    r2 = rho_value(dist) ** 2
    rows = []
    for n in np.unique(np.geomspace(1, n_max, num=9).round().astype(int)):
        pt = sequence_point(r2, int(n), eps)
        rows.append((int(n), mc_membership(dist, pt).inside, (1 - pt.lambda1) / pt.lambda2))
    return rows


class PerturbationError(ValueError):
    def __init__(self, eps, max_eps):
        self.eps, self.max_eps = eps, max_eps
        super().__init__(
            f"perturbation with eps={eps:g} leaves the simplex; the largest admissible eps is {max_eps:.3e}"
        )


@dataclass(frozen=True)
class PerturbationCheck:
    quadratic_form: float
    finite_difference: float

    @property
    def residual(self) -> float:
        return abs(self.quadratic_form - self.finite_difference)


def perturbation_second_order(dist: JointDistribution, f, pt, eps: float = 1e-4) -> PerturbationCheck:
    """Compare the quadratic form with the second derivative of ``t -> Upsilon(p(1 + t f))``.

    ``f`` must have ``E[f] = 0`` and ``E[f^2] = 1``. The derivative is a
    central difference at step ``eps``.
    """
    f = np.where(dist.support, np.asarray(f, dtype=float), 0.0)
    m1, m2 = dist.expectation(f), dist.expectation(f * f)
    if abs(m1) > 1e-9 or abs(m2 - 1) > 1e-9:
        raise ValueError(f"f must be zero-mean with unit second moment (got {m1:.3e}, {m2:.3e})")
    neg = np.abs(f[dist.support]).max()
    max_eps = 1.0 / neg if neg > 0 else np.inf
    if eps >= max_eps:
        raise PerturbationError(eps, max_eps)
    base = dist.probs

    def g(t):
        return upsilon(JointDistribution(base * (1 + t * f)), pt)

    fd = (g(eps) - 2 * g(0.0) + g(-eps)) / (eps * eps)
    return PerturbationCheck(form_value(dist, f, pt), fd)


__all__ = [
    "PSD_TOLERANCE",
    "RibbonPoint",
    "McVerdict",
    "mc_membership",
    "mc_membership_box",
    "mc_boundary_slice",
    "mc_inf_ratio",
    "mc_inf_ratio_box",
    "perturbation_second_order",
    "form_value",
    "sequence_point",
    "sequence_ratio_check",
    "PerturbationError",
    "PerturbationCheck",
]
