"""Hypercontractivity ribbon membership.

Two independent certifiers are provided:

* the channel search minimizes ``I(U;AB) - l1 I(U;A) - l2 I(U;B)`` over
  auxiliary channels ``p(u | a, b)``;
* the norm search maximizes ``E[f g] / (||f||_{1/l1} ||g||_{1/l2})`` over
  non-negative ``f(a)``, ``g(b)``.

A negative channel objective or a norm ratio above one is an exact refutation
(re-verified by direct recomputation). Failing to find one is only evidence:
such verdicts are labelled ``inside-heuristic`` everywhere.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .boxes import NoSignalingBox, conditional_joint
from .prob import SUPPORT_EPSILON, JointDistribution, joint_entropies

HC_TOLERANCE = 1e-8
DEFAULT_RESTARTS = 64
MAX_ITERATIONS = 2000
NORM_FLOOR = 1e-12


class HcStatus(enum.Enum):
    INSIDE_HEURISTIC = "inside-heuristic"
    OUTSIDE_CERTIFIED = "outside-certified"


@dataclass(frozen=True)
class HcVerdict:
    status: HcStatus
    violation: float
    restarts: int
    witness_channel: np.ndarray | None = None
    witness_norm_pair: tuple[np.ndarray, np.ndarray] | None = None
    input_pair: tuple[int, int] | None = None

    @property
    def outside(self) -> bool:
        return self.status is HcStatus.OUTSIDE_CERTIFIED

    @property
    def certified(self) -> str:
        return "exact" if self.outside else "heuristic"


def upsilon(dist: JointDistribution, pt) -> float:
    """``l1 H(A) + l2 H(B) - H(AB)`` in nats."""
    l1, l2 = pt
    ha, hb, hab = joint_entropies(dist)
    return l1 * ha + l2 * hb - hab


# ---------------------------------------------------------------------------
# channel objective
# ---------------------------------------------------------------------------


def channel_objective(dist: JointDistribution, channel, pt) -> float:
    """``I(U;AB) - l1 I(U;A) - l2 I(U;B)`` for ``channel[a, b, u] = p(u|a,b)``.

    Computed from entropies of the explicit joint ``p(a, b, u)``.
    """
    l1, l2 = pt
    w = np.asarray(channel, dtype=float)
    joint = dist.probs[:, :, None] * w

    def h(t):
        t = t[t > 0]
        return -np.sum(t * np.log(t))

    hu = h(joint.sum(axis=(0, 1)))
    i_ab = hu + h(dist.probs.ravel()) - h(joint.ravel())
    i_a = hu + h(dist.p_a) - h(joint.sum(axis=1).ravel())
    i_b = hu + h(dist.p_b) - h(joint.sum(axis=0).ravel())
    return float(i_ab - l1 * i_a - l2 * i_b)


def envelope_gap(dist: JointDistribution, channel, pt) -> float:
    """``E_U[Upsilon(p_{AB|U})] - Upsilon(p_AB)``; equals the channel objective."""
    w = np.asarray(channel, dtype=float)
    joint = dist.probs[:, :, None] * w
    pu = joint.sum(axis=(0, 1))
    total = 0.0
    for u in np.flatnonzero(pu > 0):
        total += pu[u] * upsilon(JointDistribution.normalized(joint[:, :, u]), pt)
    return total - upsilon(dist, pt)


def _objective_and_grad(p, pa, pb, w, l1, l2):
    """Objectives and per-row gradients for a batch of channels ``w[r, a, b, u]``.

    The gradient is taken with respect to ``p(u|a,b)`` and divided by ``p(a,b)``.
    """
    tiny = 1e-300
    joint = p[None, :, :, None] * w
    ru = joint.sum(axis=(1, 2))
    rau = joint.sum(axis=2)
    rbu = joint.sum(axis=1)
    log_ru = np.log(np.maximum(ru, tiny))
    log_ua = np.log(np.maximum(rau / np.maximum(pa[None, :, None], tiny), tiny))
    log_ub = np.log(np.maximum(rbu / np.maximum(pb[None, :, None], tiny), tiny))
    grad = (
        np.log(np.maximum(w, tiny))
        - (1 - l1 - l2) * log_ru[:, None, None, :]
        - l1 * log_ua[:, :, None, :]
        - l2 * log_ub[:, None, :, :]
    )
    # the objective is sum_{abu} p(a,b,u) * grad for this combination of informations
    obj = np.sum(joint * grad, axis=(1, 2, 3))
    return obj, grad


def _descend(p, pa, pb, w, l1, l2, iterations, stall=1e-11):
    """Exponentiated-gradient descent on a batch of channels.

    Each restart keeps its own step size, halved whenever a step fails to
    decrease its objective and grown by half after a success. A restart stops
    once its step collapses or its per-step improvement falls below ``stall``.
    """
    obj, grad = _objective_and_grad(p, pa, pb, w, l1, l2)
    step = np.ones(len(w))
    active = np.ones(len(w), dtype=bool)
    for _ in range(iterations):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        s = step[idx][:, None, None, None]
        logits = np.log(np.maximum(w[idx], 1e-300)) - s * grad[idx]
        logits -= logits.max(axis=3, keepdims=True)
        cand = np.exp(logits)
        cand /= cand.sum(axis=3, keepdims=True)
        c_obj, c_grad = _objective_and_grad(p, pa, pb, cand, l1, l2)
        better = c_obj < obj[idx] - 1e-15
        acc = idx[better]
        gain = obj[acc] - c_obj[better]
        w[acc], obj[acc], grad[acc] = cand[better], c_obj[better], c_grad[better]
        active[acc[gain < stall]] = False
        step[acc] = np.minimum(step[acc] * 1.5, 64.0)
        rej = idx[~better]
        step[rej] *= 0.5
        active[rej[step[rej] < 1e-8]] = False
    return w, obj


def _starting_channels(dist, u_card, restarts, rng):
    na, nb = dist.shape
    starts = []
    # U = (A, B), U = A, U = B: the closed-form refutations of the corner points
    if u_card >= na * nb:
        w = np.zeros((na, nb, u_card))
        for a in range(na):
            for b in range(nb):
                w[a, b, a * nb + b] = 1.0
        starts.append(w)
    if u_card >= na:
        w = np.zeros((na, nb, u_card))
        w[np.arange(na), :, np.arange(na)] = 1.0
        starts.append(w)
    if u_card >= nb:
        w = np.zeros((na, nb, u_card))
        for b in range(nb):
            w[:, b, b] = 1.0
        starts.append(w)
    while len(starts) < restarts:
        k = len(starts)
        if k % 3 == 0:
            # near-deterministic start
            w = rng.dirichlet(np.full(u_card, 0.1), size=(na, nb))
        elif k % 3 == 1:
            w = rng.dirichlet(np.ones(u_card), size=(na, nb))
        else:
            # small perturbation of an uninformative channel along a random direction
            base = rng.dirichlet(np.ones(u_card))
            w = base * (1 + 0.5 * rng.uniform(-1, 1, size=(na, nb, u_card)))
            w /= w.sum(axis=2, keepdims=True)
        starts.append(w)
    return starts[:max(restarts, 1)]


def hc_membership_channel(dist: JointDistribution, pt, restarts: int = DEFAULT_RESTARTS,
                          u_card: int | None = None, seed: int = 0,
                          tolerance: float = HC_TOLERANCE,
                          iterations: int = MAX_ITERATIONS) -> HcVerdict:
    """Multistart exponentiated-gradient search for a violating channel.

    ``u_card`` defaults to ``|A||B| + 2``. Every refutation is re-checked with
    :func:`channel_objective` before it is reported.
    """
    l1, l2 = pt
    if u_card is None:
        u_card = dist.a_card * dist.b_card + 2
    if u_card < 2:
        raise ValueError("u_card must be at least 2")
    rng = np.random.default_rng(seed)
    p, pa, pb = dist.probs, dist.p_a, dist.p_b
    starts = np.stack(_starting_channels(dist, u_card, restarts, rng))
    w, obj = _descend(p, pa, pb, starts, l1, l2, iterations)
    for r in np.argsort(obj, kind="stable"):
        if obj[r] >= -tolerance:
            break
        exact = channel_objective(dist, w[r], pt)
        if exact < -tolerance:
            return HcVerdict(HcStatus.OUTSIDE_CERTIFIED, -exact, len(starts), witness_channel=w[r])
    return HcVerdict(HcStatus.INSIDE_HEURISTIC, 0.0, len(starts))


# ---------------------------------------------------------------------------
# norm form
# ---------------------------------------------------------------------------


def _norm(v, weights, lam):
    """``E[|v|^{1/lam}]^{lam}`` along the last axis; ``lam = 0`` is the sup norm on the support."""
    ok = weights > SUPPORT_EPSILON
    v = np.abs(np.asarray(v, dtype=float))[..., ok]
    if lam <= 0:
        return np.max(v, axis=-1)
    # factor out the maximum so large exponents do not underflow
    m = np.max(v, axis=-1)
    scaled = v / np.where(m > 0, m, 1.0)[..., None]
    return m * np.sum(weights[ok] * scaled ** (1.0 / lam), axis=-1) ** lam


def norm_ratio(dist: JointDistribution, f, g, pt) -> float:
    """``E[f g] / (||f||_{1/l1} ||g||_{1/l2})``."""
    l1, l2 = pt
    num = float(np.asarray(f) @ dist.probs @ np.asarray(g))
    return num / float(_norm(f, dist.p_a, l1) * _norm(g, dist.p_b, l2))


def _best_response(h, weights, lam):
    """Maximizer of ``E[f h] / ||f||_{1/lam}`` over ``f >= 0`` given ``h >= 0`` (rows of ``h``).

    Hoelder duality gives ``f ~ h^{lam/(1-lam)}``; at ``lam = 1`` the dual norm
    is the sup norm and the maximizer is the indicator of ``argmax h``.
    """
    ok = weights > SUPPORT_EPSILON
    h = np.atleast_2d(h)
    f = np.zeros_like(h)
    if lam >= 1.0 - 1e-12:
        hm = np.where(ok, h, -np.inf)
        f[np.arange(len(h)), np.argmax(hm, axis=1)] = 1.0
    else:
        expo = lam / (1.0 - lam)
        logs = expo * np.log(np.maximum(h, NORM_FLOOR))
        logs = np.where(ok, logs, -np.inf)
        logs -= logs.max(axis=1, keepdims=True)
        f = np.exp(logs)
    return np.where(ok, np.maximum(f, NORM_FLOOR), 0.0)


def _ratios(p, pa, pb, f, g, l1, l2):
    num = np.einsum("ra,ab,rb->r", f, p, g)
    return num / (_norm(f, pa, l1) * _norm(g, pb, l2))


def hc_membership_norms(dist: JointDistribution, pt, restarts: int = DEFAULT_RESTARTS,
                        seed: int = 0, tolerance: float = HC_TOLERANCE,
                        iterations: int = 500) -> HcVerdict:
    """Alternating maximization of the Hoelder-type ratio, all restarts at once.

    Needs ``l1, l2 > 0``; points on the axes are handled by the channel search.
    """
    l1, l2 = pt
    if l1 <= 0 or l2 <= 0:
        raise ValueError("the norm form needs l1, l2 > 0; use hc_membership_channel")
    rng = np.random.default_rng(seed)
    p, pa, pb = dist.probs, dist.p_a, dist.p_b
    cond_a = np.where(pa[:, None] > SUPPORT_EPSILON, p / np.maximum(pa[:, None], 1e-300), 0.0)
    cond_b = np.where(pb[None, :] > SUPPORT_EPSILON, p / np.maximum(pb[None, :], 1e-300), 0.0)
    starts = [np.eye(dist.b_card)[b] + NORM_FLOOR for b in range(dist.b_card)]
    while len(starts) < restarts:
        starts.append(rng.exponential(size=dist.b_card) ** rng.uniform(0.5, 4.0))
    g = np.where(pb > SUPPORT_EPSILON, np.maximum(np.stack(starts), NORM_FLOOR), 0.0)
    f = _best_response(g @ cond_a.T, pa, l1)
    best = _ratios(p, pa, pb, f, g, l1, l2)
    for _ in range(iterations):
        f_new = _best_response(g @ cond_a.T, pa, l1)
        g_new = _best_response(f_new @ cond_b, pb, l2)
        r = _ratios(p, pa, pb, f_new, g_new, l1, l2)
        up = r > best
        f[up], g[up] = f_new[up], g_new[up]
        gain = np.where(up, r - best, 0.0)
        best = np.where(up, r, best)
        if best.max() > 1.0 + tolerance or gain.max() <= 1e-12:
            break
    for k in np.argsort(-best, kind="stable"):
        if best[k] <= 1.0 + tolerance:
            break
        exact = norm_ratio(dist, f[k], g[k], pt)
        if exact > 1.0 + tolerance:
            return HcVerdict(HcStatus.OUTSIDE_CERTIFIED, exact - 1.0, len(starts),
                             witness_norm_pair=(f[k].copy(), g[k].copy()))
    return HcVerdict(HcStatus.INSIDE_HEURISTIC, 0.0, len(starts))


def hc_membership(dist: JointDistribution, pt, restarts: int = DEFAULT_RESTARTS,
                  u_card: int | None = None, seed: int = 0) -> HcVerdict:
    """Channel search, falling back on the norm search when it finds nothing."""
    v = hc_membership_channel(dist, pt, restarts, u_card, seed)
    if v.outside or pt[0] <= 0 or pt[1] <= 0 or pt[0] + pt[1] <= 1:
        return v
    n = hc_membership_norms(dist, pt, restarts, seed)
    return n if n.outside else v


def hc_membership_box(box: NoSignalingBox, pt, restarts: int = DEFAULT_RESTARTS,
                      u_card: int | None = None, seed: int = 0) -> HcVerdict:
    """Outside as soon as one input pair refutes the point."""
    total = 0
    for x in range(box.x_card):
        for y in range(box.y_card):
            v = hc_membership(conditional_joint(box, x, y), pt, restarts, u_card, seed)
            total += v.restarts
            if v.outside:
                return HcVerdict(v.status, v.violation, total, v.witness_channel,
                                 v.witness_norm_pair, (x, y))
    return HcVerdict(HcStatus.INSIDE_HEURISTIC, 0.0, total)


def s_star(dist: JointDistribution, grid_resolution: int = 10, restarts: int = 16,
           tol: float = 1e-4, seed: int = 0) -> float:
    """Estimate ``inf (1 - l1)/l2`` over points not refuted by the HC search.

    For each ``l2`` on a grid the largest unrefuted ``l1`` is located by
    bisection. Because unrefuted points may still lie outside the ribbon, the
    estimate can only err downwards where the search misses a witness.
    """
    best = np.inf
    for l2 in np.linspace(1.0, 1.0 / grid_resolution, grid_resolution):
        lo, hi = 1.0 - l2, 1.0
        if not hc_membership(dist, (1.0, l2), restarts, seed=seed).outside:
            lo = 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if hc_membership(dist, (mid, l2), restarts, seed=seed).outside:
                hi = mid
            else:
                lo = mid
        best = min(best, (1.0 - lo) / l2)
    return float(best)
