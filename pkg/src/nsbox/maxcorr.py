"""Maximal correlation of bipartite distributions and of no-signaling boxes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh as gen_eigh

from .boxes import NoSignalingBox, conditional_joint
from .linalg import eigh
from .prob import SUPPORT_EPSILON, JointDistribution


@dataclass(frozen=True)
class RhoResult:
    """``rho`` plus optimal zero-mean, unit-variance functions (``None`` when rho is 0).

    ``optimizer_f`` is indexed by A symbols and ``optimizer_g`` by B symbols;
    entries on zero-mass symbols are 0.
    """

    rho: float
    optimizer_f: np.ndarray | None
    optimizer_g: np.ndarray | None


def _normalized_matrix(dist: JointDistribution):
    ia = np.flatnonzero(dist.p_a > SUPPORT_EPSILON)
    ib = np.flatnonzero(dist.p_b > SUPPORT_EPSILON)
    pa, pb = dist.p_a[ia], dist.p_b[ib]
    m = dist.probs[np.ix_(ia, ib)] / np.sqrt(np.outer(pa, pb))
    return m, ia, ib, np.sqrt(pa), np.sqrt(pb)


def rho(dist: JointDistribution, method: str = "lapack") -> RhoResult:
    """Maximal correlation as the second singular value of ``p(a,b)/sqrt(p(a)p(b))``.

    The top singular pair ``(sqrt(p_A), sqrt(p_B))`` is deflated first, so
    ``rho`` is the largest singular value of the remainder. That keeps the
    answer stable when ``rho = 1`` and the top singular value is repeated.
    """
    m, ia, ib, sa, sb = _normalized_matrix(dist)
    if len(ia) < 2 or len(ib) < 2:
        return RhoResult(0.0, None, None)
    m = m - np.outer(sa, sb)
    w, v = eigh(m.T @ m, method=method)
    sigma2 = max(float(w[-1]), 0.0)
    r = min(np.sqrt(sigma2), 1.0)
    if r <= 1e-12:
        return RhoResult(0.0, None, None)
    g_vec = v[:, -1]
    f_vec = m @ g_vec / r
    f_vec /= np.linalg.norm(f_vec)
    f = np.zeros(dist.a_card)
    g = np.zeros(dist.b_card)
    f[ia] = f_vec / sa
    g[ib] = g_vec / sb
    if f @ dist.probs @ g < 0:
        g = -g
    return RhoResult(r, f, g)


def rho_value(dist: JointDistribution) -> float:
    return rho(dist).rho


def rho_binary_closed_form(dist: JointDistribution) -> float:
    """``|zeta - alpha beta| / sqrt((1 - alpha^2)(1 - beta^2))`` with ``0/0 := 0``.

    ``alpha``, ``beta`` are the +/-1 biases of the two bits and ``zeta`` the
    bias of their parity.
    """
    if dist.shape != (2, 2):
        raise ValueError(f"closed form needs a 2x2 distribution, got {dist.shape}")
    p = dist.probs
    marg = np.concatenate([dist.p_a, dist.p_b])
    if marg.min() <= SUPPORT_EPSILON:
        return 0.0
    # zeta - alpha beta = 4 det(p) and (1 - alpha^2)(1 - beta^2) = 16 prod(marg);
    # this form avoids cancellation near deterministic bits
    num = abs(p[0, 0] * p[1, 1] - p[0, 1] * p[1, 0])
    return float(min(num / np.sqrt(np.prod(marg)), 1.0))


@dataclass(frozen=True)
class BoxRho:
    rho: float
    argmax_input_pair: tuple[int, int]
    per_input: np.ndarray


def rho_box(box: NoSignalingBox) -> BoxRho:
    """``max_{x,y} rho(p(.,.|x,y))``.

    Ties (values within ``1e-12`` of the maximum) go to the lexicographically
    first ``(x, y)``.
    """
    vals = np.zeros((box.x_card, box.y_card))
    for x in range(box.x_card):
        for y in range(box.y_card):
            vals[x, y] = rho(conditional_joint(box, x, y)).rho
    top = vals.max()
    first = int(np.flatnonzero(vals.ravel() >= top - 1e-12)[0])
    best = (first // box.y_card, first % box.y_card)
    return BoxRho(float(top), best, vals)


def joint_with_inputs(box: NoSignalingBox, q_xy) -> JointDistribution:
    """Distribution of ``(A X, B Y)`` when inputs are drawn from ``q_xy``.

    The A-side symbol for ``(a, x)`` is ``a * x_card + x`` and the B-side
    symbol for ``(b, y)`` is ``b * y_card + y``.
    """
    q = q_xy.probs if isinstance(q_xy, JointDistribution) else np.asarray(q_xy, dtype=float)
    if q.shape != (box.x_card, box.y_card):
        raise ValueError(f"input distribution shape {q.shape} does not match box inputs")
    t = np.einsum("xy,xyab->axby", q, box.p)
    return JointDistribution(t.reshape(box.a_card * box.x_card, box.b_card * box.y_card))


def rho_squared_variational(dist: JointDistribution) -> float:
    """``max_f Var_B E_{A|B}[f] / Var[f]`` over non-constant ``f(a)``.

    Solved as a generalized symmetric eigenproblem on centred functions of A,
    with the conditional-mean operator built explicitly from ``p(a|b)``.
    """
    ia = np.flatnonzero(dist.p_a > SUPPORT_EPSILON)
    ib = np.flatnonzero(dist.p_b > SUPPORT_EPSILON)
    if len(ia) < 2 or len(ib) < 2:
        return 0.0
    sub = dist.probs[np.ix_(ia, ib)]
    sub = sub / sub.sum()
    pa, pb = sub.sum(axis=1), sub.sum(axis=0)
    cond = sub.T / pb[:, None]  # p(a|b), rows b
    k = len(ia)
    # centred basis: e_j - e_0 for j >= 1 spans functions modulo constants
    basis = np.zeros((k, k - 1))
    basis[0, :] = -1.0
    basis[1:, :] = np.eye(k - 1)
    num = cond.T @ np.diag(pb) @ cond - np.outer(pa, pa)
    den = np.diag(pa) - np.outer(pa, pa)
    w = gen_eigh(basis.T @ num @ basis, basis.T @ den @ basis, eigvals_only=True)
    return float(min(max(w[-1], 0.0), 1.0))
