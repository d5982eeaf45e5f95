"""Numerical verification campaigns.

Every campaign derives one integer seed per case from the campaign seed, so a
single case can be replayed from the ``seed`` column of its report. Reports
are plain data: a violated property shows up as a failing row, never as an
exception.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .boxes import (
    TSIRELSON_ETA,
    BinaryBoxParams,
    NoSignalingBox,
    chsh_value,
    deterministic_box,
    from_binary_params,
    isotropic,
    mix,
    validate,
)
from .maxcorr import joint_with_inputs, rho_box, rho_value
from .mc_ribbon import PSD_TOLERANCE, mc_inf_ratio_box, mc_membership_box
from .prob import JointDistribution
from .wiring import (
    TrajectoryJoint,
    WiringInstance,
    derived_box,
    execute,
    random_instance,
    sequential_chain,
    verify_chain_rule_lemma,
    verify_structure_lemmas,
)

RHO_TOLERANCE = 1e-9
RIBBON_BAND = 1e-6
INFO_TOLERANCE = 1e-9
LEMMA_TOLERANCE = 1e-9

CSV_COLUMNS = ("case_id", "seed", "quantity", "lhs", "rhs", "margin", "pass")


@dataclass(frozen=True)
class CheckRow:
    """One checked inequality ``lhs <= rhs``; ``margin = rhs - lhs``."""

    case_id: int
    seed: int
    quantity: str
    lhs: float
    rhs: float
    tolerance: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tolerance


@dataclass
class FuzzReport:
    """Outcome of a campaign.

    ``failures`` holds ``(seed, description, values)`` for every failing row,
    and is empty exactly when ``worst_margin >= -tolerance``.
    """

    name: str
    config: dict
    tolerance: float
    rows: list = field(default_factory=list)
    cases_run: int = 0

    def add(self, case_id, seed, quantity, lhs, rhs):
        self.rows.append(CheckRow(int(case_id), int(seed), quantity, float(lhs), float(rhs), self.tolerance))

    @property
    def worst_margin(self) -> float:
        return min((r.margin for r in self.rows), default=math.inf)

    @property
    def failures(self) -> list:
        return [
            (r.seed, f"case {r.case_id}: {r.quantity}", {"lhs": r.lhs, "rhs": r.rhs, "margin": r.margin})
            for r in self.rows
            if not r.passed
        ]

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        return {
            "campaign": self.name,
            "config": self.config,
            "tolerance": self.tolerance,
            "cases_run": self.cases_run,
            "checks": len(self.rows),
            "worst_margin": None if math.isinf(self.worst_margin) else self.worst_margin,
            "failures": [
                {"seed": s, "description": d, "values": v} for s, d, v in self.failures
            ],
        }


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def report_csv(report: FuzzReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([r.case_id, r.seed, r.quantity, _fmt(r.lhs), _fmt(r.rhs), _fmt(r.margin),
                    "true" if r.passed else "false"])
    return buf.getvalue()


def report_json(report: FuzzReport) -> str:
    return json.dumps(report.summary(), indent=1, sort_keys=True) + "\n"


def write_report(report: FuzzReport, stem) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json``; returns both paths."""
    stem = Path(stem)
    csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
    csv_path.write_text(report_csv(report))
    json_path.write_text(report_json(report))
    return csv_path, json_path


def case_seeds(seed: int, n_cases: int) -> list[int]:
    """Independent per-case integer seeds derived from the campaign seed."""
    children = np.random.SeedSequence(seed).spawn(n_cases)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for c in children]


# ---------------------------------------------------------------------------
# random boxes
# ---------------------------------------------------------------------------


def pr_vertex(rng, x_card=2, y_card=2, d=2) -> NoSignalingBox:
    """A PR-type vertex ``b - a = x y (mod d)`` under random input and output relabelling."""
    xs = rng.permutation(x_card)
    ys = rng.permutation(y_card)
    fa = rng.integers(d, size=x_card)
    fb = rng.integers(d, size=y_card)
    p = np.zeros((x_card, y_card, d, d))
    for x in range(x_card):
        for y in range(y_card):
            for a in range(d):
                b = (a + xs[x] * ys[y]) % d
                p[x, y, (a + fa[x]) % d, (b + fb[y]) % d] = 1.0 / d
    return validate(p)


def random_local_vertex(rng, x_card=2, y_card=2, a_card=2, b_card=2) -> NoSignalingBox:
    return deterministic_box(rng.integers(a_card, size=x_card), rng.integers(b_card, size=y_card), a_card, b_card)


def random_box(rng, x_card=2, y_card=2, d=2, n_local=None, pr_weight=True) -> NoSignalingBox:
    """Dirichlet(1) mixture of random local deterministic vertices and one PR-type vertex.

    Convexity keeps the mixture inside the no-signaling polytope. With
    ``pr_weight=False`` the PR vertex is left out and the box is local.
    """
    k = int(rng.integers(1, 4)) if n_local is None else n_local
    comps = [random_local_vertex(rng, x_card, y_card, d, d) for _ in range(k)]
    if pr_weight:
        comps.append(pr_vertex(rng, x_card, y_card, d))
    w = rng.dirichlet(np.ones(len(comps)))
    w /= w.sum()
    return mix(comps, w)


def random_product_box(rng, x_card=2, y_card=2, a_card=2, b_card=2) -> NoSignalingBox:
    pa = rng.dirichlet(np.ones(a_card), size=x_card)
    pb = rng.dirichlet(np.ones(b_card), size=y_card)
    return validate(np.einsum("xa,yb->xyab", pa, pb))


def _random_case(case_seed, n_boxes, product=False):
    rng = np.random.default_rng(case_seed)
    if product:
        boxes = [random_product_box(rng) for _ in range(n_boxes)]
    else:
        boxes = [random_box(rng) for _ in range(n_boxes)]
    deterministic = bool(rng.random() < 0.5)
    inst = random_instance(boxes, int(rng.integers(2**62)), deterministic=deterministic)
    return rng, boxes, inst


# ---------------------------------------------------------------------------
# campaigns
# ---------------------------------------------------------------------------


def fuzz_rho_monotonicity(n_boxes: int, n_cases: int, seed: int = 0, product: bool = False) -> FuzzReport:
    """``rho(derived) <= max_i rho(box_i)`` on random boxes and random wirings."""
    rep = FuzzReport("rho", {"n_boxes": n_boxes, "n_cases": n_cases, "seed": seed, "product": product},
                     RHO_TOLERANCE)
    for k, s in enumerate(case_seeds(seed, n_cases)):
        _, boxes, inst = _random_case(s, n_boxes, product)
        rhs = max(rho_box(b).rho for b in boxes)
        rep.add(k, s, "rho(derived) <= max rho(box_i)", rho_box(derived_box(inst)).rho, rhs)
        rep.cases_run += 1
    return rep


def fuzz_chain_rho(n_boxes: int, n_cases: int, seed: int = 0) -> FuzzReport:
    """Sequential chains ``x_{i+1} = a_i, y_{i+1} = b_i``: the last box's rho bound."""
    rep = FuzzReport("chain", {"n_boxes": n_boxes, "n_cases": n_cases, "seed": seed}, RHO_TOLERANCE)
    for k, s in enumerate(case_seeds(seed, n_cases)):
        rng = np.random.default_rng(s)
        boxes = [random_box(rng) for _ in range(n_boxes)]
        rhs = max(rho_box(b).rho for b in boxes)
        rep.add(k, s, "rho(chain) <= max rho(box_i)", rho_box(derived_box(sequential_chain(boxes))).rho, rhs)
        rep.cases_run += 1
    return rep


def default_lambda_grid():
    g = [0.0, 0.25, 0.5, 0.75, 1.0]
    return [(a, b) for a in g for b in g]


def fuzz_mc_ribbon_monotonicity(n_boxes: int, n_cases: int, lambda_grid=None, seed: int = 0,
                                product: bool = False) -> FuzzReport:
    """Grid points inside every box's MC ribbon must be inside the derived box's.

    Points whose smallest margin over the input boxes is below the exclusion
    band are skipped. Each row compares ``-margin(derived)`` with the PSD
    tolerance, so a passing row has ``margin(derived) >= -psd_tolerance``.
    """
    grid = list(lambda_grid) if lambda_grid is not None else default_lambda_grid()
    rep = FuzzReport("mc", {"n_boxes": n_boxes, "n_cases": n_cases, "seed": seed,
                            "grid": [list(p) for p in grid], "product": product}, PSD_TOLERANCE)
    for k, s in enumerate(case_seeds(seed, n_cases)):
        _, boxes, inst = _random_case(s, n_boxes, product)
        d = derived_box(inst)
        for pt in grid:
            m_in = min(mc_membership_box(b, pt).min_eigenvalue for b in boxes)
            if m_in <= RIBBON_BAND:
                continue
            m_out = mc_membership_box(d, pt).min_eigenvalue
            rep.add(k, s, f"mc({pt[0]:g},{pt[1]:g}) derived inside", -m_out, 0.0)
        rep.cases_run += 1
    return rep


def _party_ids(traj: TrajectoryJoint):
    """Support cells of the trajectory table and each party's view of them."""
    t = traj.table
    p = t.probs
    n = traj.n
    idx = np.nonzero(p > 0)
    probs = p[idx]
    names = [v for v, _ in t.variables]
    a_axes = [names.index(v) for v in ["pi"] + [f"x{i}" for i in range(n)] + [f"a{i}" for i in range(n)]]
    b_axes = [names.index(v) for v in ["omega"] + [f"y{i}" for i in range(n)] + [f"b{i}" for i in range(n)]]

    def ids(axes):
        key = np.zeros(len(probs), dtype=np.int64)
        for ax in axes:
            key = key * p.shape[ax] + idx[ax]
        return np.unique(key, return_inverse=True)[1].ravel()

    return probs, ids(a_axes), ids(b_axes)


def _mi_with_labels(joint, labels):
    """``I(U; L)`` for ``joint[cell, u]`` and integer labels per cell (nats)."""
    def h(w):
        w = w[w > 0]
        return float(-np.sum(w * np.log(w)))

    pu = joint.sum(axis=0)
    nl = int(labels.max()) + 1
    table = np.zeros((nl, joint.shape[1]))
    np.add.at(table, labels, joint)
    return h(pu) + h(table.sum(axis=1)) - h(table.ravel())


def random_channel(rng, n_cells, ids_a, ids_b):
    """A random ``p(u | cell)``; some draws depend on one party's view only."""
    k = int(rng.integers(2, 7))
    kind = int(rng.integers(4))
    conc = float(10 ** rng.uniform(-1.5, 0.5))
    if kind == 0:
        return rng.dirichlet(np.full(k, conc), size=n_cells)
    base = ids_a if kind == 1 else ids_b if kind == 2 else ids_a * (int(ids_b.max()) + 1) + ids_b
    rows = rng.dirichlet(np.full(k, conc), size=int(base.max()) + 1)
    return rows[base]


def check_hc_wiring_inequality(instance: WiringInstance, pt, n_channels: int = 100, seed: int = 0,
                               inputs=None, case_id: int = 0, report: FuzzReport | None = None) -> FuzzReport:
    """Sample channels on the trajectory table and test
    ``l1 I(U; W_A) + l2 I(U; W_B) <= I(U; W_A W_B)``.

    ``W_A`` is Alice's whole view (order, inputs, outputs), ``W_B`` Bob's.
    This can falsify the inequality but never proves it; ``pt`` should lie
    in every box's HC ribbon. ``inputs`` lists the ``(x', y')`` pairs to use
    (all of them by default).
    """
    l1, l2 = pt
    rep = report or FuzzReport("hc-ineq", {"pt": list(pt), "n_channels": n_channels, "seed": seed},
                               INFO_TOLERANCE)
    if inputs is None:
        inputs = [(xp, yp) for xp in range(instance.alice.external_card)
                  for yp in range(instance.bob.external_card)]
    rng = np.random.default_rng(seed)
    trajs = [execute(instance, xp, yp) for xp, yp in inputs]
    views = [_party_ids(t) for t in trajs]
    for c in range(n_channels):
        j = int(rng.integers(len(trajs)))
        probs, ia, ib = views[j]
        w = random_channel(rng, len(probs), ia, ib)
        joint = probs[:, None] * w
        i_a = _mi_with_labels(joint, ia)
        i_b = _mi_with_labels(joint, ib)
        i_ab = _mi_with_labels(joint, np.arange(len(probs)))
        rep.add(case_id, seed, f"hc-ineq channel {c} at (x',y')={inputs[j]}", l1 * i_a + l2 * i_b, i_ab)
    rep.cases_run += 1
    return rep


def fuzz_hc_wiring_inequality(n_boxes: int, n_cases: int, n_channels: int = 100, seed: int = 0,
                              pts=None) -> FuzzReport:
    """Random instances, each with points drawn from the triangle ``l1 + l2 <= 1``."""
    rep = FuzzReport("hc-ineq", {"n_boxes": n_boxes, "n_cases": n_cases, "n_channels": n_channels,
                                 "seed": seed}, INFO_TOLERANCE)
    for k, s in enumerate(case_seeds(seed, n_cases)):
        rng, _, inst = _random_case(s, n_boxes)
        if pts is None:
            u = rng.dirichlet(np.ones(3))
            pt = (float(u[0]), float(u[1]))
        else:
            pt = pts[k % len(pts)]
        check_hc_wiring_inequality(inst, pt, n_channels, int(rng.integers(2**62)), case_id=k, report=rep)
    return rep


def fuzz_structure_lemmas(n_cases: int, seed: int = 0, max_boxes: int = 3) -> FuzzReport:
    """Both structural checks at a random external input pair of random instances."""
    rep = FuzzReport("lemmas", {"n_cases": n_cases, "seed": seed, "max_boxes": max_boxes}, LEMMA_TOLERANCE)
    for k, s in enumerate(case_seeds(seed, n_cases)):
        rng = np.random.default_rng(s)
        n = int(rng.integers(1, max_boxes + 1))
        _, _, inst = _random_case(int(rng.integers(2**62)), n)
        xp, yp = int(rng.integers(2)), int(rng.integers(2))
        traj = execute(inst, xp, yp)
        r = verify_structure_lemmas(inst, xp, yp, traj)
        c = verify_chain_rule_lemma(inst, xp, yp, traj)
        rep.add(k, s, f"structure residual n={n}", r.max_residual, 0.0)
        rep.add(k, s, f"chain-rule residual n={n}", c.max_residual, 0.0)
        rep.cases_run += 1
    return rep


def fuzz_input_bound(n_cases: int, seed: int = 0) -> FuzzReport:
    """``rho(AX, BY) <= max(rho(X, Y), rho_box)`` and ``rho(A, B) <= rho(AX, BY)``."""
    rep = FuzzReport("inputs", {"n_cases": n_cases, "seed": seed}, RHO_TOLERANCE)
    for k, s in enumerate(case_seeds(seed, n_cases)):
        rng = np.random.default_rng(s)
        box = random_box(rng)
        q = JointDistribution(rng.dirichlet(np.full(4, float(10 ** rng.uniform(-1, 1)))).reshape(2, 2))
        axby = joint_with_inputs(box, q)
        ab = JointDistribution(np.einsum("xy,xyab->ab", q.probs, box.p))
        r_axby = rho_value(axby)
        rep.add(k, s, "rho(AX,BY) <= max(rho(X,Y), rho_box)", r_axby, max(rho_value(q), rho_box(box).rho))
        rep.add(k, s, "rho(A,B) <= rho(AX,BY)", rho_value(ab), r_axby)
        rep.cases_run += 1
    return rep


# ---------------------------------------------------------------------------
# isotropic boxes and the CHSH frontier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsotropicRow:
    eta: float
    rho: float
    chsh: float
    inf_ratio: float


def isotropic_scan(eta_grid: Sequence[float], n_max: int = 10_000) -> list[IsotropicRow]:
    rows = []
    for eta in eta_grid:
        box = isotropic(float(eta))
        rows.append(IsotropicRow(float(eta), rho_box(box).rho, chsh_value(box), mc_inf_ratio_box(box, n_max)))
    return rows


def strictly_separated(rows: Sequence[IsotropicRow]) -> bool:
    """``rho`` strictly increases along increasing ``eta``."""
    ordered = sorted(rows, key=lambda r: r.eta)
    return all(b.rho > a.rho for a, b in zip(ordered, ordered[1:]) if b.eta > a.eta)


def isotropic_csv(rows: Sequence[IsotropicRow]) -> str:
    lines = ["eta,rho,chsh,inf_ratio"]
    lines += [",".join(_fmt(v) for v in (r.eta, r.rho, r.chsh, r.inf_ratio)) for r in rows]
    return "\n".join(lines) + "\n"


def _max_parity_sum(alpha, beta):
    """Largest ``sum (-1)^{xy} zeta_xy`` allowed by the ranges of ``zeta``."""
    tot = 0.0
    for x in range(2):
        for y in range(2):
            if x * y == 0:
                tot += 1 - abs(alpha[x] - beta[y])
            else:
                tot += 1 - abs(alpha[x] + beta[y])
    return tot


def sample_frontier_params(eta: float, rng, max_tries: int = 1000) -> BinaryBoxParams:
    """Random binary parameters with ``sum (-1)^{xy} zeta_xy >= 4 eta``.

    Marginal biases are drawn at a random scale, then shrunk towards zero
    until the extreme correlators can reach the threshold (at ``eta = 1``
    only unbiased marginals can). Each correlator is then placed below its
    extreme (in the ``(-1)^{xy}`` direction) by a random slack, the slacks
    splitting a random fraction of the spare budget (all of it for a quarter
    of the draws, which then sit exactly on the threshold).
    """
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    for _ in range(max_tries):
        scale = 10 ** rng.uniform(-3, 0)
        alpha = scale * rng.uniform(-1, 1, 2)
        beta = scale * rng.uniform(-1, 1, 2)
        if _max_parity_sum(alpha, beta) < 4 * eta:
            # the reachable sum is 4 at zero bias and falls as the biases grow
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if _max_parity_sum(mid * alpha, mid * beta) >= 4 * eta:
                    lo = mid
                else:
                    hi = mid
            alpha, beta = lo * alpha, lo * beta
        budget = max(_max_parity_sum(alpha, beta) - 4 * eta, 0.0)
        # a quarter of the draws spend the whole budget and sit on the threshold
        frac = 1.0 if rng.uniform() < 0.25 else rng.uniform()
        slack = budget * frac * rng.dirichlet(np.ones(4))
        zeta = np.zeros((2, 2))
        ok = True
        for x in range(2):
            for y in range(2):
                hi = 1 - abs(alpha[x] - beta[y])
                lo = abs(alpha[x] + beta[y]) - 1
                d = slack[2 * x + y]
                if d > hi - lo:
                    ok = False
                zeta[x, y] = hi - d if x * y == 0 else lo + d
        if ok:
            return BinaryBoxParams(tuple(alpha), tuple(beta), tuple(map(tuple, zeta)))
    raise RuntimeError(f"no admissible parameters found for eta={eta} in {max_tries} tries")


def chsh_rho_frontier(eta: float, n_samples: int, seed: int = 0) -> FuzzReport:
    """Boxes with ``CHSH >= (1 + eta)/2`` must have ``rho_box >= eta`` when ``eta >= 1/sqrt(2)``."""
    if eta < TSIRELSON_ETA - 1e-15 or eta > 1:
        raise ValueError(f"eta must lie in [1/sqrt(2), 1], got {eta}")
    rep = FuzzReport("frontier", {"eta": eta, "n_samples": n_samples, "seed": seed}, RHO_TOLERANCE)
    for k, s in enumerate(case_seeds(seed, n_samples)):
        rng = np.random.default_rng(s)
        box = from_binary_params(sample_frontier_params(eta, rng))
        if chsh_value(box) < (1 + eta) / 2 - 1e-12:
            raise AssertionError("sampler produced a box below the CHSH threshold")
        rep.add(k, s, "eta <= rho_box", eta, rho_box(box).rho)
        rep.cases_run += 1
    return rep


@dataclass(frozen=True)
class MixtureVerdict:
    """``status`` is one of ``hypothesis-not-met``, ``component-found``, ``pivot-failed``."""

    status: str
    mixture_chsh: float
    component: int | None = None
    component_chsh: float | None = None
    component_rho: float | None = None
    rho_bound_holds: bool | None = None


def common_randomness_argument(eta2: float, boxes: Sequence[NoSignalingBox], weights) -> MixtureVerdict:
    """Locate a mixture component reaching the CHSH threshold.

    CHSH is linear, so a mixture at or above ``(1 + eta2)/2`` has some
    positive-weight component at or above it; for ``eta2 >= 1/sqrt(2)`` that
    component's ``rho`` must then be at least ``eta2``.
    """
    if any(not b.is_binary for b in boxes):
        raise ValueError("every component must be a binary box")
    w = np.asarray(weights, dtype=float)
    threshold = (1 + eta2) / 2
    total = chsh_value(mix(boxes, w))
    if total < threshold - 1e-12:
        return MixtureVerdict("hypothesis-not-met", total)
    vals = [chsh_value(b) for b in boxes]
    cands = [r for r in range(len(boxes)) if w[r] > 0 and vals[r] >= threshold - 1e-12]
    if not cands:
        return MixtureVerdict("pivot-failed", total)
    r = max(cands, key=lambda i: (vals[i], -i))
    rho_r = rho_box(boxes[r]).rho
    holds = rho_r >= eta2 - RHO_TOLERANCE if eta2 >= TSIRELSON_ETA else None
    status = "component-found" if holds in (True, None) else "pivot-failed"
    return MixtureVerdict(status, total, r, vals[r], rho_r, holds)
