"""Adaptive wirings of no-signaling boxes.

Each party holds one side of ``n`` boxes and an external input. At every step
they pick an unused box and an input for it from a stochastic rule that sees
their own history: the ordered list of ``(box, input, output)`` triples so far
together with the external input. After all boxes are used a final rule maps
the full history to the party's output.

A history determines the party's usage order, inputs and outputs, so rule
tables are keyed by ``(external_input, history)``. Histories without an entry
get a uniform row; such rows only matter on histories the party never reaches
with positive probability.

Box indices, inputs and outputs are 0-based throughout.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .boxes import NS_TOLERANCE, NoSignalingBox, box_from_dict, box_to_dict, dumps_record, load_box, validate
from .prob import MAX_TABLE_ENTRIES, TableDistribution, TableTooLarge

MAX_BOXES = 4
ROW_RENORMALIZE_TOL = 1e-12

History = tuple  # tuple[tuple[int, int, int], ...]


class WiringError(ValueError):
    """Malformed strategy or wiring instance."""


class TooManyBoxes(WiringError):
    def __init__(self, n, cap=MAX_BOXES):
        self.n, self.cap = n, cap
        super().__init__(f"{n} boxes requested; the enumeration cap is {cap}")


def _clean_row(row, length, what):
    row = np.asarray(row, dtype=float)
    if row.shape != (length,):
        raise WiringError(f"{what}: expected {length} entries, got shape {row.shape}")
    if np.any(row < 0) or not np.all(np.isfinite(row)):
        raise WiringError(f"{what}: entries must be finite and non-negative")
    s = row.sum()
    if abs(s - 1.0) > ROW_RENORMALIZE_TOL:
        raise WiringError(f"{what}: row sums to {s!r}")
    if abs(s - 1.0) > 1e-15:
        # leave rounding-level sums alone so saved rows reload bit for bit
        row = row / s
    row.setflags(write=False)
    return row


@dataclass(frozen=True, eq=False)
class PartyStrategy:
    """One party's wiring strategy.

    Parameters
    ----------
    input_cards, output_cards : tuple of int
        This party's alphabets on each box.
    external_card : int
        Size of the external input alphabet (``x'`` or ``y'``).
    final_card : int
        Size of the final output alphabet.
    steps : mapping (external_input, history) -> row
        Probabilities over :meth:`options` of the history.
    output : mapping (external_input, full history) -> row over ``final_card``.
    """

    input_cards: tuple
    output_cards: tuple
    external_card: int
    final_card: int
    steps: Mapping
    output: Mapping

    def __post_init__(self):
        n = len(self.input_cards)
        if len(self.output_cards) != n or n == 0:
            raise WiringError("need one input and one output alphabet per box")
        steps, output = {}, {}
        for key, row in self.steps.items():
            xp, hist = self._check_key(key, full=False)
            steps[(xp, hist)] = _clean_row(row, len(self.options(hist)), f"step rule {key}")
        for key, row in self.output.items():
            xp, hist = self._check_key(key, full=True)
            output[(xp, hist)] = _clean_row(row, self.final_card, f"output rule {key}")
        object.__setattr__(self, "input_cards", tuple(int(c) for c in self.input_cards))
        object.__setattr__(self, "output_cards", tuple(int(c) for c in self.output_cards))
        object.__setattr__(self, "steps", MappingProxyType(steps))
        object.__setattr__(self, "output", MappingProxyType(output))

    @property
    def n(self) -> int:
        return len(self.input_cards)

    def _check_key(self, key, full):
        xp, hist = key
        xp = int(xp)
        hist = tuple((int(b), int(i), int(o)) for b, i, o in hist)
        if not 0 <= xp < self.external_card:
            raise WiringError(f"external input {xp} out of range")
        used = [b for b, _, _ in hist]
        if len(set(used)) != len(used):
            raise WiringError(f"history {hist} reuses a box")
        for b, i, o in hist:
            if not (0 <= b < self.n and 0 <= i < self.input_cards[b] and 0 <= o < self.output_cards[b]):
                raise WiringError(f"history entry {(b, i, o)} out of range")
        if full and len(hist) != self.n:
            raise WiringError(f"output rule history must use all {self.n} boxes")
        if not full and len(hist) >= self.n:
            raise WiringError("step rule history already uses every box")
        return xp, hist

    def options(self, history) -> list[tuple[int, int]]:
        """Admissible ``(box, input)`` choices after ``history``, in canonical order."""
        used = {b for b, _, _ in history}
        return [(b, i) for b in range(self.n) if b not in used for i in range(self.input_cards[b])]

    def step_row(self, x_prime, history) -> np.ndarray:
        row = self.steps.get((x_prime, history))
        if row is None:
            k = len(self.options(history))
            return np.full(k, 1.0 / k)
        return row

    def output_row(self, x_prime, history) -> np.ndarray:
        row = self.output.get((x_prime, history))
        if row is None:
            return np.full(self.final_card, 1.0 / self.final_card)
        return row

    def is_deterministic(self) -> bool:
        rows = list(self.steps.values()) + list(self.output.values())
        return all(np.count_nonzero(r) == 1 for r in rows)


def _histories(input_cards, output_cards, length, order=None):
    """All histories of the given length (optionally with a fixed box order)."""
    n = len(input_cards)
    orders = [tuple(order[:length])] if order is not None else itertools.permutations(range(n), length)
    for boxes in orders:
        ins = itertools.product(*(range(input_cards[b]) for b in boxes))
        for xs in ins:
            for os_ in itertools.product(*(range(output_cards[b]) for b in boxes)):
                yield tuple(zip(boxes, xs, os_))


@dataclass(frozen=True, eq=False)
class WiringInstance:
    boxes: tuple
    alice: PartyStrategy
    bob: PartyStrategy

    def __post_init__(self):
        boxes = tuple(self.boxes)
        object.__setattr__(self, "boxes", boxes)
        n = len(boxes)
        if n > MAX_BOXES:
            raise TooManyBoxes(n)
        if self.alice.n != n or self.bob.n != n:
            raise WiringError(f"strategies cover {self.alice.n}/{self.bob.n} boxes, instance has {n}")
        for i, box in enumerate(boxes):
            if (self.alice.input_cards[i], self.alice.output_cards[i]) != (box.x_card, box.a_card):
                raise WiringError(f"Alice's alphabets do not match box {i}")
            if (self.bob.input_cards[i], self.bob.output_cards[i]) != (box.y_card, box.b_card):
                raise WiringError(f"Bob's alphabets do not match box {i}")

    @property
    def n(self) -> int:
        return len(self.boxes)


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def _party_tables(strategy: PartyStrategy, x_prime: int):
    """Return ``F[perm, x_0..x_{n-1}, a_0..a_{n-1}]`` and the final-output rows.

    ``F`` is the product of the step-rule probabilities along the trajectory;
    ``perm`` indexes ``itertools.permutations(range(n))`` and gives the order
    in which boxes are used. The second array appends the final output axis.
    """
    n = strategy.n
    perms = list(itertools.permutations(range(n)))
    ic, oc = strategy.input_cards, strategy.output_cards
    f = np.zeros((len(perms),) + ic + oc)
    out = np.zeros(f.shape + (strategy.final_card,))
    for k, perm in enumerate(perms):
        for xs in itertools.product(*(range(c) for c in ic)):
            for as_ in itertools.product(*(range(c) for c in oc)):
                prob, hist = 1.0, ()
                for b in perm:
                    opts = strategy.options(hist)
                    prob *= strategy.step_row(x_prime, hist)[opts.index((b, xs[b]))]
                    if prob == 0.0:
                        break
                    hist += ((b, xs[b], as_[b]),)
                if prob == 0.0:
                    continue
                f[(k,) + xs + as_] = prob
                out[(k,) + xs + as_] = strategy.output_row(x_prime, hist)
    return f, out


def _letters(n):
    pool = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    xs = [next(pool) for _ in range(n)]
    ys = [next(pool) for _ in range(n)]
    as_ = [next(pool) for _ in range(n)]
    bs = [next(pool) for _ in range(n)]
    return xs, ys, as_, bs, next(pool), next(pool), next(pool), next(pool)


@dataclass(frozen=True, eq=False)
class TrajectoryJoint:
    """Joint law of one wiring run for fixed ``(x', y')``.

    ``table`` has axes ``pi, omega, x0..x{n-1}, y0.., a0.., b0..``. The value
    ``k`` of ``pi`` stands for the order ``perms[k]`` in which Alice uses the
    boxes (her ``j``-th action uses box ``perms[k][j]``); ``omega`` likewise
    for Bob.
    """

    table: TableDistribution
    n: int
    x_prime: int
    y_prime: int
    perms: tuple

    def box_conditional(self, i: int) -> np.ndarray:
        """``p(a_i, b_i | x_i, y_i)`` recovered from the table (NaN where the inputs never occur)."""
        m = self.table.marginal([f"x{i}", f"y{i}", f"a{i}", f"b{i}"]).probs
        tot = m.sum(axis=(2, 3), keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, m / tot, np.nan)

    def input_marginal(self, i: int) -> np.ndarray:
        return self.table.marginal([f"x{i}", f"y{i}"]).probs


def execute(instance: WiringInstance, x_prime: int, y_prime: int) -> TrajectoryJoint:
    """Enumerate every trajectory and return their joint law.

    The probability of a trajectory is the product over boxes of the box
    probability and both parties' step-rule probabilities for choosing that
    box with that input.
    """
    n = instance.n
    alice, bob = instance.alice, instance.bob
    if not (0 <= x_prime < alice.external_card and 0 <= y_prime < bob.external_card):
        raise WiringError(f"external inputs ({x_prime}, {y_prime}) out of range")
    perms = tuple(itertools.permutations(range(n)))
    shape = (len(perms), len(perms)) + alice.input_cards + bob.input_cards + alice.output_cards + bob.output_cards
    size = math.prod(shape)
    if size > MAX_TABLE_ENTRIES:
        raise TableTooLarge(
            f"trajectory table for {n} boxes has {size} entries; the cap is {MAX_TABLE_ENTRIES}"
        )
    fa, _ = _party_tables(alice, x_prime)
    fb, _ = _party_tables(bob, y_prime)
    xs, ys, as_, bs, pa, pb, _, _ = _letters(n)
    operands = [fa, fb] + [box.p for box in instance.boxes]
    subs = [pa + "".join(xs + as_), pb + "".join(ys + bs)]
    subs += [xs[i] + ys[i] + as_[i] + bs[i] for i in range(n)]
    spec = ",".join(subs) + "->" + pa + pb + "".join(xs + ys + as_ + bs)
    probs = np.einsum(spec, *operands, optimize="greedy")
    names = ["pi", "omega"] + [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)]
    names += [f"a{i}" for i in range(n)] + [f"b{i}" for i in range(n)]
    table = TableDistribution(list(zip(names, probs.shape)), probs)
    return TrajectoryJoint(table, n, x_prime, y_prime, perms)


def derived_box(instance: WiringInstance, tolerance: float = NS_TOLERANCE) -> NoSignalingBox:
    """The box ``p(a', b' | x', y')`` produced by the wiring.

    The usage orders are summed out of each party's table before contracting
    with the boxes, so this never builds the full trajectory table.
    """
    n = instance.n
    alice, bob = instance.alice, instance.bob
    xs, ys, as_, bs, pa, pb, ao, bo = _letters(n)
    subs_a = pa + "".join(xs + as_)
    g_a = []
    for xp in range(alice.external_card):
        f, out = _party_tables(alice, xp)
        g_a.append(np.einsum(f"{subs_a},{subs_a}{ao}->{''.join(xs + as_)}{ao}", f, out))
    subs_b = pb + "".join(ys + bs)
    g_b = []
    for yp in range(bob.external_card):
        f, out = _party_tables(bob, yp)
        g_b.append(np.einsum(f"{subs_b},{subs_b}{bo}->{''.join(ys + bs)}{bo}", f, out))
    box_subs = [xs[i] + ys[i] + as_[i] + bs[i] for i in range(n)]
    spec = ",".join(["".join(xs + as_) + ao, "".join(ys + bs) + bo] + box_subs) + "->" + ao + bo
    p = np.zeros((alice.external_card, bob.external_card, alice.final_card, bob.final_card))
    boxes = [box.p for box in instance.boxes]
    for xp in range(alice.external_card):
        for yp in range(bob.external_card):
            p[xp, yp] = np.einsum(spec, g_a[xp], g_b[yp], *boxes, optimize="greedy")
    return validate(p, tolerance)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _side_cards(boxes, side):
    if side == "A":
        return tuple(b.x_card for b in boxes), tuple(b.a_card for b in boxes)
    if side == "B":
        return tuple(b.y_card for b in boxes), tuple(b.b_card for b in boxes)
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def _chain_strategy(boxes, side, selector):
    ic, oc = _side_cards(boxes, side)
    n = len(boxes)
    order = tuple(range(n))
    steps, output = {}, {}
    for xp in range(ic[0]):
        for j in range(n):
            for hist in _histories(ic, oc, j, order):
                row = np.zeros(sum(ic[j:]))
                inp = xp if j == 0 else hist[-1][2]
                # options are (box, input) over unused boxes j..n-1; box j comes first
                row[inp] = 1.0
                steps[(xp, hist)] = row
        for hist in _histories(ic, oc, n, order):
            row = np.zeros(oc[selector])
            row[hist[selector][2]] = 1.0
            output[(xp, hist)] = row
    return PartyStrategy(ic, oc, ic[0], oc[selector], steps, output)


def sequential_chain(boxes: Sequence[NoSignalingBox], output_selector="last") -> WiringInstance:
    """Fixed-order chain: box ``i+1`` gets the outputs of box ``i`` as inputs.

    The external inputs feed box 0. ``output_selector`` picks which box's
    outputs become the final outputs: ``"last"`` or a box index.
    """
    boxes = list(boxes)
    if not boxes:
        raise WiringError("need at least one box")
    if len(boxes) > MAX_BOXES:
        raise TooManyBoxes(len(boxes))
    for i in range(len(boxes) - 1):
        if boxes[i].a_card != boxes[i + 1].x_card or boxes[i].b_card != boxes[i + 1].y_card:
            raise WiringError(
                f"link {i}->{i + 1}: outputs ({boxes[i].a_card}, {boxes[i].b_card}) do not fit "
                f"inputs ({boxes[i + 1].x_card}, {boxes[i + 1].y_card})"
            )
    sel = len(boxes) - 1 if output_selector == "last" else int(output_selector)
    if not 0 <= sel < len(boxes):
        raise WiringError(f"output selector {output_selector!r} out of range")
    return WiringInstance(tuple(boxes), _chain_strategy(boxes, "A", sel), _chain_strategy(boxes, "B", sel))


def identity_wiring(box: NoSignalingBox) -> WiringInstance:
    return sequential_chain([box])


def random_strategy(n: int, boxes: Sequence[NoSignalingBox], external_card: int, rng_seed,
                    deterministic: bool = False, side: str = "A",
                    final_card: int | None = None) -> PartyStrategy:
    """Strategy with a rule row drawn for every history.

    Rows are uniform on the simplex (Dirichlet(1)) or, with ``deterministic``,
    one-hot at a uniformly chosen entry. ``rng_seed`` is anything accepted by
    :func:`numpy.random.default_rng`.
    """
    if n > MAX_BOXES:
        raise TooManyBoxes(n)
    if len(boxes) != n:
        raise WiringError(f"expected {n} boxes, got {len(boxes)}")
    rng = np.random.default_rng(rng_seed)
    ic, oc = _side_cards(boxes, side)
    final_card = oc[0] if final_card is None else int(final_card)

    def draw(k):
        if deterministic:
            row = np.zeros(k)
            row[rng.integers(k)] = 1.0
            return row
        return rng.dirichlet(np.ones(k))

    probe = PartyStrategy(ic, oc, external_card, final_card, {}, {})
    steps, output = {}, {}
    for xp in range(external_card):
        for j in range(n):
            for hist in _histories(ic, oc, j):
                steps[(xp, hist)] = draw(len(probe.options(hist)))
        for hist in _histories(ic, oc, n):
            output[(xp, hist)] = draw(final_card)
    return PartyStrategy(ic, oc, external_card, final_card, steps, output)


def random_instance(boxes: Sequence[NoSignalingBox], rng_seed, deterministic: bool = False,
                    external_cards=(2, 2), final_cards=(2, 2)) -> WiringInstance:
    """Both parties drawn by :func:`random_strategy` from independent child seeds."""
    ss = np.random.SeedSequence(rng_seed) if not isinstance(rng_seed, np.random.SeedSequence) else rng_seed
    sa, sb = ss.spawn(2)
    n = len(boxes)
    alice = random_strategy(n, boxes, external_cards[0], sa, deterministic, "A", final_cards[0])
    bob = random_strategy(n, boxes, external_cards[1], sb, deterministic, "B", final_cards[1])
    return WiringInstance(tuple(boxes), alice, bob)


# ---------------------------------------------------------------------------
# structural identities
# ---------------------------------------------------------------------------


def _transcript_labels(traj: TrajectoryJoint, side: str):
    """Derived per-cell labels for one party, broadcastable to the table.

    Returns a dict with, for each box or action index ``i``:
    ``P{i}`` the action at which box ``i`` is used, ``T{i}`` the transcript
    before box ``i``, ``Tt{i}`` the transcript before action ``i`` and
    ``C{i}`` the (box, input) chosen at action ``i``.
    """
    t = traj.table
    n = traj.n
    x, a = ("x", "a") if side == "A" else ("y", "b")
    ic = tuple(t.cardinality(f"{x}{i}") for i in range(n))
    oc = tuple(t.cardinality(f"{a}{i}") for i in range(n))
    perms = traj.perms
    local_shape = (len(perms),) + ic + oc
    ids: dict = {}
    arrays = {f"{k}{i}": np.zeros(local_shape, dtype=np.int64) for k in ("P", "T", "Tt", "C") for i in range(n)}
    width = max(ic)
    for k, perm in enumerate(perms):
        pos = {b: j for j, b in enumerate(perm)}
        for xs in itertools.product(*(range(c) for c in ic)):
            for as_ in itertools.product(*(range(c) for c in oc)):
                cell = (k,) + xs + as_
                hist = tuple((b, xs[b], as_[b]) for b in perm)
                for i in range(n):
                    arrays[f"P{i}"][cell] = pos[i]
                    arrays[f"T{i}"][cell] = ids.setdefault(hist[: pos[i]], len(ids))
                    arrays[f"Tt{i}"][cell] = ids.setdefault(hist[:i], len(ids))
                    arrays[f"C{i}"][cell] = perm[i] * width + xs[perm[i]]
    # place the local axes into the full table layout
    if side == "A":
        full = (len(perms), 1) + ic + (1,) * n + oc + (1,) * n
    else:
        full = (1, len(perms)) + (1,) * n + ic + (1,) * n + oc
    cards = {"P": n, "T": max(len(ids), 1), "Tt": max(len(ids), 1), "C": n * width}
    return {name: (arr.reshape(full), cards[name.rstrip("0123456789")]) for name, arr in arrays.items()}


def _with_transcripts(traj: TrajectoryJoint) -> TableDistribution:
    t = traj.table
    for side, tag in (("A", "A"), ("B", "B")):
        for name, (labels, card) in _transcript_labels(traj, side).items():
            t = t.with_derived(f"{tag}{name}", labels, card)
    return t


@dataclass(frozen=True)
class StructureReport:
    """Largest absolute residual of each structural identity over all boxes."""

    outputs_independent_of_transcripts: float
    local_markov: float
    output_given_partner: float
    local_choices: float

    @property
    def max_residual(self) -> float:
        return max(self.outputs_independent_of_transcripts, self.local_markov,
                   self.output_given_partner, self.local_choices)


def verify_structure_lemmas(instance: WiringInstance, x_prime: int, y_prime: int,
                            traj: TrajectoryJoint | None = None) -> StructureReport:
    """Evaluate the four families of vanishing conditional informations.

    For each box ``i`` (``T``/``S`` transcripts before box ``i``, ``P``/``O``
    the action index at which it is used, tildes indexing actions)::

        I(A_i B_i ; T_i S_i P_i O_i | X_i Y_i)
        I(A_i ; S_i Y_i O_i | T_i X_i P_i),   I(B_i ; T_i X_i P_i | S_i Y_i O_i)
        I(A_i ; B Y O | T_i X_i P_i B_i Y_i O_i),
        I(B_i ; A X P | T_i A_i X_i P_i S_i Y_i O_i)
        I(~X_i ~P_i ; B Y O | ~T_i),  I(~Y_i ~O_i ; A X P | ~S_i)

    ``traj`` may pass in an already computed :func:`execute` result.
    """
    traj = traj or execute(instance, x_prime, y_prime)
    t = _with_transcripts(traj)
    n = traj.n
    mi = t.mutual_information
    alice_all = ["pi"] + [f"x{j}" for j in range(n)] + [f"a{j}" for j in range(n)]
    bob_all = ["omega"] + [f"y{j}" for j in range(n)] + [f"b{j}" for j in range(n)]
    r = [0.0, 0.0, 0.0, 0.0]
    for i in range(n):
        ai, bi, xi, yi = f"a{i}", f"b{i}", f"x{i}", f"y{i}"
        ti, si, pi, oi = f"AT{i}", f"BT{i}", f"AP{i}", f"BP{i}"
        vals = [
            [mi([ai, bi], [ti, si, pi, oi], [xi, yi])],
            [mi([ai], [si, yi, oi], [ti, xi, pi]), mi([bi], [ti, xi, pi], [si, yi, oi])],
            [
                mi([ai], [v for v in bob_all if v not in (bi, yi)], [ti, xi, pi, bi, yi, oi]),
                mi([bi], [v for v in alice_all if v not in (ai, xi)], [ti, ai, xi, pi, si, yi, oi]),
            ],
            [mi([f"AC{i}"], bob_all, [f"ATt{i}"]), mi([f"BC{i}"], alice_all, [f"BTt{i}"])],
        ]
        for k, group in enumerate(vals):
            r[k] = max(r[k], max(abs(v) for v in group))
    return StructureReport(*r)


@dataclass(frozen=True)
class ChainRuleReport:
    alice_residual: float
    bob_residual: float

    @property
    def max_residual(self) -> float:
        return max(self.alice_residual, self.bob_residual)


def verify_chain_rule_lemma(instance: WiringInstance, x_prime: int, y_prime: int,
                            traj: TrajectoryJoint | None = None) -> ChainRuleReport:
    """Check ``H(A X P) = sum_i [H(~X_i ~P_i | ~T_i) + H(A_i | T_i X_i P_i)]`` for both parties."""
    traj = traj or execute(instance, x_prime, y_prime)
    t = _with_transcripts(traj)
    n = traj.n
    out = []
    for tag, perm, x, a in (("A", "pi", "x", "a"), ("B", "omega", "y", "b")):
        lhs = t.entropy([perm] + [f"{x}{j}" for j in range(n)] + [f"{a}{j}" for j in range(n)])
        rhs = 0.0
        for i in range(n):
            rhs += t.conditional_entropy([f"{tag}C{i}"], [f"{tag}Tt{i}"])
            rhs += t.conditional_entropy([f"{a}{i}"], [f"{tag}T{i}", f"{x}{i}", f"{tag}P{i}"])
        out.append(abs(lhs - rhs))
    return ChainRuleReport(*out)


# ---------------------------------------------------------------------------
# JSON wiring specs
# ---------------------------------------------------------------------------


def history_key(x_prime: int, history) -> str:
    """Canonical row key: ``"x'|box,input,output;box,input,output"``."""
    return f"{x_prime}|" + ";".join(f"{b},{i},{o}" for b, i, o in history)


def parse_history_key(key: str):
    try:
        xp, rest = key.split("|", 1)
        hist = tuple(tuple(int(v) for v in part.split(",")) for part in rest.split(";") if part)
        if any(len(h) != 3 for h in hist):
            raise ValueError
        return int(xp), hist
    except ValueError as exc:
        raise WiringError(f"malformed history key {key!r}") from exc


def _rows_from_json(obj, strategy_probe: PartyStrategy, kind: str):
    rows = {}
    if isinstance(obj, dict) and "map" in obj:
        for key, val in obj["map"].items():
            xp, hist = parse_history_key(key)
            if kind == "step":
                opts = strategy_probe.options(hist)
                try:
                    idx = opts.index((int(val[0]), int(val[1])))
                except (ValueError, TypeError, IndexError) as exc:
                    raise WiringError(f"choice {val!r} is not admissible after {key!r}") from exc
                row = np.zeros(len(opts))
            else:
                idx = int(val)
                if not 0 <= idx < strategy_probe.final_card:
                    raise WiringError(f"output {idx} out of range at {key!r}")
                row = np.zeros(strategy_probe.final_card)
            row[idx] = 1.0
            rows[(xp, hist)] = row
        return rows
    for entry in obj:
        hist = tuple(tuple(int(v) for v in h) for h in entry["history"])
        rows[(int(entry["x_prime"]), hist)] = entry["probs"]
    return rows


def _rows_to_json(rows: Mapping, strategy: PartyStrategy, kind: str):
    keys = sorted(rows, key=lambda k: (k[0], len(k[1]), k[1]))
    if all(np.count_nonzero(rows[k]) == 1 for k in keys):
        out = {}
        for k in keys:
            idx = int(np.flatnonzero(rows[k])[0])
            out[history_key(*k)] = list(strategy.options(k[1])[idx]) if kind == "step" else idx
        return {"map": out}
    return [{"x_prime": k[0], "history": [list(h) for h in k[1]], "probs": rows[k].tolist()} for k in keys]


def _strategy_to_json(s: PartyStrategy) -> dict:
    steps = []
    for j in range(s.n):
        rows = {k: v for k, v in s.steps.items() if len(k[1]) == j}
        steps.append(_rows_to_json(rows, s, "step"))
    return {"steps": steps, "output": _rows_to_json(dict(s.output), s, "output")}


def _strategy_from_json(obj, ic, oc, ext, final) -> PartyStrategy:
    probe = PartyStrategy(ic, oc, ext, final, {}, {})
    steps_obj = obj.get("steps", [])
    if len(steps_obj) > len(ic):
        raise WiringError(f"{len(steps_obj)} step tables for {len(ic)} boxes")
    steps = {}
    for j, table in enumerate(steps_obj):
        for key, row in _rows_from_json(table, probe, "step").items():
            if len(key[1]) != j:
                raise WiringError(f"step table {j} has a history of length {len(key[1])}")
            steps[key] = row
    output = _rows_from_json(obj.get("output", []), probe, "output")
    return PartyStrategy(ic, oc, ext, final, steps, output)


def wiring_to_dict(instance: WiringInstance) -> dict:
    return {
        "boxes": [box_to_dict(b) for b in instance.boxes],
        "alice": _strategy_to_json(instance.alice),
        "bob": _strategy_to_json(instance.bob),
        "x_prime_card": instance.alice.external_card,
        "y_prime_card": instance.bob.external_card,
        "a_prime_card": instance.alice.final_card,
        "b_prime_card": instance.bob.final_card,
    }


def wiring_from_dict(data: dict, base_dir=".", tolerance: float = NS_TOLERANCE) -> WiringInstance:
    """Build an instance from a wiring-spec record.

    Boxes are inline box records or ``{"file": path}`` references resolved
    against ``base_dir``. ``a_prime_card``/``b_prime_card`` default to the
    output alphabet of box 0 on that side.
    """
    try:
        boxes = []
        for b in data["boxes"]:
            if "file" in b:
                boxes.append(load_box(Path(base_dir) / b["file"], tolerance))
            else:
                boxes.append(box_from_dict(b, tolerance))
        if not boxes:
            raise WiringError("a wiring needs at least one box")
        if len(boxes) > MAX_BOXES:
            raise TooManyBoxes(len(boxes))
        ic_a, oc_a = _side_cards(boxes, "A")
        ic_b, oc_b = _side_cards(boxes, "B")
        xpc, ypc = int(data["x_prime_card"]), int(data["y_prime_card"])
        apc = int(data.get("a_prime_card", oc_a[0]))
        bpc = int(data.get("b_prime_card", oc_b[0]))
        alice = _strategy_from_json(data["alice"], ic_a, oc_a, xpc, apc)
        bob = _strategy_from_json(data["bob"], ic_b, oc_b, ypc, bpc)
    except (KeyError, TypeError) as exc:
        raise WiringError(f"malformed wiring spec: {exc!r}") from exc
    return WiringInstance(tuple(boxes), alice, bob)


def load_wiring(path, tolerance: float = NS_TOLERANCE) -> WiringInstance:
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    return wiring_from_dict(data, path.parent, tolerance)


def save_wiring(instance: WiringInstance, path) -> None:
    Path(path).write_text(dumps_record(wiring_to_dict(instance)))
