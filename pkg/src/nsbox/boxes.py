"""Bipartite no-signaling boxes ``p(a, b | x, y)``.

The canonical representation is the raw conditional table indexed
``p[x, y, a, b]`` (0-based). The binary ``(alpha, beta, zeta)`` form is a
view onto binary boxes:

    p(a, b | x, y) = (1 + (-1)^a alpha_x + (-1)^b beta_y + (-1)^(a+b) zeta_xy) / 4
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .prob import JointDistribution

NS_TOLERANCE = 1e-9


class BoxValidationError(ValueError):
    """Base class for rejected box tables."""


class NegativeEntry(BoxValidationError):
    def __init__(self, index, value):
        self.index = tuple(int(i) for i in index)
        self.value = float(value)
        super().__init__(f"NegativeEntry: p{list(self.index)} = {self.value:.3e}")


class NotNormalized(BoxValidationError):
    def __init__(self, x, y, deficit):
        self.x, self.y, self.deficit = int(x), int(y), float(deficit)
        super().__init__(
            f"NotNormalized: sum of p(.,.|x={self.x},y={self.y}) is off by {self.deficit:.3e}"
        )


class Signaling(BoxValidationError):
    def __init__(self, side, inputs, deviation):
        self.side = side
        self.inputs = tuple(int(i) for i in inputs)
        self.deviation = float(deviation)
        other = "y" if side == "A" else "x"
        super().__init__(
            f"Signaling: marginal of {side} depends on {other}; inputs {self.inputs}, "
            f"max deviation {self.deviation:.3e}"
        )


@dataclass(frozen=True, eq=False)
class NoSignalingBox:
    """A validated no-signaling box. Build with :func:`validate` or the helpers."""

    p: np.ndarray

    @property
    def x_card(self) -> int:
        return self.p.shape[0]

    @property
    def y_card(self) -> int:
        return self.p.shape[1]

    @property
    def a_card(self) -> int:
        return self.p.shape[2]

    @property
    def b_card(self) -> int:
        return self.p.shape[3]

    @property
    def shape(self):
        return self.p.shape

    @property
    def is_binary(self) -> bool:
        return self.p.shape == (2, 2, 2, 2)

    def marginal_a(self) -> np.ndarray:
        """``p(a | x)`` as an ``(x_card, a_card)`` array (taken at ``y = 0``)."""
        return self.p[:, 0].sum(axis=2)

    def marginal_b(self) -> np.ndarray:
        """``p(b | y)`` as a ``(y_card, b_card)`` array (taken at ``x = 0``)."""
        return self.p[0].sum(axis=1)

    def allclose(self, other: "NoSignalingBox", atol: float = 1e-12) -> bool:
        return self.shape == other.shape and bool(np.max(np.abs(self.p - other.p)) <= atol)

    def __repr__(self):
        return f"NoSignalingBox(x={self.x_card}, y={self.y_card}, a={self.a_card}, b={self.b_card})"


def validate(table, tolerance: float = NS_TOLERANCE) -> NoSignalingBox:
    """Check normalization, positivity and no-signaling; return a box.

    Raises the first violated constraint, carrying the worst magnitude:
    :class:`NegativeEntry`, :class:`NotNormalized` or :class:`Signaling`.
    """
    p = np.array(table, dtype=float)
    if p.ndim != 4 or min(p.shape) < 1:
        raise BoxValidationError(f"expected a 4-d table p[x][y][a][b], got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise BoxValidationError("table contains non-finite entries")
    idx = np.unravel_index(np.argmin(p), p.shape)
    if p[idx] < -tolerance:
        raise NegativeEntry(idx, p[idx])
    sums = p.sum(axis=(2, 3))
    dev = np.abs(sums - 1.0)
    if dev.max() > tolerance:
        x, y = np.unravel_index(np.argmax(dev), dev.shape)
        raise NotNormalized(x, y, sums[x, y] - 1.0)
    pa = p.sum(axis=3)  # (x, y, a)
    dev_a = np.abs(pa - pa[:, :1, :]).max(axis=2)  # (x, y) vs y=0
    pb = p.sum(axis=2)  # (x, y, b)
    dev_b = np.abs(pb - pb[:1, :, :]).max(axis=2)  # (x, y) vs x=0
    if dev_a.max() > tolerance or dev_b.max() > tolerance:
        if dev_a.max() >= dev_b.max():
            x, y = np.unravel_index(np.argmax(dev_a), dev_a.shape)
            raise Signaling("A", (x, y), dev_a[x, y])
        x, y = np.unravel_index(np.argmax(dev_b), dev_b.shape)
        raise Signaling("B", (x, y), dev_b[x, y])
    p = np.clip(p, 0.0, None)
    p.setflags(write=False)
    return NoSignalingBox(p)


def isotropic(eta: float) -> NoSignalingBox:
    """The isotropic box: ``(1 + eta)/4`` when ``a xor b == x*y``, else ``(1 - eta)/4``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    p = np.empty((2, 2, 2, 2))
    for x, y, a, b in np.ndindex(2, 2, 2, 2):
        p[x, y, a, b] = (1 + eta) / 4 if (a ^ b) == x * y else (1 - eta) / 4
    return validate(p)


def product_box(p_a_given_x, p_b_given_y) -> NoSignalingBox:
    """Local box ``p(a|x) p(b|y)`` from row-stochastic matrices."""
    pa = np.asarray(p_a_given_x, dtype=float)
    pb = np.asarray(p_b_given_y, dtype=float)
    return validate(np.einsum("xa,yb->xyab", pa, pb))


def deterministic_box(fa, fb, a_card: int, b_card: int) -> NoSignalingBox:
    """Local deterministic box ``a = fa[x]``, ``b = fb[y]``."""
    pa = np.eye(a_card)[list(fa)]
    pb = np.eye(b_card)[list(fb)]
    return product_box(pa, pb)


def chsh_value(box: NoSignalingBox) -> float:
    """Winning probability of the CHSH game, ``(1/4) sum delta[a xor b, xy] p(a,b|x,y)``."""
    if not box.is_binary:
        raise ValueError(f"CHSH needs a binary box, got {box!r}")
    total = 0.0
    for x, y, a, b in np.ndindex(2, 2, 2, 2):
        if (a ^ b) == x * y:
            total += box.p[x, y, a, b]
    return total / 4.0


@dataclass(frozen=True)
class BinaryBoxParams:
    alpha: tuple[float, float]
    beta: tuple[float, float]
    zeta: tuple[tuple[float, float], tuple[float, float]]

    def violations(self, tol: float = 1e-12):
        """List of ``(x, y, message)`` for every violated range constraint."""
        out = []
        for x in range(2):
            if abs(self.alpha[x]) > 1 + tol:
                out.append((x, None, f"|alpha_{x}| = {abs(self.alpha[x]):.6g} > 1"))
        for y in range(2):
            if abs(self.beta[y]) > 1 + tol:
                out.append((None, y, f"|beta_{y}| = {abs(self.beta[y]):.6g} > 1"))
        for x in range(2):
            for y in range(2):
                a, b, z = self.alpha[x], self.beta[y], self.zeta[x][y]
                hi, lo = 1 - abs(a - b), abs(a + b) - 1
                if z > hi + tol or z < lo - tol:
                    out.append((x, y, f"zeta_{x}{y} = {z:.6g} outside [{lo:.6g}, {hi:.6g}]"))
        return out


def from_binary_params(params: BinaryBoxParams, tolerance: float = 1e-12) -> NoSignalingBox:
    bad = params.violations(tolerance)
    if bad:
        x, y, msg = bad[0]
        raise BoxValidationError(f"invalid binary parameters at (x={x}, y={y}): {msg}")
    p = np.empty((2, 2, 2, 2))
    for x, y, a, b in np.ndindex(2, 2, 2, 2):
        p[x, y, a, b] = 0.25 * (
            1
            + (-1) ** a * params.alpha[x]
            + (-1) ** b * params.beta[y]
            + (-1) ** (a + b) * params.zeta[x][y]
        )
    return validate(p)


def to_binary_params(box: NoSignalingBox) -> BinaryBoxParams:
    if not box.is_binary:
        raise ValueError(f"binary parametrization needs a binary box, got {box!r}")
    sgn = np.array([1.0, -1.0])
    p = box.p
    alpha = tuple(float(np.einsum("ab,a->", p[x, 0], sgn)) for x in range(2))
    beta = tuple(float(np.einsum("ab,b->", p[0, y], sgn)) for y in range(2))
    zeta = tuple(
        tuple(float(np.einsum("ab,a,b->", p[x, y], sgn, sgn)) for y in range(2)) for x in range(2)
    )
    return BinaryBoxParams(alpha, beta, zeta)


def conditional_joint(box: NoSignalingBox, x: int, y: int) -> JointDistribution:
    """Output distribution ``p(a, b | x, y)`` for a fixed input pair."""
    if not (0 <= x < box.x_card and 0 <= y < box.y_card):
        raise IndexError(f"input pair ({x}, {y}) out of range for {box!r}")
    return JointDistribution(box.p[x, y])


def mix(boxes, weights) -> NoSignalingBox:
    """Convex combination ``sum_r w_r q_r``."""
    boxes = list(boxes)
    w = np.asarray(weights, dtype=float)
    if len(boxes) != len(w) or not boxes:
        raise ValueError("need one weight per box")
    if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise ValueError("weights must be a probability vector")
    shape = boxes[0].shape
    for b in boxes:
        if b.shape != shape:
            raise ValueError(f"shape mismatch: {b.shape} vs {shape}")
    return validate(np.tensordot(w, np.stack([b.p for b in boxes]), axes=1))


# ---------------------------------------------------------------------------
# JSON box files
# ---------------------------------------------------------------------------


def box_to_dict(box: NoSignalingBox) -> dict:
    return {
        "x_card": box.x_card,
        "y_card": box.y_card,
        "a_card": box.a_card,
        "b_card": box.b_card,
        "p": box.p.tolist(),
    }


def box_from_dict(data: dict, tolerance: float = NS_TOLERANCE) -> NoSignalingBox:
    try:
        cards = tuple(int(data[k]) for k in ("x_card", "y_card", "a_card", "b_card"))
        p = np.array(data["p"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise BoxValidationError(f"malformed box record: {exc}") from exc
    if p.shape != cards:
        raise BoxValidationError(f"table shape {p.shape} does not match declared cards {cards}")
    return validate(p, tolerance)


def load_box(path, tolerance: float = NS_TOLERANCE) -> NoSignalingBox:
    with open(path) as fh:
        data = json.load(fh)
    return box_from_dict(data, tolerance)


def dumps_record(record: dict) -> str:
    """JSON text with one top-level key per line and compact values."""
    items = [f"{json.dumps(k)}: {json.dumps(v)}" for k, v in record.items()]
    return "{\n " + ",\n ".join(items) + "\n}\n"


def save_box(box: NoSignalingBox, path) -> None:
    Path(path).write_text(dumps_record(box_to_dict(box)))


TSIRELSON_ETA = 1.0 / math.sqrt(2.0)
