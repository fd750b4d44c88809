"""Exact rational piecewise polynomials on the real line."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = ["Poly", "PiecewisePolynomial"]

Poly = tuple[Fraction, ...]  # coefficients, lowest degree first


def _trim(p: Sequence[Fraction]) -> Poly:
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return tuple(Fraction(c) for c in p)


def padd(p: Poly, q: Poly) -> Poly:
    m = max(len(p), len(q))
    return _trim(
        (p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(m)
    )


def pscale(p: Poly, c: Fraction) -> Poly:
    return _trim(c * a for a in p)


def peval(p: Poly, x):
    acc = 0 * x
    for c in reversed(p):
        acc = acc * x + c
    return acc


def pantiderivative(p: Poly) -> Poly:
    return _trim([Fraction(0)] + [c / (i + 1) for i, c in enumerate(p)])


def pformat(p: Poly, var: str = "t") -> str:
    if not p:
        return "0"
    terms = []
    for i, c in enumerate(p):
        if c == 0:
            continue
        if i == 0:
            terms.append(str(c))
        elif i == 1:
            terms.append(f"{c}*{var}")
        else:
            terms.append(f"{c}*{var}^{i}")
    return " + ".join(terms)


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Piece ``k`` lives on ``[b[k-1], b[k])`` with ``b[-1] = -inf`` and ``b[len] = +inf``.

    So ``len(pieces) == len(breakpoints) + 1``. Instances are normalized:
    adjacent identical pieces are merged.
    """

    breakpoints: tuple[Fraction, ...]
    pieces: tuple[Poly, ...]

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more piece than breakpoints")
        if any(a >= b for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @classmethod
    def make(cls, breakpoints: Sequence, pieces: Sequence[Sequence]) -> "PiecewisePolynomial":
        bps = [Fraction(b) for b in breakpoints]
        pcs = [_trim(p) for p in pieces]
        merged_b: list[Fraction] = []
        merged_p: list[Poly] = [pcs[0]]
        for b, p in zip(bps, pcs[1:]):
            if p == merged_p[-1]:
                continue
            merged_b.append(b)
            merged_p.append(p)
        return cls(tuple(merged_b), tuple(merged_p))

    @classmethod
    def constant(cls, c) -> "PiecewisePolynomial":
        return cls.make((), [(Fraction(c),)])

    @classmethod
    def zero(cls) -> "PiecewisePolynomial":
        return cls.make((), [()])

    def piece_index(self, t) -> int:
        return bisect_right(self.breakpoints, t)

    def piece_at(self, t) -> Poly:
        return self.pieces[self.piece_index(t)]

    def __call__(self, t):
        """Exact for rational ``t``; floats are evaluated in float."""
        return peval(self.piece_at(t), t)

    def scale(self, c) -> "PiecewisePolynomial":
        c = Fraction(c)
        return PiecewisePolynomial.make(self.breakpoints, [pscale(p, c) for p in self.pieces])

    def __add__(self, other: "PiecewisePolynomial") -> "PiecewisePolynomial":
        bps = sorted(set(self.breakpoints) | set(other.breakpoints))
        # probe each interval at a point strictly inside it to pick the pieces
        probes = _interval_probes(bps)
        pieces = [padd(self.piece_at(x), other.piece_at(x)) for x in probes]
        return PiecewisePolynomial.make(bps, pieces)

    def integrate_from(self, a) -> "PiecewisePolynomial":
        """F(t) = integral of self over [a, max(t, a)]; zero for t <= a."""
        a = Fraction(a)
        bps = [a] + [b for b in self.breakpoints if b > a]
        pieces: list[Poly] = [()]
        value_at_left = Fraction(0)
        for k, left in enumerate(bps):
            p = self.piece_at(left)
            anti = pantiderivative(p)
            shift = value_at_left - peval(anti, left)
            piece = padd(anti, (shift,))
            pieces.append(piece)
            if k + 1 < len(bps):
                value_at_left = peval(piece, bps[k + 1])
        return PiecewisePolynomial.make(bps, pieces)

    def support_start(self) -> Fraction | None:
        """Largest point with the function identically zero to its left, or None."""
        if self.pieces[0]:
            return None
        for b, p in zip(self.breakpoints, self.pieces[1:]):
            if p:
                return b
        return None

    def degree(self, piece: int = -1) -> int:
        return len(self.pieces[piece]) - 1

    def is_continuous(self) -> bool:
        for k, b in enumerate(self.breakpoints):
            if peval(self.pieces[k], b) != peval(self.pieces[k + 1], b):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "breakpoints": [str(b) for b in self.breakpoints],
            "pieces": [[str(c) for c in p] for p in self.pieces],
        }

    def describe(self, var: str = "t") -> str:
        parts = []
        edges = [None, *self.breakpoints, None]
        for k, p in enumerate(self.pieces):
            lo, hi = edges[k], edges[k + 1]
            dom = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'})"
            parts.append(f"{dom}: {pformat(p, var)}")
        return "; ".join(parts)


def _interval_probes(bps: Sequence[Fraction]) -> list[Fraction]:
    if not bps:
        return [Fraction(0)]
    probes = [bps[0] - 1]
    probes += [(lo + hi) / 2 for lo, hi in zip(bps, bps[1:])]
    probes.append(bps[-1] + 1)
    return probes
