"""Symbolic linear-operator algebra.

Reduction of a solver expression yields its update map u -> M u + N f with
M, N trees over this algebra. The trees are evaluated either as Fourier
symbols (lfa module) or as explicit matrices (tests, coarse solves).

Every node knows the grid level of its domain and range; products compose
right-to-left like matrix products and must agree on intermediate levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .stencils import Stencil

RED = "red"
BLACK = "black"


@dataclass(frozen=True)
class Identity:
    level: int


@dataclass(frozen=True)
class ZeroOp:
    domain_level_: int
    range_level_: int


@dataclass(frozen=True)
class StencilOp:
    stencil: Stencil
    level: int


@dataclass(frozen=True)
class DiagInverse:
    stencil: Stencil
    level: int


@dataclass(frozen=True)
class ColorProjection:
    color: str
    level: int

    def __post_init__(self) -> None:
        if self.color not in (RED, BLACK):
            raise ValueError(f"color must be red or black, got {self.color}")


@dataclass(frozen=True)
class RestrictionOp:
    """Full-weighting style restriction from `level` to `level - 1`."""

    stencil: Stencil
    level: int


@dataclass(frozen=True)
class ProlongationOp:
    """Interpolation from `level - 1` to `level`; stencil in fine-grid form."""

    stencil: Stencil
    level: int


@dataclass(frozen=True)
class CoarseInverse:
    """Exact inverse of the (rediscretized) operator on `level`."""

    stencil: Stencil
    level: int


@dataclass(frozen=True)
class Scale:
    factor: float
    child: "OpExpr"


@dataclass(frozen=True)
class OpSum:
    terms: tuple["OpExpr", ...]


@dataclass(frozen=True)
class OpProduct:
    factors: tuple["OpExpr", ...]


OpExpr = Union[
    Identity, ZeroOp, StencilOp, DiagInverse, ColorProjection,
    RestrictionOp, ProlongationOp, CoarseInverse, Scale, OpSum, OpProduct,
]


def domain_level(op: OpExpr) -> int:
    if isinstance(op, ZeroOp):
        return op.domain_level_
    if isinstance(op, RestrictionOp):
        return op.level
    if isinstance(op, ProlongationOp):
        return op.level - 1
    if isinstance(op, Scale):
        return domain_level(op.child)
    if isinstance(op, OpSum):
        return domain_level(op.terms[0])
    if isinstance(op, OpProduct):
        return domain_level(op.factors[-1])
    return op.level


def range_level(op: OpExpr) -> int:
    if isinstance(op, ZeroOp):
        return op.range_level_
    if isinstance(op, RestrictionOp):
        return op.level - 1
    if isinstance(op, ProlongationOp):
        return op.level
    if isinstance(op, Scale):
        return range_level(op.child)
    if isinstance(op, OpSum):
        return range_level(op.terms[0])
    if isinstance(op, OpProduct):
        return range_level(op.factors[0])
    return op.level


def is_zero(op: OpExpr) -> bool:
    return isinstance(op, ZeroOp)


def add(a: OpExpr, b: OpExpr) -> OpExpr:
    if (domain_level(a), range_level(a)) != (domain_level(b), range_level(b)):
        raise ValueError("level mismatch in operator sum")
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    terms: list[OpExpr] = []
    for item in (a, b):
        terms.extend(item.terms if isinstance(item, OpSum) else (item,))
    return OpSum(tuple(terms))


def mul(a: OpExpr, b: OpExpr) -> OpExpr:
    """Composition a @ b (apply b first)."""
    if domain_level(a) != range_level(b):
        raise ValueError(
            f"level mismatch in operator product: {domain_level(a)} vs {range_level(b)}")
    if is_zero(a) or is_zero(b):
        return ZeroOp(domain_level(b), range_level(a))
    if isinstance(a, Identity):
        return b
    if isinstance(b, Identity):
        return a
    factors: list[OpExpr] = []
    for item in (a, b):
        factors.extend(item.factors if isinstance(item, OpProduct) else (item,))
    return OpProduct(tuple(factors))


def scale(factor: float, op: OpExpr) -> OpExpr:
    if is_zero(op) or factor == 0.0:
        return ZeroOp(domain_level(op), range_level(op))
    if isinstance(op, Scale):
        return Scale(factor * op.factor, op.child)
    return Scale(factor, op)


def children(op: OpExpr) -> tuple[OpExpr, ...]:
    if isinstance(op, Scale):
        return (op.child,)
    if isinstance(op, OpSum):
        return op.terms
    if isinstance(op, OpProduct):
        return op.factors
    return ()


def levels_used(op: OpExpr) -> set[int]:
    found = {domain_level(op), range_level(op)}
    for c in children(op):
        found |= levels_used(c)
    return found
