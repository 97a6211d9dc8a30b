"""Update-map semantics: turn a solver expression into u -> M u + N f.

The reduction follows the state-tuple evaluation rules of the language:
iterate adds the weighted correction, residual creates one, the inverse
diagonal transforms it, coarse cycles open a new (zero-guess) state on the
coarser grid and coarse-grid corrections close it again by prolongating.
Red-black partitioned updates compose the per-color maps, re-evaluating the
correction for the second sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from . import language as lang
from . import operators as ops
from .operators import OpExpr
from .stencils import Stencil, prolongation_stencil, restriction_stencil


@dataclass(frozen=True)
class OperatorContext:
    """Constant stencils backing each grid level plus the transfer pair."""

    stencil_for: Callable[[int], Stencil]
    restriction: Stencil
    prolongation: Stencil

    @classmethod
    def from_stencils(cls, per_level: dict[int, Stencil]) -> "OperatorContext":
        dim = next(iter(per_level.values())).dim
        return cls(per_level.__getitem__, restriction_stencil(dim), prolongation_stencil(dim))


@dataclass(frozen=True)
class AffineMap:
    """u_next = M u + N f on the expression's finest level."""

    linear: OpExpr
    forcing: OpExpr


@dataclass
class _State:
    level: int
    u: tuple[OpExpr, OpExpr]  # coefficients of (u0, f0)
    f: tuple[OpExpr, OpExpr]
    parent: Optional["_State"]


@dataclass
class _Correction:
    state: _State
    delta: tuple[OpExpr, OpExpr]
    delta_level: int
    # delta = C u + G f relative to the state's current (u, f); None when the
    # correction is not re-evaluable (restricted / solved / prolongated).
    relative: Optional[tuple[OpExpr, OpExpr]]


def reduce_expression(expr: lang.Expr, ctx: OperatorContext, omegas=None) -> AffineMap:
    """Closed-form update map of a well-typed solver expression."""
    lang.validate(expr)
    if omegas is not None:
        expr = lang.with_omegas(expr, omegas)
    fine = expr.level
    state = _Reducer(ctx, fine).state(expr)
    return AffineMap(state.u[0], state.u[1])


def iteration_operator(expr: lang.Expr, ctx: OperatorContext, omegas=None) -> OpExpr:
    """Linear part M of the update map; its spectral radius governs convergence."""
    return reduce_expression(expr, ctx, omegas).linear


class _Reducer:
    def __init__(self, ctx: OperatorContext, fine: int):
        self.ctx = ctx
        self.fine = fine

    def _zero(self, level: int) -> OpExpr:
        return ops.ZeroOp(self.fine, level)

    def _stencil(self, level: int) -> OpExpr:
        return ops.StencilOp(self.ctx.stencil_for(level), level)

    def state(self, node: lang.Expr) -> _State:
        if isinstance(node, lang.Terminal):
            ident = ops.Identity(node.level)
            zero = self._zero(node.level)
            return _State(node.level, (ident, zero), (zero, ident), None)
        if isinstance(node, lang.Iterate):
            return self._iterate(node)
        raise lang.MalformedExpressionError(f"not a state expression: {node!r}")

    def _iterate(self, node: lang.Iterate) -> _State:
        corr = self.correction(node.child)
        st = corr.state
        if corr.delta_level != st.level:
            raise lang.MalformedExpressionError("iterate needs a correction on its own level")
        w = node.omega
        if node.partitioning == lang.PART_NONE:
            new_u = tuple(ops.add(su, ops.scale(w, du)) for su, du in zip(st.u, corr.delta))
        else:
            if corr.relative is None:
                raise lang.MalformedExpressionError(
                    "partitioned update over a non re-evaluable correction")
            rel_c, rel_g = corr.relative
            u, f = st.u, st.f
            for color in (ops.RED, ops.BLACK):
                proj = ops.ColorProjection(color, st.level)
                gain = ops.mul(proj, ops.scale(w, rel_c))
                feed = ops.mul(proj, ops.scale(w, rel_g))
                u = tuple(
                    ops.add(uc, ops.add(ops.mul(gain, uc), ops.mul(feed, fc)))
                    for uc, fc in zip(u, f)
                )
            new_u = u
        return _State(st.level, tuple(new_u), st.f, st.parent)

    def correction(self, node: lang.Expr) -> _Correction:
        if isinstance(node, lang.Residual):
            st = self.state(node.child)
            a_op = self._stencil(node.level)
            delta = tuple(
                ops.add(fc, ops.scale(-1.0, ops.mul(a_op, uc)))
                for fc, uc in zip(st.f, st.u)
            )
            rel = (ops.scale(-1.0, a_op), ops.Identity(node.level))
            return _Correction(st, tuple(delta), node.level, rel)

        if isinstance(node, lang.Smooth):
            corr = self.correction(node.child)
            d_inv = ops.DiagInverse(self.ctx.stencil_for(node.level), node.level)
            delta = tuple(ops.mul(d_inv, d) for d in corr.delta)
            rel = None
            if corr.relative is not None:
                rel = (ops.mul(d_inv, corr.relative[0]), ops.mul(d_inv, corr.relative[1]))
            return _Correction(corr.state, tuple(delta), node.level, rel)

        if isinstance(node, lang.Restrict):
            corr = self.correction(node.child)
            r_op = ops.RestrictionOp(self.ctx.restriction, node.level)
            delta = tuple(ops.mul(r_op, d) for d in corr.delta)
            return _Correction(corr.state, tuple(delta), node.level - 1, None)

        if isinstance(node, lang.CoarseCycle):
            corr = self.correction(node.child)
            level = node.level
            zero = self._zero(level)
            st = _State(level, (zero, zero), corr.delta, corr.state)
            # delta = f - A*0 = f on the fresh state
            rel = (ops.scale(-1.0, self._stencil(level)), ops.Identity(level))
            return _Correction(st, corr.delta, level, rel)

        if isinstance(node, lang.CoarseSolve):
            corr = self.correction(node.child)
            inv = ops.CoarseInverse(self.ctx.stencil_for(node.level), node.level)
            delta = tuple(ops.mul(inv, d) for d in corr.delta)
            return _Correction(corr.state, tuple(delta), node.level, None)

        if isinstance(node, lang.Prolong):
            corr = self.correction(node.child)
            p_op = ops.ProlongationOp(self.ctx.prolongation, node.level)
            delta = tuple(ops.mul(p_op, d) for d in corr.delta)
            return _Correction(corr.state, tuple(delta), node.level, None)

        if isinstance(node, lang.CoarseCorrection):
            corr = self.correction(node.child)
            coarse_st = corr.state
            if coarse_st.parent is None:
                raise lang.MalformedExpressionError(
                    "coarse-grid correction without an open coarse state")
            p_op = ops.ProlongationOp(self.ctx.prolongation, node.level)
            delta = tuple(
                ops.mul(p_op, ops.add(uc, ops.scale(node.omega, dc)))
                for uc, dc in zip(coarse_st.u, corr.delta)
            )
            return _Correction(coarse_st.parent, tuple(delta), node.level, None)

        raise lang.MalformedExpressionError(f"not a correction expression: {node!r}")
