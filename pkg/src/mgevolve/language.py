"""Typed expression language for multigrid solvers.

A solver is a chain of state transformations ending in the initial state
(u0, f0) on the finest level of a window of grid levels. Corrections are
built by taking residuals, applying the inverse operator diagonal, and
restricting to coarser grids; they are consumed by (optionally red-black
partitioned) relaxation updates or coarse-grid corrections.

Node kinds and the types they produce (level l, finer = larger):

    Terminal(l)                            -> S(l)    initial state, finest only
    Iterate(l, child, omega, part)         -> S(l)    u += omega * delta
    Residual(l, child: S(l))               -> C(l)    delta = f - A u
    Smooth(l, child: C(l))                 -> C(l)    delta = diag(A)^-1 delta
    Restrict(l, child: C(l))               -> RC(l)   delta -> coarse grid l-1
    CoarseCycle(l, child: RC(l+1))         -> C(l)    new state (0, delta) on l
    CoarseSolve(l, child: RC(l+1))         -> SC(l+1) delta = A_l^-1 delta
    Prolong(l, child: SC(l))               -> PS(l)   delta -> fine grid l
    CoarseCorrection(l, child: C(l-1), om) -> CGC(l)  delta = P (u_H + om*delta_H)

An Iterate consumes any of C / CGC / PS; red-black partitioning is admissible
only over C corrections (their value can be re-evaluated per color).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union

import numpy as np

PART_NONE = "none"
PART_RED_BLACK = "red-black"
PARTITIONINGS = (PART_NONE, PART_RED_BLACK)


class MalformedExpressionError(ValueError):
    """Expression violates the typing rules of the solver language."""


@dataclass(frozen=True)
class Window:
    """Contiguous level range a solver expression may operate on."""

    fine_level: int
    num_levels: int

    def __post_init__(self) -> None:
        if self.num_levels < 1:
            raise ValueError("a window needs at least one level")
        if self.coarsest_level < 0:
            raise ValueError("window reaches below level 0")

    @property
    def coarsest_level(self) -> int:
        return self.fine_level - self.num_levels + 1

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(range(self.fine_level, self.coarsest_level - 1, -1))


@dataclass(frozen=True)
class Terminal:
    level: int


@dataclass(frozen=True)
class Iterate:
    level: int
    child: "Expr"
    omega: float = 1.0
    partitioning: str = PART_NONE


@dataclass(frozen=True)
class Residual:
    level: int
    child: "Expr"


@dataclass(frozen=True)
class Smooth:
    level: int
    child: "Expr"


@dataclass(frozen=True)
class Restrict:
    level: int
    child: "Expr"


@dataclass(frozen=True)
class CoarseCycle:
    level: int
    child: "Expr"


@dataclass(frozen=True)
class CoarseSolve:
    level: int
    child: "Expr"
    embedded: Optional["Expr"] = field(default=None, compare=True)


@dataclass(frozen=True)
class Prolong:
    level: int
    child: "Expr"


@dataclass(frozen=True)
class CoarseCorrection:
    level: int
    child: "Expr"
    omega: float = 1.0


Expr = Union[
    Terminal, Iterate, Residual, Smooth, Restrict,
    CoarseCycle, CoarseSolve, Prolong, CoarseCorrection,
]

_SLOTTED = (Iterate, CoarseCorrection)


def node_type(node: Expr) -> tuple[str, int]:
    """(kind, level) pair used for typed crossover/mutation compatibility."""
    if isinstance(node, (Terminal, Iterate)):
        return ("S", node.level)
    if isinstance(node, (Residual, Smooth, CoarseCycle)):
        return ("C", node.level)
    if isinstance(node, Restrict):
        return ("RC", node.level)
    if isinstance(node, CoarseSolve):
        return ("SC", node.level + 1)
    if isinstance(node, Prolong):
        return ("PS", node.level)
    if isinstance(node, CoarseCorrection):
        return ("CGC", node.level)
    raise TypeError(f"not an expression node: {node!r}")


def child_of(node: Expr) -> Optional[Expr]:
    return getattr(node, "child", None)


def with_child(node: Expr, new_child: Expr) -> Expr:
    return replace(node, child=new_child)


def iter_nodes(expr: Expr) -> Iterator[tuple[int, Expr]]:
    """(chain position, node) pairs from the root inward; embedded solvers are
    opaque (they belong to an earlier window)."""
    pos = 0
    node: Optional[Expr] = expr
    while node is not None:
        yield pos, node
        node = child_of(node)
        pos += 1


def get_node(expr: Expr, position: int) -> Expr:
    for pos, node in iter_nodes(expr):
        if pos == position:
            return node
    raise IndexError(position)


def replace_subtree(expr: Expr, position: int, subtree: Expr) -> Expr:
    """New expression with the subtree rooted at chain `position` replaced."""
    if position == 0:
        return subtree
    spine = []
    node = expr
    for _ in range(position):
        spine.append(node)
        nxt = child_of(node)
        if nxt is None:
            raise IndexError(position)
        node = nxt
    result = subtree
    for parent in reversed(spine):
        result = with_child(parent, result)
    return result


def chain_length(expr: Expr) -> int:
    return sum(1 for _ in iter_nodes(expr))


def count_slots(expr: Expr) -> int:
    return sum(1 for _, n in iter_nodes(expr) if isinstance(n, _SLOTTED))


def slot_nodes(expr: Expr) -> list[Expr]:
    """Slotted nodes in execution order (innermost applied first)."""
    return [n for _, n in reversed(list(iter_nodes(expr))) if isinstance(n, _SLOTTED)]


def collect_omegas(expr: Expr) -> tuple[float, ...]:
    return tuple(n.omega for n in slot_nodes(expr))


def with_omegas(expr: Expr, omegas) -> Expr:
    """Copy of the expression with relaxation factors replaced in slot order."""
    omegas = [float(w) for w in omegas]
    if len(omegas) != count_slots(expr):
        raise ValueError(f"expected {count_slots(expr)} relaxation factors, got {len(omegas)}")
    return _rebuild_with_slots(expr, omegas)


def _rebuild_with_slots(node: Expr, remaining: list[float]) -> Expr:
    # Innermost slots are applied first, so rebuild bottom-up.
    child = child_of(node)
    if child is not None:
        node = with_child(node, _rebuild_with_slots(child, remaining))
    if isinstance(node, _SLOTTED):
        node = replace(node, omega=remaining.pop(0))
    return node


def infer_window(expr: Expr) -> Window:
    """Smallest window covering every level the expression touches."""
    levels = {expr.level}
    for _, node in iter_nodes(expr):
        levels.add(node.level)
        if isinstance(node, Restrict):
            levels.add(node.level - 1)
    fine, coarse = max(levels), min(levels)
    return Window(fine, fine - coarse + 1)


def validate(expr: Expr, window: Optional[Window] = None) -> None:
    """Raise MalformedExpressionError unless `expr` is a well-typed solver.

    With a window, levels are also checked against its range (direct solves
    only on the coarsest level, coarse states only on interior levels).
    Without one, only the typing discipline itself is enforced.
    """
    kind, root_level = node_type(expr)
    if kind != "S":
        raise MalformedExpressionError(f"root must be a state expression, got {kind}")
    if window is not None and root_level != window.fine_level:
        raise MalformedExpressionError(
            f"root level {root_level} does not match window finest {window.fine_level}")
    _validate_node(expr, root_level, window)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise MalformedExpressionError(msg)


def _validate_node(node: Expr, fine: int, w: Optional[Window]) -> None:
    coarse = w.coarsest_level if w is not None else None
    if isinstance(node, Terminal):
        _require(node.level == fine, "initial state must live on the finest level")
        return
    if isinstance(node, _SLOTTED):
        _require(0.0 <= node.omega < 2.0, f"relaxation factor {node.omega} outside [0, 2)")
    if isinstance(node, Iterate):
        _require(node.partitioning in PARTITIONINGS, f"unknown partitioning {node.partitioning}")
        ckind, clevel = node_type(node.child)
        _require(clevel == node.level, "iterate level mismatch")
        _require(ckind in ("C", "CGC", "PS"), f"iterate cannot consume {ckind}")
        if node.partitioning == PART_RED_BLACK:
            _require(ckind == "C", "partitioned update requires a re-evaluable correction")
    elif isinstance(node, Residual):
        _require(node.level <= fine, "residual level above the finest")
        _require(node_type(node.child) == ("S", node.level), "residual needs a state on its level")
    elif isinstance(node, Smooth):
        _require(node_type(node.child) == ("C", node.level), "smoother needs a correction on its level")
    elif isinstance(node, Restrict):
        if coarse is not None:
            _require(node.level - 1 >= coarse, "restriction below the window")
        _require(node_type(node.child) == ("C", node.level), "restriction needs a correction on its level")
    elif isinstance(node, CoarseCycle):
        _require(node.level <= fine - 1, "coarse state must live below the finest level")
        if coarse is not None:
            _require(node.level >= coarse + 1, "no coarse state on the window's coarsest level")
        _require(node_type(node.child) == ("RC", node.level + 1), "coarse cycle needs a restricted correction")
    elif isinstance(node, CoarseSolve):
        if coarse is not None:
            _require(node.level == coarse, "direct solve only on the window's coarsest level")
        _require(node_type(node.child) == ("RC", node.level + 1), "solve needs a restricted correction")
        if node.embedded is not None:
            _require(node_type(node.embedded) == ("S", node.level),
                     "embedded solver must be a state expression on the solve level")
            validate(node.embedded)
    elif isinstance(node, Prolong):
        _require(node_type(node.child) == ("SC", node.level), "prolongation consumes a solved correction")
    elif isinstance(node, CoarseCorrection):
        _require(node.level <= fine, "coarse-grid correction level above the finest")
        _require(node_type(node.child) == ("C", node.level - 1),
                 "coarse-grid correction needs a correction one level coarser")
    child = child_of(node)
    if child is not None:
        _validate_node(child, fine, w)


@dataclass(frozen=True)
class GrammarConfig:
    window_levels: int = 3
    max_productions_per_level: int = 20
    max_coarse_cycles: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_productions_per_level < 1:
            raise ValueError("need at least one production per level")
        if self.window_levels < 1:
            raise ValueError("window needs at least one level")


class _Generator:
    """Grow-style recursive descent over the production rules."""

    def __init__(self, window: Window, rng: np.random.Generator, config: GrammarConfig):
        self.w = window
        self.rng = rng
        self.cfg = config
        self.budget = {lvl: config.max_productions_per_level for lvl in window.levels}
        self.coarse_budget = (math.inf if config.max_coarse_cycles is None
                              else config.max_coarse_cycles)

    def _spend(self, level: int) -> None:
        self.budget[level] -= 1

    def _exhausted(self, level: int) -> bool:
        return self.budget[level] <= 0

    def gen_state(self, level: int) -> Expr:
        fine, coarse = self.w.fine_level, self.w.coarsest_level
        options = []
        if level == fine:
            options.append("terminal")
        options.append("iterate")
        if level - 1 == coarse and self.coarse_budget > 0:
            options.append("solve")
        if level - 1 > coarse and self.coarse_budget > 0:
            options.append("cgc")
        if self._exhausted(level):
            options = ["terminal"] if level == fine else ["iterate"]
        self._spend(level)
        choice = options[self.rng.integers(len(options))]
        if choice == "terminal":
            return Terminal(level)
        if choice == "iterate":
            part = PART_RED_BLACK if self.rng.integers(2) else PART_NONE
            return Iterate(level, self.gen_correction(level), 1.0, part)
        if choice == "solve":
            self.coarse_budget -= 1
            solved = CoarseSolve(level - 1, Restrict(level, self.gen_correction(level)))
            return Iterate(level, Prolong(level, solved), 1.0, PART_NONE)
        # cgc
        self.coarse_budget -= 1
        return Iterate(level, CoarseCorrection(level, self.gen_correction(level - 1), 1.0),
                       1.0, PART_NONE)

    def gen_correction(self, level: int) -> Expr:
        fine = self.w.fine_level
        options = ["smooth", "residual"]
        if level < fine:
            options.append("open")
        if self._exhausted(level):
            options = ["residual"] if level == fine else ["open"]
        self._spend(level)
        choice = options[self.rng.integers(len(options))]
        if choice == "smooth":
            return Smooth(level, self.gen_correction(level))
        if choice == "residual":
            return Residual(level, self.gen_state(level))
        return CoarseCycle(level, Restrict(level + 1, self.gen_correction(level + 1)))

    def gen_typed(self, kind: str, level: int) -> Expr:
        if kind == "S":
            return self.gen_state(level)
        if kind == "C":
            return self.gen_correction(level)
        if kind == "RC":
            return Restrict(level, self.gen_correction(level))
        if kind == "SC":
            return CoarseSolve(level - 1, Restrict(level, self.gen_correction(level)))
        if kind == "PS":
            return Prolong(level, self.gen_typed("SC", level))
        if kind == "CGC":
            return CoarseCorrection(level, self.gen_correction(level - 1), 1.0)
        raise ValueError(f"unknown symbol kind {kind}")


def generate(window: Window, rng: np.random.Generator,
             config: GrammarConfig = GrammarConfig()) -> Expr:
    """Random well-typed solver expression; all relaxation factors start at 1."""
    expr = _Generator(window, rng, config).gen_state(window.fine_level)
    validate(expr, window)
    return expr


def generate_subtree(kind: str, level: int, window: Window, rng: np.random.Generator,
                     config: GrammarConfig = GrammarConfig()) -> Expr:
    """Random subtree of the given grammar type, for mutation."""
    return _Generator(window, rng, config).gen_typed(kind, level)


def baseline_cycle(kind: str, nu1: int, nu2: int, window: Window,
                   smoother: str = "rb-gs", omega: float = 1.0) -> Expr:
    """Canonical V- or W-cycle expression over the window's levels.

    The W variant applies the coarse-level cycle twice per visit. The last
    post-smoothing step of each coarse level is carried by the coarse-grid
    correction's own relaxation factor, mirroring the update semantics.
    """
    if kind not in ("V", "W"):
        raise ValueError("cycle kind must be 'V' or 'W'")
    if window.num_levels < 2:
        raise ValueError("cycles need at least two levels")
    if nu1 < 0 or nu2 < 0:
        raise ValueError("smoothing counts must be non-negative")
    if smoother not in ("jacobi", "rb-gs"):
        raise ValueError("smoother must be 'jacobi' or 'rb-gs'")
    part = PART_RED_BLACK if smoother == "rb-gs" else PART_NONE
    gamma = 2 if kind == "W" else 1
    fine, coarse = window.fine_level, window.coarsest_level

    def smooth_once(level: int, state: Expr) -> Expr:
        return Iterate(level, Smooth(level, Residual(level, state)), omega, part)

    def solve_iterate(level: int, state: Expr) -> Expr:
        corr = Prolong(level, CoarseSolve(level - 1, Restrict(level, Residual(level, state))))
        return Iterate(level, corr, 1.0, PART_NONE)

    def coarse_body(level: int, corr: Expr) -> Expr:
        """Cycle body on a coarse level operating on the opened state; returns
        the correction chain to be consumed by the enclosing CGC."""
        state: Expr = Iterate(level, Smooth(level, corr), omega, part)
        for _ in range(nu1 - 1):
            state = smooth_once(level, state)
        for visit in range(gamma if level - 1 > coarse else 1):
            state = descend(level, state)
        for _ in range(nu2 - 1):
            state = smooth_once(level, state)
        return Smooth(level, Residual(level, state))

    def descend(level: int, state: Expr) -> Expr:
        if level - 1 == coarse:
            return solve_iterate(level, state)
        opened = CoarseCycle(level - 1, Restrict(level, Residual(level, state)))
        corr = coarse_body(level - 1, opened)
        return Iterate(level, CoarseCorrection(level, corr, omega), 1.0, PART_NONE)

    if nu2 < 1 and fine - 1 > coarse:
        raise ValueError("cycles over three or more levels need nu2 >= 1")

    state: Expr = Terminal(fine)
    for _ in range(nu1):
        state = smooth_once(fine, state)
    for visit in range(gamma if fine - 1 > coarse else 1):
        state = descend(fine, state)
    for _ in range(nu2):
        state = smooth_once(fine, state)
    validate(state, window)
    return state
