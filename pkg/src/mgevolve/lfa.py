"""Local Fourier analysis of stencil-based iteration operators.

Operators are analyzed on an infinite grid: a constant stencil acts on the
Fourier mode exp(i theta . x) as multiplication by its symbol. Factor-2
coarsening couples the 2^(dim*(L-1)) modes that alias onto one coarsest-grid
frequency; over such a harmonic cluster every operator expression evaluates
to a small complex matrix, and the spectral radius is estimated by sampling
base frequencies and maximizing the eigenvalue moduli.

Sampling uses midpoints of a uniform grid over the cluster base domain so the
singular zero frequency is never hit; the `aligned` mode instead samples the
exact frequency lattice of an N-periodic grid (dropping clusters where the
coarse symbol vanishes), which makes the estimate directly comparable to the
spectral radius of the explicitly assembled periodic iteration matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iter_product
from typing import Iterator, Optional

import numpy as np

from . import operators as ops
from .operators import OpExpr
from .stencils import Stencil

_CHUNK = 4096


class AnalysisError(RuntimeError):
    """Symbol evaluation failed (singular coarse symbol, NaN, bad operator)."""


@dataclass(frozen=True)
class LfaConfig:
    samples_per_dim: int = 32
    zero_mode_epsilon: float = 1e-8
    aligned: bool = False

    def __post_init__(self) -> None:
        if self.samples_per_dim < 4:
            raise ValueError("samples_per_dim must be at least 4")
        if self.zero_mode_epsilon <= 0:
            raise ValueError("zero_mode_epsilon must be positive")


@dataclass(frozen=True)
class HarmonicCluster:
    """Frequencies aliasing onto one coarsest-grid mode across `depth` levels."""

    base: tuple[float, ...]
    depth: int

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("cluster depth must be at least 1")

    @property
    def dim(self) -> int:
        return len(self.base)

    @property
    def size(self) -> int:
        return 2 ** (self.dim * (self.depth - 1))

    def members(self, sublevel: int = 0) -> np.ndarray:
        """Member frequencies after `sublevel` coarsenings, shape (count, dim),
        ordered lexicographically by member index."""
        return _member_frequencies(np.asarray(self.base)[None, :], self.depth, sublevel)[0]


@dataclass(frozen=True)
class SymbolMatrix:
    cluster: HarmonicCluster
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.matrix.shape != (self.cluster.size, self.cluster.size):
            raise ValueError("symbol matrix dimension does not match cluster size")


def scalar_symbol(stencil: Stencil, theta) -> complex:
    """Symbol sum_k c_k exp(i theta . k) of a constant stencil."""
    theta = np.asarray(theta, dtype=float)
    return complex(_stencil_symbol(stencil, theta[None, :])[0])


def _stencil_symbol(stencil: Stencil, freqs: np.ndarray) -> np.ndarray:
    """Vectorized symbol; freqs shape (..., dim) -> complex (...)."""
    out = np.zeros(freqs.shape[:-1], dtype=complex)
    for off, coeff in stencil.entries:
        out += coeff * np.exp(1j * (freqs @ np.asarray(off, dtype=float)))
    return out


def _member_indices(dim: int, per_dim: int) -> np.ndarray:
    return np.array(list(iter_product(range(per_dim), repeat=dim)), dtype=float)


def _member_frequencies(base: np.ndarray, depth: int, sublevel: int) -> np.ndarray:
    """(S, count, dim) member frequencies at the given coarsening sublevel."""
    n0 = 2 ** (depth - 1)
    nj = n0 >> sublevel
    if nj < 1:
        raise AnalysisError("operator reaches below the cluster's coarsest level")
    idx = _member_indices(base.shape[1], nj)
    return (2.0**sublevel) * base[:, None, :] + 2.0 * np.pi * idx[None, :, :] / nj


def operator_depth(op: OpExpr) -> int:
    levels = ops.levels_used(op)
    return max(levels) - min(levels) + 1


def _has_color_projection(op: OpExpr) -> bool:
    if isinstance(op, ops.ColorProjection):
        return True
    return any(_has_color_projection(c) for c in ops.children(op))


def analysis_depth(op: OpExpr) -> int:
    """Cluster depth needed for `op`: its level span, at least 2 when a
    red-black projection must couple theta with theta + pi."""
    depth = operator_depth(op)
    if depth == 1 and _has_color_projection(op):
        depth = 2
    return depth


class _SymbolEvaluator:
    """Evaluates operator expressions over a batch of harmonic clusters."""

    def __init__(self, base: np.ndarray, depth: int, fine_level: int, epsilon: float):
        self.depth = depth
        self.fine_level = fine_level
        self.epsilon = epsilon
        self.dim = base.shape[1]
        self.nsamples = base.shape[0]
        self.freqs = {j: _member_frequencies(base, depth, j) for j in range(depth)}
        self.counts = {j: self.freqs[j].shape[1] for j in range(depth)}
        self.base = base

    def sublevel(self, level: int) -> int:
        j = self.fine_level - level
        if not 0 <= j < self.depth:
            raise AnalysisError(f"operator level {level} outside the analyzed window")
        return j

    def evaluate(self, op: OpExpr) -> np.ndarray:
        return self._eval(op, {})

    def _eval(self, op: OpExpr, memo: dict) -> np.ndarray:
        key = id(op)
        if key in memo:
            return memo[key]
        result = self._eval_node(op, memo)
        if np.isnan(result).any():
            raise AnalysisError(f"NaN in symbol of {type(op).__name__}")
        memo[key] = result
        return result

    def _diag(self, values: np.ndarray) -> np.ndarray:
        n = values.shape[1]
        out = np.zeros((values.shape[0], n, n), dtype=complex)
        idx = np.arange(n)
        out[:, idx, idx] = values
        return out

    def _eval_node(self, op: OpExpr, memo: dict) -> np.ndarray:
        if isinstance(op, ops.Identity):
            n = self.counts[self.sublevel(op.level)]
            return np.broadcast_to(np.eye(n, dtype=complex), (self.nsamples, n, n))
        if isinstance(op, ops.ZeroOp):
            rows = self.counts[self.sublevel(op.range_level_)]
            cols = self.counts[self.sublevel(op.domain_level_)]
            return np.zeros((self.nsamples, rows, cols), dtype=complex)
        if isinstance(op, ops.StencilOp):
            j = self.sublevel(op.level)
            return self._diag(_stencil_symbol(op.stencil, self.freqs[j]))
        if isinstance(op, ops.DiagInverse):
            center = op.stencil.center
            if center == 0.0:
                raise AnalysisError("inverse diagonal of a stencil with zero center")
            n = self.counts[self.sublevel(op.level)]
            return np.broadcast_to(np.eye(n, dtype=complex) / center, (self.nsamples, n, n))
        if isinstance(op, ops.ColorProjection):
            return self._color_projection(op)
        if isinstance(op, ops.RestrictionOp):
            return self._transfer(op.stencil, op.level, restrict=True)
        if isinstance(op, ops.ProlongationOp):
            return self._transfer(op.stencil, op.level, restrict=False)
        if isinstance(op, ops.CoarseInverse):
            return self._coarse_inverse(op)
        if isinstance(op, ops.Scale):
            return op.factor * self._eval(op.child, memo)
        if isinstance(op, ops.OpSum):
            total = self._eval(op.terms[0], memo).copy()
            for term in op.terms[1:]:
                total += self._eval(term, memo)
            return total
        if isinstance(op, ops.OpProduct):
            result = self._eval(op.factors[-1], memo)
            for factor in reversed(op.factors[:-1]):
                result = self._eval(factor, memo) @ result
            return result
        raise AnalysisError(f"cannot evaluate operator node {type(op).__name__}")

    def _color_projection(self, op: ops.ColorProjection) -> np.ndarray:
        j = self.sublevel(op.level)
        nj = (2 ** (self.depth - 1)) >> j
        if nj < 2:
            raise AnalysisError("red-black projection needs the theta+pi harmonic in the cluster")
        count = self.counts[j]
        per_dim = nj
        shift = np.zeros((count, count))
        indices = list(iter_product(range(per_dim), repeat=self.dim))
        lookup = {m: i for i, m in enumerate(indices)}
        for i, m in enumerate(indices):
            target = tuple((mi + per_dim // 2) % per_dim for mi in m)
            shift[lookup[target], i] = 1.0
        sign = 1.0 if op.color == ops.RED else -1.0
        mat = 0.5 * (np.eye(count) + sign * shift)
        return np.broadcast_to(mat.astype(complex), (self.nsamples, count, count))

    def _transfer(self, stencil: Stencil, fine_level: int, restrict: bool) -> np.ndarray:
        jf = self.sublevel(fine_level)
        jc = jf + 1
        if jc >= self.depth:
            raise AnalysisError("transfer reaches below the analyzed window")
        fine_freqs = self.freqs[jf]
        nf = 2 ** (self.depth - 1) >> jf
        nc = nf // 2
        fine_idx = list(iter_product(range(nf), repeat=self.dim))
        coarse_lookup = {m: i for i, m in enumerate(iter_product(range(nc), repeat=self.dim))}
        sym = _stencil_symbol(stencil, fine_freqs)
        rows = self.counts[jc] if restrict else self.counts[jf]
        cols = self.counts[jf] if restrict else self.counts[jc]
        out = np.zeros((self.nsamples, rows, cols), dtype=complex)
        for i, m in enumerate(fine_idx):
            ci = coarse_lookup[tuple(mi % nc for mi in m)]
            if restrict:
                out[:, ci, i] = sym[:, i]
            else:
                out[:, i, ci] = sym[:, i] / 2**self.dim
        return out

    def _coarse_inverse(self, op: ops.CoarseInverse) -> np.ndarray:
        j = self.sublevel(op.level)
        values = _stencil_symbol(op.stencil, self.freqs[j])
        magnitude = np.abs(values)
        scale = magnitude.max() if magnitude.size else 0.0
        bad = magnitude <= self.epsilon * max(scale, 1.0)
        if bad.any():
            s, m = np.argwhere(bad)[0]
            theta = self.freqs[j][s, m]
            raise AnalysisError(
                f"coarse operator symbol vanishes near frequency {tuple(theta)}")
        return self._diag(1.0 / values)


def _base_points(dim: int, depth: int, cfg: LfaConfig) -> tuple[np.ndarray, np.ndarray]:
    """Sampled cluster base frequencies and a keep-mask (drops clusters whose
    coarse symbol would be singular in aligned mode)."""
    n0 = 2 ** (depth - 1)
    width = 2.0 * np.pi / n0
    t = np.arange(cfg.samples_per_dim)
    if cfg.aligned:
        axis = t * width / cfg.samples_per_dim  # frequency lattice of an N-periodic grid
    else:
        axis = -width / 2 + (t + 0.5) * width / cfg.samples_per_dim
    grid = np.array(list(iter_product(axis, repeat=dim)))
    if cfg.aligned:
        keep = ~np.all(np.isclose(np.abs(_wrap(grid)), 0.0, atol=cfg.zero_mode_epsilon), axis=1)
    else:
        keep = np.ones(len(grid), dtype=bool)
    return grid, keep


def _wrap(freqs: np.ndarray) -> np.ndarray:
    return np.mod(freqs + np.pi, 2.0 * np.pi) - np.pi


def symbol_of(op: OpExpr, cluster: HarmonicCluster) -> SymbolMatrix:
    """Symbol matrix of an operator expression over one harmonic cluster."""
    fine = max(ops.levels_used(op))
    if operator_depth(op) > cluster.depth:
        raise AnalysisError("operator spans more levels than the cluster")
    base = np.asarray(cluster.base, dtype=float)[None, :]
    evaluator = _SymbolEvaluator(base, cluster.depth, fine, 1e-300)
    return SymbolMatrix(cluster, evaluator.evaluate(op)[0])


def _iter_symbol_batches(op: OpExpr, cfg: LfaConfig,
                         depth: Optional[int] = None) -> Iterator[tuple[np.ndarray, np.ndarray, "_SymbolEvaluator"]]:
    levels = ops.levels_used(op)
    fine = max(levels)
    depth = depth if depth is not None else analysis_depth(op)
    if depth > 3:
        raise AnalysisError(f"analysis window of {depth} levels exceeds the supported depth of 3")
    dim = _operator_dim(op)
    if dim is None:
        # No stencil leaves: the symbol is frequency-independent, one sample
        # of a one-dimensional cluster is exact.
        if _has_color_projection(op):
            raise AnalysisError("cannot infer dimensionality of a pure color projection")
        base = np.zeros((1, 1)) + 0.5
        evaluator = _SymbolEvaluator(base, depth, fine, cfg.zero_mode_epsilon)
        yield base, evaluator.evaluate(op), evaluator
        return
    base, keep = _base_points(dim, depth, cfg)
    base = base[keep]
    chunk_len = max(1, _CHUNK // 2 ** (dim * (depth - 1)))
    for start in range(0, len(base), chunk_len):
        chunk = base[start:start + chunk_len]
        evaluator = _SymbolEvaluator(chunk, depth, fine, cfg.zero_mode_epsilon)
        yield chunk, evaluator.evaluate(op), evaluator


def _operator_dim(op: OpExpr) -> Optional[int]:
    if isinstance(op, (ops.StencilOp, ops.DiagInverse, ops.RestrictionOp,
                       ops.ProlongationOp, ops.CoarseInverse)):
        return op.stencil.dim
    for child in ops.children(op):
        dim = _operator_dim(child)
        if dim is not None:
            return dim
    return None


def _rho_of_batch(matrices: np.ndarray) -> np.ndarray:
    if matrices.shape[-1] == 1:
        return np.abs(matrices[:, 0, 0])
    return np.abs(np.linalg.eigvals(matrices)).max(axis=1)


def spectral_radius(op: OpExpr, cfg: LfaConfig = LfaConfig()) -> float:
    """Estimated spectral radius: max over sampled clusters of the maximum
    eigenvalue modulus of the symbol matrix."""
    worst = 0.0
    for _, matrices, _ in _iter_symbol_batches(op, cfg):
        worst = max(worst, float(_rho_of_batch(matrices).max()))
    return worst


def smoothing_factor(op: OpExpr, cfg: LfaConfig = LfaConfig()) -> float:
    """Like spectral_radius but restricted to high-frequency modes (every
    component at least pi/2 in magnitude) via a diagonal mode projector."""
    worst = 0.0
    for _, matrices, evaluator in _iter_symbol_batches(op, cfg):
        fine_freqs = evaluator.freqs[0]
        mask = np.all(np.abs(_wrap(fine_freqs)) >= np.pi / 2 - 1e-12, axis=2)
        projected = matrices * mask[:, :, None] * mask[:, None, :]
        has_high = mask.any(axis=1)
        if has_high.any():
            worst = max(worst, float(_rho_of_batch(projected[has_high]).max()))
    return worst


def frequency_scan(op: OpExpr, cfg: LfaConfig = LfaConfig()) -> list[tuple[tuple[float, ...], float]]:
    """Per-cluster local spectral radius, for diagnostic CSV dumps."""
    rows = []
    for chunk, matrices, _ in _iter_symbol_batches(op, cfg):
        local = _rho_of_batch(matrices)
        rows.extend((tuple(theta), float(r)) for theta, r in zip(chunk, local))
    return rows
