"""Constant-coefficient stencils and inter-grid transfer operators.

A stencil is a finite set of (offset, coefficient) pairs describing one row
of a grid operator; offsets are integer multiples of the grid spacing. All
operators of the solver language (system matrices, restriction, prolongation)
are represented this way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence


@dataclass(frozen=True)
class Stencil:
    """Immutable constant stencil: mapping from integer offsets to weights."""

    dim: int
    entries: tuple[tuple[tuple[int, ...], float], ...]

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"unsupported dimension {self.dim}")
        if not self.entries:
            raise ValueError("stencil needs at least one entry")
        offsets = [off for off, _ in self.entries]
        if len(set(offsets)) != len(offsets):
            raise ValueError("duplicate stencil offsets")
        for off in offsets:
            if len(off) != self.dim:
                raise ValueError(f"offset {off} does not match dim {self.dim}")

    @classmethod
    def from_dict(cls, dim: int, data: dict[tuple[int, ...], float]) -> "Stencil":
        entries = tuple(sorted(data.items()))
        return cls(dim, entries)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return dict(self.entries)

    @property
    def center(self) -> float:
        """Coefficient at the zero offset (0.0 if absent)."""
        zero = (0,) * self.dim
        return self.as_dict().get(zero, 0.0)

    def scaled(self, factor: float) -> "Stencil":
        return Stencil(self.dim, tuple((off, c * factor) for off, c in self.entries))

    def row_sum(self) -> float:
        return math.fsum(c for _, c in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def identity_stencil(dim: int) -> Stencil:
    return Stencil.from_dict(dim, {(0,) * dim: 1.0})


def laplacian_stencil(dim: int, spacing: float) -> Stencil:
    """Standard (2*dim+1)-point finite-difference Laplacian at spacing h."""
    inv_h2 = 1.0 / spacing**2
    data: dict[tuple[int, ...], float] = {(0,) * dim: 2.0 * dim * inv_h2}
    for axis in range(dim):
        for sign in (-1, 1):
            off = tuple(sign if a == axis else 0 for a in range(dim))
            data[off] = -inv_h2
    return Stencil.from_dict(dim, data)


def restriction_stencil(dim: int) -> Stencil:
    """Full-weighting restriction; weights sum to 1."""
    _check_dim(dim)
    data = {}
    for off in product((-1, 0, 1), repeat=dim):
        w = 1.0
        for o in off:
            w *= 0.5 if o == 0 else 0.25
        data[off] = w
    return Stencil.from_dict(dim, data)


def prolongation_stencil(dim: int) -> Stencil:
    """(Bi/tri)linear interpolation as a fine-grid stencil; equals 2^dim * R^T."""
    _check_dim(dim)
    return restriction_stencil(dim).scaled(float(2**dim))


def _check_dim(dim: int) -> None:
    if dim not in (2, 3):
        raise ValueError(f"transfer operators require dim in (2, 3), got {dim}")


def galerkin_coarse_stencil(restriction: Stencil, operator: Stencil, prolongation: Stencil) -> Stencil:
    """Coarse-grid triple product R*A*P as a stencil on the coarse lattice.

    Entry for coarse offset m collects all fine paths k (restriction),
    j (operator), with interpolation weight at k + j - 2m.
    """
    p = prolongation.as_dict()
    data: dict[tuple[int, ...], float] = {}
    for k, rk in restriction.entries:
        for j, aj in operator.entries:
            for m_twice_off, pw in p.items():
                # k + j - 2m = m_twice_off  =>  m = (k + j - m_twice_off) / 2
                num = tuple(ki + ji - oi for ki, ji, oi in zip(k, j, m_twice_off))
                if any(n % 2 for n in num):
                    continue
                m = tuple(n // 2 for n in num)
                data[m] = data.get(m, 0.0) + rk * aj * pw
    cleaned = {off: c for off, c in data.items() if abs(c) > 1e-14}
    return Stencil.from_dict(operator.dim, cleaned)


def dump_stencil(stencil: Stencil) -> str:
    """Plain-text form: one line per entry, `offset... coefficient`."""
    lines = [" ".join(str(o) for o in off) + f" {coeff!r}" for off, coeff in sorted(stencil.entries)]
    return "\n".join(lines) + "\n"


def load_stencil(text: str) -> Stencil:
    entries = []
    dim = None
    for line in text.strip().splitlines():
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"bad stencil line: {line!r}")
        off = tuple(int(p) for p in parts[:-1])
        if dim is None:
            dim = len(off)
        elif len(off) != dim:
            raise ValueError("inconsistent offset dimensions in stencil dump")
        entries.append((off, float(parts[-1])))
    if dim is None:
        raise ValueError("empty stencil dump")
    return Stencil(dim, tuple(entries))


def tensor_stencil(weights_1d: Sequence[float], dim: int, offsets_1d: Iterable[int] = (-1, 0, 1)) -> Stencil:
    """Tensor product of a 1D weight list, used by tests to build references."""
    offsets_1d = tuple(offsets_1d)
    data = {}
    for off in product(range(len(offsets_1d)), repeat=dim):
        w = 1.0
        for i in off:
            w *= weights_1d[i]
        data[tuple(offsets_1d[i] for i in off)] = w
    return Stencil.from_dict(dim, data)
