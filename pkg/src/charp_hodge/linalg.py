"""Sparse exact linear algebra over F_p.

Vectors are dicts from comparable keys to residues.  :class:`EchelonSpace`
keeps a reduced row echelon basis together with the provenance of every row,
which is enough for kernels, span membership, and solving linear systems.
"""

from __future__ import annotations

from typing import Hashable, Iterable, Mapping

Vector = dict


def _axpy(target: dict, coeff: int, source: Mapping, p: int) -> None:
    """target += coeff * source, in place."""
    for k, v in source.items():
        nv = (target.get(k, 0) + coeff * v) % p
        if nv:
            target[k] = nv
        else:
            target.pop(k, None)


class EchelonSpace:
    """Row space in reduced echelon form, remembering how rows were built.

    Every stored row is a combination of the tagged vectors that were added;
    ``reduce`` reports that combination, so callers can solve systems and read
    off kernel vectors without a second pass.
    """

    def __init__(self, p: int):
        self.p = p
        self._rows: dict[Hashable, tuple[dict, dict]] = {}

    @property
    def rank(self) -> int:
        return len(self._rows)

    def pivots(self) -> list:
        return sorted(self._rows)

    def rows(self) -> list[dict]:
        """The reduced basis, in pivot order."""
        return [dict(self._rows[k][0]) for k in self.pivots()]

    def reduce(self, vec: Mapping) -> tuple[dict, dict]:
        """Return ``(residual, combo)`` with ``vec = residual + sum(combo[t] * added[t])``."""
        p = self.p
        res = {k: v % p for k, v in vec.items() if v % p}
        combo: dict = {}
        for piv in [k for k in res if k in self._rows]:
            c = res.get(piv, 0)
            if not c:
                continue
            row, rcombo = self._rows[piv]
            _axpy(res, -c, row, p)
            _axpy(combo, c, rcombo, p)
        return res, combo

    def contains(self, vec: Mapping) -> bool:
        return not self.reduce(vec)[0]

    def express(self, vec: Mapping) -> dict | None:
        """Coefficients writing ``vec`` in terms of added vectors, or ``None``."""
        res, combo = self.reduce(vec)
        return None if res else combo

    def add(self, vec: Mapping, tag: Hashable) -> dict | None:
        """Insert a tagged vector.

        Returns ``None`` if it enlarged the span.  Otherwise returns the
        dependency ``{tag: 1, ...}`` among added vectors that sums to zero.
        """
        p = self.p
        res, combo = self.reduce(vec)
        dep = {tag: 1}
        _axpy(dep, -1, combo, p)
        if not res:
            return dep
        piv = min(res)
        inv = pow(res[piv], -1, p)
        row = {k: v * inv % p for k, v in res.items()}
        rcombo = {k: v * inv % p for k, v in dep.items()}
        for other_piv, (orow, ocombo) in self._rows.items():
            c = orow.get(piv, 0)
            if c:
                _axpy(orow, -c, row, p)
                _axpy(ocombo, -c, rcombo, p)
        self._rows[piv] = (row, rcombo)
        return None


def kernel(images: Iterable[Mapping], p: int) -> list[dict]:
    """Basis of ``{x : sum x_j images[j] = 0}`` as dicts index -> coefficient."""
    space = EchelonSpace(p)
    out = []
    for j, img in enumerate(images):
        dep = space.add(img, j)
        if dep is not None:
            out.append(dep)
    return out


def rank(vectors: Iterable[Mapping], p: int) -> int:
    space = EchelonSpace(p)
    for j, v in enumerate(vectors):
        space.add(v, j)
    return space.rank


def solve(columns: list[Mapping], target: Mapping, p: int) -> dict | None:
    """Find ``x`` with ``sum x_j columns[j] = target``; ``None`` if inconsistent."""
    space = EchelonSpace(p)
    for j, col in enumerate(columns):
        space.add(col, j)
    return space.express(target)
