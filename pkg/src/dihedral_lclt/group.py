"""Exact arithmetic on the semidirect product G_d = Z/2Z x| Z^d.

Elements are pairs ``(flip, trans)`` with ``flip`` in {+1, -1} and ``trans``
an integer d-vector, multiplied by

    (e, m)(f, r) = (e*f, m + e*r).

Distributions with finite support are kept in exact rational arithmetic
whenever every weight is rational, so that n-fold convolutions can serve as
ground truth for the Fourier-side computations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Iterable, Mapping, Union

import numpy as np

Weight = Union[Fraction, float]

__all__ = [
    "GroupElement",
    "GroupDistribution",
    "PathSample",
    "identity",
    "multiply",
    "inverse",
    "convolve",
    "convolve_power",
    "delta",
    "sample_path",
    "sample_increments",
    "partial_products",
]


@dataclass(frozen=True, order=True)
class GroupElement:
    flip: int
    trans: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.flip not in (1, -1):
            raise ValueError(f"flip must be +1 or -1, got {self.flip!r}")
        object.__setattr__(self, "trans", tuple(int(t) for t in self.trans))

    @property
    def dim(self) -> int:
        return len(self.trans)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def __repr__(self) -> str:
        sign = "+" if self.flip == 1 else "-"
        return f"({sign}1, {list(self.trans)})"


def identity(d: int) -> GroupElement:
    return GroupElement(1, (0,) * d)


def multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    if g.dim != h.dim:
        raise ValueError(f"dimension mismatch: {g.dim} != {h.dim}")
    e = g.flip
    return GroupElement(e * h.flip, tuple(m + e * r for m, r in zip(g.trans, h.trans)))


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(g.flip, tuple(-g.flip * m for m in g.trans))


def _coerce_weight(w) -> Weight:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, Rational):
        return Fraction(w)
    if isinstance(w, str):
        return Fraction(w)
    return float(w)


@dataclass(frozen=True)
class GroupDistribution:
    """Finitely supported probability weights on G_d.

    ``weights`` is stored as a canonically ordered tuple of ``(element,
    weight)`` pairs (flip first, then lexicographic translation); zero
    weights are dropped.  When every input weight is rational the whole
    distribution stays exact.
    """

    dim: int
    atoms: tuple[tuple[GroupElement, Weight], ...] = field(repr=False)

    def __init__(self, dim: int, weights: Mapping[GroupElement, object] | Iterable, *, check: bool = True):
        items = weights.items() if isinstance(weights, Mapping) else weights
        acc: dict[GroupElement, object] = {}
        for g, w in items:
            if not isinstance(g, GroupElement):
                g = GroupElement(*g)
            if g.dim != dim:
                raise ValueError(f"atom {g!r} does not have dimension {dim}")
            w = _coerce_weight(w)
            if w < 0:
                raise ValueError(f"negative weight {w} at {g!r}")
            acc[g] = acc.get(g, 0) + w
        exact = all(isinstance(w, (Fraction, int)) for w in acc.values())
        atoms = tuple(
            (g, Fraction(w) if exact else float(w)) for g, w in sorted(acc.items()) if w != 0
        )
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "atoms", atoms)
        if check:
            total = self.total()
            if exact and total != 1:
                raise ValueError(f"weights sum to {total}, not 1")
            if not exact and abs(total - 1.0) > 1e-12:
                raise ValueError(f"weights sum to {total!r}, not 1 within 1e-12")

    @property
    def exact(self) -> bool:
        return all(isinstance(w, Fraction) for _, w in self.atoms)

    def total(self) -> Weight:
        return sum((w for _, w in self.atoms), Fraction(0) if self.exact else 0.0)

    def support(self) -> list[GroupElement]:
        return [g for g, _ in self.atoms]

    def as_dict(self) -> dict[GroupElement, Weight]:
        return dict(self.atoms)

    def __getitem__(self, g: GroupElement) -> Weight:
        for h, w in self.atoms:
            if h == g:
                return w
        return Fraction(0) if self.exact else 0.0

    def __iter__(self):
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def max_norm(self) -> int:
        """Largest |m|_inf over the support."""
        return max((max((abs(t) for t in g.trans), default=0) for g, _ in self.atoms), default=0)

    def to_float(self) -> "GroupDistribution":
        return GroupDistribution(self.dim, [(g, float(w)) for g, w in self.atoms], check=False)

    # -- serialization -------------------------------------------------
    def to_json_obj(self) -> dict:
        atoms = []
        for g, w in self.atoms:
            atoms.append({"flip": g.flip, "trans": list(g.trans), "w": str(w) if isinstance(w, Fraction) else w})
        return {"dim": self.dim, "atoms": atoms}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "GroupDistribution":
        if set(obj) != {"dim", "atoms"}:
            raise ValueError(f"distribution JSON must have exactly keys 'dim' and 'atoms', got {sorted(obj)}")
        dim = int(obj["dim"])
        pairs = []
        for atom in obj["atoms"]:
            if set(atom) != {"flip", "trans", "w"}:
                raise ValueError(f"bad atom keys {sorted(atom)}")
            pairs.append((GroupElement(int(atom["flip"]), tuple(atom["trans"])), atom["w"]))
        return cls(dim, pairs)

    @classmethod
    def load(cls, path: str | Path) -> "GroupDistribution":
        return cls.from_json_obj(json.loads(Path(path).read_text()))


def delta(g: GroupElement) -> GroupDistribution:
    return GroupDistribution(g.dim, [(g, Fraction(1))])


def convolve(mu1: GroupDistribution, mu2: GroupDistribution) -> GroupDistribution:
    """Law of X*Y for independent X ~ mu1, Y ~ mu2 (exhaustive pairing)."""
    if mu1.dim != mu2.dim:
        raise ValueError(f"dimension mismatch: {mu1.dim} != {mu2.dim}")
    acc: dict[GroupElement, Weight] = {}
    for g, wg in mu1.atoms:
        for h, wh in mu2.atoms:
            k = multiply(g, h)
            acc[k] = acc.get(k, 0) + wg * wh
    return GroupDistribution(mu1.dim, acc, check=False)


def convolve_power(nu: GroupDistribution, n: int) -> GroupDistribution:
    """Exact law of S_n = g_n ... g_1 for i.i.d. g_k ~ nu; n = 0 gives delta_e."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = delta(identity(nu.dim))
    if not nu.exact:
        out = out.to_float()
    for _ in range(n):
        out = convolve(nu, out)
    return out


# -- sampling -----------------------------------------------------------------

@dataclass(frozen=True)
class PathSample:
    seed: int
    steps: tuple[GroupElement, ...]
    partials: tuple[GroupElement, ...]

    @property
    def length(self) -> int:
        return len(self.steps)


def _atom_arrays(nu: GroupDistribution):
    flips = np.array([g.flip for g, _ in nu.atoms], dtype=np.int64)
    trans = np.array([g.trans for g, _ in nu.atoms], dtype=np.int64).reshape(len(nu.atoms), nu.dim)
    probs = np.array([float(w) for _, w in nu.atoms])
    return flips, trans, probs / probs.sum()


def sample_increments(nu: GroupDistribution, shape, rng: np.random.Generator):
    """Draw i.i.d. steps; returns (flips, trans) with trans of shape shape + (d,)."""
    flips, trans, probs = _atom_arrays(nu)
    idx = rng.choice(len(probs), size=shape, p=probs)
    return flips[idx], trans[idx]


def partial_products(flips: np.ndarray, trans: np.ndarray):
    """Running products S_n = g_n ... g_1 along axis 0.

    Returns arrays of length T+1 along axis 0 with S_0 = e.
    """
    T = flips.shape[0]
    out_f = np.ones((T + 1,) + flips.shape[1:], dtype=np.int64)
    out_t = np.zeros((T + 1,) + trans.shape[1:], dtype=np.int64)
    for n in range(T):
        out_f[n + 1] = flips[n] * out_f[n]
        out_t[n + 1] = trans[n] + flips[n][..., None] * out_t[n]
    return out_f, out_t


def sample_path(nu: GroupDistribution, T: int, seed: int) -> PathSample:
    """Reproducible path of length T driven by numpy's PCG64 seeded with ``seed``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    flips, trans = sample_increments(nu, T, rng)
    pf, pt = partial_products(flips, trans)
    steps = tuple(GroupElement(int(f), tuple(t)) for f, t in zip(flips, trans))
    partials = tuple(GroupElement(int(f), tuple(t)) for f, t in zip(pf, pt))
    return PathSample(seed=int(seed), steps=steps, partials=partials)
