"""Representations of G_d, the matrix Fourier transform and its inversion.

Conventions used throughout the package:

* ``rho2(theta, g)`` is the 2x2 unitary representation; for theta off T_d it
  is irreducible and rho_theta ~ rho_{-theta} via the swap matrix.
* ``fourier(f, theta) = sum_g f(g) rho2(theta, g)``.  This is multiplicative,
  ``fourier(f * h) = fourier(f) @ fourier(h)``, and for a cocycle it is
  exactly ``E[rho_theta(psi_n)] = int L_rho^n 1 dmu``.
* Inversion reads ``f(g) = c_P * int Tr(rho2(theta, g)^* F(theta)) dtheta``
  over the full torus with ``c_P = 1 / (2 (2 pi)^d)``.  The extra 1/2 accounts
  for every irreducible class being hit twice (theta and -theta).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .group import GroupDistribution, GroupElement

TWO_PI = 2.0 * math.pi

FunctionLike = Union[GroupDistribution, Mapping[GroupElement, complex]]

__all__ = [
    "plancherel_weight",
    "uncorrected_plancherel_weight",
    "reduce_theta",
    "in_Td",
    "rho2",
    "rho1",
    "U",
    "conjugate_U",
    "positive_type",
    "fourier",
    "TorusGrid",
    "GridTooCoarse",
    "grid_size_for",
    "plancherel_inverse",
    "parseval_check",
    "invert_on_box",
    "enumerate_box",
    "g_norm",
]


def plancherel_weight(d: int) -> float:
    return 1.0 / (2.0 * TWO_PI**d)


def uncorrected_plancherel_weight(d: int) -> float:
    """Normalisation 1/(2 pi)^d without the factor 1/2; kept for negative controls."""
    return 1.0 / TWO_PI**d


def reduce_theta(theta) -> np.ndarray:
    return np.mod(np.asarray(theta, dtype=float), TWO_PI)


def in_Td(theta, tol: float = 1e-12) -> bool:
    t = reduce_theta(np.atleast_1d(theta))
    near0 = np.minimum(t, TWO_PI - t) <= tol
    nearpi = np.abs(t - math.pi) <= tol
    return bool(np.all(near0 | nearpi))


def _phase(theta, trans) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.exp(1j * (theta @ np.asarray(trans, dtype=float)))


def rho2(theta, g: GroupElement) -> np.ndarray:
    """2x2 matrix rho_theta(g); theta may carry leading batch axes (..., d)."""
    z = _phase(theta, g.trans)
    out = np.zeros(np.shape(z) + (2, 2), dtype=complex)
    if g.flip == 1:
        out[..., 0, 0] = z
        out[..., 1, 1] = np.conj(z)
    else:
        out[..., 0, 1] = z
        out[..., 1, 0] = np.conj(z)
    return out


def rho1(theta, gamma: int, g: GroupElement) -> complex:
    """One-dimensional character rho_{theta,gamma}; only defined for theta in T_d."""
    if not in_Td(theta):
        raise ValueError(f"theta={theta!r} is not in T_d")
    if gamma not in (1, -1):
        raise ValueError("gamma must be +1 or -1")
    chi = complex(_phase(np.atleast_1d(theta), g.trans))
    # on T_d the phase is exactly +-1
    chi = complex(round(chi.real), 0.0)
    return chi * (g.flip if gamma == -1 else 1)


U = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


def conjugate_U(M: np.ndarray) -> np.ndarray:
    # U is real, symmetric and its own inverse
    return U @ M @ U


def positive_type(theta, s: complex, t: complex, g: GroupElement) -> complex:
    z = complex(_phase(np.atleast_1d(theta), g.trans))
    if g.flip == 1:
        return z * abs(s) ** 2 + z.conjugate() * abs(t) ** 2
    return z * t * np.conj(s) + z.conjugate() * s * np.conj(t)


def _items(f: FunctionLike):
    if isinstance(f, GroupDistribution):
        return [(g, complex(w)) for g, w in f.atoms]
    return [(g, complex(w)) for g, w in f.items()]


def fourier(f: FunctionLike, theta) -> np.ndarray:
    """sum_g f(g) rho_theta(g); vectorised over leading axes of theta."""
    items = _items(f)
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape[:-1] + (2, 2), dtype=complex)
    for g, w in items:
        z = w * _phase(theta, g.trans)
        zc = w * np.conj(_phase(theta, g.trans))
        if g.flip == 1:
            out[..., 0, 0] += z
            out[..., 1, 1] += zc
        else:
            out[..., 0, 1] += z
            out[..., 1, 0] += zc
    return out


class GridTooCoarse(ValueError):
    pass


@dataclass(frozen=True)
class TorusGrid:
    """Uniform rectangle rule on [0, 2 pi)^d with K nodes per coordinate.

    Nodes are enumerated in C order, so reductions over them are performed in
    a fixed order and results are reproducible bit for bit.
    """

    K: int
    d: int

    def __post_init__(self) -> None:
        if self.K < 1 or self.d < 1:
            raise ValueError("K and d must be positive")

    @property
    def size(self) -> int:
        return self.K**self.d

    @property
    def weight(self) -> float:
        return (TWO_PI / self.K) ** self.d

    @property
    def axis(self) -> np.ndarray:
        return TWO_PI * np.arange(self.K) / self.K

    def nodes(self) -> np.ndarray:
        ax = self.axis
        mesh = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def integrate(self, values) -> complex:
        return np.sum(values, axis=0) * self.weight

    def exact_for_degree(self, degree: int) -> bool:
        return self.K >= degree + 1 if degree >= 0 else True


def grid_size_for(n: int, max_norm: int, target_norm: int = 0) -> int:
    """Nodes per coordinate that integrate n-step inversions exactly.

    The integrand is a trigonometric polynomial of degree at most
    ``n*max_norm + target_norm`` per coordinate, so any K above that degree
    avoids aliasing; we use at least 2*n*max_norm + 1.
    """
    return max(2 * n * max_norm + 1, n * max_norm + target_norm + 1, 1)


def _trace_pair(g: GroupElement, F: np.ndarray, theta: np.ndarray) -> np.ndarray:
    R = rho2(theta, g)
    return np.einsum("...ij,...ij->...", np.conj(R), F)


def plancherel_inverse(
    F: Union[Callable[[np.ndarray], np.ndarray], np.ndarray],
    g: GroupElement,
    grid: TorusGrid,
    *,
    weight: float | None = None,
    degree: int | None = None,
    full: bool = False,
):
    """Recover f(g) from F(theta) = fourier(f, theta) by the rectangle rule.

    ``F`` is either a callable on an (M, d) node array or the precomputed
    (M, 2, 2) array on ``grid.nodes()``.  With ``degree`` given, a grid too
    coarse for exact integration raises :class:`GridTooCoarse`.  With
    ``full=True`` the pair (real part, imaginary part) is returned.
    """
    if degree is not None and not grid.exact_for_degree(degree + g_norm(g)):
        raise GridTooCoarse(f"K={grid.K} cannot integrate degree {degree + g_norm(g)} exactly")
    nodes = grid.nodes()
    vals = F(nodes) if callable(F) else np.asarray(F)
    c = plancherel_weight(grid.d) if weight is None else weight
    total = c * grid.integrate(_trace_pair(g, vals, nodes))
    if full:
        return float(total.real), float(total.imag)
    return float(total.real)


def g_norm(g: GroupElement) -> int:
    return max((abs(t) for t in g.trans), default=0)


def parseval_check(f: FunctionLike, grid: TorusGrid, *, weight: float | None = None):
    """Returns (lhs, rhs, gap) for sum |f|^2 versus its Fourier-side integral."""
    items = _items(f)
    lhs = float(sum(abs(w) ** 2 for _, w in items))
    nodes = grid.nodes()
    Fh = fourier(dict(items), nodes) if items else np.zeros((len(nodes), 2, 2), complex)
    tr = np.einsum("...ij,...ij->...", Fh, np.conj(Fh)).real
    c = plancherel_weight(grid.d) if weight is None else weight
    rhs = float(c * grid.integrate(tr))
    return lhs, rhs, abs(lhs - rhs)


def enumerate_box(d: int, radius: int):
    """All integer vectors with |r|_inf <= radius, lexicographic."""
    return list(itertools.product(range(-radius, radius + 1), repeat=d))


def invert_on_box(F: np.ndarray, grid: TorusGrid, radius: int, *, weight: float | None = None, full: bool = False):
    """Invert F (sampled on ``grid.nodes()``) at every (+-1, r) with |r|_inf <= radius.

    Each trace sum over nodes is a discrete Fourier sum, so all targets are
    obtained with one FFT per matrix entry.  Returns ``(p_plus, p_minus)``
    indexed by ``r + radius``; with ``full=True`` the largest imaginary
    residue is appended.
    """
    d, K = grid.d, grid.K
    F = np.asarray(F).reshape((K,) * d + (2, 2))
    c = (plancherel_weight(d) if weight is None else weight) * grid.weight
    axes = tuple(range(d))
    fwd = lambda X: np.fft.fftn(X, axes=axes)  # noqa: E731  sum_k e^{-i r theta_k} X_k
    bwd = lambda X: np.fft.ifftn(X, axes=axes) * K**d  # noqa: E731  sum_k e^{+i r theta_k} X_k
    idx = np.ix_(*([np.arange(-radius, radius + 1) % K] * d))
    plus = c * (fwd(F[..., 0, 0])[idx] + bwd(F[..., 1, 1])[idx])
    minus = c * (fwd(F[..., 0, 1])[idx] + bwd(F[..., 1, 0])[idx])
    if full:
        imag = float(max(np.max(np.abs(plus.imag)), np.max(np.abs(minus.imag))))
        return plus.real, minus.real, imag
    return plus.real, minus.real
