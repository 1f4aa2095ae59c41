"""Local limit theorem for i.i.d. random walks on G_d.

The n-step law is recovered from powers of the 2x2 characteristic matrix
M(theta) by exact trigonometric quadrature and compared with the Gaussian
limit ``n^{d/2} p_n(+-1, r) -> 1/2 * N(0, Sigma)(r / sqrt(n))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np

from .dual import TorusGrid, fourier, g_norm, grid_size_for, invert_on_box, plancherel_inverse, plancherel_weight
from .group import GroupDistribution, GroupElement, convolve_power, identity

__all__ = [
    "ConditionA",
    "ConditionB",
    "AperiodicityError",
    "StepMoments",
    "EigData",
    "char_matrix",
    "matrix_power_cayley",
    "eig_data",
    "moments",
    "check_aperiodicity_gcd",
    "nstep_prob",
    "nstep_box",
    "gaussian_limit",
    "lclt_deviation",
    "CONFLUENT_RTOL",
]

CONFLUENT_RTOL = 1e-9


class ConditionA(ValueError):
    """The second-moment matrix S is singular (support does not span R^d)."""


class ConditionB(ValueError):
    """No flip mass, or the flip-corrected covariance is degenerate."""


class AperiodicityError(ValueError):
    pass


def char_matrix(nu: GroupDistribution, theta) -> np.ndarray:
    return fourier(nu, theta)


# -- powers of 2x2 matrices ---------------------------------------------------

def _eigs(M: np.ndarray):
    tau = M[..., 0, 0] + M[..., 1, 1]
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    disc = np.sqrt(tau * tau - 4.0 * det + 0j)
    return (tau + disc) / 2.0, (tau - disc) / 2.0, tau, det


def _divided_power(ap, am, n: int) -> np.ndarray:
    """D_n = (ap^n - am^n) / (ap - am), continuous across ap == am."""
    ap = np.asarray(ap, dtype=complex)
    am = np.asarray(am, dtype=complex)
    if n == 0:
        return np.zeros(np.broadcast(ap, am).shape, dtype=complex)
    delta = ap - am
    scale = np.maximum(np.maximum(np.abs(ap), np.abs(am)), 1.0)
    confluent = np.abs(delta) < CONFLUENT_RTOL * scale
    # binomial series around am; used where n*|delta| is small against |am|
    near = ~confluent & (n * np.abs(delta) < 0.5 * np.maximum(np.abs(ap), np.abs(am)))
    direct = ~confluent & ~near
    out = np.empty(np.broadcast(ap, am).shape, dtype=complex)
    ap_b, am_b, d_b = np.broadcast_arrays(ap, am, delta)
    if np.any(direct):
        a, b, dd = ap_b[direct], am_b[direct], d_b[direct]
        out[direct] = (a**n - b**n) / dd
    if np.any(confluent):
        a = (ap_b[confluent] + am_b[confluent]) / 2.0
        out[confluent] = n * a ** (n - 1)
    if np.any(near):
        b, dd = am_b[near], d_b[near]
        ratio = dd / b
        term = n * b ** (n - 1)
        acc = term.copy()
        for j in range(1, n):
            term = term * ratio * (n - j) / (j + 1)
            acc = acc + term
            if np.all(np.abs(term) <= 1e-18 * np.abs(acc)):
                break
        out[near] = acc
    return out


def matrix_power_cayley(M: np.ndarray, n: int) -> np.ndarray:
    """M^n for 2x2 matrices (batched over leading axes) via Cayley-Hamilton.

    M^n = D_n M - det(M) D_{n-1} I, with D_n the divided power of the two
    eigenvalues.  When the eigenvalues agree to ``CONFLUENT_RTOL`` the
    confluent form n a^{n-1} M + (1-n) a^n I is used.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    M = np.asarray(M, dtype=complex)
    eye = np.broadcast_to(np.eye(2, dtype=complex), M.shape)
    if n == 0:
        return eye.copy()
    ap, am, _, det = _eigs(M)
    Dn = _divided_power(ap, am, n)
    Dn1 = _divided_power(ap, am, n - 1) if n > 1 else np.zeros_like(Dn)
    bn = -det * Dn1 if n > 1 else np.zeros_like(Dn)
    return Dn[..., None, None] * M + bn[..., None, None] * eye


@dataclass(frozen=True)
class EigData:
    a_plus: np.ndarray
    a_minus: np.ndarray
    tau: np.ndarray
    det: np.ndarray

    def a_n(self, n: int) -> np.ndarray:
        return _divided_power(self.a_plus, self.a_minus, n)

    def b_n(self, n: int) -> np.ndarray:
        if n == 0:
            return np.ones_like(self.a_plus)
        return -self.det * _divided_power(self.a_plus, self.a_minus, n - 1)


def eig_data(M: np.ndarray) -> EigData:
    """Eigenvalues by the quadratic formula, a_plus taking the + root."""
    ap, am, tau, det = _eigs(np.asarray(M, dtype=complex))
    return EigData(ap, am, tau, det)


# -- moments ------------------------------------------------------------------

def _frac_solve(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(A)
    aug = [row[:] + [b[i]] for i, row in enumerate(A)]
    for c in range(n):
        piv = next((r for r in range(c, n) if aug[r][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        aug[c], aug[piv] = aug[piv], aug[c]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c] / aug[c][c]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
    return [aug[i][n] / aug[i][i] for i in range(n)]


def _frac_det(A: list[list[Fraction]]) -> Fraction:
    n = len(A)
    M = [row[:] for row in A]
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return det


@dataclass(frozen=True)
class StepMoments:
    """Moment data of a step law nu.

    ``sigma_q`` is the covariance of the limit Gaussian,
    S + (w+ w+^T - w- w-^T) / A-, which is what the eigenvalue curvature
    of M(theta) at 0 produces.  ``sigma_literal`` is the alternative
    normalisation (S + w+ w+^T - w- w-^T) / (2 A-); both agree whenever
    A- = 1/2 and w+- = 0.
    """

    dim: int
    A_plus: object
    A_minus: object
    p: object
    w_plus: tuple
    w_minus: tuple
    S_mat: tuple
    beta0: object
    beta1: object
    beta2: object
    sigma_q: tuple
    sigma_literal: tuple
    exact: bool

    @property
    def nondegeneracy_factor(self):
        Am = self.A_minus
        return (1 + self.beta0 / Am) * (1 - self.beta2 / Am) + (self.beta1 / Am) ** 2

    def sigma_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.sigma_q])

    def S_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.S_mat])

    def det_identity_gap(self) -> float:
        """|det(Sigma) - det(S) * nondegeneracy_factor|."""
        if self.exact:
            lhs = _frac_det([list(r) for r in self.sigma_q])
            rhs = _frac_det([list(r) for r in self.S_mat]) * self.nondegeneracy_factor
            return float(abs(lhs - rhs))
        lhs = np.linalg.det(self.sigma_array())
        rhs = np.linalg.det(self.S_array()) * float(self.nondegeneracy_factor)
        return float(abs(lhs - rhs))

    # expansion helpers, theta -> sums over the flip sector
    def B(self, sign: int, theta) -> float:
        w = self.w_plus if sign == 1 else self.w_minus
        return float(np.dot(np.asarray(w, dtype=float), np.asarray(theta, dtype=float)))

    def a_plus_quadratic(self, theta) -> float:
        """Second-order model 1 - theta^T Sigma theta / 2 of the leading eigenvalue."""
        th = np.asarray(theta, dtype=float)
        return 1.0 - 0.5 * float(th @ self.sigma_array() @ th)


def moments(nu: GroupDistribution) -> StepMoments:
    d = nu.dim
    exact = nu.exact
    zero = Fraction(0) if exact else 0.0
    A = {1: zero, -1: zero}
    w = {1: [zero] * d, -1: [zero] * d}
    S = [[zero] * d for _ in range(d)]
    for g, p in nu.atoms:
        A[g.flip] += p
        for i in range(d):
            w[g.flip][i] += p * g.trans[i]
            for j in range(d):
                S[i][j] += p * g.trans[i] * g.trans[j]
    if exact:
        detS = _frac_det(S)
    else:
        detS = float(np.linalg.det(np.array(S, dtype=float)))
    if detS == 0 or (not exact and abs(detS) < 1e-14):
        raise ConditionA("S = sum (nu(1,m)+nu(-1,m)) m m^T is singular; support does not span R^d")
    Am = A[-1]
    if Am <= 0:
        raise ConditionB("A_minus = nu(flip = -1) must be positive")

    def solve(b):
        if exact:
            return _frac_solve(S, b)
        return list(np.linalg.solve(np.array(S, dtype=float), np.array(b, dtype=float)))

    Sinv_wp = solve(w[1])
    Sinv_wm = solve(w[-1])
    dot = lambda u, v: sum((x * y for x, y in zip(u, v)), zero)  # noqa: E731
    beta0 = dot(w[1], Sinv_wp)
    beta1 = dot(w[1], Sinv_wm)
    beta2 = dot(w[-1], Sinv_wm)
    outer = [[w[1][i] * w[1][j] - w[-1][i] * w[-1][j] for j in range(d)] for i in range(d)]
    sigma = [[S[i][j] + outer[i][j] / Am for j in range(d)] for i in range(d)]
    literal = [[(S[i][j] + outer[i][j]) / (2 * Am) for j in range(d)] for i in range(d)]
    m = StepMoments(
        dim=d,
        A_plus=A[1],
        A_minus=Am,
        p=A[1] - Am,
        w_plus=tuple(w[1]),
        w_minus=tuple(w[-1]),
        S_mat=tuple(tuple(r) for r in S),
        beta0=beta0,
        beta1=beta1,
        beta2=beta2,
        sigma_q=tuple(tuple(r) for r in sigma),
        sigma_literal=tuple(tuple(r) for r in literal),
        exact=exact,
    )
    fac = m.nondegeneracy_factor
    if fac == 0 or (not exact and abs(fac) < 1e-14):
        raise ConditionB("flip-corrected covariance is degenerate: (1+b0/A-)(1-b2/A-)+(b1/A-)^2 = 0")
    gap = m.det_identity_gap()
    if gap > 1e-10 * max(1.0, abs(float(detS))):
        raise ArithmeticError(f"determinant identity failed by {gap}")
    return m


# -- aperiodicity -------------------------------------------------------------

def check_aperiodicity_gcd(nu: GroupDistribution, n_max: int = 12) -> int:
    """gcd of the return times n <= n_max with P(S_n = e) > 0."""
    e = identity(nu.dim)
    support = [(g, 1) for g, w in nu.atoms if w > 0]
    # positivity only; unit weights keep the enumeration cheap
    law = GroupDistribution(nu.dim, [(e, 1)], check=False)
    unit = GroupDistribution(nu.dim, support, check=False)
    from .group import convolve

    times = []
    for n in range(1, n_max + 1):
        law = convolve(unit, law)
        law = GroupDistribution(nu.dim, [(g, 1) for g, _ in law.atoms], check=False)
        if law[e] > 0:
            times.append(n)
    if not times:
        raise AperiodicityError(f"no return to e within n_max={n_max}")
    return reduce(math.gcd, times)


# -- inversion ----------------------------------------------------------------

def _mn_grid(nu: GroupDistribution, n: int, target_norm: int = 0):
    K = grid_size_for(n, nu.max_norm(), target_norm)
    grid = TorusGrid(K, nu.dim)
    M = char_matrix(nu, grid.nodes())
    return grid, matrix_power_cayley(M, n)


def nstep_prob(nu: GroupDistribution, n: int, g: GroupElement) -> float:
    """P(S_n = g) by Fourier inversion on an exact grid."""
    grid, Mn = _mn_grid(nu, n, g_norm(g))
    return plancherel_inverse(Mn, g, grid)


def nstep_box(nu: GroupDistribution, n: int, radius: int):
    """P(S_n = (+1, r)) and P(S_n = (-1, r)) for every |r|_inf <= radius.

    Returned as two arrays indexed by r + radius along each axis.
    """
    grid, Mn = _mn_grid(nu, n, radius)
    return invert_on_box(Mn, grid, radius)


# -- Gaussian limit -----------------------------------------------------------

def gaussian_limit(mom: StepMoments, x) -> float:
    """Half the N(0, Sigma) density: the limit of n^{d/2} P(S_n = (+-1, r)) at x = r/sqrt(n)."""
    sigma = mom.sigma_array()
    d = sigma.shape[0]
    det = np.linalg.det(sigma)
    if det <= 0:
        raise ConditionB("covariance is singular")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q = x @ np.linalg.solve(sigma, x)
    return 0.5 * (2 * math.pi) ** (-d / 2) * det ** -0.5 * math.exp(-0.5 * q)


def _gaussian_on_box(sigma: np.ndarray, n: int, radius: int) -> np.ndarray:
    d = sigma.shape[0]
    ax = np.arange(-radius, radius + 1) / math.sqrt(n)
    mesh = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)
    prec = np.linalg.inv(sigma)
    q = np.einsum("...i,ij,...j->...", mesh, prec, mesh)
    return 0.5 * (2 * math.pi) ** (-d / 2) * np.linalg.det(sigma) ** -0.5 * np.exp(-0.5 * q)


@dataclass(frozen=True)
class DeviationTable:
    n: int
    radius: int
    p_plus: np.ndarray
    p_minus: np.ndarray
    phi: np.ndarray
    phi_reflected: np.ndarray

    @property
    def scale(self) -> float:
        return self.n ** (self.p_plus.ndim / 2)

    @property
    def sup_gap(self) -> float:
        s = self.scale
        return float(max(np.max(np.abs(s * self.p_plus - self.phi)), np.max(np.abs(s * self.p_minus - self.phi))))

    @property
    def sup_gap_reflected(self) -> float:
        s = self.scale
        return float(
            max(
                np.max(np.abs(s * self.p_plus - self.phi_reflected)),
                np.max(np.abs(s * self.p_minus - self.phi_reflected)),
            )
        )


def deviation_table(nu: GroupDistribution, n: int, radius: int) -> DeviationTable:
    mom = moments(nu)
    pp, pm = nstep_box(nu, n, radius)
    sigma = mom.sigma_array()
    phi = _gaussian_on_box(sigma, n, radius)
    # Phi(-r/sqrt n): axes reversed
    phi_ref = phi[tuple(slice(None, None, -1) for _ in range(phi.ndim))]
    return DeviationTable(n, radius, pp, pm, phi, phi_ref)


def lclt_deviation(nu: GroupDistribution, n: int, radius: int) -> float:
    """max over flips and |r|_inf <= radius of |n^{d/2} p_n(+-1, r) - Phi(r/sqrt n)|."""
    return deviation_table(nu, n, radius).sup_gap


def oracle_gap(nu: GroupDistribution, n: int) -> float:
    """Largest |nstep - convolve_power| over the support of S_n and its box."""
    exact = convolve_power(nu, n)
    R = n * nu.max_norm()
    pp, pm = nstep_box(nu, n, R)
    ref_p = np.zeros_like(pp)
    ref_m = np.zeros_like(pm)
    for g, w in exact.atoms:
        idx = tuple(t + R for t in g.trans)
        (ref_p if g.flip == 1 else ref_m)[idx] = float(w)
    return float(max(np.max(np.abs(pp - ref_p)), np.max(np.abs(pm - ref_m))))
