"""First returns of the cocycle to the identity and the renewal identity.

Returns are counted for the skew product started at (a_0, e) with a_0 ~ pi:
``tau = min{n >= 1 : psi_n = e}``.  Taboo dynamic programming removes the mass
sitting at e after every step; what is removed at step n is P(tau = n).

For a Markov chain the return time does not forget the state it ends in, so
the scalar relation ``u = sum_m f^{*m}`` is only guaranteed when the rows of
P coincide.  The identity that always holds is the state-resolved one,

    u_ab[n] = [n = 0][a = b] + sum_{k=1}^{n} sum_c f_ac[k] u_cb[n - k],

where ``f_ac[k]`` (``u_ac[k]``) is the probability, starting from state a at
e, of a first (any) visit to e at time k with the chain then in state c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dp import model_dp
from .dual import TorusGrid, fourier, plancherel_weight
from .gibbs_markov import MarkovGibbsModel
from .group import GroupDistribution
from .rw import moments

__all__ = [
    "ReturnLaw",
    "RenewalCheck",
    "TailDiagnostic",
    "TransienceCertificate",
    "first_return_pmf",
    "visit_matrices",
    "renewal_check",
    "tail_diagnostic",
    "transience_certificate",
    "generating_function",
    "step_law",
]


@dataclass(frozen=True)
class ReturnLaw:
    """``f[n] = P(tau = n)`` and ``tail[n] = P(tau >= n)`` for 0 <= n <= n_max (+1 for tail).

    ``u[n] = mu(psi_n = e)`` when requested, else None.
    """

    f: np.ndarray
    tail: np.ndarray
    u: np.ndarray | None
    exact: bool

    @property
    def n_max(self) -> int:
        return len(self.f) - 1


def _array(values, exact: bool) -> np.ndarray:
    return np.array(values, dtype=object if exact else float)


def first_return_pmf(m: MarkovGibbsModel, n_max: int, exact: bool | None = None, with_u: bool = True) -> ReturnLaw:
    """Exact return-time law up to n_max by taboo dynamic programming."""
    exact = m.exact if exact is None else exact
    conv = Fraction if exact else float
    zero, one = conv(0), conv(1)
    f = [zero]
    tail = [one, one]
    dp = model_dp(m, n_max, exact=exact)
    C = dp.initial()
    for _ in range(n_max):
        C = dp.step(C)
        f.append(sum(dp.identity_mass(C), zero))
        dp.clear_identity(C)
        tail.append(C.sum())
    u = None
    if with_u:
        u = [one]
        dp = model_dp(m, n_max, exact=exact)
        C = dp.initial()
        for _ in range(n_max):
            C = dp.step(C)
            u.append(sum(dp.identity_mass(C), zero))
        u = _array(u, exact)
    return ReturnLaw(_array(f, exact), _array(tail, exact), u, exact)


def visit_matrices(m: MarkovGibbsModel, n_max: int, exact: bool | None = None):
    """State-resolved first-visit and visit probabilities ``F, U`` of shape (n_max+1, N, N)."""
    exact = m.exact if exact is None else exact
    conv = Fraction if exact else float
    N = m.N
    F = np.empty((n_max + 1, N, N), dtype=object if exact else float)
    U = np.empty_like(F)
    F.fill(conv(0))
    U.fill(conv(0))
    for a in range(N):
        U[0, a, a] = conv(1)
        start = [conv(0)] * N
        start[a] = conv(1)
        for taboo, out in ((True, F), (False, U)):
            dp = model_dp(m, n_max, exact=exact)
            C = dp.initial(start)
            for k in range(1, n_max + 1):
                C = dp.step(C)
                out[k, a, :] = dp.identity_mass(C)
                if taboo:
                    dp.clear_identity(C)
    return F, U


def _scalar_renewal(f: np.ndarray, n_max: int, exact: bool) -> np.ndarray:
    """sum_{m>=1} f^{*m} up to n_max, via v[n] = f[n] + sum_{k<n} f[k] v[n-k]."""
    zero = Fraction(0) if exact else 0.0
    v = [zero] * (n_max + 1)
    v[0] = Fraction(1) if exact else 1.0
    for n in range(1, n_max + 1):
        v[n] = sum((f[k] * v[n - k] for k in range(1, n + 1)), zero)
    return _array(v, exact)


@dataclass(frozen=True)
class RenewalCheck:
    n_max: int
    gap: float
    scalar_gap: float
    exact: bool


def renewal_check(m: MarkovGibbsModel, n_max: int, exact: bool | None = None) -> RenewalCheck:
    """Largest coefficient gap in the state-resolved renewal identity (``gap``) and in its scalar form."""
    exact = m.exact if exact is None else exact
    F, U = visit_matrices(m, n_max, exact)
    N = m.N
    gap = 0.0
    for n in range(1, n_max + 1):
        rhs = sum((F[k].dot(U[n - k]) for k in range(1, n + 1)), np.zeros((N, N), dtype=F.dtype))
        gap = max(gap, float(np.max(np.abs(U[n] - rhs))))
    pi = np.array(m.pi_exact if exact else m.pi, dtype=object if exact else float)
    f = [pi.dot(F[k].sum(axis=1)) for k in range(n_max + 1)]
    u = [pi.dot(U[k].sum(axis=1)) for k in range(n_max + 1)]
    v = _scalar_renewal(f, n_max, exact)
    scalar_gap = max((abs(float(u[n] - v[n])) for n in range(1, n_max + 1)), default=0.0)
    return RenewalCheck(n_max, gap, scalar_gap, exact)


# -- tails --------------------------------------------------------------------------

@dataclass(frozen=True)
class TailDiagnostic:
    """tail[n] rescaled by sqrt(n) (d = 1) or log(n) (d = 2) at the checkpoints.

    ``ratios[k] = scaled[k+1] / scaled[k]``; ``drift`` is |ratios - 1|.
    """

    d: int
    checkpoints: np.ndarray
    tail: np.ndarray
    scaled: np.ndarray
    ratios: np.ndarray
    law: ReturnLaw

    @property
    def drift(self) -> np.ndarray:
        return np.abs(self.ratios - 1.0)

    @property
    def scale_name(self) -> str:
        return "tail*sqrt(n)" if self.d == 1 else "tail*log(n)"


def tail_diagnostic(m: MarkovGibbsModel, checkpoints: Sequence[int]) -> TailDiagnostic:
    """Plateau statistics of the rescaled return-time tail for d in {1, 2}."""
    if m.d not in (1, 2):
        raise ValueError("tail rescaling is defined for d = 1 or 2; use transience_certificate for d >= 3")
    cps = np.array(sorted(int(c) for c in checkpoints))
    law = first_return_pmf(m, int(cps[-1]), exact=False, with_u=False)
    tail = np.array([float(law.tail[c]) for c in cps])
    scale = np.sqrt(cps) if m.d == 1 else np.log(cps)
    scaled = tail * scale
    return TailDiagnostic(m.d, cps, tail, scaled, scaled[1:] / scaled[:-1], law)


def step_law(m: MarkovGibbsModel) -> GroupDistribution:
    """The i.i.d. step law of a model whose transition rows all coincide."""
    P = m.P_exact if m.exact else m.P.tolist()
    if any(list(row) != list(P[0]) for row in P):
        raise ValueError("model is not i.i.d.: transition rows differ")
    return GroupDistribution(m.d, [(m.label(a), P[0][a]) for a in range(m.N)])


@dataclass(frozen=True)
class TransienceCertificate:
    """Upper bound on P(tau < infinity) = sum_n f[n].

    ``partial`` is the exact sum up to ``N``.  The rest is at most
    sum_{n>N} u[n] <= c_P int 2 q^{N+1} / (1 - q), where q(theta) is the
    operator norm of the characteristic matrix.  Inside the ellipsoid
    1/2 theta^T Sigma theta <= ball^2 we use 1 - q >= kappa/2 theta^T Sigma theta;
    outside it q <= q_out.
    """

    N: int
    partial: float
    bound_inner: float
    bound_outer: float
    kappa: float
    q_out: float
    ball: float

    @property
    def total(self) -> float:
        return self.partial + self.bound_inner + self.bound_outer

    @property
    def certified(self) -> bool:
        return self.total < 1.0


def _norms(nu: GroupDistribution, thetas: np.ndarray) -> np.ndarray:
    """Spectral norms of the 2x2 characteristic matrices, from the Frobenius norm and determinant."""
    out = np.empty(len(thetas))
    step = 1 << 16
    for lo in range(0, len(thetas), step):
        M = fourier(nu, thetas[lo:lo + step])
        fro = np.sum(np.abs(M) ** 2, axis=(-2, -1))
        det = np.abs(M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0])
        out[lo:lo + step] = np.sqrt(0.5 * (fro + np.sqrt(np.maximum(fro**2 - 4 * det**2, 0.0))))
    return out


def transience_certificate(
    m: MarkovGibbsModel,
    N: int,
    ball: float = 0.5,
    grid_nodes: int = 160,
    law: ReturnLaw | None = None,
) -> TransienceCertificate:
    """Bound sum_n f[n] from above for an i.i.d. model in d >= 3.

    kappa is the minimum of (1 - q) / (1/2 theta^T Sigma theta) over a radial
    sample of the ellipsoid, reduced by 10%.  q_out is the maximum of q over
    torus grid nodes near or outside the ellipsoid, plus a Lipschitz
    allowance of E|psi|_1 times half the grid diagonal.  The kappa step is a
    dense sample, not an interval bound.
    """
    nu = step_law(m)
    d = m.d
    if d < 3:
        raise ValueError("the return-time sum is finite only for d >= 3")
    sigma = moments(nu).sigma_array()
    if law is None:
        law = first_return_pmf(m, N, exact=False, with_u=False)
    partial = float(sum(float(x) for x in law.f[1:N + 1]))

    # sample the ellipsoid 1/2 t^T Sigma t <= ball^2 along rays
    root = np.linalg.cholesky(sigma)  # Sigma = R R^T
    to_theta = np.sqrt(2.0) * np.linalg.inv(root).T
    rng = np.random.Generator(np.random.PCG64(0))
    dirs = rng.normal(size=(1024, d))
    dirs = np.concatenate([dirs, np.eye(d), -np.eye(d)])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.geomspace(1e-3, ball, 96)
    ys = (radii[:, None, None] * dirs[None]).reshape(-1, d)
    pts = ys @ to_theta.T
    q_in = _norms(nu, pts)
    kappa = 0.9 * float(np.min((1.0 - q_in) / np.sum(ys**2, axis=1)))
    if kappa <= 0:
        raise ArithmeticError("no quadratic gap near 0; walk may be recurrent")
    # c_P int 2 e^{-(N+1) kappa Q} / (kappa Q) with Q = 1/2 t^T Sigma t, over all of R^d
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    jac = 2 ** (d / 2) / math.sqrt(np.linalg.det(sigma)) * kappa ** (-d / 2)
    radial = 0.5 * (N + 1) ** (-(d - 2) / 2) * math.gamma((d - 2) / 2)
    inner = plancherel_weight(d) * 2 * jac * area * radial

    grid = TorusGrid(grid_nodes, d)
    nodes = grid.nodes()
    centred = np.where(nodes > math.pi, nodes - 2 * math.pi, nodes)
    lip = float(sum(float(w) * sum(abs(t) for t in g.trans) for g, w in nu.atoms))
    half = math.sqrt(d) * math.pi / grid_nodes
    # keep every node whose half-diagonal cell can reach outside the ellipsoid
    qform = np.sqrt(0.5 * np.einsum("ij,jk,ik->i", centred, sigma, centred))
    slack = math.sqrt(0.5 * np.max(np.linalg.eigvalsh(sigma))) * half
    outside = qform > ball - slack
    q_out = float(np.max(_norms(nu, nodes[outside]))) + lip * half
    if q_out >= 1.0:
        raise ArithmeticError(f"norm bound {q_out:.6f} outside the ellipsoid is not < 1; refine the grid")
    outer = q_out ** (N + 1) / (1 - q_out)  # c_P (2 pi)^d = 1/2 cancels the 2
    return TransienceCertificate(N, partial, inner, outer, kappa, q_out, ball)


# -- generating functions ----------------------------------------------------------

def generating_function(m: MarkovGibbsModel, z: complex, n_max: int):
    """Truncated generating functions of the state-resolved first-visit and visit laws.

    Returns (F, U, gap, truncation): F = pi F(z) 1 and U = pi U(z) 1 are the
    scalar series sum f[n] z^n and sum u[n] z^n, and gap is the largest entry
    of (I - F(z)) U(z) - I for the matrix series.  For |z| < 1, truncation
    3 |z|^{n_max+1} / (1 - |z|) bounds the effect of dropping terms.  On
    |z| = 1 the last two partial sums are averaged and the estimate is the
    size of the last visit coefficient, which is heuristic.
    """
    z = complex(z)
    if abs(z) > 1:
        raise ValueError("|z| must be <= 1")
    Fk, Uk = visit_matrices(m, n_max, exact=False)
    powers = z ** np.arange(n_max + 1)
    Fz = np.tensordot(powers, Fk, axes=1)
    Uz = np.tensordot(powers, Uk, axes=1)
    r = abs(z)
    if r == 1.0:
        Fz = Fz - 0.5 * powers[-1] * Fk[-1]
        Uz = Uz - 0.5 * powers[-1] * Uk[-1]
        trunc = float(np.max(np.abs(Uk[-1])) + np.max(np.abs(Fk[-1])))
    else:
        trunc = 3 * r ** (n_max + 1) / (1 - r)
    I = np.eye(m.N)
    gap = float(np.max(np.abs((I - Fz) @ Uz - I)))
    F = complex(m.pi @ Fz.sum(axis=1))
    U = complex(m.pi @ Uz.sum(axis=1))
    return F, U, gap, trunc
