"""Finite-state Markov models with G_d-valued labels and their twisted operators.

A model is a stationary Markov chain on N states, each state carrying a sign
``eps[a]`` and an integer vector ``psi[a]``; the cocycle after n steps is
``psi_n = (eps, psi)(a_{n-1}) ... (eps, psi)(a_0)``.  An involution ``invol`` on
states flips the sign, preserves the stationary law and leaves the transition
rows unchanged.

Operators act on functions of the state.  The transfer operator is the
adjoint of P in L^2(pi):

    (L v)[b] = sum_a pi[a] P[a, b] / pi[b] * v[a],      L 1 = 1,

and the twisted blocks are ``L_theta^s = L diag(1_{eps=s} e^{i<theta, psi>})``.
The 2N x 2N block operator ``[[L_th^+, L_th^-], [L_-th^-, L_-th^+]]`` is the
transfer operator twisted by rho_theta, so that
``fourier(law of psi_n, theta)[i, j] = sum_b pi[b] (A^n (e_j x 1))[i, b]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .dp import model_dp
from .dual import TorusGrid, grid_size_for, invert_on_box, plancherel_inverse, g_norm
from .group import GroupElement

__all__ = [
    "MarkovGibbsModel",
    "ValidationReport",
    "BlockOperator",
    "LeadingEigen",
    "EigenTie",
    "PerturbationError",
    "SpectralCurve",
    "AperiodicityReport",
    "validate_model",
    "transfer_matrix",
    "twisted_blocks",
    "assembled_batch",
    "leading_eigen",
    "spectral_curve",
    "gm_transform",
    "gm_nstep_prob",
    "gm_nstep_box",
    "gm_nstep_exact",
    "gm_lclt_testfn",
    "gm_testfn_exact",
    "gm_gaussian_limit",
    "aperiodicity_scan",
    "product_model",
]

TIE_TOL = 1e-10


def _as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    return None


def _exact_table(values):
    out = [_as_fraction(x) for x in values]
    return None if any(x is None for x in out) else tuple(out)


@dataclass(frozen=True, eq=False)
class MarkovGibbsModel:
    """Immutable model; float arrays for numerics plus exact copies when rational."""

    d: int
    P: np.ndarray
    pi: np.ndarray
    eps: np.ndarray
    psi: np.ndarray
    invol: np.ndarray
    P_exact: tuple | None = field(default=None, repr=False)
    pi_exact: tuple | None = field(default=None, repr=False)
    name: str = ""

    @classmethod
    def build(cls, P, pi, eps, psi, invol, d: int | None = None, name: str = "") -> "MarkovGibbsModel":
        N = len(P)
        psi_arr = np.asarray(psi, dtype=int).reshape(N, -1)
        d = psi_arr.shape[1] if d is None else int(d)
        if psi_arr.shape != (N, d):
            raise ValueError(f"psi must have shape ({N}, {d}), got {psi_arr.shape}")
        rows = [_exact_table(row) for row in P]
        P_exact = tuple(rows) if all(r is not None for r in rows) else None
        pi_exact = _exact_table(pi)
        if P_exact is None or pi_exact is None:
            P_exact = pi_exact = None
        Pf = np.array([[float(Fraction(x)) if isinstance(x, str) else float(x) for x in row] for row in P])
        pif = np.array([float(Fraction(x)) if isinstance(x, str) else float(x) for x in pi])
        eps_arr = np.asarray(eps, dtype=int)
        invol_arr = np.asarray(invol, dtype=int)
        if Pf.shape != (N, N) or pif.shape != (N,) or eps_arr.shape != (N,) or invol_arr.shape != (N,):
            raise ValueError("inconsistent state counts in model")
        if not set(eps_arr.tolist()) <= {1, -1}:
            raise ValueError("eps entries must be +1 or -1")
        return cls(d, Pf, pif, eps_arr, psi_arr, invol_arr, P_exact, pi_exact, name)

    @property
    def N(self) -> int:
        return len(self.pi)

    @property
    def exact(self) -> bool:
        return self.P_exact is not None

    @property
    def max_norm(self) -> int:
        return int(np.max(np.abs(self.psi))) if self.psi.size else 0

    def label(self, a: int) -> GroupElement:
        return GroupElement(int(self.eps[a]), tuple(int(t) for t in self.psi[a]))

    def with_pi(self, pi) -> "MarkovGibbsModel":
        P = self.P_exact if self.exact else self.P
        return MarkovGibbsModel.build(P, pi, self.eps, self.psi, self.invol, self.d, self.name)

    def with_psi(self, psi) -> "MarkovGibbsModel":
        P = self.P_exact if self.exact else self.P
        pi = self.pi_exact if self.exact else self.pi
        return MarkovGibbsModel.build(P, pi, self.eps, psi, self.invol, None, self.name)

    # -- serialization -------------------------------------------------
    def to_json_obj(self) -> dict:
        def enc(x):
            return str(x) if isinstance(x, Fraction) else float(x)

        P = self.P_exact if self.exact else self.P.tolist()
        pi = self.pi_exact if self.exact else self.pi.tolist()
        return {
            "d": self.d,
            "P": [[enc(x) for x in row] for row in P],
            "pi": [enc(x) for x in pi],
            "eps": self.eps.tolist(),
            "psi": self.psi.tolist(),
            "invol": self.invol.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict, name: str = "") -> "MarkovGibbsModel":
        keys = {"d", "P", "pi", "eps", "psi", "invol"}
        if set(obj) != keys:
            raise ValueError(f"model JSON must have exactly keys {sorted(keys)}, got {sorted(obj)}")
        return cls.build(obj["P"], obj["pi"], obj["eps"], obj["psi"], obj["invol"], obj["d"], name)

    @classmethod
    def load(cls, path: str | Path) -> "MarkovGibbsModel":
        path = Path(path)
        return cls.from_json_obj(json.loads(path.read_text()), name=path.stem)


# -- validation -----------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json_obj(self) -> dict:
        return {"ok": self.ok, "checks": [{"name": c.name, "passed": c.passed, "residual": c.residual} for c in self.checks]}


def _irreducible(P: np.ndarray) -> bool:
    N = len(P)
    reach = (P > 0) | np.eye(N, dtype=bool)
    for _ in range(max(1, int(math.ceil(math.log2(N))) + 1)):
        reach = (reach.astype(int) @ reach.astype(int)) > 0
    return bool(reach.all())


def validate_model(m: MarkovGibbsModel, tol: float = 1e-12) -> ValidationReport:
    """Check stochasticity, stationarity, irreducibility, the involution and the symmetry integrals."""
    checks = []

    def add(name, residual, extra_ok=True):
        residual = float(residual)
        checks.append(Check(name, bool(extra_ok and residual <= tol), residual))

    P, pi, N = m.P, m.pi, m.N
    add("row_sums", np.max(np.abs(P.sum(axis=1) - 1.0)) if N else 0.0, bool(np.all(P >= 0)))
    add("pi_sum", abs(pi.sum() - 1.0))
    add("stationary", np.max(np.abs(pi @ P - pi)))
    add("pi_positive", 0.0 if np.all(pi > 0) else float(-np.min(pi)), bool(np.all(pi > 0)))
    irr = _irreducible(P)
    add("irreducible", 0.0 if irr else 1.0, irr)
    s = m.invol
    bij = sorted(s.tolist()) == list(range(N))
    add("invol_bijection", 0.0 if bij else 1.0, bij)
    if bij:
        add("invol_involution", float(np.sum(s[s] != np.arange(N))))
        add("invol_flips_eps", float(np.sum(m.eps[s] != -m.eps)))
        add("invol_preserves_pi", np.max(np.abs(pi[s] - pi)))
        add("invol_same_rows", np.max(np.abs(P[s] - P)))
    plus = (m.eps == 1).astype(float)
    add("symmetry_plus", np.max(np.abs((pi * plus) @ m.psi)) if m.d else 0.0)
    add("symmetry_all", np.max(np.abs(pi @ m.psi)) if m.d else 0.0)
    add("half_plus", abs(pi @ plus - 0.5))
    return ValidationReport(tuple(checks))


# -- operators ------------------------------------------------------------------

def transfer_matrix(m: MarkovGibbsModel) -> np.ndarray:
    """K[b, a] = pi[a] P[a, b] / pi[b]; constants are fixed: K @ 1 = 1."""
    return (m.pi[:, None] * m.P).T / m.pi[:, None]


def _phases(m: MarkovGibbsModel, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.exp(1j * (theta @ m.psi.T.astype(float)))


@dataclass(frozen=True)
class BlockOperator:
    theta: np.ndarray
    blocks: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    assembled: np.ndarray

    @property
    def L_plus(self) -> np.ndarray:
        return self.blocks[0]

    @property
    def L_minus(self) -> np.ndarray:
        return self.blocks[1]


def twisted_blocks(m: MarkovGibbsModel, theta) -> BlockOperator:
    """The blocks L_th^{+1}, L_th^{-1}, L_-th^{-1}, L_-th^{+1} and their 2N x 2N assembly."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    K = transfer_matrix(m)
    z = _phases(m, theta)
    plus = m.eps == 1
    minus = ~plus
    Lp = K * np.where(plus, z, 0)
    Lm = K * np.where(minus, z, 0)
    Lm_neg = K * np.where(minus, np.conj(z), 0)
    Lp_neg = K * np.where(plus, np.conj(z), 0)
    A = np.block([[Lp, Lm], [Lm_neg, Lp_neg]])
    return BlockOperator(theta, (Lp, Lm, Lm_neg, Lp_neg), A)


def assembled_batch(m: MarkovGibbsModel, thetas) -> np.ndarray:
    """Block operators at many theta at once, shape (M, 2N, 2N)."""
    thetas = np.asarray(thetas, dtype=float).reshape(-1, m.d)
    K = transfer_matrix(m)
    z = _phases(m, thetas)  # (M, N)
    plus = m.eps == 1
    N = m.N
    A = np.zeros((len(thetas), 2 * N, 2 * N), dtype=complex)
    A[:, :N, :N] = K * np.where(plus, z, 0)[:, None, :]
    A[:, :N, N:] = K * np.where(~plus, z, 0)[:, None, :]
    A[:, N:, :N] = K * np.where(~plus, np.conj(z), 0)[:, None, :]
    A[:, N:, N:] = K * np.where(plus, np.conj(z), 0)[:, None, :]
    return A


class EigenTie(ArithmeticError):
    """The two largest eigenvalue moduli agree within the tie tolerance."""


class PerturbationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LeadingEigen:
    value: complex
    vector: np.ndarray
    gap: float


def leading_eigen(block: np.ndarray, pi=None, tol: float = TIE_TOL) -> LeadingEigen:
    """Dominant eigenpair by modulus.

    With ``pi`` given the eigenvector is scaled so that sum(pi * v) = 1
    (for a 2N-vector, pi is applied to each half and averaged); otherwise it
    has unit norm and a real positive largest entry.
    """
    block = np.asarray(block, dtype=complex)
    vals, vecs = np.linalg.eig(block)
    order = np.argsort(-np.abs(vals), kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    top = abs(vals[0])
    second = abs(vals[1]) if len(vals) > 1 else 0.0
    if len(vals) > 1 and top - second <= tol * max(1.0, top):
        raise EigenTie(f"top eigenvalue moduli {top:.15g} and {second:.15g} tie")
    v = vecs[:, 0]
    if pi is not None:
        pi = np.asarray(pi, dtype=float)
        weight = pi if len(pi) == len(v) else np.tile(pi, len(v) // len(pi)) / (len(v) // len(pi))
        norm = weight @ v
        if abs(norm) < 1e-12:
            raise PerturbationError("eigenvector has zero mean; cannot normalise")
        v = v / norm
    else:
        k = int(np.argmax(np.abs(v)))
        v = v * (abs(v[k]) / v[k]) / np.linalg.norm(v)
    return LeadingEigen(complex(vals[0]), v, float(top - second))


def _expand(A0, A1, A2, r0, ell, lam0):
    """Second-order eigen-expansion of A(th) = A0 + sum th_j A1[j] + 1/2 sum th_j th_k A2[j][k].

    Normalisation ell . r(th) = 1.  Returns (gradient, Hessian, first-order
    eigenvector derivatives) from bordered linear solves.
    """
    n = len(r0)
    d = len(A1)
    B = np.zeros((n + 1, n + 1), dtype=complex)
    B[:n, :n] = A0 - lam0 * np.eye(n)
    B[:n, n] = -r0
    B[n, :n] = ell
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond > 1e12:
        raise PerturbationError(f"bordered system is singular (cond={cond:.3g})")

    def solve(rhs):
        sol = np.linalg.solve(B, np.concatenate([rhs, [0.0]]))
        return sol[:n], sol[n]

    grad = np.zeros(d, dtype=complex)
    u1 = np.zeros((d, n), dtype=complex)
    for j in range(d):
        u1[j], grad[j] = solve(-A1[j] @ r0)
    hess = np.zeros((d, d), dtype=complex)
    for j in range(d):
        for k in range(d):
            rhs = -(A2[j][k] @ r0 + A1[j] @ u1[k] + A1[k] @ u1[j]) + grad[j] * u1[k] + grad[k] * u1[j]
            _, hess[j, k] = solve(rhs)
    return grad, hess, u1


def _block_derivatives(m: MarkovGibbsModel, sign: int):
    K = transfer_matrix(m)
    ind = (m.eps == sign).astype(float)
    psi = m.psi.astype(float)
    A1 = [1j * K * (ind * psi[:, j]) for j in range(m.d)]
    A2 = [[-K * (ind * psi[:, j] * psi[:, k]) for k in range(m.d)] for j in range(m.d)]
    return K * ind, A1, A2


def _assembled_derivatives(m: MarkovGibbsModel):
    K = transfer_matrix(m)
    plus = (m.eps == 1).astype(float)
    minus = 1.0 - plus
    psi = m.psi.astype(float)

    def blk(a, b, c, e):
        return np.block([[K * a, K * b], [K * c, K * e]])

    A0 = blk(plus, minus, minus, plus).astype(complex)
    A1 = [1j * blk(plus * psi[:, j], minus * psi[:, j], -minus * psi[:, j], -plus * psi[:, j]) for j in range(m.d)]
    A2 = [[-blk(*(w * psi[:, j] * psi[:, k] for w in (plus, minus, minus, plus))) for k in range(m.d)] for j in range(m.d)]
    return A0, A1, A2


def _green_kubo(m: MarkovGibbsModel, tol: float = 1e-15, max_lag: int = 10_000):
    psi = m.psi.astype(float)
    weighted = psi.T * m.pi
    C0 = weighted @ psi
    lit = C0.copy()
    sym = C0.copy()
    cur = psi
    for _ in range(max_lag):
        cur = m.P @ cur
        Cj = weighted @ cur
        lit += Cj
        sym += Cj + Cj.T
        if np.max(np.abs(Cj)) < tol:
            break
    return lit, sym


@dataclass(frozen=True)
class SpectralCurve:
    thetas: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    lambda0: tuple[complex, complex]
    v0: tuple[np.ndarray, np.ndarray]
    v0_prime: np.ndarray
    gradient_plus: np.ndarray
    gradient_minus: np.ndarray
    Gamma_plus: np.ndarray
    Gamma_minus: np.ndarray
    Gamma_plus_literal: np.ndarray
    Gamma_minus_literal: np.ndarray
    sigma1_sq: np.ndarray
    green_kubo_literal: np.ndarray
    green_kubo_symmetric: np.ndarray

    @property
    def phi1_at_zero(self) -> float:
        d = self.sigma1_sq.shape[0]
        return 0.5 * (2 * math.pi) ** (-d / 2) * np.linalg.det(self.sigma1_sq) ** -0.5


def _top_eigenvalue(M: np.ndarray) -> complex:
    vals = np.linalg.eigvals(M)
    return complex(vals[np.argmax(np.abs(vals))])


def spectral_curve(m: MarkovGibbsModel, theta_grid=None) -> SpectralCurve:
    """Leading eigenvalues of L_th^{+-1} along ``theta_grid`` plus the quadratic data at 0.

    ``Gamma_plus``/``Gamma_minus`` are minus the Hessians of the block
    eigenvalues at 0, obtained by second-order perturbation;
    ``*_literal`` are int 1 psi psi^T - 2 sym int 1 psi v'^T with v' the real
    first-order eigenvector derivative, kept for comparison.
    ``sigma1_sq`` is the Hessian of -log of the leading eigenvalue of the
    assembled block.
    """
    d = m.d
    thetas = np.zeros((0, d)) if theta_grid is None else np.asarray(theta_grid, dtype=float).reshape(-1, d)
    lp = np.array([_top_eigenvalue(twisted_blocks(m, t).L_plus) for t in thetas], dtype=complex)
    lm = np.array([_top_eigenvalue(twisted_blocks(m, t).L_minus) for t in thetas], dtype=complex)

    psi = m.psi.astype(float)
    res = {}
    for sign in (1, -1):
        A0, A1, A2 = _block_derivatives(m, sign)
        lead = leading_eigen(A0, m.pi)
        grad, hess, u1 = _expand(A0, A1, A2, lead.vector, m.pi, lead.value)
        ind = (m.eps == sign) * m.pi
        vprime = (u1 / 1j).real
        quad = (psi.T * ind) @ psi
        cross = (psi.T * ind) @ vprime.T
        literal = quad - (cross + cross.T)
        res[sign] = (lead, grad, -hess.real, literal, u1)

    A0, A1, A2 = _assembled_derivatives(m)
    ell = np.concatenate([m.pi, m.pi]) / 2
    lead = leading_eigen(A0, m.pi)
    grad, hess, _ = _expand(A0, A1, A2, lead.vector, ell, lead.value)
    lam = lead.value
    sigma = (-hess / lam + np.outer(grad, grad) / lam**2).real
    sigma = 0.5 * (sigma + sigma.T)
    gk_lit, gk_sym = _green_kubo(m)
    return SpectralCurve(
        thetas=thetas,
        lambda_plus=lp,
        lambda_minus=lm,
        lambda0=(res[1][0].value, res[-1][0].value),
        v0=(res[1][0].vector, res[-1][0].vector),
        v0_prime=res[1][4],
        gradient_plus=res[1][1],
        gradient_minus=res[-1][1],
        Gamma_plus=res[1][2],
        Gamma_minus=res[-1][2],
        Gamma_plus_literal=res[1][3],
        Gamma_minus_literal=res[-1][3],
        sigma1_sq=sigma,
        green_kubo_literal=gk_lit,
        green_kubo_symmetric=gk_sym,
    )


def gm_gaussian_limit(curve: SpectralCurve, x) -> float:
    """Half the N(0, sigma1_sq) density at x."""
    sigma = curve.sigma1_sq
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q = x @ np.linalg.solve(sigma, x)
    return curve.phi1_at_zero * math.exp(-0.5 * q)


# -- n-step laws ----------------------------------------------------------------

def _column_start(m: MarkovGibbsModel, v) -> np.ndarray:
    N = m.N
    v = np.ones(N) if v is None else np.asarray(v, dtype=float)
    V = np.zeros((2 * N, 2))
    V[:N, 0] = v
    V[N:, 1] = v
    return V


def gm_transform(m: MarkovGibbsModel, n: int, thetas, v=None, w=None, chunk: int = 4096) -> np.ndarray:
    """F(theta)[i, j] = sum_b pi[b] w[b] (A_theta^n (e_j x v))[i, b] for each theta.

    For v = w = 1 this is fourier(law of psi_n, theta).
    """
    thetas = np.asarray(thetas, dtype=float).reshape(-1, m.d)
    N = m.N
    V = _column_start(m, v)
    wt = m.pi * (np.ones(N) if w is None else np.asarray(w, dtype=float))
    out = np.empty((len(thetas), 2, 2), dtype=complex)
    for lo in range(0, len(thetas), chunk):
        A = assembled_batch(m, thetas[lo:lo + chunk])
        X = np.linalg.matrix_power(A, n) @ V if n > 0 else np.broadcast_to(V, (len(A), 2 * N, 2))
        out[lo:lo + chunk, 0, :] = np.einsum("b,mbj->mj", wt, X[:, :N, :])
        out[lo:lo + chunk, 1, :] = np.einsum("b,mbj->mj", wt, X[:, N:, :])
    return out


def _exact_grid(m: MarkovGibbsModel, n: int, target_norm: int) -> TorusGrid:
    return TorusGrid(grid_size_for(n, m.max_norm, target_norm), m.d)


def gm_lclt_testfn(m: MarkovGibbsModel, n: int, v, w, g: GroupElement) -> float:
    """int 1_{psi_n = g} v * (w o T^n) dmu by inversion on an exact grid."""
    grid = _exact_grid(m, n, g_norm(g))
    F = gm_transform(m, n, grid.nodes(), v, w)
    return plancherel_inverse(F, g, grid)


def gm_nstep_prob(m: MarkovGibbsModel, n: int, g: GroupElement) -> float:
    """mu(psi_n = g) by inversion of the block-operator power."""
    return gm_lclt_testfn(m, n, None, None, g)


def gm_nstep_box(m: MarkovGibbsModel, n: int, radius: int | None = None, v=None, w=None):
    """mu(psi_n = (+-1, r)) for all |r|_inf <= radius, as two arrays indexed by r + radius."""
    radius = n * m.max_norm if radius is None else radius
    grid = _exact_grid(m, n, radius)
    F = gm_transform(m, n, grid.nodes(), v, w)
    return invert_on_box(F, grid, radius)


def _run_dp(m: MarkovGibbsModel, n: int, v, exact: bool):
    dp = model_dp(m, n, exact=exact)
    pi = dp.pi
    if v is None:
        weights = pi
    else:
        conv = Fraction if exact else float
        weights = [p * conv(x) for p, x in zip(pi, v)]
    C = dp.initial(weights)
    for _ in range(n):
        C = dp.step(C)
    return dp, dp.per_state(C)


def gm_testfn_exact(m: MarkovGibbsModel, n: int, v=None, w=None, exact: bool | None = None) -> dict:
    """Brute-force int 1_{psi_n = g} v (w o T^n) dmu for every reachable g (dynamic programming)."""
    exact = m.exact if exact is None else exact
    if exact and v is not None:
        exact = all(_as_fraction(x) is not None for x in v) and (w is None or all(_as_fraction(x) is not None for x in w))
    dp, C = _run_dp(m, n, v, exact)
    conv = Fraction if exact else float
    wv = [conv(1)] * m.N if w is None else [conv(x) for x in w]
    W = np.array(wv, dtype=object if exact else float).reshape((1, m.N) + (1,) * m.d)
    mass = (C * W).sum(axis=1)
    out = {}
    R = dp.radii
    for s, flip in enumerate((1, -1)):
        for idx in zip(*np.nonzero(mass[s] != 0)):
            g = GroupElement(flip, tuple(int(i) - r for i, r in zip(idx, R)))
            out[g] = mass[(s,) + tuple(idx)]
    return out


def gm_nstep_exact(m: MarkovGibbsModel, n: int, exact: bool | None = None) -> dict:
    """Exact law of psi_n under mu as a map GroupElement -> probability."""
    return gm_testfn_exact(m, n, exact=exact)


# -- aperiodicity -----------------------------------------------------------------

@dataclass(frozen=True)
class AperiodicityReport:
    passed: bool
    max_radius: float
    argmax_theta: np.ndarray
    margin: float
    nodes_scanned: int
    nodes_excluded: int
    delta: float
    note: str


def aperiodicity_scan(m: MarkovGibbsModel, grid: TorusGrid | int, delta: float = 0.1, margin_tol: float = 1e-9) -> AperiodicityReport:
    """Largest spectral radius of the block operator over grid nodes outside the delta-ball at 0.

    Distances are measured on the torus in the sup norm.  Passes when the
    margin 1 - max radius exceeds ``margin_tol``.
    """
    if isinstance(grid, int):
        grid = TorusGrid(grid, m.d)
    nodes = grid.nodes()
    wrapped = np.minimum(nodes, 2 * math.pi - nodes)
    keep = np.max(wrapped, axis=1) > delta
    kept = nodes[keep]
    radii = np.empty(len(kept))
    for lo in range(0, len(kept), 4096):
        vals = np.linalg.eigvals(assembled_batch(m, kept[lo:lo + 4096]))
        radii[lo:lo + 4096] = np.max(np.abs(vals), axis=1)
    excluded = int(np.sum(~keep))
    note = f"{excluded} node(s) within delta={delta} of 0 excluded" if excluded else "no nodes excluded"
    if len(kept) == 0:
        return AperiodicityReport(True, 0.0, np.zeros(m.d), 1.0, 0, excluded, delta, note)
    k = int(np.argmax(radii))
    rmax = float(radii[k])
    margin = 1.0 - rmax
    return AperiodicityReport(margin > margin_tol, rmax, kept[k], margin, len(kept), excluded, delta, note)


# -- constructions ----------------------------------------------------------------

def product_model(base: MarkovGibbsModel, extra_laws: Sequence[dict], name: str = "") -> MarkovGibbsModel:
    """Append independent i.i.d. integer coordinates to ``base``.

    Each entry of ``extra_laws`` maps an integer step to its probability; the
    steps must be symmetric so the symmetry integrals survive.  New states
    are (a, x_1, ..., x_k) with transitions P[a, b] * prod law(y_i) and the
    involution acting on the base component only.
    """
    P = [list(row) for row in (base.P_exact if base.exact else base.P.tolist())]
    pi = list(base.pi_exact if base.exact else base.pi.tolist())
    eps = base.eps.tolist()
    psi = base.psi.tolist()
    invol = base.invol.tolist()
    for law in extra_laws:
        steps = sorted(law)
        probs = [Fraction(law[s]) if base.exact else float(law[s]) for s in steps]
        k = len(steps)
        P = [[P[a][b] * probs[y] for b in range(len(P)) for y in range(k)] for a in range(len(P)) for _ in range(k)]
        pi = [pi[a] * probs[x] for a in range(len(pi)) for x in range(k)]
        eps = [eps[a] for a in range(len(eps)) for _ in range(k)]
        psi = [psi[a] + [steps[x]] for a in range(len(psi)) for x in range(k)]
        invol = [invol[a] * k + x for a in range(len(invol)) for x in range(k)]
    return MarkovGibbsModel.build(P, pi, eps, psi, invol, name=name)
