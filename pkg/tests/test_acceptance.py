"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

from __future__ import annotations

import math
import sys
from fractions import Fraction

import numpy as np
import pytest

from dihedral_lclt.dual import (
    TorusGrid,
    U,
    conjugate_U,
    fourier,
    parseval_check,
    plancherel_inverse,
    rho2,
    uncorrected_plancherel_weight,
)
from dihedral_lclt.fixtures import load_distribution, load_model
from dihedral_lclt.gibbs_markov import (
    aperiodicity_scan,
    gm_gaussian_limit,
    gm_nstep_box,
    gm_nstep_exact,
    gm_nstep_prob,
    leading_eigen,
    spectral_curve,
    twisted_blocks,
)
from dihedral_lclt.group import GroupDistribution, GroupElement, delta, identity, inverse
from dihedral_lclt.recurrence import flip_time_check, return_fraction, w_symmetry_test
from dihedral_lclt.renewal import first_return_pmf, renewal_check, tail_diagnostic, transience_certificate
from dihedral_lclt.rw import (
    ConditionA,
    ConditionB,
    deviation_table,
    gaussian_limit,
    matrix_power_cayley,
    moments,
    nstep_box,
    nstep_prob,
    oracle_gap,
)

E1 = identity(1)


def _random_law(rng, d: int, atoms: int, span: int = 2, exact: bool = True) -> GroupDistribution:
    w: dict = {}
    for _ in range(atoms):
        g = GroupElement(int(rng.choice([1, -1])), tuple(int(x) for x in rng.integers(-span, span + 1, size=d)))
        w[g] = w.get(g, 0) + int(rng.integers(1, 9))
    total = sum(w.values())
    if exact:
        return GroupDistribution(d, {g: Fraction(v, total) for g, v in w.items()})
    return GroupDistribution(d, {g: v / total for g, v in w.items()})


# -- criteria ---------------------------------------------------------------------

def criterion_01():
    rng = np.random.default_rng(101)
    worst = 0.0
    axioms = True
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        g, h, k = (GroupElement(int(rng.choice([1, -1])), tuple(rng.integers(-9, 10, size=d))) for _ in range(3))
        e = identity(d)
        axioms &= (g * h) * k == g * (h * k) and g * e == g and g * inverse(g) == e
        th = rng.uniform(-7, 7, size=d)
        R = rho2(th, g)
        worst = max(worst, np.max(np.abs(R @ R.conj().T - np.eye(2))))
        worst = max(worst, np.max(np.abs(rho2(th, g * h) - R @ rho2(th, h))))
    diag = 0.0
    for d in (1, 2, 3):
        for node in TorusGrid(2, d).nodes():
            for _ in range(5):
                g = GroupElement(int(rng.choice([1, -1])), tuple(rng.integers(-9, 10, size=d)))
                D = conjugate_U(rho2(node, g))
                diag = max(diag, abs(D[0, 1]), abs(D[1, 0]))
    ok = axioms and worst < 1e-12 and diag < 1e-12 and np.allclose(U @ U, np.eye(2))
    return ok, f"axioms={axioms} unitary/homomorphism err={worst:.2e} off-diagonal on T_d={diag:.2e}"


def criterion_02():
    lines = []
    ok = True
    for d in (1, 2, 3):
        e = identity(d)
        grid = TorusGrid(3, d)
        F = fourier(delta(e), grid.nodes())
        c = plancherel_inverse(F, e, grid)
        u = plancherel_inverse(F, e, grid, weight=uncorrected_plancherel_weight(d))
        ok &= abs(c - 1) < 1e-12 and abs(u - 2) < 1e-12
        lines.append(f"d={d}: delta_e->{c:.15f} (uncorrected {u:.15f})")
    rng = np.random.default_rng(2)
    gap = 0.0
    for _ in range(20):
        f = {GroupElement(int(rng.choice([1, -1])), (int(rng.integers(-4, 5)),)): complex(*rng.normal(size=2)) for _ in range(5)}
        _, _, g = parseval_check(f, TorusGrid(17, 1))
        gap = max(gap, g)
    _, _, gu = parseval_check(f, TorusGrid(17, 1), weight=uncorrected_plancherel_weight(1))
    ok &= gap < 1e-12 and gu > 0.1
    return ok, "; ".join(lines) + f"; Parseval gap={gap:.2e}, uncorrected gap={gu:.3f}"


def criterion_03():
    rng = np.random.default_rng(3)
    worst = 0.0
    laws = [load_distribution("NU1")] + [_random_law(rng, 1, int(rng.integers(2, 6))) for _ in range(20)]
    for nu in laws:
        for n in range(13):
            worst = max(worst, oracle_gap(nu, n))
    return worst < 1e-12, f"{len(laws)} laws, n<=12, max |inversion - exact convolution| = {worst:.2e}"


def criterion_04():
    rng = np.random.default_rng(4)
    mats = rng.normal(size=(700, 2, 2)) + 1j * rng.normal(size=(700, 2, 2))
    a = rng.normal(size=300) + 1j * rng.normal(size=300)
    split = a * 10.0 ** rng.uniform(-13, -5, size=300)
    J = np.zeros((300, 2, 2), complex)
    J[:, 0, 0], J[:, 1, 1] = a, a + split
    J[:, 0, 1] = rng.normal(size=300)
    P = rng.normal(size=(300, 2, 2)) + 1j * rng.normal(size=(300, 2, 2))
    near = P @ J @ np.linalg.inv(P)
    batch = np.concatenate([mats, near])
    worst = 0.0
    for n in (1, 2, 3, 10, 25, 60):
        ref = np.broadcast_to(np.eye(2, dtype=complex), batch.shape).copy()
        for _ in range(n):
            ref = ref @ batch
        got = matrix_power_cayley(batch, n)
        scale = np.maximum(np.max(np.abs(ref), axis=(1, 2)), 1e-300)
        worst = max(worst, float(np.max(np.max(np.abs(got - ref), axis=(1, 2)) / scale)))
    return worst < 1e-9, f"1000 matrices (300 near-confluent), n up to 60, max relative error {worst:.2e}"


def criterion_05():
    nu = load_distribution("NU1")
    target = 1 / math.sqrt(2 * math.pi)
    vals, sups = [], []
    for n in (400, 1600, 6400):
        vals.append(math.sqrt(n) * nstep_prob(nu, n, E1))
        sups.append(deviation_table(nu, n, int(2 * math.sqrt(n))).sup_gap)
    gaps = [abs(v - target) for v in vals]
    ok = gaps[0] > gaps[1] > gaps[2] and gaps[-1] < 0.01 and sups[0] > sups[1] > sups[2]
    return ok, f"sqrt(n) p_n(1,0) = {[round(v, 6) for v in vals]} -> {target:.6f}; sup gaps {[f'{s:.2e}' for s in sups]}"


def criterion_06():
    mom = moments(load_distribution("NU1"))
    ok = mom.sigma_q == ((Fraction(1, 4),),)
    rng = np.random.default_rng(6)
    tested, worst = 0, 0.0
    while tested < 100:
        d = int(rng.integers(1, 4))
        nu = _random_law(rng, d, int(rng.integers(d + 2, 9)), exact=bool(tested % 2))
        try:
            m = moments(nu)
        except (ConditionA, ConditionB):
            continue
        worst = max(worst, m.det_identity_gap())
        tested += 1
    neg_a = neg_b = False
    try:
        moments(GroupDistribution(1, {GroupElement(1, (0,)): "1/2", GroupElement(-1, (0,)): "1/2"}))
    except ConditionA:
        neg_a = True
    try:
        moments(GroupDistribution(1, {GroupElement(1, (1,)): "1/2", GroupElement(1, (-1,)): "1/2"}))
    except ConditionB:
        neg_b = True
    ok = ok and worst < 1e-10 and neg_a and neg_b
    return ok, f"sigma(NU1)={mom.sigma_q[0][0]}; det identity gap over 100 laws {worst:.2e}; ConditionA={neg_a} ConditionB={neg_b}"


def criterion_07():
    ok = True
    parts = []
    h = 1e-3
    for name in ("GM-BERN", "GM-MARKOV"):
        m = load_model(name)
        c = spectral_curve(m)
        lam_err = max(abs(c.lambda0[0] - 0.5), abs(c.lambda0[1] - 0.5))
        vec_err = max(np.max(np.abs(c.v0[0] - 1)), np.max(np.abs(c.v0[1] - 1)))
        fd_err = 0.0
        for k, G in ((0, c.Gamma_plus), (1, c.Gamma_minus)):
            lam = lambda t: leading_eigen(twisted_blocks(m, [t]).blocks[k]).value  # noqa: E731
            fd = ((lam(h) - 2 * lam(0.0) + lam(-h)) / h**2).real
            fd_err = max(fd_err, abs(fd + G[0, 0]))
        ok &= lam_err < 1e-12 and vec_err < 1e-12 and fd_err < 1e-4
        parts.append(
            f"{name}: |lambda0-1/2|={lam_err:.1e} |v-1|={vec_err:.1e} FD-vs-Gamma={fd_err:.1e} "
            f"Gamma+-=({c.Gamma_plus[0, 0]:.4f},{c.Gamma_minus[0, 0]:.4f}) "
            f"literal=({c.Gamma_plus_literal[0, 0]:.4f},{c.Gamma_minus_literal[0, 0]:.4f})"
        )
    return ok, "; ".join(parts)


def criterion_08():
    bern = load_model("GM-BERN")
    nu = load_distribution("NU1")
    worst = 0.0
    for n in (1, 5, 20, 100):
        R = n
        gp, gm = gm_nstep_box(bern, n, R)
        rp, rm = nstep_box(nu, n, R)
        worst = max(worst, np.max(np.abs(gp - rp)), np.max(np.abs(gm - rm)))
    c = spectral_curve(bern)
    mom = moments(nu)
    sig = abs(c.sigma1_sq[0, 0] - float(mom.sigma_q[0][0]))
    dens = max(abs(gm_gaussian_limit(c, [x]) - gaussian_limit(mom, [x])) for x in np.linspace(-3, 3, 13))
    ok = worst < 1e-10 and sig < 1e-10 and dens < 1e-10
    return ok, f"probability gap {worst:.2e}; sigma1^2 - sigma_q = {sig:.1e}; density gap {dens:.1e}"


def criterion_09():
    m = load_model("GM-MARKOV")
    worst = 0.0
    for n in range(11):
        exact = gm_nstep_exact(m, n)
        R = 2 * n
        pp, pm = gm_nstep_box(m, n, R)
        ref_p, ref_m = np.zeros_like(pp), np.zeros_like(pm)
        for g, w in exact.items():
            (ref_p if g.flip == 1 else ref_m)[g.trans[0] + R] = float(w)
        worst = max(worst, np.max(np.abs(pp - ref_p)), np.max(np.abs(pm - ref_m)))
    phi0 = spectral_curve(m).phi1_at_zero
    devs = [abs(math.sqrt(n) * gm_nstep_prob(m, n, E1) - phi0) for n in (100, 400, 1600)]
    ok = worst < 1e-12 and devs[0] > devs[1] > devs[2]
    return ok, f"inversion vs DP n<=10: {worst:.2e}; |sqrt(n) mu(psi_n=e) - Phi1(0)| = {[f'{x:.2e}' for x in devs]}"


def criterion_10():
    mk = aperiodicity_scan(load_model("GM-MARKOV"), 128, delta=0.1)
    ap = aperiodicity_scan(load_model("GM-MARKOV-AP"), 128, delta=0.1)
    per = aperiodicity_scan(load_model("GM-BERN-PERIODIC"), 128, delta=0.1)
    neg_ok = (not per.passed) and abs(per.argmax_theta[0] - math.pi) < 1e-12 and abs(per.max_radius - 1) < 1e-12
    ok = mk.passed and neg_ok
    return ok, (
        f"GM-MARKOV passed={mk.passed} (translation parity of psi_n is locked to n) max radius {mk.max_radius:.12f} at theta={mk.argmax_theta[0]:.6f} margin {mk.margin:.2e}; "
        f"GM-MARKOV-AP passed={ap.passed} margin {ap.margin:.4f}; "
        f"periodic control passed={per.passed} radius {per.max_radius:.12f} at theta={per.argmax_theta[0]:.6f}"
    )


def criterion_11():
    parts = []
    ok = True
    for name in ("GM-BERN", "GM-MARKOV"):
        m = load_model(name)
        rc = renewal_check(m, 20)
        law = first_return_pmf(m, 12)
        cross = max(abs(float(law.u[n]) - gm_nstep_prob(m, n, E1)) for n in range(13))
        ok &= rc.exact and rc.gap == 0 and cross < 1e-12
        parts.append(f"{name}: state-resolved gap={rc.gap} scalar gap={rc.scalar_gap:.3e} u-vs-inversion={cross:.1e}")
    return ok, "; ".join(parts)


def criterion_12():
    d1 = tail_diagnostic(load_model("GM-BERN"), [2**k for k in range(4, 15)])
    band = d1.scaled / np.median(d1.scaled)
    ok1 = bool(np.all(np.abs(band - 1) < 0.1))
    d2 = tail_diagnostic(load_model("GM-D2"), [4, 8, 16, 32, 64, 128])
    ok2 = bool(np.all(np.diff(d2.drift) < 0))
    cert = transience_certificate(load_model("GM-D3"), 64)
    ok = ok1 and ok2 and cert.certified
    return ok, (
        f"d=1 tail*sqrt(n) in [{d1.scaled.min():.5f}, {d1.scaled.max():.5f}] for n=16..2^14; "
        f"d=2 tail*log(n) drifts {[round(float(x), 4) for x in d2.drift]}; "
        f"d=3 sum_(n<=64) f = {cert.partial:.4f}, certified bound {cert.total:.4f}"
    )


def criterion_13():
    nu = load_distribution("NU1")
    asym = GroupDistribution(1, {GroupElement(1, (1,)): "1/4", GroupElement(1, (0,)): "1/4", GroupElement(-1, (0,)): "1/2"})
    w1 = w_symmetry_test(nu, 100_000, seed=131)
    w2 = w_symmetry_test(asym, 100_000, seed=132)
    ft = flip_time_check(nu, 100_000, seed=133)
    rf = return_fraction(nu, (100, 1000, 10000), 2000, seed=134)
    ok = w1.passed and w2.passed and ft.passed and rf.nondecreasing and rf.fractions[-1] > 0.9
    return ok, (
        f"W symmetry NU1 KS={w1.ks_stat[0]:.4f} asym KS={w2.ks_stat[0]:.4f} (threshold {w1.ks_threshold:.4f}); "
        f"E[tau1]={ft.mean:.4f} vs {ft.expected} (z={ft.z:.2f}); return fractions {rf.fractions}"
    )


CRITERIA = [
    (1, "group and representation properties", criterion_01),
    (2, "Plancherel self-tests", criterion_02),
    (3, "random-walk oracle equivalence", criterion_03),
    (4, "Cayley-Hamilton powers", criterion_04),
    (5, "random-walk local limit", criterion_05),
    (6, "covariance machinery", criterion_06),
    (7, "Markov spectral facts", criterion_07),
    (8, "Bernoulli reduction", criterion_08),
    (9, "Markov local limit oracle", criterion_09),
    (10, "aperiodicity scans", criterion_10),
    (11, "renewal identity", criterion_11),
    (12, "return-time tails", criterion_12),
    (13, "block decomposition Monte Carlo", criterion_13),
]


def _line(num: int, title: str, ok: bool, detail: str) -> str:
    return f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} {title}: {detail}"


@pytest.mark.parametrize("num,title,fn", CRITERIA, ids=[f"criterion_{n:02d}" for n, _, _ in CRITERIA])
def test_acceptance(num, title, fn, capsys):
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(num, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for num, title, fn in CRITERIA:
        ok, detail = fn()
        failed += not ok
        print(_line(num, title, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
