from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from dihedral_lclt.dual import fourier
from dihedral_lclt.fixtures import load_distribution, load_model
from dihedral_lclt.gibbs_markov import (
    EigenTie,
    MarkovGibbsModel,
    aperiodicity_scan,
    assembled_batch,
    gm_lclt_testfn,
    gm_nstep_box,
    gm_nstep_exact,
    gm_nstep_prob,
    gm_testfn_exact,
    leading_eigen,
    spectral_curve,
    transfer_matrix,
    twisted_blocks,
    validate_model,
)
from dihedral_lclt.group import GroupElement, identity
from dihedral_lclt.rw import nstep_prob

E1 = identity(1)


@pytest.fixture(scope="module")
def bern():
    return load_model("GM-BERN")


@pytest.fixture(scope="module")
def markov():
    return load_model("GM-MARKOV")


@pytest.mark.parametrize("name", ["GM-BERN", "GM-MARKOV", "GM-MARKOV-AP", "GM-BERN-PERIODIC", "GM-D2", "GM-D3"])
def test_fixtures_validate(name):
    rep = validate_model(load_model(name))
    assert rep.ok, rep.failed()


def test_perturbed_pi_reports_stationarity(bern):
    rep = validate_model(bern.with_pi(["1/4", "1/8", "1/8", "1/8", "1/8", "1/4"]))
    assert not rep.ok and not rep["stationary"].passed
    assert rep["stationary"].residual > 0


def test_json_roundtrip(markov):
    back = MarkovGibbsModel.from_json_obj(json.loads(markov.to_json()))
    assert back.P_exact == markov.P_exact and np.array_equal(back.psi, markov.psi)
    with pytest.raises(ValueError):
        MarkovGibbsModel.from_json_obj({**markov.to_json_obj(), "extra": 0})


def test_transfer_fixes_constants(markov):
    K = transfer_matrix(markov)
    assert np.allclose(K @ np.ones(markov.N), 1.0, atol=1e-15)
    B = twisted_blocks(markov, [0.0])
    assert np.allclose((B.L_plus + B.L_minus) @ np.ones(markov.N), 1.0)


def test_blocks_conjugate_and_rank_one(bern, markov):
    for m in (bern, markov):
        th = np.array([0.83])
        assert np.allclose(twisted_blocks(m, -th).assembled, twisted_blocks(m, th).assembled.conj())
        assert np.allclose(assembled_batch(m, th[None])[0], twisted_blocks(m, th).assembled)
    for blk in twisted_blocks(bern, [0.4]).blocks:
        assert np.linalg.matrix_rank(blk) <= 1


def test_bern_block_reproduces_nu1(bern):
    nu = load_distribution("NU1")
    th = np.array([1.1])
    A = twisted_blocks(bern, th).assembled
    N = bern.N
    for j in range(2):
        col = np.zeros(2 * N)
        col[j * N:(j + 1) * N] = 1.0
        out = A @ col
        F = np.array([bern.pi @ out[:N], bern.pi @ out[N:]])
        assert np.allclose(F, fourier(nu, th)[:, j], atol=1e-15)


def test_leading_eigen_half_and_constant(bern, markov):
    for m in (bern, markov):
        for blk in twisted_blocks(m, [0.0]).blocks[:2]:
            lead = leading_eigen(blk, m.pi)
            assert abs(lead.value - 0.5) < 1e-12
            assert np.max(np.abs(lead.vector - 1.0)) < 1e-12
            assert lead.gap > 0


def test_leading_eigen_tie():
    with pytest.raises(EigenTie):
        leading_eigen(np.eye(3))


def test_spectral_curve_against_finite_differences(markov):
    c = spectral_curve(markov, np.array([[0.2], [-0.2]]))
    assert c.lambda_plus[0] == pytest.approx(np.conj(c.lambda_plus[1]), abs=1e-14)
    h = 1e-3
    for k, G in ((0, c.Gamma_plus), (1, c.Gamma_minus)):
        lam = lambda t: leading_eigen(twisted_blocks(markov, [t]).blocks[k]).value  # noqa: E731
        fd = ((lam(h) - 2 * lam(0.0) + lam(-h)) / h**2).real
        assert fd == pytest.approx(-G[0, 0], abs=1e-4)
    lam = lambda t: leading_eigen(twisted_blocks(markov, [t]).assembled).value  # noqa: E731
    fd = -((np.log(lam(h)) - 2 * np.log(lam(0.0)) + np.log(lam(-h))) / h**2).real
    assert fd == pytest.approx(c.sigma1_sq[0, 0], abs=1e-4)
    assert np.all(np.linalg.eigvalsh(c.sigma1_sq) > 0)


def test_bern_sigma_matches_nu1(bern):
    c = spectral_curve(bern)
    assert c.sigma1_sq[0, 0] == pytest.approx(0.25, abs=1e-12)
    assert c.green_kubo_symmetric[0, 0] == pytest.approx(0.25, abs=1e-12)


def test_spectral_curve_d2():
    m = load_model("GM-D2")
    c = spectral_curve(m)
    assert c.sigma1_sq.shape == (2, 2)
    assert np.allclose(c.sigma1_sq, c.sigma1_sq.T)
    assert np.all(np.linalg.eigvalsh(c.sigma1_sq) > 0)


@pytest.mark.parametrize("n", [0, 1, 2, 3, 6])
def test_bern_equals_iid(bern, n):
    nu = load_distribution("NU1")
    for g in (E1, GroupElement(-1, (1,)), GroupElement(1, (-2,))):
        assert gm_nstep_prob(bern, n, g) == pytest.approx(nstep_prob(nu, n, g), abs=1e-12)


def test_exact_dp(bern, markov):
    law = gm_nstep_exact(markov, 1)
    assert law == {
        GroupElement(1, (1,)): Fraction(1, 8),
        GroupElement(1, (-1,)): Fraction(1, 8),
        GroupElement(1, (2,)): Fraction(1, 8),
        GroupElement(1, (-2,)): Fraction(1, 8),
        GroupElement(-1, (0,)): Fraction(1, 4),
        GroupElement(-1, (1,)): Fraction(1, 8),
        GroupElement(-1, (-1,)): Fraction(1, 8),
    }
    assert sum(gm_nstep_exact(markov, 7).values()) == 1
    assert gm_nstep_exact(bern, 2)[E1] == Fraction(11, 32)
    assert gm_nstep_exact(markov, 0) == {E1: 1}


@pytest.mark.parametrize("n", [1, 4, 9])
def test_inversion_equals_dp(markov, n):
    exact = gm_nstep_exact(markov, n)
    R = 2 * n
    pp, pm = gm_nstep_box(markov, n, R)
    for r in range(-R, R + 1):
        assert pp[r + R] == pytest.approx(float(exact.get(GroupElement(1, (r,)), 0)), abs=1e-12)
        assert pm[r + R] == pytest.approx(float(exact.get(GroupElement(-1, (r,)), 0)), abs=1e-12)


def test_weighted_inversion(markov):
    v = [Fraction(k % 3) for k in range(8)]
    w = [Fraction(1 + (k % 2)) for k in range(8)]
    for n in (2, 5):
        exact = gm_testfn_exact(markov, n, v=v, w=w)
        for g in (E1, GroupElement(-1, (1,)), GroupElement(1, (3,))):
            got = gm_lclt_testfn(markov, n, [float(x) for x in v], [float(x) for x in w], g)
            assert got == pytest.approx(float(exact.get(g, 0)), abs=1e-12)


def test_zero_mean_testfn_decays(markov):
    v = np.arange(8.0)
    v -= markov.pi @ v
    vals = [abs(math.sqrt(n) * gm_lclt_testfn(markov, n, v, None, E1)) for n in (64, 256, 1024)]
    assert vals[0] > vals[1] > vals[2]


def test_aperiodicity():
    ap = aperiodicity_scan(load_model("GM-MARKOV-AP"), 64, delta=0.1)
    assert ap.passed and ap.margin > 0
    per = aperiodicity_scan(load_model("GM-BERN-PERIODIC"), 64, delta=0.1)
    assert not per.passed
    assert per.argmax_theta[0] == pytest.approx(math.pi)
    assert per.max_radius == pytest.approx(1.0, abs=1e-12)
    assert per.nodes_excluded == 3 and "excluded" in per.note


def test_markov_fixture_has_parity_obstruction(markov):
    # translation parity of psi_n is tied to n through the sign of the end states
    rep = aperiodicity_scan(markov, 64, delta=0.1)
    assert rep.max_radius == pytest.approx(1.0, abs=1e-12)
    assert rep.argmax_theta[0] == pytest.approx(math.pi)
    plus = [1 if e == 1 else 0 for e in markov.eps]
    for n in (3, 5):
        law = gm_testfn_exact(markov, n, v=plus, w=plus)
        assert all(g.trans[0] % 2 == 1 for g, p in law.items() if p != 0)
