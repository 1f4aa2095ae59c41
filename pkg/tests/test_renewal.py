from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from dihedral_lclt.fixtures import load_model
from dihedral_lclt.gibbs_markov import gm_nstep_prob
from dihedral_lclt.group import identity
from dihedral_lclt.renewal import (
    first_return_pmf,
    generating_function,
    renewal_check,
    tail_diagnostic,
    transience_certificate,
)


@pytest.fixture(scope="module")
def bern_law():
    return first_return_pmf(load_model("GM-BERN"), 20)


def test_first_return_values(bern_law):
    assert bern_law.f[1] == Fraction(1, 4)
    assert bern_law.f[2] == bern_law.u[2] - bern_law.f[1] * bern_law.u[1]
    assert bern_law.u[0] == 1 and bern_law.tail[1] == 1


def test_tail_is_complement(bern_law):
    for n in range(1, 22):
        assert bern_law.tail[n] == 1 - sum(bern_law.f[:n])
    assert all(a >= b for a, b in zip(bern_law.tail, bern_law.tail[1:]))


@pytest.mark.parametrize("name", ["GM-BERN", "GM-MARKOV"])
def test_u_matches_inversion(name):
    m = load_model(name)
    law = first_return_pmf(m, 12)
    for n in range(13):
        assert float(law.u[n]) == pytest.approx(gm_nstep_prob(m, n, identity(1)), abs=1e-12)


def test_renewal_bern_exact():
    rc = renewal_check(load_model("GM-BERN"), 20)
    assert rc.exact and rc.gap == 0 and rc.scalar_gap == 0


def test_renewal_markov_state_resolved():
    rc = renewal_check(load_model("GM-MARKOV"), 20)
    assert rc.gap == 0
    # the scalar relation does not survive the Markov dependence
    assert rc.scalar_gap > 1e-3


def test_renewal_trivial():
    rc = renewal_check(load_model("GM-MARKOV"), 1)
    assert rc.gap == 0 and rc.scalar_gap == 0


def test_generating_function():
    m = load_model("GM-BERN")
    F, U, gap, _ = generating_function(m, 0, 10)
    assert (F, U, gap) == (0, 1, 0)
    F, U, gap, trunc = generating_function(m, 0.5, 60)
    assert gap <= trunc + 1e-14
    _, _, gap, est = generating_function(m, -1, 200)
    assert gap < est
    with pytest.raises(ValueError):
        generating_function(m, 1.5, 10)
    F, U, gap, trunc = generating_function(load_model("GM-MARKOV"), 0.5, 60)
    assert gap <= trunc + 1e-14


def test_tail_d1_plateau():
    td = tail_diagnostic(load_model("GM-BERN"), [2**k for k in range(6, 12)])
    assert np.all(np.abs(td.ratios - 1) < 0.01)


def test_tail_d2_drift_shrinks():
    td = tail_diagnostic(load_model("GM-D2"), [8, 16, 32, 64])
    assert np.all(np.diff(td.drift) < 0)


def test_transience_certificate_d3():
    cert = transience_certificate(load_model("GM-D3"), 24)
    assert cert.certified and cert.partial < cert.total < 1


def test_d3_tail_rejected_by_diagnostic():
    with pytest.raises(ValueError):
        tail_diagnostic(load_model("GM-D3"), [4, 8])
