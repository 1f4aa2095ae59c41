"""Registry of the bundled distributions and models.

Names: ``NU1`` (i.i.d. step law on G_1), ``GM-BERN`` (its six-cell Bernoulli
model), ``GM-MARKOV`` (eight-cell doubling-map chain), ``GM-BERN-PERIODIC``
(period-2 control whose plus cells only step by +-1), ``GM-MARKOV-AP``
(GM-MARKOV with labels (1,-1,2,-2,0,0,2,-2); unlike GM-MARKOV its block
operator has spectral radius < 1 away from 0), and the product models
``GM-D2`` (GM-MARKOV with one lazy extra coordinate) and ``GM-D3``
(GM-BERN with two lazy extra coordinates).
"""

from __future__ import annotations

from fractions import Fraction
from importlib import resources

from ..gibbs_markov import MarkovGibbsModel, product_model
from ..group import GroupDistribution

LAZY = {-1: Fraction(1, 4), 0: Fraction(1, 2), 1: Fraction(1, 4)}

_FILES = {
    "NU1": "nu1.json",
    "GM-BERN": "gm_bern.json",
    "GM-MARKOV": "gm_markov.json",
    "GM-BERN-PERIODIC": "gm_bern_periodic.json",
    "GM-MARKOV-AP": "gm_markov_ap.json",
}

DISTRIBUTIONS = ("NU1",)
MODELS = ("GM-BERN", "GM-MARKOV", "GM-MARKOV-AP", "GM-BERN-PERIODIC", "GM-D2", "GM-D3")


class FixtureNotFound(KeyError):
    pass


def fixture_path(name: str):
    if name not in _FILES:
        raise FixtureNotFound(name)
    return resources.files(__name__).joinpath(_FILES[name])


def load_distribution(name: str) -> GroupDistribution:
    if name not in DISTRIBUTIONS:
        raise FixtureNotFound(name)
    with resources.as_file(fixture_path(name)) as p:
        return GroupDistribution.load(p)


def load_model(name: str) -> MarkovGibbsModel:
    if name == "GM-D2":
        return product_model(load_model("GM-MARKOV"), [LAZY], name=name)
    if name == "GM-D3":
        return product_model(load_model("GM-BERN"), [LAZY, LAZY], name=name)
    if name not in MODELS:
        raise FixtureNotFound(name)
    with resources.as_file(fixture_path(name)) as p:
        m = MarkovGibbsModel.load(p)
    return MarkovGibbsModel.build(m.P_exact, m.pi_exact, m.eps, m.psi, m.invol, m.d, name)
