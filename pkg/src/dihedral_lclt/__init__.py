"""Local limit theorems for random walks and Gibbs-Markov cocycles on Z/2Z x| Z^d."""

__version__ = "0.1.0"
