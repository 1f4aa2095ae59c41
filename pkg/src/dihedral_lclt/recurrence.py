"""Monte Carlo study of recurrence through flip-delimited blocks.

Cut a path S_n = g_n ... g_1 at the times tau_1 < tau_2 < ... where the step
is a reflection.  Each block Y_k = S_{tau_k} S_{tau_{k-1}}^{-1} is then a
reflection (-1, y_k) with i.i.d. y_k, so pairs of blocks compose to the pure
translation (1, y_{2n} - y_{2n-1}) and W_n = y_{2n-1} - y_{2n} is symmetric
whatever the step law.

Randomness: trials are split into chunks of ``CHUNK`` and chunk c draws from
``PCG64(SeedSequence(seed).spawn(n_chunks)[c])``, so results depend only on
(seed, trials, horizon).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .group import GroupDistribution, GroupElement, PathSample, identity, inverse, sample_increments

__all__ = [
    "BlockDecomposition",
    "NoFlipError",
    "decompose",
    "WSymmetryReport",
    "w_symmetry_test",
    "FlipTimeReport",
    "flip_time_check",
    "ReturnFractions",
    "return_fraction",
    "flip_probability",
]

CHUNK = 10_000


class NoFlipError(ValueError):
    pass


@dataclass(frozen=True)
class BlockDecomposition:
    tau: tuple[int, ...]
    Y: tuple[GroupElement, ...]
    W: tuple[tuple[int, ...], ...]
    reconstruction_ok: bool
    error: str | None = None


def decompose(path: PathSample) -> BlockDecomposition:
    """Split a sampled path at its reflection steps.

    A path without reflections yields an empty decomposition carrying an
    error message rather than raising.
    """
    tau = tuple(i + 1 for i, g in enumerate(path.steps) if g.flip == -1)
    if not tau:
        return BlockDecomposition((), (), (), False, "no reflection step in path")
    S = path.partials
    Y = []
    prev = S[0]
    for t in tau:
        Y.append(S[t] * inverse(prev))
        prev = S[t]
    ok = True
    acc = identity(S[0].dim)
    for k, t in enumerate(tau):
        acc = Y[k] * acc
        ok = ok and acc == S[t]
    W = tuple(
        tuple(a - b for a, b in zip(Y[2 * n].trans, Y[2 * n + 1].trans)) for n in range(len(Y) // 2)
    )
    return BlockDecomposition(tau, tuple(Y), W, ok)


def flip_probability(nu: GroupDistribution) -> float:
    return float(sum(w for g, w in nu.atoms if g.flip == -1))


def _chunks(trials: int, seed: int):
    n = max(1, math.ceil(trials / CHUNK))
    children = np.random.SeedSequence(seed).spawn(n)
    for c, child in enumerate(children):
        size = min(CHUNK, trials - c * CHUNK)
        if size > 0:
            yield size, np.random.Generator(np.random.PCG64(child))


def _first_blocks(nu: GroupDistribution, size: int, horizon: int, rng):
    """tau_1, tau_2 and the translations y_1, y_2 of the first two blocks, per trial."""
    flips, trans = sample_increments(nu, (horizon, size), rng)
    f = np.ones(size, dtype=np.int64)
    t = np.zeros((size, nu.dim), dtype=np.int64)
    tau = np.zeros((2, size), dtype=np.int64)
    y = np.zeros((2, size, nu.dim), dtype=np.int64)
    seen = np.zeros(size, dtype=np.int64)
    # block partial products restart after each reflection
    for n in range(horizon):
        f, t = flips[n] * f, trans[n] + flips[n][:, None] * t
        done = (flips[n] == -1) & (seen < 2)
        for k in (0, 1):
            sel = done & (seen == k)
            tau[k, sel] = n + 1
            y[k, sel] = t[sel]
        seen += done
        f[done] = 1
        t[done] = 0
        if np.all(seen >= 2):
            break
    return tau, y, seen >= 2


def _ks_threshold(n: int, m: int, alpha: float) -> float:
    return math.sqrt(-0.5 * math.log(alpha / 2)) * math.sqrt((n + m) / (n * m))


def _ks_stat(a: np.ndarray, b: np.ndarray) -> float:
    grid = np.union1d(a, b)
    Fa = np.searchsorted(np.sort(a), grid, side="right") / len(a)
    Fb = np.searchsorted(np.sort(b), grid, side="right") / len(b)
    return float(np.max(np.abs(Fa - Fb)))


@dataclass(frozen=True)
class WSymmetryReport:
    trials: int
    used: int
    mean: np.ndarray
    mean_sigma: np.ndarray
    ks_stat: np.ndarray
    ks_threshold: float
    passed: bool
    samples: np.ndarray = field(repr=False)


def w_symmetry_test(nu: GroupDistribution, trials: int, horizon: int = 200, seed: int = 0, alpha: float = 1e-4) -> WSymmetryReport:
    """Compare W_1 with -W_1: two-sample KS per coordinate on disjoint halves, and mean within 4 sigma."""
    if flip_probability(nu) == 0:
        raise NoFlipError("step law has no reflections")
    parts = []
    for size, rng in _chunks(trials, seed):
        _, y, ok = _first_blocks(nu, size, horizon, rng)
        parts.append((y[0] - y[1])[ok])
    W = np.concatenate(parts) if parts else np.zeros((0, nu.dim), dtype=np.int64)
    n = len(W)
    if n < 4:
        raise ValueError("too few complete blocks for a test")
    mean = W.mean(axis=0)
    sig = W.std(axis=0, ddof=1) / math.sqrt(n)
    half = n // 2
    A, B = W[:half], -W[half:]
    ks = np.array([_ks_stat(A[:, j], B[:, j]) for j in range(nu.dim)])
    thr = _ks_threshold(len(A), len(B), alpha / nu.dim)
    mean_ok = bool(np.all(np.abs(mean) <= 4 * np.maximum(sig, 1e-300)))
    return WSymmetryReport(trials, n, mean, sig, ks, thr, bool(mean_ok and np.all(ks <= thr)), W)


@dataclass(frozen=True)
class FlipTimeReport:
    trials: int
    mean: float
    expected: float
    sigma: float
    censored: int

    @property
    def z(self) -> float:
        return (self.mean - self.expected) / self.sigma

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 4.0 and self.censored == 0


def flip_time_check(nu: GroupDistribution, trials: int, seed: int, horizon: int = 200) -> FlipTimeReport:
    """Sample mean of tau_1 against 1/p, with sigma = sqrt((1 - p) / p^2 / trials)."""
    p = flip_probability(nu)
    if p == 0:
        raise NoFlipError("step law has no reflections")
    taus = []
    censored = 0
    for size, rng in _chunks(trials, seed):
        flips, _ = sample_increments(nu, (horizon, size), rng)
        hit = flips == -1
        found = hit.any(axis=0)
        censored += int(np.sum(~found))
        taus.append(np.argmax(hit, axis=0)[found] + 1)
    tau = np.concatenate(taus)
    sigma = math.sqrt((1 - p) / p**2 / max(len(tau), 1))
    return FlipTimeReport(trials, float(tau.mean()), 1 / p, sigma, censored)


@dataclass(frozen=True)
class ReturnFractions:
    horizons: tuple[int, ...]
    fractions: tuple[float, ...]
    trials: int
    seed: int

    @property
    def nondecreasing(self) -> bool:
        return all(a <= b for a, b in zip(self.fractions, self.fractions[1:]))

    def to_json_obj(self) -> dict:
        return {"horizons": list(self.horizons), "fractions": list(self.fractions), "trials": self.trials, "seed": self.seed}


def return_fraction(nu: GroupDistribution, horizons, trials: int, seed: int) -> ReturnFractions:
    """Fraction of sampled paths with S_n = e for some 1 <= n <= h, for each horizon h."""
    horizons = tuple(sorted(int(h) for h in horizons))
    if trials == 0 or not horizons:
        return ReturnFractions(horizons, (), 0, seed)
    H = horizons[-1]
    first = []
    for size, rng in _chunks(trials, seed):
        hit = np.full(size, H + 1, dtype=np.int64)
        f = np.ones(size, dtype=np.int64)
        t = np.zeros((size, nu.dim), dtype=np.int64)
        block = 1000
        for start in range(0, H, block):
            steps = min(block, H - start)
            flips, trans = sample_increments(nu, (steps, size), rng)
            for k in range(steps):
                f = flips[k] * f
                t = trans[k] + flips[k][:, None] * t
                at_e = (f == 1) & ~np.any(t, axis=1)
                new = at_e & (hit > H)
                hit[new] = start + k + 1
        first.append(hit)
    first_hit = np.concatenate(first)
    fr = tuple(float(np.mean(first_hit <= h)) for h in horizons)
    return ReturnFractions(horizons, fr, trials, seed)
