"""Forward dynamic programming for the skew product (state, group element).

Mass lives on arrays of shape ``(2, S) + box`` where axis 0 is the flip
(index 0 for +1, 1 for -1), axis 1 the Markov state and the remaining d axes
the translation, centred at index ``radius``.  One step moves mass at
(a, g) to (b, psi(a) * g) with probability P[a, b].  The box radius
n * max|psi_j| per axis is never exceeded, so nothing is truncated.

Only the part of the box that can carry mass after k steps is touched.
When every row of P is the same (full branches, i.e. an i.i.d. walk) the
state axis is collapsed to a single slot; per-state masses are then the
stationary weights times the total.

Float arrays use a dense GEMM over states; object arrays of Fractions fall
back to a loop over the nonzero transitions and stay exact.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def _shift(arr: np.ndarray, shift, axes) -> np.ndarray:
    """Translate ``arr`` by integer ``shift`` along ``axes`` (zero fill)."""
    out = np.zeros_like(arr)
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    for ax, s in zip(axes, shift):
        s = int(s)
        if s > 0:
            src[ax] = slice(None, -s)
            dst[ax] = slice(s, None)
        elif s < 0:
            src[ax] = slice(-s, None)
            dst[ax] = slice(None, s)
    out[tuple(dst)] = arr[tuple(src)]
    return out


class SkewDP:
    """Propagates mass for a finite Markov model carrying G_d labels.

    The instance tracks how far mass can have spread, so it drives one
    trajectory of arrays at a time: call :meth:`initial` then :meth:`step`.
    """

    def __init__(self, P, pi, eps, psi, radii, exact: bool = False, lump: bool | None = None):
        self.exact = exact
        conv = Fraction if exact else float
        P = [[conv(x) for x in row] for row in P]
        self.N = len(P)
        self.pi = [conv(x) for x in pi]
        eps = [int(e) for e in eps]
        psi = np.asarray(psi, dtype=int).reshape(self.N, -1)
        self.d = psi.shape[1]
        if lump is None:
            lump = all(row == P[0] for row in P)
        self.lumped = lump
        if lump:
            # one slot; each step draws a label (eps, psi) with the row weights
            acc: dict = {}
            for a in range(self.N):
                if P[0][a] != 0:
                    key = (eps[a], tuple(psi[a]))
                    acc[key] = acc.get(key, 0) + P[0][a]
            self.labels = [(e, np.array(t), w) for (e, t), w in sorted(acc.items())]
            self.S = 1
        else:
            self.eps = eps
            self.psi = psi
            self.S = self.N
            self.succ = [[(b, P[a][b]) for b in range(self.N) if P[a][b] != 0] for a in range(self.N)]
            if not exact:
                self.Pmat = np.array(P, dtype=float)
        self.step_reach = np.max(np.abs(psi), axis=0).astype(int)
        self.radii = tuple(int(r) for r in radii)
        self.shape = (2, self.S) + tuple(2 * r + 1 for r in self.radii)
        self.center = tuple(self.radii)
        self.box_axes = tuple(range(1, 1 + self.d))
        self.active = np.zeros(self.d, dtype=int)

    def zeros(self, shape=None) -> np.ndarray:
        shape = self.shape if shape is None else shape
        if self.exact:
            z = np.empty(shape, dtype=object)
            z.fill(Fraction(0))
            return z
        return np.zeros(shape)

    def initial(self, weights=None) -> np.ndarray:
        """Mass weights[a] at (a, e); default weights are the stationary law."""
        weights = self.pi if weights is None else weights
        conv = Fraction if self.exact else float
        C = self.zeros()
        if self.lumped:
            C[(0, 0) + self.center] = sum((conv(w) for w in weights), conv(0))
        else:
            for a, w in enumerate(weights):
                C[(0, a) + self.center] = conv(w)
        self.active = np.zeros(self.d, dtype=int)
        return C

    def _window(self, radii) -> tuple:
        return tuple(slice(c - r, c + r + 1) for c, r in zip(self.center, radii))

    def _move(self, block: np.ndarray, e: int, t) -> np.ndarray:
        # block has axes (flip, *box); left-multiply every element by (e, t)
        if e == -1:
            block = block[(slice(None, None, -1),) * (1 + self.d)]
        return _shift(block, t, self.box_axes)

    def step(self, C: np.ndarray) -> np.ndarray:
        reach = np.minimum(self.active + self.step_reach, self.radii)
        win = (slice(None), slice(None)) + self._window(reach)
        W = C[win]
        if self.lumped:
            out = self.zeros(W.shape)
            for e, t, w in self.labels:
                out[:, 0] = out[:, 0] + w * self._move(W[:, 0], e, t)
        else:
            moved = self.zeros(W.shape)
            for a in range(self.N):
                moved[:, a] = self._move(W[:, a], self.eps[a], self.psi[a])
            if self.exact:
                out = self.zeros(W.shape)
                for a in range(self.N):
                    for b, p in self.succ[a]:
                        out[:, b] = out[:, b] + p * moved[:, a]
            else:
                out = np.moveaxis(np.tensordot(self.Pmat, moved, axes=([0], [1])), 0, 1)
        new = self.zeros()
        new[win] = out
        self.active = reach
        return new

    def identity_mass(self, C: np.ndarray) -> list:
        """Per-state mass sitting at the group identity."""
        m = C[(0, slice(None)) + self.center]
        if self.lumped:
            return [p * m[0] for p in self.pi]
        return list(m)

    def clear_identity(self, C: np.ndarray) -> None:
        C[(0, slice(None)) + self.center] = Fraction(0) if self.exact else 0.0

    def per_state(self, C: np.ndarray) -> np.ndarray:
        """Array of shape (2, N) + box with the state axis restored."""
        if not self.lumped:
            return C
        pi = np.array(self.pi, dtype=object if self.exact else float)
        return C[:, :1] * pi.reshape((1, self.N) + (1,) * self.d)


def model_dp(model, n: int, exact: bool | None = None, lump: bool | None = None) -> SkewDP:
    """SkewDP with a box large enough for n steps of ``model``."""
    if exact is None:
        exact = model.exact
    radii = [n * int(np.max(np.abs(model.psi[:, j]))) for j in range(model.d)]
    P = model.P_exact if exact else model.P
    pi = model.pi_exact if exact else model.pi
    return SkewDP(P, pi, model.eps, model.psi, radii, exact=exact, lump=lump)
