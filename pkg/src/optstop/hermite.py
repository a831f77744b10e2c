"""Cumulative integrals tabulated for fast evaluation and inversion."""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import legendre

from .errors import IntegrabilityError

_GL20 = legendre.leggauss(20)


def _gl(fn, a: np.ndarray, b: np.ndarray, rule=_GL20) -> np.ndarray:
    t, w = rule
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[:, None] + half[:, None] * t[None, :]
    vals = np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape)
    return half * (vals @ w)


class HermiteTable:
    """Monotone-friendly cumulative integral of ``fn`` on ``[edges[0], edges[-1]]``.

    Values at cell edges come from Gauss-Legendre increments; inside a cell
    the antiderivative is the cubic Hermite interpolant with slopes taken
    from ``fn`` itself (one-sided at discontinuities).
    """

    def __init__(self, fn, edges, anchor: float, tol: float = 1e-13,
                 max_width: float = 0.25, min_width: float = 1e-9, max_cells: int = 400_000):
        self.fn = fn
        edges = np.unique(np.asarray(list(edges) + [anchor], dtype=float))
        cells = []
        for a, b in zip(edges[:-1], edges[1:]):
            n = max(1, int(math.ceil((b - a) / max_width)))
            pts = np.linspace(a, b, n + 1)
            cells.extend(zip(pts[:-1], pts[1:]))
        lo = np.array([c[0] for c in cells])
        hi = np.array([c[1] for c in cells])
        done_lo, done_hi, done_I = [], [], []
        while lo.size:
            mid = 0.5 * (lo + hi)
            i_full = _gl(fn, lo, hi)
            i_left = _gl(fn, lo, mid)
            i_right = _gl(fn, mid, hi)
            d0, d1 = self._slopes(lo, hi)
            herm_mid = 0.5 * i_full + (hi - lo) * (d0 - d1) / 8.0
            scale = np.maximum(1.0, np.abs(i_full))
            err = np.maximum(np.abs(herm_mid - i_left), np.abs(i_full - i_left - i_right))
            bad = (err > tol * scale) & ((hi - lo) > min_width)
            ok = ~bad
            done_lo.append(lo[ok])
            done_hi.append(hi[ok])
            done_I.append(i_left[ok] + i_right[ok])
            lo = np.concatenate([lo[bad], mid[bad]])
            hi = np.concatenate([mid[bad], hi[bad]])
            if sum(len(x) for x in done_lo) + lo.size > max_cells:
                raise IntegrabilityError("scale table refinement did not converge")
        lo = np.concatenate(done_lo)
        order = np.argsort(lo)
        self.lo = lo[order]
        self.hi = np.concatenate(done_hi)[order]
        inc = np.concatenate(done_I)[order]
        # accumulate outwards from the anchor so large tail increments
        # cannot swamp the values near it
        k = int(np.searchsorted(self.lo, anchor))
        if not (k < self.lo.size and self.lo[k] == anchor):
            k = self.lo.size
        cum = np.empty(self.lo.size + 1)
        cum[k] = 0.0
        cum[k + 1:] = np.cumsum(inc[k:])
        cum[:k] = -np.cumsum(inc[:k][::-1])[::-1]
        self.v0 = cum[:-1]
        self.v1 = cum[1:]
        self.d0, self.d1 = self._slopes(self.lo, self.hi)
        self.xmin = float(self.lo[0])
        self.xmax = float(self.hi[-1])

    def _slopes(self, lo, hi):
        eps = 1e-13 * np.maximum(1.0, np.abs(hi))
        d0 = np.asarray(self.fn(lo), dtype=float)
        d1 = np.asarray(self.fn(hi - eps), dtype=float)
        return d0, d1

    def _cell(self, x):
        k = np.searchsorted(self.lo, x, side="right") - 1
        return np.minimum(np.maximum(k, 0), self.lo.size - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self._cell(x)
        h = self.hi[k] - self.lo[k]
        t = (x - self.lo[k]) / h
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t * t * (3 - 2 * t)
        h11 = t * t * (t - 1)
        return h00 * self.v0[k] + h10 * h * self.d0[k] + h01 * self.v1[k] + h11 * h * self.d1[k]

    def slope(self, x):
        x = np.asarray(x, dtype=float)
        k = self._cell(x)
        h = self.hi[k] - self.lo[k]
        t = (x - self.lo[k]) / h
        dv = self.v1[k] - self.v0[k]
        return (6 * t * (1 - t) * dv / h + (1 - 4 * t + 3 * t * t) * self.d0[k]
                + (3 * t * t - 2 * t) * self.d1[k])

    def inverse(self, y):
        """Inverse of an increasing table (vectorised, Newton on the cell cubic)."""
        y = np.asarray(y, dtype=float)
        k = np.clip(np.searchsorted(self.v0, y, side="right") - 1, 0, self.lo.size - 1)
        dv = self.v1[k] - self.v0[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(dv > 0, (y - self.v0[k]) / dv, 0.0)
        t = np.clip(t, 0.0, 1.0)
        x = self.lo[k] + t * (self.hi[k] - self.lo[k])
        for _ in range(6):
            r = self(x) - y
            s = self.slope(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(s > 0, r / s, 0.0)
            x = np.clip(x - step, self.lo[k], self.hi[k])
        return x
