"""Nice histogram bin edges via extended-Wilkinson tick placement.

Scored search over step multiples q * 10^z with skipping, optimizing a
weighted combination of simplicity, coverage and density.  Edges are loose:
they always enclose the full data extent.
"""

from __future__ import annotations

import math

import numpy as np

Q = (1.0, 5.0, 2.0, 2.5, 4.0, 3.0)
WEIGHTS = (0.25, 0.2, 0.5, 0.05)  # simplicity, coverage, density, legibility
_EPS = 1e-10


def _simplicity(qi: int, j: int, lmin: float, lmax: float, lstep: float) -> float:
    rem = lmin % lstep
    v = 1.0 if (rem < _EPS or lstep - rem < _EPS) and lmin <= 0.0 and lmax >= 0.0 else 0.0
    return 1.0 - qi / (len(Q) - 1) - j + v


def _simplicity_max(qi: int, j: int) -> float:
    return 1.0 - qi / (len(Q) - 1) - j + 1.0


def _coverage(dmin: float, dmax: float, lmin: float, lmax: float) -> float:
    r = 0.1 * (dmax - dmin)
    return 1.0 - 0.5 * ((dmax - lmax) ** 2 + (dmin - lmin) ** 2) / (r * r)


def _coverage_max(dmin: float, dmax: float, span: float) -> float:
    drange = dmax - dmin
    if span <= drange:
        return 1.0
    half = (span - drange) / 2.0
    r = 0.1 * drange
    return 1.0 - 0.5 * (half * half + half * half) / (r * r)


def _density(k: int, m: int, dmin: float, dmax: float, lmin: float, lmax: float) -> float:
    r = (k - 1.0) / (lmax - lmin)
    rt = (m - 1.0) / (max(lmax, dmax) - min(lmin, dmin))
    return 2.0 - max(r / rt, rt / r)


def _density_max(k: int, m: int) -> float:
    return 2.0 - (k - 1.0) / (m - 1.0) if k >= m else 1.0


def nice_ticks(dmin: float, dmax: float, m: int) -> np.ndarray:
    """m-ish nicely labeled tick positions enclosing [dmin, dmax]."""
    if not (math.isfinite(dmin) and math.isfinite(dmax)):
        raise ValueError("data extent must be finite")
    if m < 2:
        m = 2
    if dmax < dmin:
        dmin, dmax = dmax, dmin
    if dmax - dmin < _EPS * max(1.0, abs(dmin)):
        pad = max(0.5, abs(dmin) * 0.05)
        dmin, dmax = dmin - pad, dmax + pad

    best_score = -2.0
    best = None
    j = 1
    while j < 3:
        for qi, q in enumerate(Q):
            sm = _simplicity_max(qi, j)
            if WEIGHTS[0] * sm + WEIGHTS[1] + WEIGHTS[2] + WEIGHTS[3] < best_score:
                j = 100
                break
            k = 2
            while k < max(12, 3 * m):
                dm = _density_max(k, m)
                if WEIGHTS[0] * sm + WEIGHTS[1] + WEIGHTS[2] * dm + WEIGHTS[3] < best_score:
                    break
                delta = (dmax - dmin) / (k + 1.0) / j / q
                z = math.ceil(math.log10(delta)) if delta > 0 else 0
                while z < 40:
                    step = j * q * 10.0**z
                    cm = _coverage_max(dmin, dmax, step * (k - 1))
                    if WEIGHTS[0] * sm + WEIGHTS[1] * cm + WEIGHTS[2] * dm + WEIGHTS[3] < best_score:
                        break
                    min_start = int(math.floor(dmax / step) * j - (k - 1) * j)
                    max_start = int(math.ceil(dmin / step) * j)
                    for start in range(min_start, max_start + 1):
                        lmin = start * step / j
                        lmax = lmin + step * (k - 1)
                        if lmin > dmin + _EPS * step or lmax < dmax - _EPS * step:
                            continue  # loose fit only
                        score = (
                            WEIGHTS[0] * _simplicity(qi, j, lmin, lmax, step)
                            + WEIGHTS[1] * _coverage(dmin, dmax, lmin, lmax)
                            + WEIGHTS[2] * _density(k, m, dmin, dmax, lmin, lmax)
                            + WEIGHTS[3]
                        )
                        if score > best_score:
                            best_score = score
                            best = (lmin, step, k)
                    z += 1
                k += 1
        j += 1

    if best is None:
        return np.linspace(dmin, dmax, m)
    lmin, step, k = best
    return lmin + step * np.arange(k)


def nice_bin_edges(dmin: float, dmax: float, bin_count: int) -> np.ndarray:
    """bin_count-ish nice bin edges covering [dmin, dmax]."""
    return nice_ticks(dmin, dmax, max(2, bin_count + 1))
