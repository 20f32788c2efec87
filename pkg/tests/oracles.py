"""Reference implementations written independently of the package code.

They favour obviousness over speed: explicit windows over whole arrays,
exact decimal arithmetic, direct numerical integration.
"""

from __future__ import annotations

from decimal import Decimal, getcontext

import numpy as np
from scipy import integrate, stats

getcontext().prec = 50


def exact_distance(x, y, xc, yc) -> float:
    """Euclidean distance from decimal strings, 50 significant digits."""
    dx = Decimal(str(x)) - Decimal(str(xc))
    dy = Decimal(str(y)) - Decimal(str(yc))
    return float((dx * dx + dy * dy).sqrt())


def nearest(x, y, centroids):
    """(distances ordered by id, chosen id) with ties to the lowest id."""
    cs = sorted(centroids, key=lambda c: c[0])
    d = [exact_distance(x, y, c[1], c[2]) for c in cs]
    best = min(range(len(cs)), key=lambda i: (d[i], cs[i][0]))
    return d, cs[best][0]


def scan_events(q, t_drop, t_rec, trigger, ref_window, centroids):
    """Offline detector over a whole trace using explicit index windows.

    Returns a list of tuples: ("ind", t), ("none", t) or ("cls", t, x, y, chosen).
    """
    q = [float(v) for v in q]
    n = len(q)
    out = []
    seg = 0          # first sample the current watch may look back to
    beat = None      # start of the current quiet stretch
    t = 0
    while t < n:
        lo = max(seg, t - ref_window + 1)
        win = q[lo:t + 1]
        level = max(win)
        t_ref = lo + max(i for i, v in enumerate(win) if v == level)
        if level - q[t] > trigger:
            out.append(("ind", t))
            anchor = max(t_ref + 1, t - t_drop + 1)
            end = anchor + t_drop + t_rec
            if end >= n:
                break
            x = level - min(q[anchor:anchor + t_drop])
            qmin, y = q[anchor], 0.0
            for v in q[anchor + 1:end]:
                if v < qmin:
                    qmin, y = v, 0.0
                elif v - qmin > y:
                    y = v - qmin
            _, chosen = nearest(x, y, centroids)
            out.append(("cls", end, x, y, chosen))
            seg, beat, t = end, None, end
            continue
        if beat is None:
            beat = t
        elif t - beat >= t_drop:
            beat = t
            out.append(("none", t))
        t += 1
    return out


def truncated_normal_mean(loc, sd, lo, hi) -> float:
    """Mean of N(loc, sd) restricted to [lo, hi] by quadrature."""
    pdf = stats.norm(loc, sd).pdf
    mass = integrate.quad(pdf, lo, hi)[0]
    return integrate.quad(lambda t: t * pdf(t), lo, hi)[0] / mass

