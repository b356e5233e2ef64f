"""Pure-Python twin of the compiled gas kernel (same signatures, same paths).

Used when the extension is not built or when ``MMLAB_PURE_PYTHON=1``.
Per-site energy differences are vectorized with numpy over the other
particles, so the cost is O(N) numpy work per site.
"""

from __future__ import annotations

import math

import numpy as np


def potential(x, kind, coeffs, centers, curv, powers):
    x = np.asarray(x, dtype=float)
    if kind == 0:
        return np.polynomial.polynomial.polyval(x, coeffs)
    d = (x[..., None] - centers) ** 2
    return np.min(curv * d ** np.asarray(powers), axis=-1)


def _pair(t, beta):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log1p(1.0 / (beta * t * t))


def _width(x, centers, widths, default):
    if len(centers) == 0:
        return default
    return widths[int(np.argmin(np.abs(x - np.asarray(centers))))]


def energy(x, a, b, beta, kind, coeffs, centers, curv, powers):
    x = np.asarray(x, dtype=float)
    iu = np.triu_indices(len(x), 1)
    return float(a * potential(x, kind, coeffs, centers, curv, powers).sum()
                 + b * _pair(x[iu[0]] - x[iu[1]], beta).sum())


def sweeps(x, nsweeps, a, b, beta, kind, coeffs, centers, curv, powers,
           widths, width_default, scale, hop_shifts, hop_prob,
           site, normals, u_accept, u_hop, hop_pick, thin, out):
    n = len(x)
    acc = prop = hacc = hprop = 0
    dE_total = 0.0
    r = 0
    step = 0
    for s in range(nsweeps):
        for _ in range(n):
            k = site[step]
            xo = x[k]
            hop = len(hop_shifts) > 0 and u_hop[step] < hop_prob
            logq = 0.0
            if hop:
                y = xo + hop_shifts[hop_pick[step]]
                hprop += 1
            else:
                so = scale * _width(xo, centers, widths, width_default)
                y = xo + so * normals[step]
                sn = scale * _width(y, centers, widths, width_default)
                if sn != so:
                    z = y - xo
                    logq = math.log(so / sn) - z * z / (2 * sn * sn) + z * z / (2 * so * so)
                prop += 1
            others = np.delete(x, k)
            dE = a * float(potential(y, kind, coeffs, centers, curv, powers)
                           - potential(xo, kind, coeffs, centers, curv, powers))
            dE += b * float(np.sum(_pair(y - others, beta) - _pair(xo - others, beta)))
            step += 1
            if not math.isfinite(dE):
                continue
            if dE - logq <= 0.0 or u_accept[step - 1] < math.exp(-dE + logq):
                others_sorted = others  # still sorted after deleting one entry
                pos = int(np.searchsorted(others_sorted, y))
                x[:] = np.insert(others_sorted, pos, y)
                dE_total += dE
                if hop:
                    hacc += 1
                else:
                    acc += 1
        if thin > 0 and (s + 1) % thin == 0 and r < out.shape[0]:
            out[r, :] = x
            r += 1
    return acc, prop, hacc, hprop, dE_total
