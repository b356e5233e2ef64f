"""Equilibrium measures of one-dimensional pair-interaction energies.

Measures are piecewise-constant densities on a uniform grid.  The pair
interaction is averaged exactly over each pair of cells using closed double
antiderivatives, so the logarithmic singularity needs no cutoff.  Two
kernels are provided:

* ``neg_log``  -- ``-ln|x - y|``;
* ``mod_log``  -- ``phi_beta(x - y) = ln(1 + 1/(beta (x - y)^2))``.

The energy of weights ``w`` is ``sum_k w_k Vbar_k + pair_weight * w^T K w``
where ``Vbar_k`` is the cell average of the potential.  ``pair_weight = 1``
gives ``int V dmu + int int kernel dmu dmu``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate, special
from scipy.linalg import toeplitz

__all__ = [
    "GridMeasure",
    "KernelMatrix",
    "ScalingLaws",
    "WaterFillResult",
    "MinimizeResult",
    "neg_log_second_antiderivative",
    "mod_log_second_antiderivative",
    "phi",
    "phi_antiderivative",
    "assemble_kernel",
    "cell_averages",
    "minimize",
    "water_fill",
    "qp_simplex",
    "limit_density",
    "cV_constant",
    "single_well_energy",
    "scaling_laws",
    "simplex_power_minimize",
    "coulomb_distance",
    "coulomb_distance_fourier",
    "half_sobolev_norm",
    "sigma_kr",
    "ball_moment",
]

KernelName = Literal["neg_log", "mod_log"]


# ---------------------------------------------------------------------------
# measures and kernels


@dataclass
class GridMeasure:
    """Density ``w_k / h`` on cell ``k`` of a uniform grid of ``[a, b]``."""

    a: float
    b: float
    weights: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        if self.b <= self.a:
            raise ValueError("empty interval")
        if np.any(self.weights < 0):
            raise ValueError("negative weight")
        if abs(self.weights.sum() - 1.0) > 1e-12 * max(1, self.m):
            raise ValueError(f"weights sum to {self.weights.sum()!r}, not 1")

    @classmethod
    def uniform(cls, a: float, b: float, m: int) -> GridMeasure:
        return cls(a, b, np.full(m, 1.0 / m))

    @property
    def m(self) -> int:
        return len(self.weights)

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.m

    @property
    def centers(self) -> np.ndarray:
        return self.a + self.h * (np.arange(self.m) + 0.5)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.m + 1)

    @property
    def density(self) -> np.ndarray:
        return self.weights / self.h

    def moment(self, k: int) -> float:
        """Exact ``int x^k dmu`` for the piecewise-constant density."""
        e = self.edges
        return float(np.sum(self.density * (e[1:] ** (k + 1) - e[:-1] ** (k + 1)) / (k + 1)))

    def mass(self, lo: float, hi: float) -> float:
        e = self.edges
        overlap = np.clip(np.minimum(e[1:], hi) - np.maximum(e[:-1], lo), 0.0, None)
        return float(np.sum(self.density * overlap))

    def support(self, tol: float = 1e-10) -> tuple[float, float]:
        idx = np.nonzero(self.weights > tol)[0]
        e = self.edges
        return float(e[idx[0]]), float(e[idx[-1] + 1])

    def density_at(self, x: np.ndarray) -> np.ndarray:
        k = np.floor((np.asarray(x) - self.a) / self.h).astype(int)
        inside = (k >= 0) & (k < self.m)
        out = np.zeros(np.shape(x))
        out[inside] = self.density[k[inside]]
        return out


@dataclass
class KernelMatrix:
    """Cell-pair averages of a translation-invariant kernel on a uniform grid."""

    kind: KernelName
    beta: float | None
    h: float
    first_column: np.ndarray

    @property
    def m(self) -> int:
        return len(self.first_column)

    def dense(self) -> np.ndarray:
        return toeplitz(self.first_column)

    def matvec(self, w: np.ndarray) -> np.ndarray:
        return self._dense_cached() @ w

    def quad(self, w: np.ndarray) -> float:
        return float(w @ self.matvec(w))

    def _dense_cached(self) -> np.ndarray:
        if not hasattr(self, "_K"):
            self._K = self.dense()
        return self._K


def neg_log_second_antiderivative(t: np.ndarray) -> np.ndarray:
    """``G`` with ``G'' = ln|t|`` and ``G(0) = 0``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = 0.5 * t**2 * np.log(np.abs(t)) - 0.75 * t**2
    return np.where(t == 0, 0.0, g)


def phi(beta: float, t) -> np.ndarray:
    """``phi_beta(t) = ln(1 + 1/(beta t^2))``, ``+inf`` at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log1p(1.0 / (beta * t * t))


def phi_antiderivative(z) -> np.ndarray:
    """Antiderivative of ``phi_1``: ``z ln(1 + 1/z^2) + 2 arctan z``."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = z * np.log1p(1.0 / (z * z))
    return np.where(z == 0, 0.0, val) + 2.0 * np.arctan(z)


def mod_log_second_antiderivative(s: np.ndarray) -> np.ndarray:
    """``Phi`` with ``Phi'' = phi_1`` and ``Phi(0) = 0``.

    ``Phi(s) = s^2/2 ln(1 + 1/s^2) - ln(1 + s^2)/2 + 2 s arctan s``.
    """
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = 0.5 * s * s * np.log1p(1.0 / (s * s))
    a = np.where(s == 0, 0.0, a)
    return a - 0.5 * np.log1p(s * s) + 2.0 * s * np.arctan(s)


def _second_difference(G: Callable[[np.ndarray], np.ndarray], h: float, m: int) -> np.ndarray:
    """``int_cell0 int_cell_d g(x - y)`` for offsets ``d = 0..m-1``, via ``G'' = g``."""
    d = np.arange(m, dtype=float)
    return G((d + 1) * h) - 2.0 * G(d * h) + G((d - 1) * h)


def assemble_kernel(m: int, h: float, kind: KernelName, beta: float | None = None) -> KernelMatrix:
    """Exact cell-pair means of the kernel on ``m`` cells of width ``h``."""
    if m < 2:
        raise ValueError("need at least two cells")
    if kind == "neg_log":
        col = -_second_difference(neg_log_second_antiderivative, h, m) / h**2
    elif kind == "mod_log":
        if beta is None or beta <= 0:
            raise ValueError("mod_log kernel needs beta > 0")
        rb = math.sqrt(beta)
        col = _second_difference(lambda t: mod_log_second_antiderivative(rb * t), h, m) / (beta * h**2)
        # far cells lose digits to cancellation; there the midpoint-corrected
        # Taylor value is more accurate than the antiderivative difference
        d = np.arange(m, dtype=float)
        far = (d >= 20) & (d * h * rb > 50.0)
        if far.any():
            t = d[far] * h
            u = beta * t * t
            f0 = np.log1p(1.0 / u)
            f2 = (2.0 * (3.0 * u + 1.0)) / (t * t * (u + 1.0) ** 2)  # phi''(t)
            col[far] = f0 + f2 * h * h / 12.0
    else:
        raise ValueError(f"unknown kernel {kind!r}")
    return KernelMatrix(kind, beta, h, col)


def cell_averages(V: Callable[[np.ndarray], np.ndarray], a: float, b: float, m: int, order: int = 8) -> np.ndarray:
    """Cell averages of ``V`` by Gauss-Legendre quadrature per cell."""
    x, wq = np.polynomial.legendre.leggauss(order)
    h = (b - a) / m
    left = a + h * np.arange(m)
    pts = left[:, None] + 0.5 * h * (x[None, :] + 1.0)
    return (np.asarray(V(pts), dtype=float) * wq[None, :]).sum(axis=1) / 2.0


# ---------------------------------------------------------------------------
# variational solver


@dataclass
class MinimizeResult:
    measure: GridMeasure
    energy: float
    iterations: int
    converged: bool
    kkt_residual: float
    history: list[float] = field(default_factory=list)


def _kkt(w: np.ndarray, g: np.ndarray) -> float:
    """Gap ``sum_k w_k g_k - min_k g_k`` (zero exactly at the simplex optimum)."""
    return float(w @ g - g.min())


def minimize(
    V: Callable[[np.ndarray], np.ndarray] | None,
    a: float,
    b: float,
    m: int,
    kind: KernelName,
    beta: float | None = None,
    *,
    pair_weight: float = 1.0,
    max_iter: int = 200_000,
    rel_tol: float = 1e-10,
    kkt_tol: float = 1e-8,
    polish: bool = True,
    kernel: KernelMatrix | None = None,
) -> MinimizeResult:
    """Minimize ``sum w_k Vbar_k + pair_weight * w^T K w`` over the simplex.

    Exponentiated-gradient (mirror) descent with a backtracking step, so
    every accepted iterate lowers the objective.  The stopping rule is the
    duality gap ``<w, grad> - min grad`` below ``kkt_tol`` (relative to the
    gradient scale) or a relative decrease below ``rel_tol`` over a window of
    iterations.  When ``polish`` is set, the support found by the descent is
    refined by an exact active-set solve of the KKT system, which is then
    accepted only if it lowers the objective.
    """
    h = (b - a) / m
    K = kernel if kernel is not None else assemble_kernel(m, h, kind, beta)
    Kd = K._dense_cached() * pair_weight
    vbar = cell_averages(V, a, b, m) if V is not None else np.zeros(m)

    def energy(w: np.ndarray) -> float:
        return float(w @ vbar + w @ (Kd @ w))

    w = np.full(m, 1.0 / m)
    Kw = Kd @ w
    f = float(w @ vbar + w @ Kw)
    history = [f]
    step = 1.0 / max(2.0 * np.abs(Kd).max(), 1e-300)
    converged = False
    it = 0
    scale = max(np.abs(vbar).max(), np.abs(Kd).max(), 1.0)
    for it in range(1, max_iter + 1):
        g = vbar + 2.0 * Kw
        gap = _kkt(w, g)
        if gap < kkt_tol * scale:
            converged = True
            break
        while True:
            z = np.log(np.maximum(w, 1e-300)) - step * (g - g.min())
            z -= z.max()
            wn = np.exp(z)
            wn[wn < 1e-300] = 0.0
            wn /= wn.sum()
            Kwn = Kd @ wn
            fn = float(wn @ vbar + wn @ Kwn)
            if fn <= f:
                break
            step *= 0.5
            if step < 1e-30:
                break
        decrease = f - fn
        w, Kw, f = wn, Kwn, fn
        history.append(f)
        step *= 1.5
        if len(history) > 50 and (history[-51] - f) < rel_tol * abs(f):
            converged = True
            break
        if decrease == 0.0 and step < 1e-30:
            break

    if polish:
        wp = _active_set_polish(vbar, Kd, w)
        if wp is not None and energy(wp) <= f:
            w, f = wp, energy(wp)
    g = vbar + 2.0 * (Kd @ w)
    gap = _kkt(w, g)
    w = w / w.sum()
    return MinimizeResult(GridMeasure(a, b, w), f, it, converged or gap < kkt_tol * scale, gap, history)


def _active_set_polish(vbar: np.ndarray, K: np.ndarray, w0: np.ndarray, max_rounds: int = 50) -> np.ndarray | None:
    """Solve the KKT system on a support set, updating the set until consistent."""
    S = w0 > 1e-8 * w0.max()
    for _ in range(max_rounds):
        idx = np.nonzero(S)[0]
        n = len(idx)
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = 2.0 * K[np.ix_(idx, idx)]
        M[:n, n] = -1.0
        M[n, :n] = 1.0
        rhs = np.concatenate([-vbar[idx], [1.0]])
        try:
            sol = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            return None
        ws, lam = sol[:n], sol[n]
        w = np.zeros_like(vbar)
        w[idx] = ws
        if np.any(ws < 0):
            # drop the most negative weights and retry
            S[idx[ws < 0]] = False
            continue
        g = vbar + 2.0 * (K @ w)
        out = (~S) & (g < lam - 1e-12 * max(1.0, abs(lam)))
        if not out.any():
            return w / w.sum()
        S |= out
    return None


# ---------------------------------------------------------------------------
# water filling


@dataclass
class WaterFillResult:
    level: float
    weights: np.ndarray
    objective: float


def water_fill(m: float, values: Sequence[float], tol: float = 1e-12) -> WaterFillResult:
    """Exact minimizer of ``sum alpha_i v_i + 2 pi m alpha_i^2`` on the simplex.

    Stationarity gives ``v_i + 4 pi m alpha_i = level`` on the support, so
    ``alpha_i = (level - v_i)_+ / (4 pi m)`` with the level fixed by
    ``sum (level - v_i)_+ = 4 pi m`` (found by bisection).
    """
    v = np.asarray(values, dtype=float)
    q = 4.0 * math.pi * m
    lo, hi = v.min(), v.min() + q
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if np.clip(mid - v, 0, None).sum() < q:
            lo = mid
        else:
            hi = mid
    level = 0.5 * (lo + hi)
    # exact level on the final support
    active = v < level
    level = (q + v[active].sum()) / active.sum()
    alpha = np.clip(level - v, 0, None) / q
    alpha /= alpha.sum()
    obj = float(alpha @ v + 2.0 * math.pi * m * (alpha @ alpha))
    return WaterFillResult(float(level), alpha, obj)


def qp_simplex(v: np.ndarray, quad: float, iters: int = 100_000, tol: float = 1e-14) -> np.ndarray:
    """Projected-gradient minimizer of ``v.a + quad |a|^2`` on the simplex."""
    v = np.asarray(v, dtype=float)
    a = np.full(len(v), 1.0 / len(v))
    step = 1.0 / (2.0 * quad)
    for _ in range(iters):
        an = _project_simplex(a - step * (v + 2.0 * quad * a))
        if np.abs(an - a).max() < tol:
            return an
        a = an
    return a


def _project_simplex(y: np.ndarray) -> np.ndarray:
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.nonzero(u - css / np.arange(1, len(y) + 1) > 0)[0][-1]
    return np.clip(y - css[k] / (k + 1), 0.0, None)


# ---------------------------------------------------------------------------
# closed forms


def limit_density(c: float, p: int = 1) -> tuple[float, Callable[[np.ndarray], np.ndarray]]:
    """Level ``A`` and density ``(A - c x^{2p})_+ / (2 pi)`` of unit mass."""
    if c <= 0 or p < 1:
        raise ValueError("need c > 0 and p >= 1")
    A = c ** (1.0 / (2 * p + 1)) * ((2 * p + 1) * math.pi / (2 * p)) ** (2 * p / (2 * p + 1))

    def nu(x):
        x = np.asarray(x, dtype=float)
        return np.clip(A - c * x ** (2 * p), 0.0, None) / (2.0 * math.pi)

    return A, nu


def cV_constant(p: int, c_list: Sequence[float]) -> float:
    """Closed-form low-temperature energy constant for wells of flatness ``p``."""
    s = sum(cj ** (-1.0 / (2 * p)) for cj in c_list)
    return (
        (1.0 + 1.0 / (2 * p)) ** ((4 * p + 1) / (2 * p + 1))
        * math.pi ** (1.0 - 1.0 / (2 * p + 1))
        * s ** (1.0 / (2 * p + 1) - 1.0)
    )


def single_well_energy(c: float, p: int = 1, kappa: float = 2.0 * math.pi) -> float:
    """``min_sigma int c x^{2p} sigma + kappa int sigma^2`` over probability densities.

    The minimizer is ``(A - c x^{2p})_+ / (2 kappa)`` and the minimum is
    ``A (1 - (2p+1)/(4p) (1 - 2/(2p+1) + 1/(4p+1)))``.  With ``kappa = 2 pi``
    this is the limit of ``beta_p inf J`` and of ``inf phi_m``.
    """
    A = (kappa * (2 * p + 1) / (2 * p)) ** (2 * p / (2 * p + 1)) * c ** (1.0 / (2 * p + 1))
    return A * (1.0 - (2 * p + 1) / (4.0 * p) * (1.0 - 2.0 / (2 * p + 1) + 1.0 / (4 * p + 1)))


@dataclass(frozen=True)
class ScalingLaws:
    p: int
    beta: float
    beta_p: float
    gamma_p: float
    A: float
    cV: float


def scaling_laws(p: int, beta: float, c_list: Sequence[float]) -> ScalingLaws:
    s = sum(cj ** (-1.0 / (2 * p)) for cj in c_list)
    A, _ = limit_density(1.0, p)
    return ScalingLaws(
        p,
        beta,
        beta ** (p / (2 * p + 1)),
        beta ** (-1.0 / (2 * (2 * p + 1))),
        A * s ** (-2 * p / (2 * p + 1)),
        cV_constant(p, c_list),
    )


def simplex_power_minimize(u: Sequence[float], k: float) -> tuple[np.ndarray, float]:
    """Minimize ``sum_i u_i alpha_i^{1+k}`` over the simplex.

    The minimizer is ``alpha_i ~ u_i^{-1/k}`` and the minimum value is
    ``(sum_i u_i^{-1/k})^{-k}``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or k <= 0:
        raise ValueError("need u_i > 0 and k > 0")
    r = u ** (-1.0 / k)
    return r / r.sum(), float(r.sum() ** (-k))


# ---------------------------------------------------------------------------
# distances


def coulomb_distance(mu: GridMeasure, nu: GridMeasure, kernel: KernelMatrix | None = None) -> float:
    """``D(mu, nu) = (-int int ln|x - y| d(mu-nu) d(mu-nu))^{1/2}``."""
    if (mu.a, mu.b, mu.m) != (nu.a, nu.b, nu.m):
        raise ValueError("measures live on different grids")
    K = kernel if kernel is not None else assemble_kernel(mu.m, mu.h, "neg_log")
    d = mu.weights - nu.weights
    return math.sqrt(max(K.quad(d), 0.0))


def _fourier_cells(measure_diff: np.ndarray, centers: np.ndarray, h: float, t: float) -> complex:
    sinc = np.sinc(t * h / (2 * math.pi))  # np.sinc(x) = sin(pi x)/(pi x)
    return complex(np.sum(measure_diff * np.exp(1j * t * centers)) * sinc)


def coulomb_distance_fourier(mu: GridMeasure, nu: GridMeasure, tmax_cells: float = 4000.0) -> float:
    """``(int_0^inf |int e^{itx} d(mu - nu)|^2 dt / t)^{1/2}`` by quadrature."""
    if (mu.a, mu.b, mu.m) != (nu.a, nu.b, nu.m):
        raise ValueError("measures live on different grids")
    d = mu.weights - nu.weights
    x = mu.centers
    h = mu.h

    def integrand(t: float) -> float:
        if t == 0:
            return 0.0
        return abs(_fourier_cells(d, x, h, t)) ** 2 / t

    L = mu.b - mu.a
    # split into pieces of one oscillation period of the widest wave
    period = 2 * math.pi / L
    tmax = tmax_cells / h
    edges = np.concatenate([np.arange(0.0, min(200 * period, tmax), period), [min(200 * period, tmax)]])
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(integrand, lo, hi, limit=200, epsabs=1e-14, epsrel=1e-11)[0]
    # tail: |F|^2 decays like sinc^2; integrate in log-scale
    if edges[-1] < tmax:
        # the oscillating tail is tiny; quad may flag slow convergence on it
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            tail = integrate.quad(lambda s: integrand(math.exp(s)) * math.exp(s),
                                  math.log(edges[-1]), math.log(tmax), limit=2000, epsabs=1e-14)[0]
        total += tail
    return math.sqrt(total)


def half_sobolev_norm(f_hat: Callable[[float], complex], tmax: float = np.inf) -> float:
    """``(int_0^inf t |f_hat(t)|^2 dt)^{1/2}``."""
    return math.sqrt(integrate.quad(lambda t: t * abs(f_hat(t)) ** 2, 0.0, tmax, limit=500)[0])


# ---------------------------------------------------------------------------
# model laws


def sigma_kr(k: int, r: float, a: float, b: float, m: int, **kw) -> MinimizeResult:
    """Minimizer of ``int r x^{2k} dmu - int int ln|x-y|`` on a grid of ``[a, b]``."""
    if r <= 0:
        raise ValueError("need r > 0")
    return minimize(lambda x: r * x ** (2 * k), a, b, m, "neg_log", **kw)


def ball_moment(a: int, b: int, R: float | None = None) -> float:
    """``E[x^a y^b]`` for a uniform point of the 3-ball of radius ``R``.

    Default radius ``(3 pi)^{1/3}``.
    """
    if a < 0 or b < 0:
        raise ValueError("negative exponent")
    if a % 2 or b % 2:
        return 0.0
    R = (3.0 * math.pi) ** (1.0 / 3.0) if R is None else R
    d = 3
    s = a + b
    sphere = (
        special.gamma(d / 2)
        / special.gamma(d / 2 + s / 2)
        * special.gamma((a + 1) / 2)
        * special.gamma((b + 1) / 2)
        * special.gamma(0.5)
        / special.gamma(0.5) ** 3
    )
    return float(d / (d + s) * R**s * sphere)
