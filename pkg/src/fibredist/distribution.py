"""Residual-bootstrap predictive distributions and two-sample statistics.

The predictive distribution draws realisations y_i = yhat + e_i with e_i
resampled with replacement from the pool of out-of-fold residuals, so every
realisation differs from the point prediction by an exact pool member. The
comparison battery bundles Kolmogorov-Smirnov, Mann-Whitney U, Welch's t,
the overlap coefficient, Kullback-Leibler divergence and the exact 1-D
Wasserstein distance; Shapiro-Wilk gates normality per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, ndtr, ndtri

from .seeding import rng_for

KDE_GRID_POINTS = 512
DENSITY_FLOOR = 1e-12


@dataclass(frozen=True)
class PredictiveDistribution:
    """Point prediction plus Monte Carlo realisations (all in nm).

    Each realisation is constructed as prediction + draws[i], where draws[i]
    is (bitwise) a member of the residual pool.
    """

    prediction: float
    realisations: np.ndarray
    draws: np.ndarray
    residual_pool: np.ndarray
    seed: int
    m: int

    def to_dict(self) -> dict:
        return {
            "prediction": self.prediction,
            "realisations": self.realisations.tolist(),
            "m": self.m,
            "seed": self.seed,
        }


def residual_bootstrap(
    yhat: float, residual_pool: np.ndarray, m: int = 100, seed: int = 0
) -> PredictiveDistribution:
    """m realisations yhat + e*, e* drawn with replacement from the pool."""
    pool = np.asarray(residual_pool, dtype=float)
    if pool.size == 0:
        raise ValueError("residual pool is empty")
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = rng_for(seed, "residual_bootstrap")
    draws = pool[rng.integers(0, pool.size, size=m)]
    return PredictiveDistribution(
        prediction=float(yhat),
        realisations=float(yhat) + draws,
        draws=draws,
        residual_pool=pool.copy(),
        seed=int(seed),
        m=int(m),
    )


def _as_sample(x, minimum: int = 1) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size < minimum:
        raise ValueError(f"sample needs at least {minimum} observations, got {arr.size}")
    return arr


def _ecdf_values(sample: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.searchsorted(np.sort(sample), points, side="right") / sample.size


def ks_test(a, b) -> dict:
    """Two-sample Kolmogorov-Smirnov D and asymptotic p."""
    a = _as_sample(a)
    b = _as_sample(b)
    pooled = np.concatenate([a, b])
    d = float(np.max(np.abs(_ecdf_values(a, pooled) - _ecdf_values(b, pooled))))
    ne = a.size * b.size / (a.size + b.size)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    if lam < 1e-9:
        return {"statistic": d, "p_value": 1.0}
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return {"statistic": d, "p_value": float(min(max(total, 0.0), 1.0))}


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def mann_whitney(a, b) -> dict:
    """U = min(U_a, U_b) with midranks; two-sided normal approximation with
    tie-corrected variance and 0.5 continuity correction."""
    a = _as_sample(a)
    b = _as_sample(b)
    na, nb = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    ra = ranks[:na].sum()
    ua = ra - na * (na + 1) / 2.0
    ub = na * nb - ua
    u = float(min(ua, ub))
    n = na + nb
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum())
    var = na * nb / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        return {"statistic": u, "p_value": 1.0}
    mu = na * nb / 2.0
    z = (u - mu + 0.5) / math.sqrt(var)
    p = 2.0 * float(ndtr(z))
    return {"statistic": u, "p_value": float(min(max(p, 0.0), 1.0))}


def _student_t_sf2(t: float, df: float) -> float:
    """Two-sided p for Student's t via the regularized incomplete beta."""
    if not np.isfinite(t):
        return 0.0
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def welch_t(a, b) -> dict:
    """Unequal-variance t with Welch-Satterthwaite degrees of freedom."""
    a = _as_sample(a, minimum=2)
    b = _as_sample(b, minimum=2)
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    if va + vb == 0.0:
        # both samples constant: undefined t; equal means p 1 by convention
        if diff == 0.0:
            return {"statistic": 0.0, "df": float(a.size + b.size - 2), "p_value": 1.0}
        return {"statistic": math.inf if diff > 0 else -math.inf,
                "df": float(a.size + b.size - 2), "p_value": 0.0}
    t = diff / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    return {"statistic": float(t), "df": float(df), "p_value": _student_t_sf2(t, df)}


def silverman_bandwidth(x: np.ndarray) -> float:
    """0.9 min(sd, IQR/1.34) n^(-1/5) with a floor for degenerate samples."""
    x = _as_sample(x, minimum=2)
    sd = float(x.std(ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    spread_candidates = [v for v in (sd, iqr / 1.34) if v > 0]
    if not spread_candidates:
        span = float(x.max() - x.min())
        return 1e-6 * (span if span > 0 else 1.0)
    return 0.9 * min(spread_candidates) * x.size ** (-0.2)


def _kde_on_grid(x: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    z = (grid[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * math.sqrt(2.0 * math.pi))
    return dens


def _shared_grid(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float, float]:
    ha = silverman_bandwidth(a)
    hb = silverman_bandwidth(b)
    h = max(ha, hb)
    lo = min(a.min(), b.min()) - 3.0 * h
    hi = max(a.max(), b.max()) + 3.0 * h
    return np.linspace(lo, hi, KDE_GRID_POINTS), ha, hb


def overlap_coefficient(a, b) -> float:
    """Trapezoidal integral of min of the two Gaussian KDEs on a shared grid."""
    a = _as_sample(a, minimum=2)
    b = _as_sample(b, minimum=2)
    grid, ha, hb = _shared_grid(a, b)
    fa = _kde_on_grid(a, grid, ha)
    fb = _kde_on_grid(b, grid, hb)
    return float(np.trapezoid(np.minimum(fa, fb), grid))


def kl_divergence(a, b) -> float:
    """KL(a || b) on the shared KDE grid, densities clamped at 1e-12."""
    a = _as_sample(a, minimum=2)
    b = _as_sample(b, minimum=2)
    grid, ha, hb = _shared_grid(a, b)
    dx = grid[1] - grid[0]
    fa = np.clip(_kde_on_grid(a, grid, ha), DENSITY_FLOOR, None)
    fb = np.clip(_kde_on_grid(b, grid, hb), DENSITY_FLOOR, None)
    fa = fa / (fa.sum() * dx)
    return float(np.sum(fa * np.log(fa / fb)) * dx)


def wasserstein1(a, b) -> float:
    """Exact 1-D earth-mover distance: integral of |ECDF_a - ECDF_b|."""
    a = _as_sample(a)
    b = _as_sample(b)
    support = np.sort(np.concatenate([a, b]))
    fa = _ecdf_values(a, support[:-1])
    fb = _ecdf_values(b, support[:-1])
    return float(np.sum(np.abs(fa - fb) * np.diff(support)))


# Royston's AS R94 polynomial coefficients for the Shapiro-Wilk test.
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)


def _polyval(coefs, x):
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


@dataclass(frozen=True)
class NormalityResult:
    statistic: float
    p_value: float
    n: int

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "n": self.n}


def shapiro_wilk(x) -> NormalityResult:
    """Shapiro-Wilk W and p via the Royston (1995) approximation, 3 <= n <= 5000."""
    x = np.sort(_as_sample(x))
    n = x.size
    if n < 3 or n > 5000:
        raise ValueError("Shapiro-Wilk supports sample sizes 3..5000")
    if x[0] == x[-1]:
        raise ValueError("zero-variance sample")
    m = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    mm = float(m @ m)
    c = m / math.sqrt(mm)
    a = np.empty(n)
    u = 1.0 / math.sqrt(n)
    if n == 3:
        a[0] = math.sqrt(0.5)
        a[2] = -a[0]
        a[1] = 0.0
    else:
        a_n = c[-1] + _polyval(_C1, u)
        if n > 5:
            a_n1 = c[-2] + _polyval(_C2, u)
            phi = (mm - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
                1.0 - 2.0 * a_n ** 2 - 2.0 * a_n1 ** 2
            )
            a[2:-2] = m[2:-2] / math.sqrt(phi)
            a[-1] = a_n
            a[-2] = a_n1
            a[0] = -a_n
            a[1] = -a_n1
        else:
            phi = (mm - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n ** 2)
            a[1:-1] = m[1:-1] / math.sqrt(phi)
            a[-1] = a_n
            a[0] = -a_n
    xbar = x.mean()
    w = float((a @ x) ** 2 / np.sum((x - xbar) ** 2))
    w = min(w, 1.0)
    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        p = min(max(p, 0.0), 1.0)
        return NormalityResult(statistic=w, p_value=float(p), n=n)
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        if gamma - math.log(1.0 - w) <= 0.0:
            return NormalityResult(statistic=w, p_value=0.0, n=n)
        z = (-math.log(gamma - math.log(1.0 - w)) - _polyval(_C3, float(n))) / math.exp(
            _polyval(_C4, float(n))
        )
    else:
        ln_n = math.log(n)
        z = (math.log(1.0 - w) - _polyval(_C5, ln_n)) / math.exp(_polyval(_C6, ln_n))
    p = 1.0 - float(ndtr(z))
    return NormalityResult(statistic=w, p_value=float(min(max(p, 0.0), 1.0)), n=n)


@dataclass
class DistComparison:
    """The full battery; first sample is "real", second is "simulated"."""

    ks: dict | None = None
    mwu: dict | None = None
    welch_t: dict | None = None
    ovl: float | None = None
    kl: float | None = None
    wasserstein: float | None = None
    shapiro_a: dict | None = None
    shapiro_b: dict | None = None
    skipped: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ks": self.ks,
            "mwu": self.mwu,
            "welch_t": self.welch_t,
            "ovl": self.ovl,
            "kl": self.kl,
            "wasserstein": self.wasserstein,
            "shapiro_a": self.shapiro_a,
            "shapiro_b": self.shapiro_b,
            "skipped": dict(self.skipped),
        }

    def rows(self) -> list[tuple[str, str, str, str]]:
        """Flat (statistic, value, p, note) rows for sheets and the CLI."""
        out = []

        def fmt(v):
            return "" if v is None else f"{v:.6g}"

        if self.ks:
            out.append(("ks_d", fmt(self.ks["statistic"]), fmt(self.ks["p_value"]),
                        "two-sample Kolmogorov-Smirnov, asymptotic p"))
        if self.mwu:
            out.append(("mann_whitney_u", fmt(self.mwu["statistic"]), fmt(self.mwu["p_value"]),
                        "midranks, tie-corrected normal approximation"))
        if self.welch_t:
            out.append(("welch_t", fmt(self.welch_t["statistic"]), fmt(self.welch_t["p_value"]),
                        f"df={self.welch_t['df']:.4g}, unequal variances"))
        if self.ovl is not None:
            out.append(("overlap_coefficient", fmt(self.ovl), "",
                        "Gaussian KDE, Silverman bandwidth, shared grid"))
        if self.kl is not None:
            out.append(("kl_divergence", fmt(self.kl), "", "KL(real || simulated) on KDE grid"))
        if self.wasserstein is not None:
            out.append(("wasserstein", fmt(self.wasserstein), "", "exact 1-D earth mover (nm)"))
        if self.shapiro_a:
            out.append(("shapiro_wilk_real", fmt(self.shapiro_a["statistic"]),
                        fmt(self.shapiro_a["p_value"]), f"n={self.shapiro_a['n']}"))
        if self.shapiro_b:
            out.append(("shapiro_wilk_simulated", fmt(self.shapiro_b["statistic"]),
                        fmt(self.shapiro_b["p_value"]), f"n={self.shapiro_b['n']}"))
        for name, reason in self.skipped.items():
            out.append((name, "", "", f"skipped: {reason}"))
        return out


def compare_distributions(a, b) -> DistComparison:
    """Run every applicable test of the battery; skipped tests carry reasons."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 and b.size == 0:
        raise ValueError("both samples are empty")
    out = DistComparison()

    def attempt(name, fn, *args):
        try:
            return fn(*args)
        except ValueError as exc:
            out.skipped[name] = str(exc)
            return None

    out.ks = attempt("ks", ks_test, a, b)
    out.mwu = attempt("mwu", mann_whitney, a, b)
    out.welch_t = attempt("welch_t", welch_t, a, b)
    out.ovl = attempt("ovl", overlap_coefficient, a, b)
    out.kl = attempt("kl", kl_divergence, a, b)
    out.wasserstein = attempt("wasserstein", wasserstein1, a, b)
    sw_a = attempt("shapiro_a", shapiro_wilk, a)
    sw_b = attempt("shapiro_b", shapiro_wilk, b)
    out.shapiro_a = sw_a.to_dict() if sw_a else None
    out.shapiro_b = sw_b.to_dict() if sw_b else None
    return out
