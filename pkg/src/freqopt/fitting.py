"""Recover latency and power model parameters from measurement samples.

The latency fit is a variable-projection search: because the two coefficients
enter linearly once the exponents are fixed, an exhaustive coarse grid over
the exponent pair with an exact nonnegative least-squares solve at every grid
point finds the global basin, and a damped Gauss-Newton pass on all four
parameters then polishes it.  This keeps the fit deterministic and free of
starting-point sensitivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .models import FrequencyPair, LatencyModel, PowerModel, _check_positive

EXP_GRID_MAX = 4.0
EXP_GRID_STEP = 0.05
GN_MAX_ITER = 200
GN_STEP_TOL = 1e-9


class InsufficientDataError(ValueError):
    """Raised when a sample set cannot identify the requested model."""


@dataclass(frozen=True)
class LatencySample:
    """One observed inference time at a frequency operating point."""

    f: FrequencyPair
    latency: float

    def __post_init__(self):
        _check_positive("latency", self.latency)


@dataclass(frozen=True)
class PowerSample:
    """One observed average power draw at a frequency operating point."""

    f: FrequencyPair
    power: float

    def __post_init__(self):
        _check_positive("power", self.power)


@dataclass(frozen=True)
class FitQuality:
    """Goodness-of-fit on the training samples.

    degenerate is set when the data had zero variance (r_squared reported as
    1.0 by convention) or when a coefficient was clamped at zero.
    """

    r_squared: float
    mse: float
    n_samples: int
    degenerate: bool = False

    def __post_init__(self):
        if self.mse < 0:
            raise ValueError(f"mse must be nonnegative, got {self.mse}")
        if self.r_squared > 1.0:
            raise ValueError(f"r_squared cannot exceed 1, got {self.r_squared}")


def fit_quality(predicted, observed) -> FitQuality:
    """R-squared and mean squared error of predictions against observations."""
    pred = np.asarray(predicted, dtype=float)
    obs = np.asarray(observed, dtype=float)
    if pred.shape != obs.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError(
            f"predicted and observed must be equal-length nonempty vectors, "
            f"got shapes {pred.shape} and {obs.shape}")
    resid = pred - obs
    ss_res = float(resid @ resid)
    centered = obs - obs.mean()
    ss_tot = float(centered @ centered)
    mse = ss_res / obs.size
    if ss_tot == 0.0:
        # zero-variance observations: R^2 is undefined, report 1.0 and flag it
        return FitQuality(r_squared=1.0, mse=mse, n_samples=obs.size, degenerate=True)
    return FitQuality(r_squared=1.0 - ss_res / ss_tot, mse=mse, n_samples=obs.size)


def _nnls_2term_grid(fm, fc, t, exps):
    """Exact 2-variable NNLS at every exponent grid point, vectorized.

    Returns (sse, lam, mu) arrays of shape (len(exps), len(exps)); cell (i, j)
    is the best nonnegative (lam, mu) for regressors fm**-exps[i], fc**-exps[j].
    The active-set cases (none, lam=0, mu=0, both=0) are enumerated in closed
    form, which is exact for two variables.
    """
    A = fm[None, :] ** -exps[:, None]          # (g, n) memory regressor rows
    B = fc[None, :] ** -exps[:, None]          # (g, n) computing regressor rows
    aa = np.einsum("gn,gn->g", A, A)
    bb = np.einsum("gn,gn->g", B, B)
    at = A @ t
    bt = B @ t
    ab = A @ B.T                               # (g, g)
    tt = float(t @ t)

    def sse_of(lam, mu):
        return (tt - 2.0 * lam * at[:, None] - 2.0 * mu * bt[None, :]
                + lam * lam * aa[:, None] + mu * mu * bb[None, :]
                + 2.0 * lam * mu * ab)

    with np.errstate(divide="ignore", invalid="ignore"):
        det = aa[:, None] * bb[None, :] - ab * ab
        lam_u = (at[:, None] * bb[None, :] - bt[None, :] * ab) / det
        mu_u = (aa[:, None] * bt[None, :] - at[:, None] * ab) / det
        lam_m = np.maximum(at / aa, 0.0)[:, None] + np.zeros_like(ab)   # mu = 0
        mu_c = np.maximum(bt / bb, 0.0)[None, :] + np.zeros_like(ab)    # lam = 0

    ok_u = (det > 0.0) & (lam_u >= 0.0) & (mu_u >= 0.0)
    cand_sse = np.stack([
        np.where(ok_u, sse_of(lam_u, mu_u), np.inf),
        sse_of(lam_m, 0.0),
        sse_of(0.0, mu_c),
        np.full_like(ab, tt),
    ])
    pick = np.argmin(cand_sse, axis=0)
    zeros = np.zeros_like(ab)
    lam = np.choose(pick, [np.where(ok_u, lam_u, 0.0), lam_m, zeros, zeros])
    mu = np.choose(pick, [np.where(ok_u, mu_u, 0.0), zeros, mu_c, zeros])
    sse = np.take_along_axis(cand_sse, pick[None], axis=0)[0]
    return np.maximum(sse, 0.0), lam, mu


def _latency_sse(params, fm, fc, t):
    lam, beta, mu, gam = params
    r = lam * fm ** -beta + mu * fc ** -gam - t
    return float(r @ r)


def _gauss_newton(params, fm, fc, t):
    """Damped Gauss-Newton on (lam, beta, mu, gam), projected to >= 0.

    Steps are only accepted when they lower the SSE, so refinement can never
    worsen the grid-stage solution.
    """
    p = np.asarray(params, dtype=float)
    sse = _latency_sse(p, fm, fc, t)
    damping = 1e-3
    log_fm = np.log(fm)
    log_fc = np.log(fc)
    for _ in range(GN_MAX_ITER):
        lam, beta, mu, gam = p
        a = fm ** -beta
        b = fc ** -gam
        r = lam * a + mu * b - t
        J = np.column_stack([a, -lam * log_fm * a, b, -mu * log_fc * b])
        g = J.T @ r
        H = J.T @ J
        ridge = 1e-12 * max(float(np.max(np.diag(H))), 1.0)
        accepted = None
        for _ in range(40):
            try:
                step = np.linalg.solve(
                    H + damping * np.diag(np.diag(H)) + ridge * np.eye(4), -g)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            cand = np.maximum(p + step, 0.0)
            cand_sse = _latency_sse(cand, fm, fc, t)
            if cand_sse < sse:
                accepted = (cand, cand_sse)
                damping = max(damping / 3.0, 1e-12)
                break
            damping *= 10.0
            if damping > 1e12:
                break
        if accepted is None:
            break
        moved = float(np.linalg.norm(accepted[0] - p))
        p, sse = accepted
        if moved < GN_STEP_TOL:
            break
    return p, sse


def fit_latency_model(samples: list[LatencySample]) -> tuple[LatencyModel, FitQuality]:
    """Fit the two-term power-law latency model to observed samples.

    Requires at least 8 samples spanning at least 3 distinct values on each
    frequency axis.  Returns the model and its quality on the input samples;
    quality.degenerate signals a coefficient clamped at zero or zero-variance
    data.
    """
    fm = np.array([s.f.f_mem for s in samples], dtype=float)
    fc = np.array([s.f.f_com for s in samples], dtype=float)
    t = np.array([s.latency for s in samples], dtype=float)
    if fm.size < 8 or np.unique(fm).size < 3 or np.unique(fc).size < 3:
        raise InsufficientDataError(
            f"latency fit needs >= 8 samples with >= 3 distinct values per "
            f"frequency axis, got {fm.size} samples, "
            f"{np.unique(fm).size} distinct f_mem, {np.unique(fc).size} distinct f_com")

    # sort so the fit is exactly invariant to input sample order
    order = np.lexsort((t, fc, fm))
    fm, fc, t = fm[order], fc[order], t[order]

    exps = np.arange(0.0, EXP_GRID_MAX + EXP_GRID_STEP / 2, EXP_GRID_STEP)
    sse, lam, mu = _nnls_2term_grid(fm, fc, t, exps)
    best = np.unravel_index(int(np.argmin(sse)), sse.shape)  # first hit = lexicographic tie-break
    start = (lam[best], exps[best[0]], mu[best], exps[best[1]])

    params, _ = _gauss_newton(start, fm, fc, t)
    model = LatencyModel(mem_coeff=float(params[0]), mem_exp=float(params[1]),
                         com_coeff=float(params[2]), com_exp=float(params[3]))
    quality = fit_quality(model.latency(fm, fc), t)
    clamped = model.mem_coeff == 0.0 or model.com_coeff == 0.0
    if clamped and not quality.degenerate:
        quality = FitQuality(quality.r_squared, quality.mse, quality.n_samples, degenerate=True)
    return model, quality


def fit_power_model(samples: list[PowerSample]) -> tuple[PowerModel, FitQuality]:
    """Fit the cubic power model by nonnegative least squares.

    Regressors are (f_mem^3, f_com^3, 1).  Requires >= 4 samples that are not
    all at one frequency pair.  Coefficients clamp at zero;
    quality.degenerate is set when a clamp is active.
    """
    fm = np.array([s.f.f_mem for s in samples], dtype=float)
    fc = np.array([s.f.f_com for s in samples], dtype=float)
    p = np.array([s.power for s in samples], dtype=float)
    pairs = {(s.f.f_mem, s.f.f_com) for s in samples}
    if p.size < 4 or len(pairs) < 2:
        raise InsufficientDataError(
            f"power fit needs >= 4 samples at >= 2 distinct frequency pairs, "
            f"got {p.size} samples at {len(pairs)} pairs")

    order = np.lexsort((p, fc, fm))
    fm, fc, p = fm[order], fc[order], p[order]
    X = np.column_stack([fm ** 3, fc ** 3, np.ones_like(fm)])
    coeffs, _ = nnls(X, p)
    model = PowerModel(mem_coeff=float(coeffs[0]), com_coeff=float(coeffs[1]),
                       static_power=float(coeffs[2]))
    quality = fit_quality(X @ coeffs, p)
    if (coeffs == 0.0).any() and not quality.degenerate:
        quality = FitQuality(quality.r_squared, quality.mse, quality.n_samples, degenerate=True)
    return model, quality
