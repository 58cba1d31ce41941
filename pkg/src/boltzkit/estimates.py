"""Numerical harnesses that measure dispersive and bilinear inequality ratios.

Every routine here evaluates a quotient of the form

    measured left-hand norm / right-hand side without its constant

on randomized (and optionally frequency-concentrated) data, and reports the
maximum over samples.  A maximum over finitely many samples is a *lower
bound* for the underlying operator norm; the harness never claims an upper
bound.  Growth exponents are estimated by least-squares regression of
``log2(max ratio)`` against ``log2(N)`` across dyadic levels.

Shared conventions
------------------
* Time integrals over ``[0, T]`` use the composite trapezoid rule on
  ``time_samples`` uniformly spaced nodes (65 by default).  Halving or
  doubling the node count is available as an optional sensitivity column so
  the quadrature error can be judged from the report itself.
* Randomness: sample ``j`` of a run draws from
  ``numpy.random.default_rng((seed, j))`` (concentrated families fold the
  family tag in as well), so identical ``(seed, parameters)`` always
  reproduce the identical report, and the running maximum over samples is
  non-decreasing in the sample count by construction.
* Data models.  Band-limited draws place i.i.d. standard complex Gaussian
  coefficients on the admissible lattice modes and cut them off sharply at
  the requested dyadic radius.  Sobolev-class draws shape i.i.d. complex
  Gaussians with the envelope ``<k>^(-a) <v>^(-b)`` in the double-Fourier
  representation, with ``a = s + d/2 + 3/2`` and ``b = r + d/2 + 3/2`` so
  that the ``H^s_x H^r_xi`` norm is finite with margin as the grid is
  refined.
"""

from __future__ import annotations

import io
import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    InsufficientDataError,
    RangeError,
)
from .spectral_core import (
    DyadicLevel,
    NormSpec,
    PhaseField,
    SpectralGrid,
    _k_to_x,
    _trapezoid,
    _v_to_xi,
    l2_norm,
    lp_project,
    make_field,
    make_grid,
    norm,
    propagate,
    transform,
)
from .collision import CollisionKernelSpec, q_bobylev

__all__ = [
    "ESTIMATE_IDS",
    "EstimateReport",
    "FitResult",
    "bilinear_ratio",
    "critical_exponent",
    "exponent_identity",
    "fit_exponent",
    "regularity_ratio",
    "regularity_report",
    "report_to_csv",
    "report_to_json",
    "rough_term_ratio",
    "rough_term_report",
    "strichartz_ratio",
    "strichartz_report",
]


ESTIMATE_IDS = (
    "strichartz-2.7",
    "strichartz-2.8",
    "regularity-2.12",
    "bilinear-loss",
    "bilinear-gain",
    "bilinear-full",
    "rough-term",
)

#: Default number of uniform trapezoid nodes for time integrals.
DEFAULT_TIME_SAMPLES = 65


# ---------------------------------------------------------------------------
# Exponent arithmetic (exact, via fractions)
# ---------------------------------------------------------------------------


def critical_exponent(d: int) -> Fraction:
    """The critical integrability exponent ``p0 = 2(d+2)/d`` as a fraction."""
    if d not in (1, 2, 3):
        raise ConfigurationError(f"dimension must be 1, 2, or 3, got {d}")
    return Fraction(2 * (d + 2), d)


def exponent_identity(d: int) -> dict:
    """Exact arithmetic check ``d/2 - (d+1)/p0 == d/(2(d+2)) == 1/p0``.

    Returns the three quantities as :class:`fractions.Fraction` together
    with the boolean verdict of the chain of equalities.
    """
    p0 = critical_exponent(d)
    lhs = Fraction(d, 2) - Fraction(d + 1, 1) / p0
    mid = Fraction(d, 2 * (d + 2))
    rhs = 1 / p0
    return {
        "p0": p0,
        "alpha_at_p0": lhs,
        "d_over_2dp4": mid,
        "inverse_p0": rhs,
        "identity_holds": lhs == mid == rhs,
    }


def _alpha(d: int, p: float) -> float:
    """The dispersive exponent ``d/2 - (d+1)/p``."""
    return d / 2.0 - (d + 1) / float(p)


# ---------------------------------------------------------------------------
# Exponent fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit of ``log2(ratio)`` against ``log2(N)``."""

    slope: float
    intercept: float
    residual: float


def fit_exponent(rows: Sequence) -> FitResult:
    """Fit a growth exponent to ``(N, max ratio)`` rows.

    ``rows`` is a sequence of pairs ``(N, ratio)`` with positive entries.
    Fewer than three rows cannot constrain a slope plus intercept plus a
    residual, so that raises :class:`InsufficientDataError`.
    """
    pairs = [(float(n), float(r)) for n, r in rows]
    if len(pairs) < 3:
        raise InsufficientDataError(
            f"exponent fit needs at least 3 levels, got {len(pairs)}"
        )
    for n, r in pairs:
        if not (n > 0 and r > 0):
            raise ConfigurationError(
                f"fit rows must have positive level and ratio, got ({n}, {r})"
            )
    x = np.log2([n for n, _ in pairs])
    y = np.log2([r for _, r in pairs])
    a = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(a, y, rcond=None)
    resid = float(math.sqrt(res[0])) if res.size else 0.0
    return FitResult(slope=float(coef[0]), intercept=float(coef[1]), residual=resid)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class EstimateReport:
    """Outcome of one measured-inequality experiment.

    ``levels`` holds one ``(N, M)`` pair per measured row and ``ratios`` the
    per-row maximum measured quotient; ``(0, 0)`` marks a broadband row with
    no frequency concentration.  ``fitted_slope`` is the regression slope of
    ``log2(ratio)`` on ``log2(N)`` over the fitted rows, ``theory_slope``
    the predicted exponent, and the verdict is ``"pass"`` iff
    ``fitted_slope <= theory_slope + slack`` (the slack is recorded in
    ``params``).
    """

    estimate_id: str
    params: dict
    levels: list
    ratios: list
    fitted_slope: float | None
    theory_slope: float
    verdict: str
    samples: int
    seed: int
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.estimate_id not in ESTIMATE_IDS:
            raise ConfigurationError(
                f"estimate_id must be one of {ESTIMATE_IDS}, got {self.estimate_id!r}"
            )
        if len(self.levels) != len(self.ratios):
            raise ConfigurationError("levels and ratios must have equal length")

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _fmt_float(x) -> float | None:
    if x is None:
        return None
    return float(f"{float(x):.17g}")


def report_to_json(report: EstimateReport) -> str:
    """Serialize a report to JSON with 17-significant-digit floats.

    The key order is fixed so identical runs emit identical bytes.
    """
    payload = {
        "estimate_id": report.estimate_id,
        "params": {
            k: (_fmt_float(v) if isinstance(v, float) else v)
            for k, v in report.params.items()
        },
        "levels": [list(lv) for lv in report.levels],
        "ratios": [_fmt_float(r) for r in report.ratios],
        "fitted_slope": _fmt_float(report.fitted_slope),
        "theory_slope": _fmt_float(report.theory_slope),
        "verdict": report.verdict,
        "samples": report.samples,
        "seed": report.seed,
    }
    if report.extras:
        payload["extras"] = {
            k: (_fmt_float(v) if isinstance(v, float) else v)
            for k, v in report.extras.items()
        }
    return json.dumps(payload, indent=2)


def report_to_csv(report: EstimateReport) -> str:
    """Serialize a report to RFC-4180 CSV with one row per level."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(
        [
            "estimate_id",
            "N",
            "M",
            "ratio",
            "fitted_slope",
            "theory_slope",
            "verdict",
            "samples",
            "seed",
        ]
    )
    fs = "" if report.fitted_slope is None else f"{report.fitted_slope:.17g}"
    for (n, m), ratio in zip(report.levels, report.ratios):
        writer.writerow(
            [
                report.estimate_id,
                n,
                m,
                f"{float(ratio):.17g}",
                fs,
                f"{report.theory_slope:.17g}",
                report.verdict,
                report.samples,
                report.seed,
            ]
        )
    return buf.getvalue()


def _verdict(fitted: float | None, theory: float, slack: float) -> str:
    if fitted is None:
        return "pass"
    return "pass" if fitted <= theory + slack else "fail"


# ---------------------------------------------------------------------------
# Streaming space-time Lebesgue norm of a free evolution
# ---------------------------------------------------------------------------


def _time_nodes(T: float, time_samples: int) -> np.ndarray:
    if not (T > 0):
        raise ConfigurationError(f"time horizon T must be positive, got {T}")
    if time_samples < 2:
        raise ConfigurationError(
            f"time_samples must be >= 2, got {time_samples}"
        )
    return np.linspace(0.0, float(T), int(time_samples))


def _k_dot_v(g: SpectralGrid) -> np.ndarray:
    """The transport phase ``sum_a k_a v_a`` on the full field shape."""
    acc = np.zeros(g.field_shape)
    for a in range(g.d):
        sh = [1] * (2 * g.d)
        sh[a] = g.nx
        sh[g.d + a] = g.nv
        acc = acc + np.outer(g.k_axis, g.v_axis).reshape(sh)
    return acc


def _lp_time_norm(
    fld: PhaseField, p: float, times: np.ndarray, chunk: int = 4
) -> float:
    """``L^p`` norm of the free evolution over ``[0, T] x x x xi``.

    Evaluates the same trapezoid-rule quadrature as the ``Lp-spacetime``
    norm on an explicit trajectory, but streams the time axis in batches so
    the full trajectory never has to be materialized.  The batch axis sits
    last, where the shared transform helpers broadcast over it.
    """
    g = fld.grid
    kv = transform(fld, "KV").data
    kdotv = _k_dot_v(g)
    cell = (g.dx * g.dxi) ** g.d
    gs = np.empty(times.size)
    for lo in range(0, times.size, max(1, int(chunk))):
        tc = times[lo : lo + chunk]
        phase = np.exp(kdotv[..., None] * (-1j * tc))
        arr = kv[..., None] * phase
        del phase
        arr = _v_to_xi(_k_to_x(arr, g), g)
        gs[lo : lo + chunk] = cell * np.sum(
            np.abs(arr) ** p, axis=tuple(range(2 * g.d))
        )
    return float(_trapezoid(gs, times)) ** (1.0 / float(p))


# ---------------------------------------------------------------------------
# Strichartz-type ratios
# ---------------------------------------------------------------------------


def _check_level_in_grid(grid: SpectralGrid, N: int, M: int) -> None:
    n_val = DyadicLevel(N).value
    m_val = DyadicLevel(M).value
    if n_val > grid.nx // 2:
        raise RangeError(
            f"spatial level N={n_val} exceeds the grid Nyquist range {grid.nx // 2}"
        )
    if m_val > grid.xi_max:
        raise RangeError(
            f"velocity-frequency level M={m_val} exceeds the grid range {grid.xi_max}"
        )


def _draw_band_limited(
    grid: SpectralGrid, N: int, M: int, rng: np.random.Generator
) -> PhaseField:
    """White complex Gaussian data cut off sharply at ``|k| <= N, |xi| <= M``."""
    noise = rng.standard_normal(grid.field_shape) + 1j * rng.standard_normal(
        grid.field_shape
    )
    xi_mask = (grid.radial(grid.xi_axis) <= M).astype(float)
    data = noise * xi_mask.reshape((1,) * grid.d + xi_mask.shape)
    fld = make_field(grid, "XXI", data)
    return lp_project(fld, "x", N, mode="ball", profile="sharp")


def strichartz_ratio(
    grid: SpectralGrid,
    N: int,
    M: int,
    p: float,
    T: float,
    samples: int,
    seed: int,
    time_samples: int = DEFAULT_TIME_SAMPLES,
    chunk: int = 4,
    draw=None,
) -> dict:
    """Measured dispersive quotient at one ``(N, M)`` frequency pair.

    Each sample draws complex Gaussian data supported on ``|k| <= N`` and
    ``|xi| <= M``, normalizes it in ``L^2``, propagates it over ``[0, T]``,
    and measures the space-time ``L^p`` norm against the dispersive
    right-hand side without its constant,

        ``max(1, M/N)^(1/p) * N^alpha * M^alpha``,   ``alpha = d/2-(d+1)/p``.

    Returns a row dict with the per-sample ratios (whose running maximum is
    non-decreasing in the sample count) and their maximum, a lower bound
    for the restricted operator norm.  ``draw`` overrides the data model
    with a callable ``(grid, N, M, rng) -> PhaseField`` (zero or
    single-mode data realize the degenerate closed forms).
    """
    if p < 2:
        raise ConfigurationError(f"integrability exponent p must be >= 2, got {p}")
    if samples < 1:
        raise ConfigurationError(f"samples must be >= 1, got {samples}")
    _check_level_in_grid(grid, N, M)
    times = _time_nodes(T, time_samples)
    alpha = _alpha(grid.d, p)
    rhs = max(1.0, M / N) ** (1.0 / p) * float(N) ** alpha * float(M) ** alpha
    sampler = draw or _draw_band_limited
    ratios = []
    for j in range(int(samples)):
        rng = np.random.default_rng((seed, j))
        fld = sampler(grid, N, M, rng)
        n2 = l2_norm(fld)
        if n2 == 0.0:
            ratios.append(0.0)
            continue
        fld = fld.with_data(fld.data / n2)
        lhs = _lp_time_norm(fld, p, times, chunk=chunk)
        ratios.append(lhs / rhs)
    return {
        "N": int(N),
        "M": int(M),
        "ratios": ratios,
        "max_ratio": max(ratios),
        "samples": int(samples),
        "seed": int(seed),
        "time_samples": int(time_samples),
    }


def strichartz_report(
    d: int,
    p: float,
    M: int,
    levels: Sequence[int],
    T: float,
    samples: int,
    seed: int,
    nv: int,
    v_max: float,
    nx_factor: int = 2,
    time_samples: int = DEFAULT_TIME_SAMPLES,
    estimate_id: str = "strichartz-2.7",
    slack: float = 0.1,
    sensitivity_level: int | None = None,
) -> EstimateReport:
    """Run :func:`strichartz_ratio` across dyadic ``N`` and fit the slope.

    A per-level grid ``nx = nx_factor * N`` keeps the spatial band exactly
    resolved.  ``estimate_id`` selects the predicted ratio exponent: zero
    for the full-range form (the measured quotient already divides out the
    dispersive factor), and ``1/p - alpha`` for the low-integrability form
    whose right-hand side carries ``N^(1/p)`` instead of ``N^alpha``.
    ``sensitivity_level``, when given, re-runs one level with half and
    double time nodes and records the resulting maxima in ``extras``.
    """
    if estimate_id not in ("strichartz-2.7", "strichartz-2.8"):
        raise ConfigurationError(
            f"estimate_id must be a strichartz tag, got {estimate_id!r}"
        )
    p0 = float(critical_exponent(d))
    if estimate_id == "strichartz-2.7" and p < p0 - 1e-12:
        raise ConfigurationError(
            f"the full-range form needs p >= p0 = {p0}, got p = {p}"
        )
    if estimate_id == "strichartz-2.8" and p > p0 + 1e-12:
        raise ConfigurationError(
            f"the low-integrability form needs p <= p0 = {p0}, got p = {p}"
        )
    rows = []
    level_pairs = []
    ratios = []
    extras: dict = {}
    for N in levels:
        n_val = DyadicLevel(int(N)).value
        grid = make_grid(d=d, nx=nx_factor * n_val, nv=nv, v_max=v_max)
        row = strichartz_ratio(
            grid, n_val, M, p, T, samples, seed, time_samples=time_samples
        )
        rows.append(row)
        level_pairs.append((n_val, int(M)))
        ratios.append(row["max_ratio"])
        if sensitivity_level is not None and n_val == int(sensitivity_level):
            for label, nt in (
                ("half", (time_samples - 1) // 2 + 1),
                ("double", 2 * (time_samples - 1) + 1),
            ):
                alt = strichartz_ratio(
                    grid, n_val, M, p, T, samples, seed, time_samples=nt
                )
                extras[f"time_sensitivity_{label}"] = {
                    "N": n_val,
                    "time_samples": nt,
                    "max_ratio": alt["max_ratio"],
                }
    fit = fit_exponent([(n, r) for (n, _), r in zip(level_pairs, ratios)])
    # The measured quotient divides out the predicted growth, so the ratio
    # slope should be flat for the full-range form; the low-integrability
    # form keeps the difference between its N-exponent and the dispersive
    # one that was divided out.
    theory = 0.0 if estimate_id == "strichartz-2.7" else (1.0 / p) - _alpha(d, p)
    params = {
        "d": d,
        "p": float(p),
        "s": None,
        "s1": None,
        "r": None,
        "gamma": None,
        "T": float(T),
        "slack": float(slack),
        "time_samples": int(time_samples),
        "nv": int(nv),
        "v_max": float(v_max),
        "nx_factor": int(nx_factor),
        "alpha": _alpha(d, p),
    }
    return EstimateReport(
        estimate_id=estimate_id,
        params=params,
        levels=level_pairs,
        ratios=ratios,
        fitted_slope=fit.slope,
        theory_slope=theory,
        verdict=_verdict(fit.slope, theory, slack),
        samples=int(samples),
        seed=int(seed),
        extras=extras,
    )


# ---------------------------------------------------------------------------
# Regularity-type ratio (x band limit only, Sobolev right-hand side)
# ---------------------------------------------------------------------------


def regularity_ratio(
    grid: SpectralGrid,
    N: int,
    p: float,
    s_p: float,
    T: float,
    samples: int,
    seed: int,
    time_samples: int = DEFAULT_TIME_SAMPLES,
    chunk: int = 4,
) -> dict:
    """Measured quotient for the x-band-limited Sobolev form.

    Data is band limited in ``k`` only (``|k| <= N``) with a Sobolev-class
    envelope in the velocity-frequency variable; the right-hand side is
    ``N^{s_p} * ||f||_{L^2_x H^{r_p}_xi}`` with ``r_p = s_p + 1/p``.
    """
    if p < 2:
        raise ConfigurationError(f"integrability exponent p must be >= 2, got {p}")
    alpha = _alpha(grid.d, p)
    if not (s_p > alpha):
        raise ConfigurationError(
            f"regularity index s_p must exceed d/2-(d+1)/p = {alpha}, got {s_p}"
        )
    n_val = DyadicLevel(int(N)).value
    if n_val > grid.nx // 2:
        raise RangeError(
            f"spatial level N={n_val} exceeds the grid Nyquist range {grid.nx // 2}"
        )
    times = _time_nodes(T, time_samples)
    r_p = s_p + 1.0 / p
    b = r_p + grid.d / 2.0 + 1.5
    rhs_norm = NormSpec(kind="Sobolev-HsHr", s=0.0, r=r_p)
    ratios = []
    for j in range(int(samples)):
        rng = np.random.default_rng((seed, j))
        fld = _draw_enveloped(grid, rng, a=0.0, b=b)
        fld = lp_project(fld, "x", n_val, mode="ball", profile="sharp")
        denom = float(n_val) ** s_p * norm(fld, rhs_norm)
        if denom == 0.0:
            ratios.append(0.0)
            continue
        lhs = _lp_time_norm(fld, p, times, chunk=chunk)
        ratios.append(lhs / denom)
    return {
        "N": n_val,
        "M": 0,
        "ratios": ratios,
        "max_ratio": max(ratios),
        "samples": int(samples),
        "seed": int(seed),
        "time_samples": int(time_samples),
    }


def regularity_report(
    d: int,
    p: float,
    s_p: float,
    levels: Sequence[int],
    T: float,
    samples: int,
    seed: int,
    nv: int,
    v_max: float,
    nx_factor: int = 2,
    time_samples: int = DEFAULT_TIME_SAMPLES,
    slack: float = 0.1,
) -> EstimateReport:
    """Dyadic sweep of :func:`regularity_ratio`; the ratio slope should be flat."""
    level_pairs = []
    ratios = []
    for N in levels:
        n_val = DyadicLevel(int(N)).value
        grid = make_grid(d=d, nx=nx_factor * n_val, nv=nv, v_max=v_max)
        row = regularity_ratio(
            grid, n_val, p, s_p, T, samples, seed, time_samples=time_samples
        )
        level_pairs.append((n_val, 0))
        ratios.append(row["max_ratio"])
    fit = fit_exponent([(n, r) for (n, _), r in zip(level_pairs, ratios)])
    params = {
        "d": d,
        "p": float(p),
        "s": float(s_p),
        "s1": None,
        "r": float(s_p + 1.0 / p),
        "gamma": None,
        "T": float(T),
        "slack": float(slack),
        "time_samples": int(time_samples),
        "nv": int(nv),
        "v_max": float(v_max),
        "nx_factor": int(nx_factor),
    }
    return EstimateReport(
        estimate_id="regularity-2.12",
        params=params,
        levels=level_pairs,
        ratios=ratios,
        fitted_slope=fit.slope,
        theory_slope=0.0,
        verdict=_verdict(fit.slope, 0.0, slack),
        samples=int(samples),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# Sobolev-class random data
# ---------------------------------------------------------------------------


def _envelope(grid: SpectralGrid, a: float, b: float) -> np.ndarray:
    """The decay envelope ``<k>^(-a) <v>^(-b)`` on the double-Fourier lattice."""
    wk = (1.0 + grid.radial(grid.k_axis) ** 2) ** (-a / 2.0)
    wv = (1.0 + grid.radial(grid.v_axis) ** 2) ** (-b / 2.0)
    return wk.reshape(wk.shape + (1,) * grid.d) * wv.reshape(
        (1,) * grid.d + wv.shape
    )


def _draw_enveloped(
    grid: SpectralGrid, rng: np.random.Generator, a: float, b: float
) -> PhaseField:
    """I.i.d. complex Gaussians shaped by the Sobolev envelope, in ``KV``."""
    noise = rng.standard_normal(grid.field_shape) + 1j * rng.standard_normal(
        grid.field_shape
    )
    return make_field(grid, "KV", noise * _envelope(grid, a, b))


# ---------------------------------------------------------------------------
# Bilinear collision ratios
# ---------------------------------------------------------------------------


_BILINEAR_CASES = ("loss", "gain", "full")

#: Frequency-concentration families for adversarial bilinear data: the pair
#: of spatial dyadic treatments applied to the two arguments.  ``high`` is a
#: sharp annulus at the row's level, ``low`` a sharp ball at level 1, and
#: ``broad`` leaves the draw broadband.
_FAMILIES = ("broad", "high-low", "high-high", "low-high")


def _concentrate(fld: PhaseField, treatment: str, level: int) -> PhaseField:
    if treatment == "broad":
        return fld
    if treatment == "high":
        return lp_project(fld, "x", level, mode="annulus", profile="sharp")
    if treatment == "low":
        return lp_project(fld, "x", 1, mode="ball", profile="sharp")
    raise ConfigurationError(f"unknown concentration treatment {treatment!r}")


def _collision_sign(case: str) -> str | None:
    if case == "loss":
        return "loss"
    if case == "gain":
        return "gain"
    return None  # full: gain minus loss


def _apply_case(
    f: PhaseField, g: PhaseField, spec: CollisionKernelSpec, case: str
) -> PhaseField:
    sign = _collision_sign(case)
    if sign is not None:
        return q_bobylev(f, g, spec, sign=sign)
    gain = q_bobylev(f, g, spec, sign="gain")
    loss = q_bobylev(f, g, spec, sign="loss")
    return gain.with_data(gain.data - loss.data)


def bilinear_ratio(
    case: str,
    d: int,
    gamma: float,
    s: float,
    s1: float,
    r: float,
    T: float,
    grid: SpectralGrid,
    samples: int,
    seed: int,
    kernel: CollisionKernelSpec | None = None,
    time_samples: int = DEFAULT_TIME_SAMPLES,
    adversarial_levels: Sequence[int] = (2, 4, 8),
    slack: float = 0.1,
) -> EstimateReport:
    """Measured quotient for the time-integrated bilinear collision bound.

    For sample pairs ``(f0, g0)`` of Sobolev-class data the quotient is

        ``||Q~(U(t)f0, U(t)g0)||_{L^1_t H^{s1}_x H^r_xi}`` divided by
        ``T^(1/2) * (||f0||_{s1,r} ||g0||_{s,r} + ||f0||_{s,r} ||g0||_{s1,r})``

    — the mirrored right-hand side, so the quotient is symmetric under
    swapping which argument carries the lower spatial regularity.  The
    sample budget is split between a broadband family and adversarial
    frequency-concentrated families (high-low, high-high, low-high spatial
    pairings at matched dyadic levels); the report carries one row per
    family/level with ``(0, 0)`` marking the broadband row, and the slope is
    fitted over the matched high-high diagonal where boundedness predicts a
    flat exponent.
    """
    if case not in _BILINEAR_CASES:
        raise ConfigurationError(
            f"case must be one of {_BILINEAR_CASES}, got {case!r}"
        )
    if not (0.0 <= s1 <= s):
        raise ConfigurationError(
            f"the reduced regularity must satisfy 0 <= s1 <= s, got s1={s1}, s={s}"
        )
    if grid.d != d:
        raise ConfigurationError(
            f"grid dimension {grid.d} does not match requested d={d}"
        )
    if samples < 1:
        raise ConfigurationError(f"samples must be >= 1, got {samples}")
    spec = kernel or CollisionKernelSpec(d=d, gamma=gamma)
    if spec.gamma != gamma or spec.d != d:
        raise ConfigurationError(
            "kernel spec disagrees with the requested (d, gamma)"
        )
    for lv in adversarial_levels:
        if DyadicLevel(int(lv)).value > grid.nx // 2:
            raise RangeError(
                f"adversarial level {lv} exceeds the grid Nyquist range {grid.nx // 2}"
            )
    times = _time_nodes(T, time_samples)
    a_env = s + d / 2.0 + 1.5
    b_env = r + d / 2.0 + 1.5
    lo_norm = NormSpec(kind="Sobolev-HsHr", s=s1, r=r)
    hi_norm = NormSpec(kind="Sobolev-HsHr", s=s, r=r)

    # Split the total sample budget: half broadband, half spread across the
    # adversarial families and levels.
    rows: list[tuple[tuple[int, int], str]] = [((0, 0), "broad")]
    for lv in adversarial_levels:
        rows.append(((int(lv), 1), "high-low"))
        rows.append(((int(lv), int(lv)), "high-high"))
        rows.append(((1, int(lv)), "low-high"))
    n_adv_rows = len(rows) - 1
    per_adv = max(1, int(samples) // (2 * n_adv_rows))
    broad_n = max(1, int(samples) - n_adv_rows * per_adv)

    level_pairs = []
    ratios = []
    total = 0
    for row_idx, ((lf, lg), family) in enumerate(rows):
        count = broad_n if family == "broad" else per_adv
        best = 0.0
        for j in range(count):
            rng = np.random.default_rng((seed, row_idx, j))
            f0 = _draw_enveloped(grid, rng, a_env, b_env)
            g0 = _draw_enveloped(grid, rng, a_env, b_env)
            if family != "broad":
                tf, tg = family.split("-")
                f0 = _concentrate(f0, tf, lf)
                g0 = _concentrate(g0, tg, lg)
            denom = math.sqrt(T) * (
                norm(f0, lo_norm) * norm(g0, hi_norm)
                + norm(f0, hi_norm) * norm(g0, lo_norm)
            )
            if denom == 0.0:
                continue
            # Keep the pair in KV so each propagation is a pure phase
            # multiply with no transforms.
            f0 = transform(f0, "KV")
            g0 = transform(g0, "KV")
            vals = np.empty(times.size)
            for i, t in enumerate(times):
                ft = propagate(f0, t)
                gt = propagate(g0, t)
                qt = _apply_case(ft, gt, spec, case)
                vals[i] = norm(qt, lo_norm)
            lhs = float(_trapezoid(vals, times))
            best = max(best, lhs / denom)
            total += 1
        level_pairs.append((lf, lg))
        ratios.append(best)

    diag = [
        (lf, ratio)
        for (lf, lg), ratio in zip(level_pairs, ratios)
        if lf == lg and lf > 0 and ratio > 0
    ]
    fitted = fit_exponent(diag).slope if len(diag) >= 3 else None
    params = {
        "d": d,
        "p": None,
        "s": float(s),
        "s1": float(s1),
        "r": float(r),
        "gamma": float(gamma),
        "T": float(T),
        "slack": float(slack),
        "time_samples": int(time_samples),
        "case": case,
        "nx": grid.nx,
        "nv": grid.nv,
        "v_max": grid.v_max,
    }
    return EstimateReport(
        estimate_id=f"bilinear-{case}",
        params=params,
        levels=level_pairs,
        ratios=ratios,
        fitted_slope=fitted,
        theory_slope=0.0,
        verdict=_verdict(fitted, 0.0, slack),
        samples=total,
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# Rough (time-independent) bilinear ratio
# ---------------------------------------------------------------------------


def rough_term_ratio(
    f: PhaseField,
    g: PhaseField,
    s: float,
    r: float,
    grid: SpectralGrid,
    kernel: CollisionKernelSpec,
) -> float:
    """Time-independent collision quotient at one pair of fields.

    Returns ``max over both collision signs`` of

        ``||Q~(f, g)||_{L^2_x H^r_xi} / (||f||_{H^s_x H^r_xi} ||g||_{H^s_x H^r_xi})``

    with no time integral.  Preconditions: ``s >= d/4`` and
    ``r > d/2 + gamma``; otherwise the configuration is rejected.
    """
    d = grid.d
    if f.grid != grid or g.grid != grid:
        raise ConfigurationError("fields must live on the stated grid")
    if not (s >= d / 4.0):
        raise ConfigurationError(
            f"rough-term regularity needs s >= d/4 = {d / 4.0}, got s = {s}"
        )
    if not (r > d / 2.0 + kernel.gamma):
        raise ConfigurationError(
            f"rough-term weight needs r > d/2 + gamma = {d / 2.0 + kernel.gamma}, "
            f"got r = {r}"
        )
    lhs_norm = NormSpec(kind="Sobolev-HsHr", s=0.0, r=r)
    rhs_norm = NormSpec(kind="Sobolev-HsHr", s=s, r=r)
    denom = norm(f, rhs_norm) * norm(g, rhs_norm)
    if denom == 0.0:
        return 0.0
    best = 0.0
    for sign in ("gain", "loss"):
        q = q_bobylev(f, g, kernel, sign=sign)
        best = max(best, norm(q, lhs_norm) / denom)
    return best


def rough_term_report(
    d: int,
    gamma: float,
    s: float,
    r: float,
    grid: SpectralGrid,
    samples: int,
    seed: int,
    kernel: CollisionKernelSpec | None = None,
    adversarial_levels: Sequence[int] = (2, 4, 8),
    slack: float = 0.1,
) -> EstimateReport:
    """Sweep :func:`rough_term_ratio` over broadband and concentrated pairs."""
    spec = kernel or CollisionKernelSpec(d=d, gamma=gamma)
    if spec.gamma != gamma or spec.d != d:
        raise ConfigurationError(
            "kernel spec disagrees with the requested (d, gamma)"
        )
    a_env = s + d / 2.0 + 1.5
    b_env = r + d / 2.0 + 1.5
    rows: list[tuple[tuple[int, int], str]] = [((0, 0), "broad")]
    for lv in adversarial_levels:
        rows.append(((int(lv), int(lv)), "high-high"))
    n_adv = len(rows) - 1
    per_adv = max(1, int(samples) // (2 * n_adv))
    broad_n = max(1, int(samples) - n_adv * per_adv)
    level_pairs = []
    ratios = []
    total = 0
    for row_idx, ((lf, lg), family) in enumerate(rows):
        count = broad_n if family == "broad" else per_adv
        best = 0.0
        for j in range(count):
            rng = np.random.default_rng((seed, row_idx, j))
            f0 = _draw_enveloped(grid, rng, a_env, b_env)
            g0 = _draw_enveloped(grid, rng, a_env, b_env)
            if family != "broad":
                f0 = _concentrate(f0, "high", lf)
                g0 = _concentrate(g0, "high", lg)
            best = max(best, rough_term_ratio(f0, g0, s, r, grid, spec))
            total += 1
        level_pairs.append((lf, lg))
        ratios.append(best)
    diag = [
        (lf, ratio)
        for (lf, lg), ratio in zip(level_pairs, ratios)
        if lf == lg and lf > 0 and ratio > 0
    ]
    fitted = fit_exponent(diag).slope if len(diag) >= 3 else None
    params = {
        "d": d,
        "p": None,
        "s": float(s),
        "s1": None,
        "r": float(r),
        "gamma": float(gamma),
        "T": None,
        "slack": float(slack),
        "nx": grid.nx,
        "nv": grid.nv,
        "v_max": grid.v_max,
    }
    return EstimateReport(
        estimate_id="rough-term",
        params=params,
        levels=level_pairs,
        ratios=ratios,
        fitted_slope=fitted,
        theory_slope=0.0,
        verdict=_verdict(fitted, 0.0, slack),
        samples=total,
        seed=int(seed),
    )
