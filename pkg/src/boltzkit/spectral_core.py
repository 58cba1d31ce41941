"""Phase-space grids, Fourier representations, free transport, dyadic
frequency projectors, frequency scaling, and norms.

Representations
---------------
A field lives on the phase-space grid ``(x, v)`` with ``d`` spatial and ``d``
velocity axes and is stored in one of three representations:

``XV``
    physical space--velocity values ``f(x, v)``;
``XXI``
    physical space--velocity-frequency values ``f~(x, xi)`` (velocity axes
    transformed);
``KV``
    spatial-frequency--velocity values ``f^(k, v)`` (spatial axes
    transformed).

Conventions (all transforms unitary, Parseval constants exactly 1)
------------------------------------------------------------------
* Spatial torus ``[0, 2*pi)^d``, nodes ``x_j = j*dx``, ``dx = 2*pi/nx``;
  integer wavenumbers ``k`` stored centered in ``[-nx/2, nx/2)``.
  Forward: ``f^(k) = dx^d (2*pi)^(-d/2) sum_x f(x) exp(-i k.x)``.
  ``sum_k |f^|^2 = dx^d sum_x |f|^2`` (counting measure in ``k``).
* Velocity box ``[-v_max, v_max)^d`` treated periodically, nodes
  ``v_j = (j - nv/2)*dv``, ``dv = 2*v_max/nv``; frequencies
  ``xi_m = (m - nv/2)*dxi``, ``dxi = pi/v_max``.
  Forward: ``f~(xi) = dv^d (2*pi)^(-d/2) sum_v f(v) exp(-i v.xi)``.
  ``dxi^d sum_xi |f~|^2 = dv^d sum_v |f|^2``.
* Free transport for time ``t`` is the exact unitary multiplier
  ``exp(-i t k.v)`` in the ``KV`` representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    RangeError,
    UnsupportedDimensionError,
)

__all__ = [
    "CONVENTION_VERSION",
    "SpectralGrid",
    "PhaseField",
    "DyadicLevel",
    "NormSpec",
    "Trajectory",
    "make_grid",
    "make_field",
    "transform",
    "propagate",
    "lp_project",
    "scale_xi",
    "norm",
    "l2_norm",
    "chi_profile",
    "annulus_profile",
    "dyadic_levels",
    "from_double_fourier",
    "to_double_fourier",
]

#: Version tag stamped into every report; bump on any convention change.
CONVENTION_VERSION = "boltzkit-conventions-1"

REPRS = ("XV", "XXI", "KV")

_SQRT2PI = math.sqrt(2.0 * math.pi)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _is_pow2(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralGrid:
    """Tensor discretization of the phase space torus x velocity box.

    Parameters
    ----------
    d : int
        Dimension, one of 1, 2, 3.
    nx, nv : int
        Points per spatial / velocity axis; powers of two, at least 4.
    v_max : float
        Velocity box half-width; the box is ``[-v_max, v_max)^d``.
    domain_kind : str
        ``"torus_box"`` (default) or ``"box_box"``.  The latter relabels the
        spatial coordinate as a periodic box; the discrete operators are
        identical.
    """

    d: int
    nx: int
    nv: int
    v_max: float
    domain_kind: str = "torus_box"

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise UnsupportedDimensionError(
                f"dimension must be 1, 2, or 3, got {self.d}"
            )
        for name, n in (("nx", self.nx), ("nv", self.nv)):
            if not _is_pow2(n) or n < 4:
                raise ConfigurationError(
                    f"{name} must be a power of two >= 4, got {n}"
                )
        if not (float(self.v_max) > 0.0):
            raise ConfigurationError(f"v_max must be positive, got {self.v_max}")
        if self.domain_kind not in ("torus_box", "box_box"):
            raise ConfigurationError(
                f"domain_kind must be 'torus_box' or 'box_box', got {self.domain_kind!r}"
            )
        object.__setattr__(self, "v_max", float(self.v_max))

    # -- spacings -----------------------------------------------------------
    @property
    def dv(self) -> float:
        return 2.0 * self.v_max / self.nv

    @property
    def dxi(self) -> float:
        return math.pi / self.v_max

    @property
    def dx(self) -> float:
        return 2.0 * math.pi / self.nx

    @property
    def xi_max(self) -> float:
        """Largest representable velocity-frequency magnitude per axis."""
        return (self.nv // 2) * self.dxi

    # -- axes ---------------------------------------------------------------
    @property
    def v_axis(self) -> np.ndarray:
        return (np.arange(self.nv) - self.nv // 2) * self.dv

    @property
    def xi_axis(self) -> np.ndarray:
        return (np.arange(self.nv) - self.nv // 2) * self.dxi

    @property
    def x_axis(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @property
    def k_axis(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2).astype(float)

    # -- shapes and axis groups --------------------------------------------
    @property
    def field_shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.d + (self.nv,) * self.d

    @property
    def x_axes(self) -> tuple[int, ...]:
        return tuple(range(self.d))

    @property
    def v_axes(self) -> tuple[int, ...]:
        return tuple(range(self.d, 2 * self.d))

    def radial(self, axis_values: np.ndarray) -> np.ndarray:
        """Euclidean radius array over ``d`` copies of ``axis_values``."""
        sq = axis_values**2
        acc = sq
        for _ in range(self.d - 1):
            acc = acc[..., None] + sq
        return np.sqrt(acc)

    def cache_key(self) -> tuple:
        return (self.d, self.nx, self.nv, repr(self.v_max), self.domain_kind)


def make_grid(
    d: int, nx: int, nv: int, v_max: float, domain_kind: str = "torus_box"
) -> SpectralGrid:
    """Validate sizes and build a :class:`SpectralGrid`."""
    return SpectralGrid(d=d, nx=nx, nv=nv, v_max=v_max, domain_kind=domain_kind)


# ---------------------------------------------------------------------------
# Field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseField:
    """Immutable complex field on a :class:`SpectralGrid` in one representation."""

    grid: SpectralGrid
    rep: str
    data: np.ndarray

    def __post_init__(self):
        if self.rep not in REPRS:
            raise ConfigurationError(
                f"representation must be one of {REPRS}, got {self.rep!r}"
            )
        arr = np.asarray(self.data)
        if arr.shape != self.grid.field_shape:
            raise ConfigurationError(
                f"field shape {arr.shape} does not match grid shape "
                f"{self.grid.field_shape}"
            )
        arr = np.ascontiguousarray(arr, dtype=np.complex128)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def with_data(self, data: np.ndarray) -> "PhaseField":
        return PhaseField(self.grid, self.rep, data)

    def copy_data(self) -> np.ndarray:
        return np.array(self.data, dtype=np.complex128)


def make_field(grid: SpectralGrid, rep: str, data: np.ndarray) -> PhaseField:
    return PhaseField(grid, rep, data)


def zeros_field(grid: SpectralGrid, rep: str) -> PhaseField:
    return PhaseField(grid, rep, np.zeros(grid.field_shape, dtype=np.complex128))


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def _alt_signs(n: int) -> np.ndarray:
    s = np.ones(n)
    s[1::2] = -1.0
    return s


def _axis_shape(ndim: int, axis: int, n: int) -> tuple[int, ...]:
    shape = [1] * ndim
    shape[axis] = n
    return tuple(shape)


def _v_to_xi(data: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """Centered unitary DFT v -> xi over the velocity axes."""
    n = grid.nv
    s = _alt_signs(n)
    c = grid.dv / _SQRT2PI
    out = data
    for ax in grid.v_axes:
        sh = _axis_shape(out.ndim, ax, n)
        out = np.fft.fft(out * s.reshape(sh), axis=ax)
        out = out * (c * s).reshape(sh)
    return out


def _xi_to_v(data: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """Inverse of :func:`_v_to_xi`."""
    n = grid.nv
    s = _alt_signs(n)
    c = grid.dxi * n / _SQRT2PI
    out = data
    for ax in grid.v_axes:
        sh = _axis_shape(out.ndim, ax, n)
        out = np.fft.ifft(out * s.reshape(sh), axis=ax)
        out = out * (c * s).reshape(sh)
    return out


def _x_to_k(data: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """Unitary DFT x -> k over the spatial axes, k stored centered."""
    c = grid.dx / _SQRT2PI
    out = data
    for ax in grid.x_axes:
        out = np.fft.fftshift(np.fft.fft(out, axis=ax), axes=ax) * c
    return out


def _k_to_x(data: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    c = _SQRT2PI / grid.dx
    out = data
    for ax in grid.x_axes:
        out = np.fft.ifft(np.fft.ifftshift(out * c, axes=ax), axis=ax)
    return out


def transform(fld: PhaseField, target: str) -> PhaseField:
    """Convert a field to another representation (exact unitary transforms)."""
    if target not in REPRS:
        raise ConfigurationError(f"unknown representation {target!r}")
    src = fld.rep
    if src == target:
        return fld
    g = fld.grid
    data = fld.data
    if src == "XV" and target == "XXI":
        out = _v_to_xi(data, g)
    elif src == "XXI" and target == "XV":
        out = _xi_to_v(data, g)
    elif src == "XV" and target == "KV":
        out = _x_to_k(data, g)
    elif src == "KV" and target == "XV":
        out = _k_to_x(data, g)
    elif src == "XXI" and target == "KV":
        out = _x_to_k(_xi_to_v(data, g), g)
    elif src == "KV" and target == "XXI":
        out = _v_to_xi(_k_to_x(data, g), g)
    else:  # pragma: no cover - exhaustive above
        raise ConfigurationError(f"no transform path {src} -> {target}")
    return PhaseField(g, target, out)


def to_double_fourier(fld: PhaseField) -> np.ndarray:
    """Coefficients in the internal (k, xi) double-Fourier representation."""
    g = fld.grid
    kv = transform(fld, "KV")
    return _v_to_xi(kv.data, g)


def from_double_fourier(
    grid: SpectralGrid, coeffs: np.ndarray, rep: str = "XXI"
) -> PhaseField:
    """Build a field from (k, xi) double-Fourier coefficients."""
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.shape != grid.field_shape:
        raise ConfigurationError(
            f"coefficient shape {coeffs.shape} does not match {grid.field_shape}"
        )
    kv = PhaseField(grid, "KV", _xi_to_v(coeffs, grid))
    return transform(kv, rep)


# ---------------------------------------------------------------------------
# Free transport
# ---------------------------------------------------------------------------


def propagate(fld: PhaseField, t: float) -> PhaseField:
    """Apply the free-transport group for time ``t``.

    Exact unitary multiplier ``exp(-i t k.v)`` in the ``KV`` representation;
    any real ``t`` is allowed and the group law holds to rounding.
    """
    t = float(t)
    g = fld.grid
    kv = transform(fld, "KV")
    out = kv.copy_data()
    k = g.k_axis
    v = g.v_axis
    for a in range(g.d):
        phase = np.exp(-1j * t * np.outer(k, v))
        sh = [1] * (2 * g.d)
        sh[a] = g.nx
        sh[g.d + a] = g.nv
        out *= phase.reshape(sh)
    res = PhaseField(g, "KV", out)
    return transform(res, fld.rep)


# ---------------------------------------------------------------------------
# Dyadic projectors
# ---------------------------------------------------------------------------


def _bump(t: np.ndarray) -> np.ndarray:
    """exp(-1/t) for t > 0, else 0 (smooth at 0)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def chi_profile(rho) -> np.ndarray:
    """Radial cutoff: 1 on ``rho <= 1``, 0 on ``rho >= 2``, smooth between.

    ``chi(rho) = psi(2 - rho) / (psi(2 - rho) + psi(rho - 1))`` with
    ``psi(t) = exp(-1/t)`` for positive ``t`` and 0 otherwise.
    """
    rho = np.abs(np.asarray(rho, dtype=float))
    scalar = rho.ndim == 0
    rho = np.atleast_1d(rho)
    a = _bump(2.0 - rho)
    b = _bump(rho - 1.0)
    out = np.zeros_like(rho)
    out[rho <= 1.0] = 1.0
    mid = (rho > 1.0) & (rho < 2.0)
    out[mid] = a[mid] / (a[mid] + b[mid])
    res = out if not scalar else out[0]
    return res


def annulus_profile(rho, level: float) -> np.ndarray:
    """Dyadic annulus bump ``chi(rho/N) - chi(2 rho/N)``, supported on
    ``N/2 <= rho <= 2N``."""
    rho = np.asarray(rho, dtype=float)
    return chi_profile(rho / level) - chi_profile(2.0 * rho / level)


@dataclass(frozen=True)
class DyadicLevel:
    """A dyadic frequency level: an integer power of two >= 1."""

    value: int

    def __post_init__(self):
        if not _is_pow2(self.value):
            raise ConfigurationError(
                f"dyadic level must be a power of two >= 1, got {self.value}"
            )
        object.__setattr__(self, "value", int(self.value))


def dyadic_levels(max_value: float) -> list[int]:
    """All dyadic levels 1, 2, 4, ... not exceeding ``max_value``."""
    out = []
    n = 1
    while n <= max_value:
        out.append(n)
        n *= 2
    return out


def _level_value(level) -> int:
    if isinstance(level, DyadicLevel):
        return level.value
    return DyadicLevel(int(level)).value


def lp_project(
    fld: PhaseField,
    axis: str,
    level,
    mode: str = "annulus",
    profile: str = "smooth",
) -> PhaseField:
    """Project onto a dyadic frequency ball or annulus.

    Parameters
    ----------
    axis : str
        ``"x"`` — multiplier in the spatial wavenumber ``k``;
        ``"xi"`` — multiplier in the velocity-frequency variable ``xi``.
    level : int or DyadicLevel
        Dyadic level ``N``.
    mode : str
        ``"ball"`` (frequencies up to ``N``) or ``"annulus"`` (around ``N``).
    profile : str
        ``"smooth"`` — the partition profiles ``chi`` / ``chi(./N)-chi(2./N)``;
        ``"sharp"`` — indicator of ``|.| <= N`` resp. ``N <= |.| < 2N``.
    """
    N = _level_value(level)
    if mode not in ("ball", "annulus"):
        raise ConfigurationError(f"mode must be 'ball' or 'annulus', got {mode!r}")
    if profile not in ("smooth", "sharp"):
        raise ConfigurationError(
            f"profile must be 'smooth' or 'sharp', got {profile!r}"
        )
    g = fld.grid
    if axis == "x":
        if N > g.nx // 2:
            raise RangeError(
                f"dyadic level {N} exceeds the spatial Nyquist range {g.nx // 2}"
            )
        work = transform(fld, "KV")
        rho = g.radial(g.k_axis)
        lead = True
    elif axis == "xi":
        if N > g.xi_max:
            raise RangeError(
                f"dyadic level {N} exceeds the max velocity-frequency {g.xi_max}"
            )
        work = transform(fld, "XXI")
        rho = g.radial(g.xi_axis)
        lead = False
    else:
        raise ConfigurationError(f"axis must be 'x' or 'xi', got {axis!r}")

    if profile == "smooth":
        if mode == "ball":
            mult = chi_profile(rho / N)
        else:
            mult = annulus_profile(rho, N)
    else:
        if mode == "ball":
            mult = (rho <= N).astype(float)
        else:
            mult = ((rho >= N) & (rho < 2 * N)).astype(float)

    sh = (
        mult.shape + (1,) * g.d
        if lead
        else (1,) * g.d + mult.shape
    )
    out = work.data * mult.reshape(sh)
    return transform(PhaseField(g, work.rep, out), fld.rep)


# ---------------------------------------------------------------------------
# Frequency scaling
# ---------------------------------------------------------------------------


def scale_xi(fld: PhaseField, a: float) -> PhaseField:
    """Dilate the velocity-frequency variable: ``g~(xi) = f~(a xi)``.

    The value at ``a*xi_m`` is taken from the trigonometric interpolant
    defined by the field's velocity content when ``a*xi_m`` lies inside the
    representable window ``[-xi_max, xi_max)``, and is 0 outside it (the
    dilated spectrum of compactly supported content vanishes there; the
    periodic interpolant would instead alias).  For ``a > 1`` content that
    the dilation would push out of the window is information lost, so
    significant content outside ``|xi| <= xi_max / a`` raises a
    :class:`RangeError`.
    """
    a = float(a)
    if not a > 0:
        raise ConfigurationError(f"scaling factor must be positive, got {a}")
    g = fld.grid
    work = transform(fld, "XXI")
    data = work.data

    if a > 1.0:
        limit = g.xi_max / a + 0.5 * g.dxi
        outside = np.abs(g.xi_axis) > limit
        ref = np.max(np.abs(data)) if data.size else 0.0
        if ref > 0:
            for ax_i, ax in enumerate(g.v_axes):
                idx = [slice(None)] * data.ndim
                idx[ax] = outside
                tail = np.max(np.abs(data[tuple(idx)])) if outside.any() else 0.0
                if tail > 1e-13 * ref:
                    raise RangeError(
                        f"scale_xi({a}): support escapes the representable "
                        f"frequency window on velocity axis {ax_i} "
                        f"(relative tail {tail / ref:.2e})"
                    )

    # Evaluate the interpolant at a*xi: per velocity axis, the matrix
    # G[m, j] = (dv / sqrt(2 pi)) exp(-i v_j * (a xi_m)) applied to the
    # velocity content; rows whose evaluation point leaves the representable
    # window produce 0 (truncation, not periodic wrap).
    content = _xi_to_v(data, g)
    target = a * g.xi_axis
    G = (g.dv / _SQRT2PI) * np.exp(-1j * np.outer(target, g.v_axis))
    G[(target < -g.xi_max) | (target >= g.xi_max), :] = 0.0
    out = content
    for ax in g.v_axes:
        out = np.moveaxis(np.tensordot(G, out, axes=([1], [ax])), 0, ax)
    return transform(PhaseField(g, "XXI", out), fld.rep)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormSpec:
    """Declares which norm to measure.

    kind:
      * ``"Sobolev-HsHr"``  — ``H^s_x H^r_xi`` via multipliers ``<k>^s <v>^r``;
      * ``"weighted-L2r"``  — ``<v>^r``-weighted ``L^2`` in physical variables;
      * ``"Lp-spacetime"``  — ``L^p`` over ``[0,T] x x x xi`` on a trajectory.
    """

    kind: str
    p: float = 2.0
    s: float = 0.0
    r: float = 0.0
    T: float | None = None
    time_samples: int = 65

    def __post_init__(self):
        if self.kind not in ("Lp-spacetime", "Sobolev-HsHr", "weighted-L2r"):
            raise ConfigurationError(f"unknown norm kind {self.kind!r}")
        if not self.p >= 1.0:
            raise ConfigurationError(
                f"integrability exponent p must be >= 1, got {self.p}"
            )
        if self.time_samples < 2:
            raise ConfigurationError(
                f"time_samples must be >= 2, got {self.time_samples}"
            )


@dataclass(frozen=True)
class Trajectory:
    """Time samples of a field, all on one grid and representation."""

    grid: SpectralGrid
    times: tuple
    fields: tuple

    def __post_init__(self):
        if len(self.times) != len(self.fields):
            raise ConfigurationError("times and fields must have equal length")
        if len(self.times) < 1:
            raise ConfigurationError("trajectory must contain at least one sample")
        t = np.asarray(self.times, dtype=float)
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ConfigurationError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", tuple(float(x) for x in self.times))
        object.__setattr__(self, "fields", tuple(self.fields))
        for f in self.fields:
            if f.grid is not self.grid and f.grid != self.grid:
                raise ConfigurationError("all trajectory fields must share the grid")


def _cell_measure(fld: PhaseField) -> float:
    g = fld.grid
    if fld.rep == "XV":
        return (g.dx * g.dv) ** g.d
    if fld.rep == "XXI":
        return (g.dx * g.dxi) ** g.d
    # KV: counting measure in k, cells in v
    return g.dv**g.d


def l2_norm(fld: PhaseField) -> float:
    """The ``L^2`` norm with the representation's exact Parseval measure."""
    return math.sqrt(_cell_measure(fld) * float(np.sum(np.abs(fld.data) ** 2)))


def _sobolev_weights(g: SpectralGrid, s: float, r: float) -> np.ndarray:
    wk = g.radial(g.k_axis)
    wv = g.radial(g.v_axis)
    wk = (1.0 + wk**2) ** (s / 2.0)
    wv = (1.0 + wv**2) ** (r / 2.0)
    return wk.reshape(wk.shape + (1,) * g.d) * wv.reshape((1,) * g.d + wv.shape)


def norm(obj, spec: NormSpec) -> float:
    """Evaluate a :class:`NormSpec` on a field or trajectory."""
    if spec.kind == "Sobolev-HsHr":
        fld = obj
        g = fld.grid
        kv = transform(fld, "KV")
        w = _sobolev_weights(g, spec.s, spec.r)
        return math.sqrt(
            g.dv**g.d * float(np.sum((w * np.abs(kv.data)) ** 2))
        )
    if spec.kind == "weighted-L2r":
        fld = obj
        g = fld.grid
        xv = transform(fld, "XV")
        wv = (1.0 + g.radial(g.v_axis) ** 2) ** (spec.r / 2.0)
        w = wv.reshape((1,) * g.d + wv.shape)
        return math.sqrt(
            (g.dx * g.dv) ** g.d * float(np.sum((w * np.abs(xv.data)) ** 2))
        )
    # Lp-spacetime on a trajectory
    if isinstance(obj, Trajectory):
        times = np.asarray(obj.times, dtype=float)
        fields: Sequence[PhaseField] = obj.fields
    else:
        pairs = list(obj)
        times = np.asarray([p[0] for p in pairs], dtype=float)
        fields = [p[1] for p in pairs]
    if times.size < 2:
        raise ConfigurationError(
            "Lp-spacetime norm needs a trajectory with at least two time samples"
        )
    p = spec.p
    gs = []
    for f in fields:
        xxi = transform(f, "XXI")
        cell = (xxi.grid.dx * xxi.grid.dxi) ** xxi.grid.d
        gs.append(cell * float(np.sum(np.abs(xxi.data) ** p)))
    integral = float(_trapezoid(np.asarray(gs), times))
    return integral ** (1.0 / p)
