"""Truncated Fourier fields on the d-torus and the weighted-norm toolbox.

Conventions
-----------
Coefficients store ``u_hat(xi) = (2 pi)^{-d} * integral e^{-i x.xi} u(x) dx``
so that inversion is the plain sum ``u(x) = sum_xi u_hat(xi) e^{i x.xi}``
(``cos(x)`` has coefficients 1/2 at xi = +-1).  Weighted norms are taken over
the stored coefficients directly.

Modes are retained on the band ``|xi_j| <= M`` and stored in FFT order
``[0..M, -M..-1]`` along each axis.  Quadratic products are dealiased by
zero padding onto a physical grid with at least ``3M + 1`` points per axis,
which makes them exact on the retained band; nothing is claimed about the
discarded modes.

All fields are immutable values; every function here is pure.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy.fft import next_fast_len

from .errors import NormOverflow

_TWO_PI = 2.0 * np.pi


def _is_five_smooth(n: int) -> bool:
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


@dataclass(frozen=True)
class Lattice:
    """Mode truncation and physical constants of the periodic domain.

    d : dimension (1 or 2)
    M : max retained wavenumber per axis, |xi_j| <= M
    h : still-water depth (> 0)
    g : gravity (> 0)
    """

    d: int
    M: int
    h: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if self.M < 4:
            raise ValueError(f"M must be >= 4, got {self.M}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")

    @cached_property
    def n_modes(self) -> int:
        return 2 * self.M + 1

    @cached_property
    def mode_shape(self) -> tuple:
        return (self.n_modes,) * self.d

    @cached_property
    def n_grid(self) -> int:
        # >= 3M+1 points per axis: quadratic products are alias-free on the band;
        # even 5-smooth lengths keep the FFTs on fast radices
        n = 3 * self.M + 1
        while True:
            n = int(next_fast_len(n))
            if n % 2 == 0 and _is_five_smooth(n):
                return n
            n += 1

    @cached_property
    def k1d(self) -> np.ndarray:
        return np.concatenate([np.arange(0, self.M + 1), np.arange(-self.M, 0)])

    @cached_property
    def k_axes(self) -> tuple:
        """Wavenumber arrays broadcastable over the mode shape, one per axis."""
        out = []
        for a in range(self.d):
            shape = [1] * self.d
            shape[a] = self.n_modes
            out.append(self.k1d.reshape(shape))
        return tuple(out)

    @cached_property
    def abs_k(self) -> np.ndarray:
        return np.sqrt(sum((k.astype(float)) ** 2 for k in self.k_axes))

    @cached_property
    def ksq(self) -> np.ndarray:
        return sum((k.astype(float)) ** 2 for k in self.k_axes)

    @cached_property
    def bracket_k(self) -> np.ndarray:
        """The Japanese bracket <xi> = (1 + |xi|^2)^(1/2)."""
        return np.sqrt(1.0 + self.ksq)

    @cached_property
    def x1d(self) -> np.ndarray:
        return _TWO_PI * np.arange(self.n_grid) / self.n_grid

    @cached_property
    def grid(self) -> tuple:
        """Physical coordinates, meshgrid'ed for d=2."""
        if self.d == 1:
            return (self.x1d,)
        return tuple(np.meshgrid(self.x1d, self.x1d, indexing="ij"))

    @cached_property
    def cell_volume(self) -> float:
        return (_TWO_PI / self.n_grid) ** self.d

    @cached_property
    def zero_index(self) -> tuple:
        return (0,) * self.d


@dataclass(frozen=True)
class AnalyticIndex:
    """Index (sigma, s) of the exponentially weighted Sobolev norm."""

    sigma: float
    s: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SpectralField:
    """Truncated Fourier coefficients of a function on the torus."""

    lattice: Lattice
    coeffs: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        if self.coeffs.shape != self.lattice.mode_shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match lattice "
                f"{self.lattice.mode_shape}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite spectral coefficients")
        self.coeffs.flags.writeable = False

    def _new(self, coeffs, hermitian=None):
        return SpectralField(
            self.lattice,
            np.ascontiguousarray(coeffs, dtype=complex),
            self.hermitian if hermitian is None else hermitian,
        )

    def __add__(self, other):
        _check_same_lattice(self, other)
        return self._new(self.coeffs + other.coeffs, self.hermitian and other.hermitian)

    def __sub__(self, other):
        _check_same_lattice(self, other)
        return self._new(self.coeffs - other.coeffs, self.hermitian and other.hermitian)

    def __mul__(self, scalar):
        s = complex(scalar)
        return self._new(self.coeffs * s, self.hermitian and s.imag == 0.0)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.coeffs)

    @property
    def mean(self) -> complex:
        """Zero-mode coefficient: the average value over the torus."""
        return complex(self.coeffs[self.lattice.zero_index])


def _check_same_lattice(u, v):
    if u.lattice is not v.lattice and u.lattice != v.lattice:
        raise ValueError("lattice mismatch")


def conj_reversed(c: np.ndarray, d: int) -> np.ndarray:
    """conj(c(-xi)) laid out on the same FFT-ordered storage."""
    out = np.conj(c)
    for a in range(c.ndim - d, c.ndim):
        out = np.roll(np.flip(out, axis=a), 1, axis=a)
    return out


def is_hermitian(c: np.ndarray, d: int, tol: float = 0.0) -> bool:
    r = conj_reversed(c, d)
    if tol == 0.0:
        return bool(np.array_equal(c, r))
    scale = np.max(np.abs(c)) or 1.0
    return bool(np.max(np.abs(c - r)) <= tol * scale)


def hermitize(c: np.ndarray, d: int) -> np.ndarray:
    """Project onto the conjugate-symmetric part (real physical values)."""
    return 0.5 * (c + conj_reversed(c, d))


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _fft_axes(d: int) -> tuple:
    return tuple(range(-d, 0))


_embed_local = threading.local()


def embed_coeffs(lattice: Lattice, c: np.ndarray) -> np.ndarray:
    """Zero-pad truncated coefficients into full FFT arrays (last d axes).

    The pad buffer is reused per shape and thread (only band slices are
    rewritten; the padding stays zero), so callers must not hold on to the
    result across calls -- the transform wrappers below consume it
    immediately."""
    M, N, d = lattice.M, lattice.n_grid, lattice.d
    buffers = getattr(_embed_local, "buffers", None)
    if buffers is None:
        buffers = _embed_local.buffers = {}
    key = (lattice.d, lattice.M, N, c.shape[:-d])
    out = buffers.get(key)
    if out is None or out.shape != c.shape[:-d] + (N,) * d:
        out = np.zeros(c.shape[:-d] + (N,) * d, dtype=complex)
        buffers[key] = out
    if d == 1:
        out[..., : M + 1] = c[..., : M + 1]
        out[..., N - M:] = c[..., M + 1:]
    else:
        lo, hi = slice(0, M + 1), slice(N - M, N)
        clo, chi = slice(0, M + 1), slice(M + 1, 2 * M + 1)
        out[..., lo, lo] = c[..., clo, clo]
        out[..., lo, hi] = c[..., clo, chi]
        out[..., hi, lo] = c[..., chi, clo]
        out[..., hi, hi] = c[..., chi, chi]
    return out


def truncate_coeffs(lattice: Lattice, full: np.ndarray) -> np.ndarray:
    """Restrict full FFT arrays to the retained band (last d axes)."""
    M, N, d = lattice.M, lattice.n_grid, lattice.d
    out = np.empty(full.shape[:-d] + lattice.mode_shape, dtype=complex)
    if d == 1:
        out[..., : M + 1] = full[..., : M + 1]
        out[..., M + 1:] = full[..., N - M:]
    else:
        lo, hi = slice(0, M + 1), slice(N - M, N)
        clo, chi = slice(0, M + 1), slice(M + 1, 2 * M + 1)
        out[..., clo, clo] = full[..., lo, lo]
        out[..., clo, chi] = full[..., lo, hi]
        out[..., chi, clo] = full[..., hi, lo]
        out[..., chi, chi] = full[..., hi, hi]
    return out


def coeffs_to_grid(lattice: Lattice, c: np.ndarray) -> np.ndarray:
    """Evaluate u(x) = sum u_hat e^{i x.xi} on the dealiased grid (batched)."""
    scale = float(lattice.n_grid) ** lattice.d
    out = sfft.ifftn(embed_coeffs(lattice, c), axes=_fft_axes(lattice.d), workers=1)
    out *= scale
    return out


def grid_to_coeffs(lattice: Lattice, values: np.ndarray) -> np.ndarray:
    """Truncated coefficients of grid samples (batched over leading axes)."""
    scale = float(lattice.n_grid) ** lattice.d
    full = sfft.fftn(np.asarray(values, dtype=complex), axes=_fft_axes(lattice.d),
                     workers=1)
    full /= scale
    return truncate_coeffs(lattice, full)


def forward_transform(samples: np.ndarray, lattice: Lattice) -> SpectralField:
    samples = np.asarray(samples)
    if samples.shape != (lattice.n_grid,) * lattice.d:
        raise ValueError(
            f"sample shape {samples.shape} does not match the physical grid "
            f"{(lattice.n_grid,) * lattice.d}"
        )
    herm = bool(np.isrealobj(samples))
    return SpectralField(lattice, grid_to_coeffs(lattice, samples), hermitian=herm)


def inverse_transform(u: SpectralField) -> np.ndarray:
    vals = coeffs_to_grid(u.lattice, u.coeffs)
    return vals.real if u.hermitian else vals


def zero_field(lattice: Lattice) -> SpectralField:
    return SpectralField(lattice, np.zeros(lattice.mode_shape, dtype=complex), hermitian=True)


def from_modes(lattice: Lattice, modes: dict, hermitian_completion: bool = True) -> SpectralField:
    """Build a field from {xi: amplitude}; by default each mode's conjugate
    mirror is added so physical values come out real (cos(kx) = {k: 0.5})."""
    c = np.zeros(lattice.mode_shape, dtype=complex)
    n = lattice.n_modes
    for xi, amp in modes.items():
        kvec = [int(k) for k in np.atleast_1d(xi)]
        idx = tuple(k % n for k in kvec)
        c[idx] += amp
        if hermitian_completion:
            mirror = tuple((-k) % n for k in kvec)
            if mirror != idx:
                c[mirror] += np.conj(amp)
    return SpectralField(lattice, c, hermitian=is_hermitian(c, lattice.d))


# ---------------------------------------------------------------------------
# multipliers and derivatives
# ---------------------------------------------------------------------------

def symbol_on(lattice: Lattice, fn: Callable) -> np.ndarray:
    """Tabulate a symbol xi -> m(xi); fn receives the d wavenumber arrays."""
    return np.broadcast_to(np.asarray(fn(*lattice.k_axes), dtype=complex),
                           lattice.mode_shape).copy()


def symbol_is_hermitian(lattice: Lattice, m: np.ndarray) -> bool:
    return is_hermitian(np.asarray(m, dtype=complex), lattice.d, tol=1e-15)


def apply_multiplier(m: np.ndarray, u: SpectralField) -> SpectralField:
    """Coefficient-wise action of a Fourier multiplier m(xi)."""
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("multiplier symbol is not finite on the retained band")
    herm = u.hermitian and symbol_is_hermitian(u.lattice, m)
    return SpectralField(u.lattice, np.ascontiguousarray(m * u.coeffs), hermitian=herm)


def dn_symbol(lattice: Lattice) -> np.ndarray:
    """Flat-surface normal-derivative symbol |xi| tanh(h |xi|); 0 at xi = 0."""
    return lattice.abs_k * np.tanh(lattice.h * lattice.abs_k)


def grad(u: SpectralField) -> tuple:
    return tuple(apply_multiplier(1j * k, u) for k in u.lattice.k_axes)


def laplacian(u: SpectralField) -> SpectralField:
    return apply_multiplier(-u.lattice.ksq, u)


def divergence(v: tuple) -> SpectralField:
    lat = v[0].lattice
    acc = np.zeros(lat.mode_shape, dtype=complex)
    for a, comp in enumerate(v):
        acc = acc + 1j * lat.k_axes[a] * comp.coeffs
    return SpectralField(lat, acc, hermitian=all(c.hermitian for c in v))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

_LOG_DOMAIN_THRESHOLD = 500.0
_LOG_MAX_DOUBLE = math.log(np.finfo(float).max)


def analytic_norm(u: SpectralField, idx) -> float:
    """Weighted l2 norm (sum e^{2 sigma |xi|} <xi>^{2s} |u_hat|^2)^(1/2).

    Computed in the log domain once sigma * max|xi| > 500 so the weight table
    cannot overflow; only a non-representable result raises.
    """
    if isinstance(idx, AnalyticIndex):
        sigma, s = idx.sigma, idx.s
    else:
        sigma, s = idx
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    lat = u.lattice
    amp = np.abs(u.coeffs)
    a2 = amp ** 2
    if sigma * float(np.max(lat.abs_k)) > _LOG_DOMAIN_THRESHOLD:
        mask = amp > 0.0
        if not mask.any():
            return 0.0
        logt = (2.0 * sigma) * lat.abs_k[mask] + (2.0 * s) * np.log(lat.bracket_k[mask]) \
            + 2.0 * np.log(amp[mask])
        top = float(np.max(logt))
        half_log = 0.5 * (top + math.log(float(np.sum(np.exp(logt - top)))))
        if half_log > _LOG_MAX_DOUBLE:
            raise NormOverflow(
                f"analytic norm overflows double range (sigma={sigma}, s={s})"
            )
        return math.exp(half_log)
    w = np.exp((2.0 * sigma) * lat.abs_k) * lat.bracket_k ** (2.0 * s)
    total = float(np.sum(w * a2))
    if not math.isfinite(total):
        raise NormOverflow(f"analytic norm overflows double range (sigma={sigma}, s={s})")
    return math.sqrt(total)


def hs_norm(u: SpectralField, s: float) -> float:
    return analytic_norm(u, (0.0, s))


def l2_coeff_norm(u: SpectralField) -> float:
    return float(np.linalg.norm(u.coeffs))


# ---------------------------------------------------------------------------
# dealiased products
# ---------------------------------------------------------------------------

def product(u: SpectralField, v: SpectralField) -> SpectralField:
    """Pointwise product, dealiased by zero padding (exact on the band)."""
    _check_same_lattice(u, v)
    lat = u.lattice
    vals = coeffs_to_grid(lat, u.coeffs) * coeffs_to_grid(lat, v.coeffs)
    return SpectralField(lat, grid_to_coeffs(lat, vals),
                         hermitian=u.hermitian and v.hermitian)


# ---------------------------------------------------------------------------
# mollifiers and Littlewood-Paley blocks
# ---------------------------------------------------------------------------

def bump(y) -> np.ndarray:
    """Radial cutoff: 1 on |y|<=1, smooth decay on 1<|y|<2, 0 beyond."""
    y = np.abs(np.asarray(y, dtype=float))
    out = np.zeros_like(y)
    out[y <= 1.0] = 1.0
    mid = (y > 1.0) & (y < 2.0)
    if np.any(mid):
        r = y[mid] - 1.0
        with np.errstate(divide="ignore", over="ignore"):
            out[mid] = np.exp(1.0 - 1.0 / (1.0 - r * r))
    return out


@dataclass(frozen=True)
class MollifierSpec:
    """Frequency cutoff at scale n with a fixed bump profile."""

    n: int
    profile: Callable = field(default=bump, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"mollifier scale must be a positive integer, got {self.n}")

    def weights(self, lattice: Lattice) -> np.ndarray:
        return self.profile(lattice.abs_k / float(self.n))


def mollify(u: SpectralField, spec: MollifierSpec) -> SpectralField:
    w = spec.weights(u.lattice)
    return SpectralField(u.lattice, np.ascontiguousarray(w * u.coeffs), hermitian=u.hermitian)


def lp_top(lattice: Lattice) -> int:
    """Largest block index needed so the dyadic partition sums to 1 on the band."""
    maxk = float(np.max(lattice.abs_k))
    return max(0, int(math.ceil(math.log2(maxk))))


def lp_weight(lattice: Lattice, j: int) -> np.ndarray:
    """Dyadic annulus weight: block -1 holds |xi| <= 1, block j the shell
    (2^(j-1), 2^(j+1)); built from the same bump as the mollifier."""
    if j < -1:
        raise ValueError("block index must be >= -1")
    absk = lattice.abs_k
    if j == -1:
        return bump(2.0 * absk)
    return bump(absk / 2.0 ** j) - bump(absk / 2.0 ** (j - 1))


def lp_block(u: SpectralField, j: int) -> SpectralField:
    return SpectralField(u.lattice, np.ascontiguousarray(lp_weight(u.lattice, j) * u.coeffs),
                         hermitian=u.hermitian)


def _low_pass_weight(lattice: Lattice, j: int) -> np.ndarray:
    """S_j = sum of blocks up to j-1; telescopes to a single bump evaluation."""
    if j <= -1:
        return np.zeros(lattice.mode_shape)
    return bump(lattice.abs_k / 2.0 ** (j - 1))


def paraproduct(a: SpectralField, u: SpectralField) -> SpectralField:
    """Low-high product T_a u = sum_{j>=2} S_{j-2}(a) Delta_j u (dealiased)."""
    _check_same_lattice(a, u)
    lat = a.lattice
    acc = np.zeros((lat.n_grid,) * lat.d, dtype=complex)
    for j in range(2, lp_top(lat) + 1):
        sa = _low_pass_weight(lat, j - 2) * a.coeffs
        du = lp_weight(lat, j) * u.coeffs
        if not np.any(du):
            continue
        acc += coeffs_to_grid(lat, sa) * coeffs_to_grid(lat, du)
    return SpectralField(lat, grid_to_coeffs(lat, acc),
                         hermitian=a.hermitian and u.hermitian)


def bony_remainder(a: SpectralField, u: SpectralField) -> SpectralField:
    """Diagonal part R(a,u) = sum_{|r-q|<=2} Delta_r a Delta_q u (dealiased)."""
    _check_same_lattice(a, u)
    lat = a.lattice
    top = lp_top(lat)
    grids_a = [coeffs_to_grid(lat, lp_weight(lat, j) * a.coeffs) for j in range(-1, top + 1)]
    grids_u = [coeffs_to_grid(lat, lp_weight(lat, j) * u.coeffs) for j in range(-1, top + 1)]
    acc = np.zeros((lat.n_grid,) * lat.d, dtype=complex)
    for qi in range(len(grids_u)):
        for ri in range(max(0, qi - 2), min(len(grids_a), qi + 3)):
            acc += grids_a[ri] * grids_u[qi]
    return SpectralField(lat, grid_to_coeffs(lat, acc),
                         hermitian=a.hermitian and u.hermitian)


def commutator_multiplier(bsym: np.ndarray, a: SpectralField, u: SpectralField) -> SpectralField:
    """[b(D), a] u = b(D)(a u) - a (b(D) u), with dealiased products."""
    return apply_multiplier(bsym, product(a, u)) - product(a, apply_multiplier(bsym, u))


# ---------------------------------------------------------------------------
# holomorphic extension
# ---------------------------------------------------------------------------

def holo_extend_eval(u: SpectralField, y) -> SpectralField:
    """Trace at imaginary offset y: coefficients e^{-y.xi} u_hat(xi)."""
    lat = u.lattice
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (lat.d,):
        raise ValueError(f"offset must have {lat.d} component(s)")
    max_exp = float(sum(abs(y[a]) * lat.M for a in range(lat.d)))
    if max_exp > _LOG_MAX_DOUBLE:
        raise NormOverflow(f"e^(-y.xi) overflows at the largest retained mode (|y|={np.linalg.norm(y)})")
    phase = sum(y[a] * lat.k_axes[a] for a in range(lat.d))
    return SpectralField(lat, np.ascontiguousarray(np.exp(-phase) * u.coeffs), hermitian=False)


# ---------------------------------------------------------------------------
# snapshot text format
# ---------------------------------------------------------------------------

def snapshot_lines(u: SpectralField) -> list:
    """One line per mode ``xi_1 [xi_2] re im`` after a ``# d M h g`` header,
    lexicographic mode order, 17 significant digits (bit-exact round trip)."""
    lat = u.lattice
    lines = [f"# {lat.d} {lat.M} {lat.h:.17g} {lat.g:.17g}"]
    n = lat.n_modes
    rng = range(-lat.M, lat.M + 1)
    if lat.d == 1:
        for k in rng:
            c = u.coeffs[k % n]
            lines.append(f"{k} {c.real:.17g} {c.imag:.17g}")
    else:
        for k1 in rng:
            for k2 in rng:
                c = u.coeffs[k1 % n, k2 % n]
                lines.append(f"{k1} {k2} {c.real:.17g} {c.imag:.17g}")
    return lines


def parse_snapshot_lines(lines) -> SpectralField:
    header = lines[0].split()
    if len(header) != 5 or header[0] != "#":
        raise ValueError("malformed snapshot header")
    d, M = int(header[1]), int(header[2])
    h, g = float(header[3]), float(header[4])
    lat = Lattice(d=d, M=M, h=h, g=g)
    c = np.zeros(lat.mode_shape, dtype=complex)
    n = lat.n_modes
    for line in lines[1:]:
        parts = line.split()
        if not parts:
            continue
        if d == 1:
            k, re, im = int(parts[0]), float(parts[1]), float(parts[2])
            c[k % n] = complex(re, im)
        else:
            k1, k2 = int(parts[0]), int(parts[1])
            re, im = float(parts[2]), float(parts[3])
            c[k1 % n, k2 % n] = complex(re, im)
    return SpectralField(lat, c, hermitian=is_hermitian(c, d))


def save_snapshot(u: SpectralField, path) -> None:
    with open(path, "w") as f:
        f.write("\n".join(snapshot_lines(u)) + "\n")


def load_snapshot(path) -> SpectralField:
    with open(path) as f:
        return parse_snapshot_lines(f.read().splitlines())
