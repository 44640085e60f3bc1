"""Hermite-Gaussian mode algebra and two-dimensional overlap integrals.

All lengths are micrometers throughout the package.  Fields are scalar
amplitudes normalized so that the squared modulus integrates to one over
the transverse plane, i.e. a point-spread function of width ``sigma`` is

    psi(x, y) = (2 pi sigma^2)^(-1/2) exp(-(x^2 + y^2) / (4 sigma^2))

and the Hermite-Gaussian basis mode of order (l, m) at width ``sigma`` is

    Phi_lm(x, y) = (2 pi sigma^2)^(-1/2) (2^l l!)^(-1/2) (2^m m!)^(-1/2)
                   H_l(x / (sqrt(2) sigma)) H_m(y / (sqrt(2) sigma))
                   exp(-(x^2 + y^2) / (4 sigma^2))

with H_j the physicists' Hermite polynomial.  These modes are orthonormal
and Phi_00 coincides with the Gaussian point-spread function of the same
width.

Overlap integrals of products of such fields are polynomials times a
single Gaussian envelope, so a Gauss-Hermite product rule in rescaled
coordinates evaluates them exactly (up to roundoff).  ``overlap2d``
factors the joint envelope out analytically and applies the rule to the
polynomial part only, which keeps the evaluation overflow-free at any
quadrature order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss


class QuadratureError(RuntimeError):
    """Raised when quadrature refinement fails to stabilize."""


def hermite_poly(n: int, u: np.ndarray) -> np.ndarray:
    """Physicists' Hermite polynomial H_n(u) by the three-term recurrence.

    Numerically stable for the mode orders used here (n <= ~30), unlike
    explicit power-basis coefficients.
    """
    if n < 0:
        raise ValueError(f"Hermite order must be non-negative, got {n}")
    u = np.asarray(u, dtype=float)
    h_prev = np.ones_like(u)
    if n == 0:
        return h_prev
    h = 2.0 * u
    for k in range(1, n):
        h, h_prev = 2.0 * u * h - 2.0 * k * h_prev, h
    return h


@dataclass(frozen=True)
class ModeIndex:
    """Hermite-Gaussian mode label: x-order ``l`` and y-order ``m``."""

    l: int
    m: int

    def __post_init__(self):
        if self.l < 0 or self.m < 0:
            raise ValueError(f"mode orders must be non-negative, got ({self.l}, {self.m})")


@dataclass(frozen=True)
class GaussianPSF:
    """Displaced Gaussian point-spread function of width ``sigma_s`` [um]."""

    sigma_s: float
    center_x: float = 0.0
    center_y: float = 0.0

    def __post_init__(self):
        if self.sigma_s <= 0:
            raise ValueError(f"sigma_s must be positive, got {self.sigma_s}")


@dataclass(frozen=True)
class ModeBasis:
    """Truncated Hermite-Gaussian basis: width ``sigma_p`` [um] plus an
    ordered, duplicate-free list of mode indices.

    ``from_lists`` builds the conventional ordering, row-major over
    l_list x m_list: (l0,m0), (l0,m1), ..., (l1,m0), ...
    """

    sigma_p: float
    indices: tuple[ModeIndex, ...]

    def __post_init__(self):
        if self.sigma_p <= 0:
            raise ValueError(f"sigma_p must be positive, got {self.sigma_p}")
        if not self.indices:
            raise ValueError("basis needs at least one mode index")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("basis indices contain duplicates")
        object.__setattr__(self, "indices", tuple(self.indices))

    @classmethod
    def from_lists(cls, sigma_p: float, l_list: Sequence[int], m_list: Sequence[int]) -> "ModeBasis":
        indices = tuple(ModeIndex(l, m) for l in l_list for m in m_list)
        return cls(sigma_p=sigma_p, indices=indices)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class SignalState:
    """Incoherent mixture of displaced Gaussian point-spread functions.

    ``components`` is a tuple of (weight, psf) pairs with positive weights
    summing to one.  Squared overlaps add across components; amplitudes
    never interfere.
    """

    components: tuple[tuple[float, GaussianPSF], ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("signal state needs at least one component")
        weights = [w for w, _ in self.components]
        if any(w <= 0 for w in weights):
            raise ValueError("component weights must be positive")
        total = sum(weights)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"component weights must sum to 1, got {total}")
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def point_source(cls, sigma_s: float) -> "SignalState":
        """Single centered source (hypothesis A)."""
        return cls(((1.0, GaussianPSF(sigma_s)),))

    @classmethod
    def symmetric_pair(cls, sigma_s: float, theta_x: float) -> "SignalState":
        """Two equal-brightness incoherent sources at +/- theta_x (hypothesis B)."""
        return cls((
            (0.5, GaussianPSF(sigma_s, center_x=+theta_x)),
            (0.5, GaussianPSF(sigma_s, center_x=-theta_x)),
        ))

    @classmethod
    def displaced_source(cls, sigma_s: float, theta_x: float) -> "SignalState":
        """Single source displaced by theta_x along x.

        Emulates the one-sided experimental realization of hypothesis B:
        any pump that is anti-symmetric in x converts the +theta_x and
        -theta_x components with identical efficiency, so the one-sided
        state is interchangeable with ``symmetric_pair`` for such pumps.
        """
        return cls(((1.0, GaussianPSF(sigma_s, center_x=theta_x)),))


# --------------------------------------------------------------------------
# Field representation for overlap integrals
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    """Scalar field of the form bare(x, y) * Gaussian envelope.

    ``bare`` is the envelope-free factor (a polynomial for every field
    built in this package).  ``sigma`` is the envelope width [um], or None
    for fields without an envelope (e.g. the uniform function used for
    plain inner products).  ``degree`` bounds the polynomial degree of
    ``bare`` and sizes the quadrature rule.
    """

    bare: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma: float | None
    center: tuple[float, float] = (0.0, 0.0)
    degree: int = 0

    def __call__(self, x, y):
        """Evaluate the full field (bare factor times envelope)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        value = self.bare(x, y)
        if self.sigma is not None:
            cx, cy = self.center
            value = value * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (4.0 * self.sigma**2))
        return value


def _hg_norm(sigma: float, l: int, m: int) -> float:
    return (
        1.0
        / math.sqrt(2.0 * math.pi * sigma**2)
        / math.sqrt(2.0**l * math.factorial(l))
        / math.sqrt(2.0**m * math.factorial(m))
    )


def hg_field(basis: ModeBasis, idx: ModeIndex, shift_x: float = 0.0, shift_y: float = 0.0) -> Field:
    """Hermite-Gaussian basis mode as a Field, optionally translated."""
    sigma = basis.sigma_p
    norm = _hg_norm(sigma, idx.l, idx.m)
    scale = math.sqrt(2.0) * sigma

    def bare(x, y, _l=idx.l, _m=idx.m):
        return norm * hermite_poly(_l, (x - shift_x) / scale) * hermite_poly(_m, (y - shift_y) / scale)

    return Field(bare=bare, sigma=sigma, center=(shift_x, shift_y), degree=idx.l + idx.m)


def psf_field(psf: GaussianPSF) -> Field:
    """Displaced Gaussian point-spread function as a Field."""
    prefactor = 1.0 / math.sqrt(2.0 * math.pi * psf.sigma_s**2)

    def bare(x, y):
        return np.full(np.broadcast(x, y).shape, prefactor)

    return Field(bare=bare, sigma=psf.sigma_s, center=(psf.center_x, psf.center_y), degree=0)


def gaussian_field(sigma: float, center_x: float = 0.0, center_y: float = 0.0) -> Field:
    """Centered (or displaced) fundamental Gaussian of width ``sigma``."""
    return psf_field(GaussianPSF(sigma, center_x, center_y))


def uniform_field() -> Field:
    """Constant field 1, the no-envelope limit used for plain inner products."""
    return Field(bare=lambda x, y: np.ones(np.broadcast(x, y).shape), sigma=None, degree=0)


def superposition_field(basis: ModeBasis, coeffs: np.ndarray, shift_x: float = 0.0) -> Field:
    """Coefficient-weighted sum of basis modes sharing one envelope.

    The x-shift translates the whole superposition; the common Gaussian
    envelope keeps the product integrable by the same quadrature rule as
    a single mode.
    """
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (len(basis),):
        raise ValueError(f"expected {len(basis)} coefficients, got shape {coeffs.shape}")
    sigma = basis.sigma_p
    scale = math.sqrt(2.0) * sigma
    max_l = max(idx.l for idx in basis.indices)
    max_m = max(idx.m for idx in basis.indices)
    norms = np.array([_hg_norm(sigma, idx.l, idx.m) for idx in basis.indices])

    def bare(x, y):
        u = (np.asarray(x, dtype=float) - shift_x) / scale
        v = np.asarray(y, dtype=float) / scale
        h_u = [hermite_poly(n, u) for n in range(max_l + 1)]
        h_v = [hermite_poly(n, v) for n in range(max_m + 1)]
        total = np.zeros(np.broadcast(u, v).shape, dtype=complex)
        for c, norm, idx in zip(coeffs, norms, basis.indices):
            if c != 0:
                total = total + (c * norm) * h_u[idx.l] * h_v[idx.m]
        return total

    degree = max(idx.l + idx.m for idx in basis.indices)
    return Field(bare=bare, sigma=sigma, center=(shift_x, 0.0), degree=degree)


# --------------------------------------------------------------------------
# Point evaluation
# --------------------------------------------------------------------------

def eval_hg(basis: ModeBasis, idx: ModeIndex, x, y):
    """Normalized Hermite-Gaussian amplitude of mode ``idx`` at (x, y) [1/um]."""
    return hg_field(basis, idx)(x, y)


def eval_psf(psf: GaussianPSF, x, y):
    """Gaussian point-spread-function amplitude at (x, y) [1/um]."""
    return psf_field(psf)(x, y)


# --------------------------------------------------------------------------
# Overlap integration
# --------------------------------------------------------------------------

def _combined_envelope(fields: Sequence[Field]) -> tuple[float, float, float, float]:
    """Joint Gaussian envelope of a product of fields.

    Returns (a, x0, y0, log_k) such that the product of all envelopes is
    exp(log_k) * exp(-a ((x - x0)^2 + (y - y0)^2)).  log_k <= 0 measures
    the attenuation due to center mismatch.
    """
    a = 0.0
    bx = by = 0.0
    cx = cy = 0.0
    for f in fields:
        if f.sigma is None:
            continue
        inv = 1.0 / (4.0 * f.sigma**2)
        a += inv
        bx += 2.0 * inv * f.center[0]
        by += 2.0 * inv * f.center[1]
        cx += inv * f.center[0] ** 2
        cy += inv * f.center[1] ** 2
    if a == 0.0:
        raise ValueError("overlap2d needs at least one field with a Gaussian envelope")
    x0 = bx / (2.0 * a)
    y0 = by / (2.0 * a)
    log_k = (bx**2 / (4.0 * a) - cx) + (by**2 / (4.0 * a) - cy)
    return a, x0, y0, log_k


def _quad_sum(fields: Sequence[Field], order: int) -> tuple[complex, float]:
    """Gauss-Hermite product-rule value and an absolute-magnitude scale."""
    a, x0, y0, log_k = _combined_envelope(fields)
    nodes, weights = hermgauss(order)
    root_a = math.sqrt(a)
    x = x0 + nodes / root_a
    y = y0 + nodes / root_a
    xg, yg = np.meshgrid(x, y, indexing="ij")

    f, g, h = fields
    values = f.bare(xg, yg) * g.bare(xg, yg) * np.conjugate(h.bare(xg, yg))
    # Residual envelope: each field's envelope relative to the joint one is
    # exp(joint) / product(envelopes) == 1 by construction, so `values` is
    # purely the polynomial part.
    w2d = np.outer(weights, weights)
    raw = np.sum(w2d * values)
    scale = float(np.sum(w2d * np.abs(values)))
    factor = math.exp(log_k) / a
    return complex(raw) * factor, scale * factor


def overlap2d(f: Field, g: Field, h: Field, rtol: float = 1e-9) -> complex:
    """Two-dimensional overlap integral of f * g * conj(h).

    Exact (to roundoff) for products of Hermite-Gaussian modes and
    displaced Gaussians because the integrand is a polynomial times a
    Gaussian.  The rule is refined once as a self-check; failure to
    stabilize (e.g. a ``bare`` factor that is not polynomial) raises
    QuadratureError.
    """
    fields = (f, g, h)
    total_degree = sum(fld.degree for fld in fields)
    order = max(64, 4 * total_degree + 32)

    value, _ = _quad_sum(fields, order)
    for refined_order in (order + 16, 2 * order + 16):
        refined, scale = _quad_sum(fields, refined_order)
        err = abs(refined - value)
        if err <= rtol * abs(refined) + 1e-13 * scale:
            return refined
        value = refined
    raise QuadratureError(
        f"overlap quadrature failed to stabilize at order {refined_order} "
        f"(last change {err:.3e} against scale {scale:.3e})"
    )
