"""Discrete Cauchy and Beurling transforms and derivative operators.

Conventions, with frequency zeta = xi1 + i*xi2 and Wirtinger symbols
dbar ~ (i/2) zeta, d ~ (i/2) conj(zeta):

    T : multiplier -2i/zeta, zero at zeta = 0, so that dbar(T w) = w
    S : multiplier conj(zeta)/zeta, zero at zeta = 0, S = d o T

Both are whole-plane operators; on the periodic grid the zero frequency
is annihilated, which restricts the exact inversion dbar o T = id to
mean-zero fields. To recover the decaying principal branch for fields
with mass, the mass is carried by a radial Gaussian slug g whose
transforms are known in closed form,

    T g = sigma^2 (1 - exp(-|z|^2/sigma^2)) / z,      sigma = L/4,
    S g = d(T g),

and the multiplier is applied to the mean-free remainder. On mean-zero
input the slug vanishes and S is exactly the unimodular multiplier, an
L2 isometry to round-off. Sign and normalization are pinned by the two
oracles dbar T = id and T chi_D = conj(z) inside the unit disk, 1/z
outside (verified against direct quadrature of the Cauchy integral).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import SupportTooLarge
from .grid import DerivativePair, GridField, coordinates

SUPPORT_EPS = 1e-13


@lru_cache(maxsize=16)
def _kernels(L: float, n: int):
    h = 2.0 * L / n
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    XI1, XI2 = np.meshgrid(xi, xi)
    zeta = XI1 + 1j * XI2
    nz = zeta != 0
    mult_T = np.zeros_like(zeta)
    mult_T[nz] = -2j / zeta[nz]
    mult_S = np.zeros_like(zeta)
    mult_S[nz] = np.conj(zeta[nz]) / zeta[nz]
    mult_d = 0.5j * np.conj(zeta)
    mult_dbar = 0.5j * zeta
    for m in (mult_T, mult_S, mult_d, mult_dbar):
        m.flags.writeable = False
    return mult_T, mult_S, mult_d, mult_dbar


@lru_cache(maxsize=16)
def _slug(L: float, n: int):
    """Gaussian mass carrier and its closed-form transforms."""
    Z = coordinates(L, n)
    sigma = L / 4.0
    r2 = np.abs(Z) ** 2
    g = np.exp(-r2 / sigma**2)
    one_minus_e = -np.expm1(-r2 / sigma**2)
    Zs = np.where(Z == 0, 1.0, Z)
    Tg = np.where(Z == 0, 0.0, sigma**2 * one_minus_e / Zs)
    Sg = np.where(
        Z == 0,
        0.0,
        (np.conj(Z) * (1.0 - one_minus_e) * Zs - sigma**2 * one_minus_e) / Zs**2,
    )
    for m in (g, Tg, Sg):
        m.flags.writeable = False
    return g, Tg, Sg, sigma


def _check_support(field: GridField):
    """Support extent must not exceed half the box side."""
    mag = np.abs(field.data)
    peak = mag.max()
    if peak == 0.0:
        return
    jj, kk = np.nonzero(mag > SUPPORT_EPS * peak)
    ax = -field.L + field.h * np.arange(field.n)
    ext_x = ax[kk.max()] - ax[kk.min()]
    ext_y = ax[jj.max()] - ax[jj.min()]
    if max(ext_x, ext_y) > field.L + field.h / 2:
        raise SupportTooLarge(
            f"support extent {max(ext_x, ext_y):.3g} exceeds half the box side {field.L:.3g}"
        )


def _mass_coefficient(field: GridField, sigma: float) -> complex:
    return complex(field.data.sum() * field.h**2 / (np.pi * sigma**2))


def cauchy_transform(omega: GridField) -> GridField:
    """T omega with dbar(T omega) = omega and decay at infinity."""
    _check_support(omega)
    mult_T, _, _, _ = _kernels(omega.L, omega.n)
    g, Tg, _, sigma = _slug(omega.L, omega.n)
    c = _mass_coefficient(omega, sigma)
    u = np.fft.ifft2(mult_T * np.fft.fft2(omega.data - c * g))
    return GridField(omega.L, u + c * Tg)


def beurling_transform(omega: GridField) -> GridField:
    """S omega = d(T omega); unimodular multiplier, L2 isometry on mean-zero input."""
    _check_support(omega)
    _, mult_S, _, _ = _kernels(omega.L, omega.n)
    g, _, Sg, sigma = _slug(omega.L, omega.n)
    c = _mass_coefficient(omega, sigma)
    u = np.fft.ifft2(mult_S * np.fft.fft2(omega.data - c * g))
    return GridField(omega.L, u + c * Sg)


def derivatives(f: GridField, method: str = "spectral") -> DerivativePair:
    """Wirtinger derivatives f_z = (f_x - i f_y)/2, f_zbar = (f_x + i f_y)/2.

    "spectral" assumes the field extends periodically (exact for smooth
    compactly supported samples); "fd" uses second-order centered
    differences with one-sided stencils at the box edge and is the right
    choice for non-periodic fields.
    """
    if method == "spectral":
        _, _, mult_d, mult_dbar = _kernels(f.L, f.n)
        fh = np.fft.fft2(f.data)
        fz = np.fft.ifft2(mult_d * fh)
        fzbar = np.fft.ifft2(mult_dbar * fh)
    elif method == "fd":
        fy, fx = np.gradient(f.data, f.h, edge_order=2)
        fz = 0.5 * (fx - 1j * fy)
        fzbar = 0.5 * (fx + 1j * fy)
    else:
        raise ValueError(f"unknown differentiation method {method!r}")
    return DerivativePair(GridField(f.L, fz), GridField(f.L, fzbar))
