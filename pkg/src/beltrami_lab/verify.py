"""Post-hoc certification of computed solutions.

Residual of the untruncated equation, Jacobian sign statistics,
injectivity (orientation flips plus a winding-number cover test over
the image), discrete inverse construction with inner-dilatation
integrals, and the log-Holder continuity fit.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSpec, coefficient_fields
from .dilatation import inner_dilatation_p, jacobian, tangential_dilatation
from .errors import EmptyCompact, NotInvertible, OutOfImage
from .grid import GridField
from .linear_solver import Solution


# ---------------------------------------------------------------------------
# residual

def residual(solution: Solution, spec: CoefficientSpec):
    """Pointwise f_zbar - mu(z, f) f_z - nu(z, f) conj(f_z) and its norms.

    Norms are taken over the coefficient support. Samples where the raw
    coefficient is degenerate (|mu| + |nu| >= 1, a measure-zero set for
    admissible coefficients) carry no area in the a.e. integral; they
    are excluded from the norms and counted in the report.
    """
    Z = solution.f.z
    mu, nu = coefficient_fields(spec, Z, solution.f.data, strict=False)
    res = solution.fzbar.data - mu * solution.fz.data - nu * np.conj(solution.fz.data)
    support = np.abs(Z) <= spec.support_radius
    s = np.abs(mu) + np.abs(nu)
    good = support & (s < 1.0) & np.isfinite(s)
    degenerate = int(support.sum() - good.sum())
    denom = float(np.linalg.norm(solution.fz.data[support]))
    norms = {
        "l2_rel": float(np.linalg.norm(res[good]) / max(denom, 1e-300)),
        "sup": float(np.abs(res[good]).max()) if good.any() else 0.0,
        "degenerate_samples": degenerate,
    }
    return GridField(solution.f.L, np.where(good, res, 0.0)), norms


# ---------------------------------------------------------------------------
# jacobian statistics

def jacobian_stats(solution: Solution):
    """min J and the fraction of samples with J <= 0 over the support."""
    Z = solution.f.z
    support = np.abs(Z) <= solution.support_radius
    J = jacobian(solution.fz.data, solution.fzbar.data)[support]
    return {
        "min": float(J.min()),
        "fraction_nonpositive": float((J <= 0.0).mean()),
    }


# ---------------------------------------------------------------------------
# injectivity

def _triangles(solution: Solution):
    """Split every grid cell into two triangles; return image and source vertices."""
    f = solution.f.data
    Z = solution.f.z
    A = np.concatenate([f[:-1, :-1].ravel(), f[1:, 1:].ravel()])
    B = np.concatenate([f[:-1, 1:].ravel(), f[1:, :-1].ravel()])
    C = np.concatenate([f[1:, :-1].ravel(), f[:-1, 1:].ravel()])
    Az = np.concatenate([Z[:-1, :-1].ravel(), Z[1:, 1:].ravel()])
    Bz = np.concatenate([Z[:-1, 1:].ravel(), Z[1:, :-1].ravel()])
    Cz = np.concatenate([Z[1:, :-1].ravel(), Z[:-1, 1:].ravel()])
    return A, B, C, Az, Bz, Cz


def _signed_area2(A, B, C):
    u = B - A
    v = C - A
    return u.real * v.imag - u.imag * v.real


def _boundary_polygon(f: np.ndarray) -> np.ndarray:
    """Image of the grid boundary, counterclockwise."""
    top = f[0, :-1]
    right = f[:-1, -1]
    bottom = f[-1, ::-1][:-1]
    left = f[::-1, 0][:-1]
    return np.concatenate([top, right, bottom, left])


def _winding_numbers(poly: np.ndarray, points: np.ndarray) -> np.ndarray:
    closed = np.append(poly, poly[0])
    w = np.zeros(len(points))
    for a, b in zip(closed[:-1], closed[1:]):
        w += np.angle((b - points) / (a - points))
    return np.rint(w / (2.0 * np.pi)).astype(int)


def injectivity_check(solution: Solution, bins: int = 48):
    """Count orientation flips and multiply-covered image regions.

    Flips are image triangles with negative signed area. The cover test
    evaluates the winding number of the image of the grid boundary at
    bin centers well inside the image; winding outside {0, 1} means the
    grid image overlaps itself (a fold or a multiple cover). PASS needs
    zero flips and zero overlap bins.
    """
    A, B, C, *_ = _triangles(solution)
    area2 = _signed_area2(A, B, C)
    flips = int((area2 < 0).sum())

    poly = _boundary_polygon(solution.f.data)
    lo_x, hi_x = poly.real.min(), poly.real.max()
    lo_y, hi_y = poly.imag.min(), poly.imag.max()
    bx = np.linspace(lo_x, hi_x, bins + 1)
    by = np.linspace(lo_y, hi_y, bins + 1)
    cx = 0.5 * (bx[:-1] + bx[1:])
    cy = 0.5 * (by[:-1] + by[1:])
    CX, CY = np.meshgrid(cx, cy)
    centers = (CX + 1j * CY).ravel()
    # drop centers too close to the boundary curve for a stable winding number
    bin_diag = np.hypot(bx[1] - bx[0], by[1] - by[0])
    dist = np.abs(centers[:, None] - poly[None, ::4]).min(axis=1)
    inner = centers[dist > 2.0 * bin_diag]
    if len(inner):
        winding = _winding_numbers(poly[::2], inner)
        overlap_bins = int(np.sum((winding != 0) & (winding != 1)))
    else:
        overlap_bins = 0
    return {
        "orientation_flips": flips,
        "folded_cell_count": overlap_bins,
        "passed": flips == 0 and overlap_bins == 0,
    }


# ---------------------------------------------------------------------------
# discrete inverse and its dilatation integrals

def _locate(solution: Solution, targets: np.ndarray, source_mask=None):
    """Barycentric point location of targets in the mapped triangles."""
    A, B, C, Az, Bz, Cz = _triangles(solution)
    if source_mask is not None:
        m = np.concatenate([source_mask[:-1, :-1].ravel(), source_mask[:-1, :-1].ravel()])
        A, B, C, Az, Bz, Cz = (arr[m] for arr in (A, B, C, Az, Bz, Cz))
    nb = 128
    lo = complex(targets.real.min(), targets.imag.min())
    span = max(targets.real.max() - lo.real, targets.imag.max() - lo.imag) + 1e-12
    bsz = span / nb

    def bin_range(vals_min, vals_max):
        b0 = np.clip(((vals_min - 1e-12) / bsz).astype(int), 0, nb - 1)
        b1 = np.clip(((vals_max + 1e-12) / bsz).astype(int), 0, nb - 1)
        return b0, b1

    bx0, bx1 = bin_range(np.minimum(np.minimum(A.real, B.real), C.real) - lo.real,
                         np.maximum(np.maximum(A.real, B.real), C.real) - lo.real)
    by0, by1 = bin_range(np.minimum(np.minimum(A.imag, B.imag), C.imag) - lo.imag,
                         np.maximum(np.maximum(A.imag, B.imag), C.imag) - lo.imag)
    table = defaultdict(list)
    for t in range(len(A)):
        for ix in range(bx0[t], bx1[t] + 1):
            for iy in range(by0[t], by1[t] + 1):
                table[(ix, iy)].append(t)

    out = np.full(targets.shape, np.nan + 0j)
    tx = np.clip(((targets.real - lo.real) / bsz).astype(int), 0, nb - 1)
    ty = np.clip(((targets.imag - lo.imag) / bsz).astype(int), 0, nb - 1)
    flat = targets.ravel()
    txf, tyf = tx.ravel(), ty.ravel()
    res = out.ravel()
    for i in range(len(flat)):
        w = flat[i]
        for t in table.get((txf[i], tyf[i]), ()):
            v0 = B[t] - A[t]
            v1 = C[t] - A[t]
            v2 = w - A[t]
            den = v0.real * v1.imag - v0.imag * v1.real
            if den == 0.0:
                continue
            a = (v2.real * v1.imag - v2.imag * v1.real) / den
            b = (v0.real * v2.imag - v0.imag * v2.real) / den
            if a >= -1e-12 and b >= -1e-12 and a + b <= 1.0 + 1e-12:
                res[i] = Az[t] + a * (Bz[t] - Az[t]) + b * (Cz[t] - Az[t])
                break
    return out


def inverse_dilatation_audit(solution: Solution, p: float, Q=None, probes=(),
                             image_n: int = 96, window_shrink: float = 0.7):
    """Integrate K_{I,p} of the discrete inverse and check its tangential bound.

    Builds g = f^{-1} on a uniform image-side window (a square around 0
    inside the image of the support disk) by triangle point location,
    differentiates by centered differences, and Riemann-sums the inner
    dilatation. Raises NotInvertible if the solution fails the
    injectivity check, OutOfImage for probes outside the window.
    """
    if not 1.0 < p <= 2.0:
        raise ValueError(f"order p must lie in (1, 2], got {p}")
    check = injectivity_check(solution)
    if not check["passed"]:
        raise NotInvertible(f"injectivity check failed: {check}")
    Z = solution.f.z
    ring = np.abs(np.abs(Z) - solution.support_radius) < 2 * solution.f.h
    if not ring.any():
        ring = np.abs(Z) > 0.9 * np.abs(Z).max()
    w_half = window_shrink * float(np.abs(solution.f.data[ring]).min())
    hw = 2.0 * w_half / image_n
    ax = -w_half + hw * np.arange(image_n)
    WX, WY = np.meshgrid(ax, ax)
    W = WX + 1j * WY
    for w0 in probes:
        if max(abs(complex(w0).real), abs(complex(w0).imag)) >= w_half:
            raise OutOfImage(f"probe {w0} outside the image window (half-side {w_half:.4g})")
    source_mask = np.abs(Z) <= min(solution.support_radius * 1.5, solution.f.L * 0.75)
    g = _locate(solution, W, source_mask)
    located = np.isfinite(g.real)
    gy, gx = np.gradient(g, hw, edge_order=1)
    gw = 0.5 * (gx - 1j * gy)
    gwb = 0.5 * (gx + 1j * gy)
    interior = located.copy()
    interior[0, :] = interior[-1, :] = interior[:, 0] = interior[:, -1] = False
    interior &= np.isfinite(gw.real) & np.isfinite(gwb.real)
    KIp = inner_dilatation_p(gw[interior], gwb[interior], p)
    KI2 = inner_dilatation_p(gw[interior], gwb[interior], 2.0)
    area = float(interior.sum()) * hw * hw
    mu_g = np.where(gw[interior] != 0, gwb[interior] / np.where(gw[interior] != 0, gw[interior], 1), 0)
    kt_violations = {}
    if Q is not None:
        Win = W[interior]
        Qv = Q(Win)
        for w0 in probes:
            mask = np.abs(Win - w0) > 1e-9
            KT = tangential_dilatation(mu_g[mask], np.zeros_like(mu_g[mask]), Win[mask], complex(w0), 0.0)
            kt_violations[str(w0)] = int(np.sum(KT > Qv[mask] + 1e-9))
    return {
        "p": p,
        "integral_KIp": float(np.sum(KIp) * hw * hw),
        "integral_KI2": float(np.sum(KI2) * hw * hw),
        "window_area": area,
        "mean_KIp": float(np.mean(KIp)),
        "max_KIp": float(np.max(KIp)),
        "located_fraction": float(located.mean()),
        "kt_violations": kt_violations,
    }


# ---------------------------------------------------------------------------
# log-Holder continuity fit

def continuity_modulus_fit(solution: Solution, q_l1_norm: float, margin: float,
                           pairs_per_scale: int = 200, n_scales: int = 5, seed: int = 0):
    """Fit the smallest C with |f(x) - f(y)| <= C sqrt(q_l1_norm) / log^{1/2}(1 + r0/(2|x-y|)).

    Pairs are sampled inside the compact K = {|z| <= support_radius -
    margin} at dyadic separation scales; r0 = margin is the distance
    from K to the support boundary.
    """
    if q_l1_norm <= 0:
        raise ValueError("q_l1_norm must be positive")
    r_compact = solution.support_radius - margin
    if r_compact <= 0:
        raise EmptyCompact(f"margin {margin} leaves no compact inside the support")
    rng = np.random.default_rng(seed)
    r0 = margin
    per_scale = []
    for j in range(1, n_scales + 1):
        # separations scale with the compact, not with r0, so shrinking the
        # compact can only shrink the fitted constant
        sep = r_compact * 2.0 ** -j
        rad = (r_compact - sep) * np.sqrt(rng.uniform(0, 1, pairs_per_scale))
        ang = rng.uniform(0, 2 * np.pi, pairs_per_scale)
        x = rad * np.exp(1j * ang)
        y = x + sep * np.exp(1j * rng.uniform(0, 2 * np.pi, pairs_per_scale))
        keep = np.abs(y) <= r_compact
        x, y = x[keep], y[keep]
        df = np.abs(solution.f.interp(x) - solution.f.interp(y))
        bound_shape = np.sqrt(q_l1_norm) / np.sqrt(np.log1p(r0 / (2.0 * sep)))
        per_scale.append({"separation": sep, "C": float(df.max() / bound_shape)})
    C = max(row["C"] for row in per_scale)
    return {"C": C, "r0": r0, "scales": per_scale}


# ---------------------------------------------------------------------------
# report container and heatmaps

@dataclass
class VerificationReport:
    residual_l2_rel: float
    residual_sup: float
    degenerate_samples: int
    jacobian: dict
    injectivity: dict
    inverse: dict = field(default_factory=dict)
    continuity: dict = field(default_factory=dict)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True, default=str)


def verification_report(solution: Solution, spec: CoefficientSpec, p: float = 2.0,
                        continuity_margin: float = 0.5, q_l1_norm: float = None,
                        with_inverse: bool = True) -> VerificationReport:
    """Run the full verification battery on one solution."""
    _, norms = residual(solution, spec)
    report = VerificationReport(
        residual_l2_rel=norms["l2_rel"],
        residual_sup=norms["sup"],
        degenerate_samples=norms["degenerate_samples"],
        jacobian=jacobian_stats(solution),
        injectivity=injectivity_check(solution),
    )
    if with_inverse and report.injectivity["passed"]:
        report.inverse = inverse_dilatation_audit(solution, p=p)
    if q_l1_norm:
        report.continuity = continuity_modulus_fit(solution, q_l1_norm, continuity_margin)
    return report


def write_ppm(values: np.ndarray, path):
    """Dump a real-valued grid as a grayscale P6 heatmap."""
    vals = np.asarray(values, dtype=float)
    finite = np.isfinite(vals)
    lo = vals[finite].min() if finite.any() else 0.0
    hi = vals[finite].max() if finite.any() else 1.0
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    gray = np.where(finite, (vals - lo) * scale, 0.0).astype(np.uint8)
    rgb = np.repeat(gray[::-1, :, None], 3, axis=2)  # flip so +y points up
    with open(path, "wb") as fh:
        fh.write(f"P6 {vals.shape[1]} {vals.shape[0]} 255\n".encode())
        fh.write(rgb.tobytes())
