"""Audits of the existence hypotheses: majorant bounds, FMO, divergence.

Everything here is finite-sample evidence for inherently asymptotic
conditions, so every verdict ships with the numeric ladder that backs
it and INCONCLUSIVE is an honest outcome. Divergence of int dr/(r q(r))
is judged from the increments of the partial integrals I(eps) along a
decreasing eps ladder: geometrically decaying increments mean a finite
limit (reported via geometric tail extrapolation), non-decaying ones
mean divergence. Mean oscillation over shrinking disks classifies FMO:
bounded oscillation ladders look like FMO, ladders growing by 2x or
more do not.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad

from .coefficients import CoefficientSpec, coefficient_fields
from .dilatation import maximal_dilatation, tangential_dilatation
from .errors import BoundViolation, EvalError, QuadratureFailure
from .expressions import (
    MAJORANT_VARIABLES,
    RADIAL_VARIABLES,
    evaluate,
    parse_expression,
    standard_env,
)

DEFAULT_EPS_LADDER = tuple(2.0 ** -k for k in range(3, 13))

CONVERGENT = "CONVERGENT"
DIVERGENT = "DIVERGENT"
INCONCLUSIVE = "INCONCLUSIVE"
LIKELY_FMO = "LIKELY_FMO"
LIKELY_NOT_FMO = "LIKELY_NOT_FMO"

_RATIO_CONVERGENT = 0.75
_RATIO_DIVERGENT = 0.85


@dataclass(frozen=True)
class MajorantSpec:
    """Scalar majorant of z, nonnegative extended-real where defined."""

    tree: object
    role: str = "Q"
    label: str = ""

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        vals = evaluate(self.tree, standard_env(z), strict=False)
        return np.broadcast_to(np.real(vals), z.shape).copy() if z.shape else float(np.real(vals))


def parse_majorant(text: str, role: str = "Q") -> MajorantSpec:
    return MajorantSpec(tree=parse_expression(text, MAJORANT_VARIABLES), role=role, label=text)


def parse_radial_weight(text: str):
    """Parse an expression in the radius variable t into a callable of t."""
    tree = parse_expression(text, RADIAL_VARIABLES)

    def weight(t):
        return float(np.real(evaluate(tree, {"t": complex(t)}, strict=False)))

    return weight


def circle_mean(q, z0: complex, r: float, m: int = 64) -> float:
    """Trapezoidal mean of q over the circle |z - z0| = r; exact for constants."""
    if r <= 0:
        raise ValueError("circle radius must be positive")
    if m < 16:
        raise ValueError("need at least 16 quadrature nodes")
    phi = 2.0 * np.pi * np.arange(m) / m
    vals = np.asarray(q(z0 + r * np.exp(1j * phi)), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise EvalError(f"majorant not finite on the circle r = {r:.6g}")
    return float(np.mean(vals))


def disk_integral(q, z0: complex, radius: float) -> float:
    """2-D integral of q over the disk B(z0, radius) via radial quadrature."""
    def integrand(r):
        return 2.0 * np.pi * r * circle_mean(q, z0, r)

    val, _ = quad(integrand, 0.0, radius, limit=200)
    return float(val)


@dataclass
class DivergenceReport:
    eps: list
    partials: list
    increments: list
    ratios: list
    verdict: str
    limit: float = None
    median_ratio: float = None


def divergence_integral(q, z0: complex, delta: float, eps_ladder=DEFAULT_EPS_LADDER,
                        nodes: int = 64) -> DivergenceReport:
    """Classify int_0 dr/(r qbar(r)) by partial integrals I(eps) = int_eps^delta."""
    eps_ladder = [float(e) for e in eps_ladder if e < delta]
    if len(eps_ladder) < 5:
        raise ValueError("eps ladder must reach at least 5 values below delta")
    if eps_ladder != sorted(eps_ladder, reverse=True):
        raise ValueError("eps ladder must be decreasing")

    def integrand(r):
        qb = circle_mean(q, z0, r, m=nodes)
        val = 1.0 / (r * qb) if qb > 0 else np.inf
        if not np.isfinite(val):
            raise QuadratureFailure(f"non-finite integrand at r = {r:.6g}")
        return val

    partials = []
    acc = 0.0
    upper = delta
    for eps in eps_ladder:
        piece, _ = quad(integrand, eps, upper, limit=200)
        acc += piece
        partials.append(acc)
        upper = eps
    increments = list(np.diff(partials))
    ratios = [b / a for a, b in zip(increments, increments[1:]) if a > 0]
    tail = ratios[-4:] if len(ratios) >= 4 else ratios
    med = float(np.median(tail)) if tail else 0.0
    limit = None
    if not increments or max(increments) <= 1e-14:
        verdict = CONVERGENT
        limit = partials[-1]
    elif med <= _RATIO_CONVERGENT:
        verdict = CONVERGENT
        # geometric tail extrapolation from the last increment
        r = min(med, 0.97)
        limit = partials[-1] + increments[-1] * r / (1.0 - r)
    elif med >= _RATIO_DIVERGENT and increments[-1] > 0:
        verdict = DIVERGENT
    else:
        verdict = INCONCLUSIVE
    return DivergenceReport(
        eps=eps_ladder,
        partials=partials,
        increments=increments,
        ratios=ratios,
        verdict=verdict,
        limit=limit,
        median_ratio=med,
    )


def _disk_mean_and_oscillation(q, x0: complex, eps: float, nr: int = 48, nphi: int = 96):
    """Disk mean and mean absolute oscillation over B(x0, eps) by polar quadrature."""
    xg, wg = np.polynomial.legendre.leggauss(nr)
    rho = 0.5 * eps * (xg + 1.0)
    wr = 0.5 * eps * wg
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    R, P = np.meshgrid(rho, phi)
    W = np.meshgrid(wr, phi)[0] * (2.0 * np.pi / nphi) * R
    vals = np.asarray(q(x0 + R * np.exp(1j * P)), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise QuadratureFailure(f"majorant not finite on B({x0:.4g}, {eps:.4g})")
    area = np.pi * eps**2
    mean = float((vals * W).sum() / area)
    osc = float((np.abs(vals - mean) * W).sum() / area)
    return mean, osc


@dataclass
class FmoReport:
    eps: list
    means: list
    oscillations: list
    verdict: str


def fmo_estimate(q, x0: complex, eps_ladder=DEFAULT_EPS_LADDER) -> FmoReport:
    """Estimate mean-oscillation boundedness of q at x0 over shrinking disks."""
    eps_ladder = [float(e) for e in eps_ladder]
    means, oscs = [], []
    for eps in eps_ladder:
        mean, osc = _disk_mean_and_oscillation(q, x0, eps)
        means.append(mean)
        oscs.append(osc)
    arr = np.asarray(oscs)
    if arr.max() < 1e-10:
        verdict = LIKELY_FMO
    else:
        growing = bool(np.all(np.diff(arr) >= -1e-12 * arr[:-1]))
        if growing and arr[-1] >= 2.0 * max(arr[0], 1e-300):
            verdict = LIKELY_NOT_FMO
        elif arr.max() <= 1.25 * max(arr[0], arr[1]):
            verdict = LIKELY_FMO
        else:
            verdict = INCONCLUSIVE
    return FmoReport(eps=eps_ladder, means=means, oscillations=oscs, verdict=verdict)


@dataclass
class PsiReport:
    eps: list
    I_values: list
    finite_positive: bool
    I_unbounded: str
    R_values: list
    o_I2: bool
    admissible: bool


def psi_admissibility(psi, q1, z0: complex, eps0: float, eps_prime: float,
                      eps_ladder=DEFAULT_EPS_LADDER) -> PsiReport:
    """Check 0 < I(eps, eps0) < inf, I -> inf, and the o(I^2) smallness.

    psi is an expression in t, or a callable of t (for instance the
    default 1/(t qbar(t)) built by default_psi). R(eps) is the annulus
    integral of q1 psi^2 divided by I^2 and must tend to zero.
    """
    if isinstance(psi, str):
        psi = parse_radial_weight(psi)
    if not 0 < eps_prime <= eps0:
        raise ValueError("need 0 < eps_prime <= eps0")
    ladder = [float(e) for e in eps_ladder if e < eps_prime]
    if len(ladder) < 4:
        raise ValueError("eps ladder must reach at least 4 values below eps_prime")

    def psi_val(t):
        v = float(psi(t))
        if not np.isfinite(v) or v < 0:
            raise QuadratureFailure(f"psi not finite/nonnegative at t = {t:.6g}")
        return v

    def annulus_integrand(t):
        return 2.0 * np.pi * t * circle_mean(q1, z0, t) * psi_val(t) ** 2

    I_vals, R_vals = [], []
    acc_I = 0.0
    acc_R = 0.0
    upper = eps0
    finite_positive = True
    for eps in ladder:
        piece_I, _ = quad(psi_val, eps, upper, limit=200)
        piece_R, _ = quad(annulus_integrand, eps, upper, limit=200)
        acc_I += piece_I
        acc_R += piece_R
        upper = eps
        if not (0.0 < acc_I < np.inf):
            finite_positive = False
        I_vals.append(acc_I)
        R_vals.append(acc_R / acc_I**2 if acc_I > 0 else np.inf)
    inc = np.diff(I_vals)
    ratios = [b / a for a, b in zip(inc, inc[1:]) if a > 0]
    med = float(np.median(ratios[-4:])) if ratios else 0.0
    if med >= _RATIO_DIVERGENT and inc[-1] > 0:
        unbounded = DIVERGENT
    elif med <= _RATIO_CONVERGENT:
        unbounded = CONVERGENT
    else:
        unbounded = INCONCLUSIVE
    o_i2 = bool(
        len(R_vals) >= 2
        and R_vals[-1] < 0.75 * max(R_vals[0], 1e-300)
        and R_vals[-1] == min(R_vals)
    )
    admissible = finite_positive and unbounded == DIVERGENT and o_i2
    return PsiReport(
        eps=ladder,
        I_values=I_vals,
        finite_positive=finite_positive,
        I_unbounded=unbounded,
        R_values=R_vals,
        o_I2=o_i2,
        admissible=admissible,
    )


def default_psi(q1, z0: complex):
    """The standard admissible choice psi(t) = 1/(t qbar_{z0}(t))."""

    def psi(t):
        qb = circle_mean(q1, z0, t)
        return 1.0 / (t * qb) if qb > 0 else np.inf

    return psi


# ---------------------------------------------------------------------------
# full audit

@dataclass
class ProbeResult:
    z0: complex
    fmo: FmoReport
    divergence: DivergenceReport
    hypothesis_ok: bool


@dataclass
class ConditionReport:
    """Outcome of the majorant-bound and FMO/divergence audits."""

    label: str
    bound_samples: int
    max_k_minus_q: float
    max_kt_minus_q1: float
    q_divergence: DivergenceReport = None
    probes: list = field(default_factory=list)
    psi: PsiReport = None

    def to_dict(self):
        def conv(obj):
            if isinstance(obj, (DivergenceReport, FmoReport, PsiReport)):
                return asdict(obj)
            if isinstance(obj, ProbeResult):
                return {
                    "z0": [obj.z0.real, obj.z0.imag],
                    "fmo": asdict(obj.fmo),
                    "divergence": asdict(obj.divergence),
                    "hypothesis_ok": obj.hypothesis_ok,
                }
            return obj

        return {
            "label": self.label,
            "bound_samples": self.bound_samples,
            "max_k_minus_q": self.max_k_minus_q,
            "max_kt_minus_q1": self.max_kt_minus_q1,
            "q_divergence": conv(self.q_divergence) if self.q_divergence else None,
            "probes": [conv(p) for p in self.probes],
            "psi": conv(self.psi) if self.psi else None,
        }


def _w_samples(w_max: float):
    """The |w| log ladder {0, 1e-2 .. w_max} times 8 phases."""
    decades = max(int(np.ceil(np.log10(max(w_max, 1e-2) / 1e-2))) + 1, 1)
    mags = np.logspace(-2, np.log10(max(w_max, 1e-2)), decades)
    phases = np.exp(2j * np.pi * np.arange(8) / 8)
    return np.concatenate([[0.0 + 0.0j]] + [m * phases for m in mags])


def audit_theorem1(spec: CoefficientSpec, Q: MajorantSpec, q1_family, probe_points,
                   eps_ladder=DEFAULT_EPS_LADDER, delta_fraction: float = 0.5,
                   n_z: int = 24, n_theta: int = 64, w_max: float = 100.0) -> ConditionReport:
    """Check K <= Q and K^T <= Q1 by sampling, then run the FMO and
    divergence audits of Q1 at every probe point.

    q1_family maps a probe z0 to its majorant; a bare MajorantSpec is
    used for every probe. The per-probe hypothesis holds if either the
    FMO verdict is LIKELY_FMO or the divergence verdict is DIVERGENT.
    The w sample ladder tops out at w_max; bounds that only hold on a
    restricted range of |w| (the unit-disk example is one) need the
    matching w_max or the audit raises BoundViolation with a witness.
    """
    probe_points = [complex(p) for p in probe_points]
    if isinstance(q1_family, MajorantSpec) or not callable(q1_family):
        family = lambda z0: q1_family
    else:
        family = q1_family
    rng = np.random.default_rng(0)
    radii = spec.support_radius * np.sqrt(rng.uniform(0.001, 0.97, n_z))
    angles = rng.uniform(0.0, 2.0 * np.pi, n_z)
    z_samples = radii * np.exp(1j * angles)
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    w_values = _w_samples(w_max)

    worst_k = -np.inf
    for w in w_values:
        mu, nu = coefficient_fields(spec, z_samples, np.full_like(z_samples, w), strict=False)
        K = maximal_dilatation(mu, nu)
        Qv = Q(z_samples)
        with np.errstate(invalid="ignore"):
            gap = np.where(np.isinf(Qv), -np.inf, K - Qv)
        k_gap = float(np.nanmax(gap))
        worst_k = max(worst_k, k_gap)
        if k_gap > 1e-9:
            idx = int(np.nanargmax(gap))
            raise BoundViolation(
                f"K(z, w) exceeds Q(z) by {k_gap:.3g} at z = {z_samples[idx]:.6g}, w = {w:.6g}",
                witness=(complex(z_samples[idx]), complex(w), 0.0),
                value=float(K[idx]),
                bound=float(Qv[idx]),
            )

    worst_kt = -np.inf
    for z0 in probe_points:
        q1 = family(z0)
        samples = z_samples[np.abs(z_samples - z0) > 1e-9]
        Q1v = q1(samples)
        for w in w_values:
            mu, nu = coefficient_fields(spec, samples, np.full_like(samples, w), strict=False)
            for theta in thetas:
                KT = tangential_dilatation(mu, nu, samples, z0, theta)
                with np.errstate(invalid="ignore"):
                    gap = np.where(np.isinf(Q1v), -np.inf, KT - Q1v)
                kt_gap = float(np.nanmax(gap))
                worst_kt = max(worst_kt, kt_gap)
                if kt_gap > 1e-9:
                    idx = int(np.nanargmax(gap))
                    raise BoundViolation(
                        f"K^T exceeds Q1 by {kt_gap:.3g} at z = {samples[idx]:.6g}, "
                        f"w = {w:.6g}, theta = {theta:.4g}",
                        witness=(complex(samples[idx]), complex(w), float(theta)),
                        value=float(KT[idx]),
                        bound=float(Q1v[idx]),
                    )

    def probe_audit(z0):
        q1 = family(z0)
        delta = delta_fraction * max(spec.support_radius - abs(z0), 1e-6)
        fmo = fmo_estimate(q1, z0, eps_ladder)
        div = divergence_integral(q1, z0, delta, eps_ladder)
        ok = fmo.verdict == LIKELY_FMO or div.verdict == DIVERGENT
        return ProbeResult(z0=z0, fmo=fmo, divergence=div, hypothesis_ok=ok)

    workers = int(os.environ.get("BELTRAMI_THREADS", "0")) or min(4, len(probe_points) or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        probes = list(pool.map(probe_audit, probe_points))

    report = ConditionReport(
        label=spec.label,
        bound_samples=len(z_samples) * len(w_values) * (n_theta * len(probe_points) + 1),
        max_k_minus_q=worst_k,
        max_kt_minus_q1=worst_kt,
        probes=probes,
    )
    return report
