"""Fixed-point solver for the linear two-characteristic equation.

Solves f_zbar = mu f_z + nu conj(f_z) for measurable, compactly
supported, uniformly elliptic coefficient grids via the principal-
solution ansatz f = id + T omega with omega = f_zbar. Substituting the
ansatz turns the equation into

    omega = mu (1 + S omega) + nu conj(1 + S omega),

a contraction on L2 with factor k = sup(|mu| + |nu|) < 1 because S is an
isometry, so Picard iteration from omega = 0 converges geometrically.
The assembled solution carries its derivative grids from the ansatz
relations f_z = 1 + S omega, f_zbar = omega (spectrally exact), and is
normalised to f(0) = 0, |f(1)| = 1: translation and positive real
scaling preserve the equation exactly, while the rotation that would pin
arg f(1) = 0 would conjugate nu, so only arg f(1) is reported.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import grid
from .errors import DegenerateNormalization, MaxIterations, NotContractive
from .grid import GridField
from .transforms import beurling_transform, cauchy_transform


@dataclass(frozen=True)
class LinearProblem:
    """Coefficient grids with a certified ellipticity bound |mu|+|nu| <= k_bound."""

    mu: GridField
    nu: GridField
    k_bound: float

    def __post_init__(self):
        if not self.mu.same_geometry(self.nu):
            raise ValueError("mu and nu must share box and resolution")
        s = np.abs(self.mu.data) + np.abs(self.nu.data)
        smax = float(s.max())
        if smax > self.k_bound + 1e-12:
            raise ValueError(
                f"coefficients exceed the declared bound: max |mu|+|nu| = {smax:.6g} "
                f"> k_bound = {self.k_bound:.6g}"
            )
        # support must stay inside the concentric half-box
        jj, kk = np.nonzero(s > 0)
        if len(jj):
            ax = -self.mu.L + self.mu.h * np.arange(self.mu.n)
            reach = max(
                abs(ax[jj.min()]), abs(ax[jj.max()]), abs(ax[kk.min()]), abs(ax[kk.max()])
            )
            if reach >= self.mu.L / 2 + self.mu.h:
                raise ValueError(
                    f"coefficient support reaches {reach:.3g}, outside the half-box "
                    f"{self.mu.L / 2:.3g}; enlarge the box"
                )


@dataclass
class IterationTrace:
    """Per-step L2 update norms of the Picard iteration."""

    update_norms: list = field(default_factory=list)
    ratios: list = field(default_factory=list)  # recorded from step 2 on
    steps: int = 0
    converged: bool = False

    def record(self, update_norm: float):
        if self.update_norms and self.update_norms[-1] > 0:
            self.ratios.append(update_norm / self.update_norms[-1])
        self.update_norms.append(update_norm)
        self.steps += 1

    @property
    def contraction_estimate(self):
        """Conservative contraction factor: the largest observed update ratio."""
        return max(self.ratios) if self.ratios else None


@dataclass
class Normalization:
    translation: complex
    scale: float
    arg_f1: float


@dataclass
class Solution:
    """Mapped grid with derivative grids and solve metadata."""

    f: GridField
    fz: GridField
    fzbar: GridField
    rung: int
    trace: IterationTrace
    normalization: Normalization
    residual_l2_rel: float
    support_radius: float
    label: str = ""

    @property
    def derivative_pair(self):
        return grid.DerivativePair(self.fz, self.fzbar)


def picard_step(omega: GridField, prob: LinearProblem) -> GridField:
    """One application of omega -> mu (1 + S omega) + nu conj(1 + S omega)."""
    s = beurling_transform(omega)
    dfz = 1.0 + s.data
    return GridField(omega.L, prob.mu.data * dfz + prob.nu.data * np.conj(dfz))


def normalize_solution(f, fz, fzbar, L, n):
    """Pin f(0) = 0 and |f(1)| = 1 by translation and positive real scaling."""
    f0 = complex(GridField(L, f).interp(0.0 + 0.0j))
    f_shift = f - f0
    f1 = complex(GridField(L, f_shift).interp(1.0 + 0.0j))
    if abs(f1) < 1e-12:
        raise DegenerateNormalization(f"|f(1) - f(0)| = {abs(f1):.3g} below 1e-12")
    scale = 1.0 / abs(f1)
    norm = Normalization(translation=f0, scale=scale, arg_f1=float(np.angle(f1)))
    return scale * f_shift, scale * fz, scale * fzbar, norm


def solve_linear(prob: LinearProblem, cfg, support_radius=None, label="") -> Solution:
    """Iterate picard_step from omega = 0 until the relative L2 update drops
    below cfg.inner_tol, then assemble and normalise the principal solution."""
    if prob.k_bound >= 1.0:
        raise NotContractive(f"k_bound = {prob.k_bound:.6g} >= 1")
    L, n = prob.mu.L, prob.mu.n
    if L <= 1.0:
        raise ValueError("box must contain the normalization points 0 and 1 strictly")
    omega = grid.zeros(L, n)
    trace = IterationTrace()
    for _ in range(cfg.max_inner):
        omega_next = picard_step(omega, prob)
        update = float(np.linalg.norm(omega_next.data - omega.data) * omega.h)
        trace.record(update)
        omega = omega_next
        if update < cfg.inner_tol * max(1.0, omega.norm_l2()):
            trace.converged = True
            break
    if not trace.converged:
        raise MaxIterations(
            f"no convergence in {cfg.max_inner} Picard steps; last update {update:.3g}"
        )
    f = prob.mu.z + cauchy_transform(omega).data
    fz = 1.0 + beurling_transform(omega).data
    fzbar = omega.data
    f, fz, fzbar, norm = normalize_solution(f, fz, fzbar, L, n)
    res_field = fzbar - prob.mu.data * fz - prob.nu.data * np.conj(fz)
    residual = float(np.linalg.norm(res_field) / np.linalg.norm(fz))
    if residual > cfg.residual_tol:
        raise MaxIterations(
            f"converged iteration left residual {residual:.3g} > {cfg.residual_tol:.3g}"
        )
    return Solution(
        f=GridField(L, f),
        fz=GridField(L, fz),
        fzbar=GridField(L, fzbar),
        rung=0,
        trace=trace,
        normalization=norm,
        residual_l2_rel=residual,
        support_radius=L / 2 if support_radius is None else support_radius,
        label=label,
    )


# ---------------------------------------------------------------------------
# solution archives

def save_solution(sol: Solution, outdir, extra_meta=None):
    """Write f/fz/fzbar grids plus JSON metadata into a directory."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    sol.f.save(out / "f.blgf")
    sol.fz.save(out / "fz.blgf")
    sol.fzbar.save(out / "fzbar.blgf")
    meta = {
        "box": sol.f.L,
        "n": sol.f.n,
        "rung": sol.rung,
        "label": sol.label,
        "support_radius": sol.support_radius,
        "residual_l2_rel": sol.residual_l2_rel,
        "normalization": {
            "translation": [sol.normalization.translation.real, sol.normalization.translation.imag],
            "scale": sol.normalization.scale,
            "arg_f1": sol.normalization.arg_f1,
        },
        "trace": asdict(sol.trace),
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return out


def load_solution(indir) -> Solution:
    src = Path(indir)
    with open(src / "meta.json") as fh:
        meta = json.load(fh)
    tr = meta["trace"]
    trace = IterationTrace(
        update_norms=tr["update_norms"],
        ratios=tr["ratios"],
        steps=tr["steps"],
        converged=tr["converged"],
    )
    nm = meta["normalization"]
    norm = Normalization(
        translation=complex(nm["translation"][0], nm["translation"][1]),
        scale=nm["scale"],
        arg_f1=nm["arg_f1"],
    )
    return Solution(
        f=grid.load(src / "f.blgf"),
        fz=grid.load(src / "fz.blgf"),
        fzbar=grid.load(src / "fzbar.blgf"),
        rung=meta["rung"],
        trace=trace,
        normalization=norm,
        residual_l2_rel=meta["residual_l2_rel"],
        support_radius=meta["support_radius"],
        label=meta.get("label", ""),
    )
