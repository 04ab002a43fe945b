import numpy as np
import pytest

from beltrami_lab.coefficients import CoefficientSpec, builtin_catalog, parse_coefficient_expr
from beltrami_lab.errors import NotInvertible
from beltrami_lab.grid import from_function
from beltrami_lab.linear_solver import IterationTrace, Normalization, Solution
from beltrami_lab.quasilinear import SolverConfig
from beltrami_lab.transforms import derivatives
from beltrami_lab.verify import (
    continuity_modulus_fit,
    injectivity_check,
    inverse_dilatation_audit,
    jacobian_stats,
    residual,
    verification_report,
    write_ppm,
)

L, N = 2.0, 128


def make_solution(fn, fz_fn=None, fzbar_fn=None, n=N, support_radius=1.0):
    """Wrap analytic f (and optional analytic derivatives) as a Solution."""
    f = from_function(L, n, fn)
    if fz_fn is None or fzbar_fn is None:
        pair = derivatives(f, method="fd")
        fz = pair.fz if fz_fn is None else from_function(L, n, fz_fn)
        fzbar = pair.fzbar if fzbar_fn is None else from_function(L, n, fzbar_fn)
    else:
        fz = from_function(L, n, fz_fn)
        fzbar = from_function(L, n, fzbar_fn)
    return Solution(
        f=f, fz=fz, fzbar=fzbar, rung=0, trace=IterationTrace(),
        normalization=Normalization(0j, 1.0, 0.0), residual_l2_rel=0.0,
        support_radius=support_radius, label="synthetic",
    )


def zero_spec():
    return CoefficientSpec(mu_expr=parse_coefficient_expr("0"), label="zero")


def affine_solution(k=0.5, n=N):
    return make_solution(
        lambda z: z + k * np.conj(z),
        lambda z: np.ones_like(z),
        lambda z: np.full_like(z, k),
        n=n,
    )


# ---------------------------------------------------------------------------
# residual

def test_residual_identity_zero_spec():
    sol = make_solution(lambda z: z, lambda z: np.ones_like(z), lambda z: np.zeros_like(z))
    _, norms = residual(sol, zero_spec())
    assert norms["l2_rel"] == 0.0
    assert norms["sup"] == 0.0


def test_residual_closed_form_constant_disk():
    # analytic solution of mu = 0.5 chi_D with analytic derivative grids
    def f(z):
        zs = np.where(z == 0, 1, z)
        return np.where(np.abs(z) <= 1, z + 0.5 * np.conj(z), z + 0.5 / zs)

    def fz(z):
        zs = np.where(z == 0, 1, z)
        return np.where(np.abs(z) <= 1, 1.0 + 0 * z, 1 - 0.5 / zs**2)

    def fzbar(z):
        return np.where(np.abs(z) <= 1, 0.5 + 0 * z, 0 * z)

    sol = make_solution(f, fz, fzbar, n=256)
    _, norms = residual(sol, builtin_catalog("constant-disk", [0.5]))
    assert norms["l2_rel"] <= 1e-2


def test_residual_corrupted_solution_flagged():
    # scaling f by 1.1 inside the disk breaks the equation along the rim
    def f(z):
        zs = np.where(z == 0, 1, z)
        base = np.where(np.abs(z) <= 1, z + 0.5 * np.conj(z), z + 0.5 / zs)
        return np.where(np.abs(z) <= 1, 1.1 * base, base)

    field = from_function(L, 256, f)
    pair = derivatives(field, method="fd")
    sol = Solution(
        f=field, fz=pair.fz, fzbar=pair.fzbar, rung=0, trace=IterationTrace(),
        normalization=Normalization(0j, 1.0, 0.0), residual_l2_rel=0.0,
        support_radius=1.0,
    )
    _, norms = residual(sol, builtin_catalog("constant-disk", [0.5]))
    assert norms["l2_rel"] > 1e-1


# ---------------------------------------------------------------------------
# jacobian

def test_jacobian_stats_identity():
    sol = make_solution(lambda z: z, lambda z: np.ones_like(z), lambda z: np.zeros_like(z))
    stats = jacobian_stats(sol)
    assert stats["min"] == pytest.approx(1.0)
    assert stats["fraction_nonpositive"] == 0.0


def test_jacobian_stats_affine():
    stats = jacobian_stats(affine_solution(0.5))
    assert stats["min"] == pytest.approx(0.75)
    assert stats["fraction_nonpositive"] == 0.0


def test_jacobian_stats_orientation_reversing():
    sol = make_solution(lambda z: np.conj(z), lambda z: np.zeros_like(z),
                        lambda z: np.ones_like(z))
    stats = jacobian_stats(sol)
    assert stats["fraction_nonpositive"] == 1.0


# ---------------------------------------------------------------------------
# injectivity

def test_injectivity_identity_passes():
    sol = make_solution(lambda z: z)
    out = injectivity_check(sol)
    assert out["passed"]
    assert out["orientation_flips"] == 0
    assert out["folded_cell_count"] == 0


def test_injectivity_affine_passes():
    assert injectivity_check(affine_solution(0.5))["passed"]


def test_injectivity_square_map_fails_by_double_cover():
    sol = make_solution(lambda z: z * z)
    out = injectivity_check(sol)
    assert not out["passed"]
    assert out["folded_cell_count"] > 0


def test_injectivity_conjugate_fails_by_flips():
    sol = make_solution(lambda z: np.conj(z))
    out = injectivity_check(sol)
    assert not out["passed"]
    assert out["orientation_flips"] > 0


# ---------------------------------------------------------------------------
# inverse audit

def test_inverse_audit_affine_oracle():
    # g = f^{-1} of f = z + 0.5 conj(z): |g_w| = 1/(1-k^2), |g_wb| = k/(1-k^2),
    # K_{I,2}(g) = (1+k)/(1-k) = 3 uniformly
    sol = affine_solution(0.5, n=256)
    out = inverse_dilatation_audit(sol, p=2.0)
    assert out["located_fraction"] > 0.99
    assert out["mean_KIp"] == pytest.approx(3.0, rel=1e-3)
    assert out["max_KIp"] == pytest.approx(3.0, rel=1e-3)
    assert out["integral_KIp"] == pytest.approx(3.0 * out["window_area"], rel=1e-2)


def test_inverse_audit_p2_equals_map_dilatation_integral():
    sol = affine_solution(0.5, n=256)
    out = inverse_dilatation_audit(sol, p=1.5)
    # K_{I,1.5} = K_{I,2} * d^{0.5} with d = |g_w| - |g_wb| = (1-k)/(1-k^2) = 2/3
    d = (1 - 0.5) / (1 - 0.25)
    assert out["mean_KIp"] == pytest.approx(3.0 * d**0.5, rel=1e-3)
    assert out["integral_KI2"] == pytest.approx(3.0 * out["window_area"], rel=1e-2)


def test_inverse_audit_rejects_non_injective():
    sol = make_solution(lambda z: z * z)
    with pytest.raises(NotInvertible):
        inverse_dilatation_audit(sol, p=2.0)


def test_inverse_audit_order_range():
    with pytest.raises(ValueError):
        inverse_dilatation_audit(affine_solution(0.5), p=3.0)


# ---------------------------------------------------------------------------
# continuity fit

def test_continuity_fit_identity_finite():
    sol = make_solution(lambda z: z)
    out = continuity_modulus_fit(sol, q_l1_norm=2 * np.pi, margin=0.5)
    assert np.isfinite(out["C"]) and out["C"] > 0


def test_continuity_fit_affine_close_to_identity():
    ident = continuity_modulus_fit(make_solution(lambda z: z), 2 * np.pi, 0.5)
    affine = continuity_modulus_fit(affine_solution(0.5), 2 * np.pi, 0.5)
    assert affine["C"] <= 2.0 * ident["C"]        # bi-Lipschitz with constant 1.5


def test_continuity_fit_monotone_under_compact_shrinkage():
    sol = affine_solution(0.5)
    wide = continuity_modulus_fit(sol, 2 * np.pi, margin=0.4)
    narrow = continuity_modulus_fit(sol, 2 * np.pi, margin=0.6)
    assert narrow["C"] <= 1.1 * wide["C"]


# ---------------------------------------------------------------------------
# report and heatmaps

def test_verification_report_and_ppm(tmp_path):
    spec = builtin_catalog("constant-disk", [0.5])
    cfg = SolverConfig(grid_n=128, box=L, ladder=(2, 4))
    from beltrami_lab.quasilinear import solve_quasilinear

    sol, _ = solve_quasilinear(spec, cfg)
    report = verification_report(sol, spec, q_l1_norm=3.0 * np.pi)
    assert report.residual_l2_rel <= 1e-3
    assert report.jacobian["fraction_nonpositive"] == 0.0
    assert report.injectivity["passed"]
    assert report.inverse["mean_KIp"] == pytest.approx(3.0, rel=0.05)
    assert np.isfinite(report.continuity["C"])
    report.to_json(tmp_path / "verification.json")
    assert (tmp_path / "verification.json").exists()

    res_field, _ = residual(sol, spec)
    write_ppm(np.abs(res_field.data), tmp_path / "res.ppm")
    raw = (tmp_path / "res.ppm").read_bytes()
    assert raw.startswith(b"P6 128 128 255\n")
    assert len(raw) == len(b"P6 128 128 255\n") + 3 * 128 * 128
