"""Acceptance suite: the headline numerical claims this package commits
to, one test per criterion.  Each test prints a single

    [criterion NN] PASS/FAIL  <measured quantities vs pinned tolerance>

line (visible with -s, or in the captured output of a failing test) and
then asserts the criterion at exactly the stated tolerance.  Known
standing failure: the ellipsoid half of criterion 04 — the capacity
comparison holds with the opposite inequality on non-spherical bodies,
with measured ratios stable around 1.023 across refinement levels, so
the criterion as stated cannot pass; it is kept red deliberately rather
than loosened (the true-direction companion checks live in
test_ntd.py::test_capacity_comparison_true_direction).
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from scatterer.bie import assemble_single_layer
from scatterer.geometry import area, capacity, make_sphere_mesh
from scatterer.impedance import (
    AIR_WATER_TABLE,
    Constant,
    Friction,
    springy_from_physical,
)
from scatterer.ntd import build_ntd, eigenvalue_derivative_at_zero, spectrum, track_path
from scatterer.scatter import PlaneWave, dirichlet_limit_sweep, solve_impedance
from scatterer.smatrix import (
    conjugate_relation_check,
    far_field_operator,
    smatrix,
)
from scatterer.sphere_oracle import (
    find_root_secant,
    smatrix_pole_equation_springy,
    spherical_jn_yn,
)

FOUR_PI = 4.0 * math.pi
Z_HAT = np.array([0.0, 0.0, 1.0])
SMALL_KS = (0.005, 0.01, 0.02, 0.05)


def report(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def sphere_l4():
    return make_sphere_mesh(1.0, 4)


def cluster_mean_errors(spec0) -> list[float]:
    """Relative error of the first four static cluster means against
    -1/(n+1) on the unit sphere."""
    out, lo = [], 0
    for n in range(4):
        hi = lo + 2 * n + 1
        mean = float(np.mean(spec0.eigenvalues[lo:hi].real))
        exact = -1.0 / (n + 1)
        out.append(abs(mean - exact) / abs(exact))
        lo = hi
    return out


def test_criterion_01_sphere_static_clusters(sphere_l4, spec0_l3):
    spec4 = spectrum(build_ntd(sphere_l4, 0.0))
    worst4 = max(cluster_mean_errors(spec4))
    del spec4
    worst3 = max(cluster_mean_errors(spec0_l3))
    ok = worst4 <= 0.02 and worst3 <= 0.05
    report(1, ok, f"static cluster means n<=3: worst rel err "
                  f"{worst4:.2e} at level 4 (<=0.02), "
                  f"{worst3:.2e} at level 3 (<=0.05)")
    assert worst4 <= 0.02
    assert worst3 <= 0.05


def test_criterion_02_sphere_dispersion(sphere_l3, spec0_l3):
    ks = (0.1, 0.25, 0.5)
    specs = [spec0_l3] + [spectrum(build_ntd(sphere_l3, k)) for k in ks]
    sigma0 = track_path(specs, 0)[1:]
    errs = [abs(s - 1.0 / (-1.0 + 1j * k)) / abs(1.0 / (-1.0 + 1j * k))
            for s, k in zip(sigma0, ks)]
    ok = max(errs) <= 0.03
    report(2, ok, "tracked sigma_0(k) vs 1/(-1+ik): rel err "
                  + ", ".join(f"{e:.2e} at k={k}" for e, k in zip(errs, ks))
                  + " (<=0.03)")
    assert max(errs) <= 0.03


def test_criterion_03_derivative_formula(sphere_l3, sphere_deriv_spectra_l3,
                                         ellipsoid_l3,
                                         ellipsoid_deriv_spectra_l3):
    errs = {}
    for name, mesh, spectra in (
            ("sphere", sphere_l3, sphere_deriv_spectra_l3),
            ("ellipsoid", ellipsoid_l3, ellipsoid_deriv_spectra_l3)):
        der = eigenvalue_derivative_at_zero(mesh, 0, spectra=spectra)
        c0 = complex(spectra[1].projections[0])
        theory = -1j * c0 ** 2 / FOUR_PI
        errs[name] = abs(der.value - theory) / abs(theory)
    ok = max(errs.values()) <= 0.02
    report(3, ok, "FD sigma_0'(0) vs -i c_0^2/4pi: rel err "
                  f"{errs['sphere']:.2e} sphere, "
                  f"{errs['ellipsoid']:.2e} ellipsoid (<=0.02)")
    assert errs["sphere"] <= 0.02
    assert errs["ellipsoid"] <= 0.02


def test_criterion_04_capacity_bound(sphere_l3, spec0_l3, ellipsoid_l3,
                                     espec0_l3):
    ratios = {}
    for name, mesh, spec0 in (("sphere", sphere_l3, spec0_l3),
                              ("ellipsoid", ellipsoid_l3, espec0_l3)):
        cap = capacity(mesh, assemble_single_layer(mesh, 0.0).entries)
        bound = area(mesh) / (FOUR_PI * cap)
        ratios[name] = abs(spec0.eigenvalues[0]) / bound
    ok = ratios["sphere"] <= 1.02 and ratios["ellipsoid"] <= 1.02
    report(4, ok, "|sigma_0(0)| * 4 pi C / S: sphere "
                  f"{ratios['sphere']:.4f} (near-equality), ellipsoid "
                  f"{ratios['ellipsoid']:.4f} (<=1.02); the ellipsoid "
                  "value sits above 1.02 at every refinement level and "
                  "extrapolates to ~1.022 on the continuum, so the bound "
                  "as stated holds only with the opposite inequality off "
                  "the sphere")
    assert abs(ratios["sphere"] - 1.0) <= 0.02
    assert ratios["ellipsoid"] <= 1.02, (
        "the capacity comparison is an upper bound for |sigma_0(0)| only "
        "on the sphere; measured ratio "
        f"{ratios['ellipsoid']:.4f} exceeds the 1.02 allowance and is "
        "mesh-converged (see test_ntd.py for the reversed-direction "
        "checks)")


def test_criterion_05_sum_rule(spec0_l3, espec0_l3, ellipsoid_l3):
    c0sq = abs(spec0_l3.projections[0]) ** 2
    total = float(np.sum(np.abs(spec0_l3.projections) ** 2))
    mono_err = abs(c0sq - FOUR_PI) / FOUR_PI
    total_err = abs(total - FOUR_PI) / FOUR_PI
    csum = np.cumsum(np.abs(espec0_l3.projections) ** 2)
    s_ell = area(ellipsoid_l3)
    nondecreasing = bool(np.all(np.diff(csum) >= 0.0))
    below = float(csum[-1]) <= s_ell * (1.0 + 1e-12)
    ok = (mono_err <= 0.02 and total_err <= 0.02
          and nondecreasing and below)
    report(5, ok, f"sphere c_0^2 = 4pi(1-{mono_err:.2e}), full sum "
                  f"4pi(1-{total_err:.2e}) (<=0.02); ellipsoid partial "
                  f"sums nondecreasing={nondecreasing}, top "
                  f"{float(csum[-1]):.6f} <= S={s_ell:.6f}")
    assert mono_err <= 0.02
    assert total_err <= 0.02
    assert nondecreasing
    assert below


def test_criterion_06_optical_theorem(sphere_l3, ellipsoid_l3):
    defects = {}
    for name, mesh in (("sphere", sphere_l3), ("ellipsoid", ellipsoid_l3)):
        sol = solve_impedance(mesh, 0.5, Constant(1.0),
                              PlaneWave(alpha=Z_HAT, k=0.5))
        defects[name] = (abs(sol.sigma_farfield - sol.sigma_flux)
                         / sol.sigma_farfield)
    ok = max(defects.values()) <= 0.01
    report(6, ok, "|sigma_ff - sigma_flux|/sigma_ff at k=0.5, gamma=1: "
                  f"{defects['sphere']:.2e} sphere, "
                  f"{defects['ellipsoid']:.2e} ellipsoid (<=0.01)")
    assert defects["sphere"] <= 0.01
    assert defects["ellipsoid"] <= 0.01


def test_criterion_07_resonant_blow_up(resonant_sweep_l3):
    ks = np.array(sorted(resonant_sweep_l3))
    sigma = np.array([resonant_sweep_l3[k].sigma_farfield for k in ks])
    ratios = ks ** 2 * sigma / FOUR_PI
    worst = float(np.max(np.abs(ratios - 1.0)))
    exponent = float(np.polyfit(np.log(ks), np.log(sigma), 1)[0])
    ok = worst <= 0.05 and 1.9 <= -exponent <= 2.1
    report(7, ok, f"gamma=-1: worst |k^2 sigma/4pi - 1| = {worst:.2e} "
                  f"over k in {tuple(ks)} (<=0.05); fitted exponent "
                  f"{-exponent:.3f} in [1.9, 2.1]")
    assert worst <= 0.05
    assert 1.9 <= -exponent <= 2.1


def test_criterion_08_resonant_isotropy(resonant_sweep_l3):
    amps = np.abs(resonant_sweep_l3[0.01].far_field.values)
    spread = float(np.std(amps) / np.mean(amps))
    ok = spread <= 0.1
    report(8, ok, f"gamma=-1, k=0.01: stddev/mean of |u_inf| = "
                  f"{spread:.2e} (<=0.1)")
    assert spread <= 0.1


def test_criterion_09_silent_impedance_bounded(sphere_l2):
    sigma = {}
    for k in SMALL_KS:
        sol = solve_impedance(sphere_l2, k, Constant(-2.0),
                              PlaneWave(alpha=Z_HAT, k=k))
        sigma[k] = sol.sigma_farfield
    top = max(sigma.values())
    ok = top <= 10.0 * sigma[0.05]
    report(9, ok, f"gamma=-2: max sigma {top:.2f} <= 10 x sigma(0.05) "
                  f"= {10.0 * sigma[0.05]:.2f} over k in {SMALL_KS}")
    assert top <= 10.0 * sigma[0.05]


def test_criterion_10_springy_pole_gaps(springy_sweep_l2):
    gaps = [r.gap for r in springy_sweep_l2.rows]
    worst = max(gaps)
    # oracle side: exact quadratic root vs asymptote, stiffness x4 steps
    oracle_gaps = []
    for Z in (100.0, 400.0, 1600.0):
        exact = (math.sqrt(4.0 * Z - 1.0) - 1j) / (2.0 * Z)
        asym = 1.0 / math.sqrt(Z) - 0.5j / Z
        oracle_gaps.append(abs(exact - asym))
    r1 = oracle_gaps[0] / oracle_gaps[1]
    r2 = oracle_gaps[1] / oracle_gaps[2]
    ok = worst <= 3e-3 and 6.0 <= r1 <= 10.0 and 6.0 <= r2 <= 10.0
    report(10, ok, f"Z in (100, 400, 1600): worst |refined - predicted| "
                   f"= {worst:.2e} (<=3e-3); oracle-root gap ratios "
                   f"{r1:.2f}, {r2:.2f} per 4x step (8 +- 2)")
    assert worst <= 3e-3
    assert 6.0 <= r1 <= 10.0
    assert 6.0 <= r2 <= 10.0


def test_criterion_11_dirichlet_limit(sphere_l2):
    finals, monotone = {}, {}
    for delta in (0.0, math.pi / 2.0):
        table = dirichlet_limit_sweep(sphere_l2, 0.5, delta,
                                      (10.0, 1e2, 1e3, 1e4))
        rel = table.trace_distances / table.trace_norm
        finals[delta] = float(rel[-1])
        monotone[delta] = bool(np.all(np.diff(rel) < 0.0))
    ok = all(v <= 0.05 for v in finals.values()) and all(monotone.values())
    report(11, ok, "gamma = t e^{i delta} -> sound-soft at k=0.5: final "
                   "rel trace distance "
                   f"{finals[0.0]:.2e} (delta=0), "
                   f"{finals[math.pi / 2.0]:.2e} (delta=pi/2) (<=0.05), "
                   f"decreasing across t in (10, 1e2, 1e3, 1e4): "
                   f"{all(monotone.values())}")
    for delta in (0.0, math.pi / 2.0):
        assert finals[delta] <= 0.05
        assert monotone[delta]


def test_criterion_12_smatrix_unitarity(sphere_l3, sphere_l4):
    nd3 = build_ntd(sphere_l3, 0.5)
    d3 = smatrix(far_field_operator(sphere_l3, 0.5, Constant(1.0),
                                    ntd_matrix=nd3)).unitarity_defect()
    conj_defect = conjugate_relation_check(sphere_l3, 0.5,
                                           Constant(1.0 + 0.5j),
                                           ntd_matrix=nd3)
    del nd3
    d4 = smatrix(far_field_operator(sphere_l4, 0.5,
                                    Constant(1.0))).unitarity_defect()
    shrink = d3 / d4
    ok = d4 <= 0.03 and shrink >= 1.3 and conj_defect <= 0.05
    report(12, ok, f"||SS* - I||_2 = {d4:.2e} at level 4 (<=0.03), "
                   f"shrink level 3 -> 4 = {shrink:.2f} (>=1.3); "
                   f"conjugate-relation defect {conj_defect:.2e} for "
                   f"gamma=1+0.5i (<=0.05)")
    assert d4 <= 0.03
    assert shrink >= 1.3
    assert conj_defect <= 0.05


def _springy_zero_equation(n: int, k: complex, stiffness: float) -> complex:
    gv = -stiffness * k * k
    j, jp, y, yp = spherical_jn_yn(n, k)
    return k * (jp[n] - 1j * yp[n]) - gv * (j[n] - 1j * y[n])


def test_criterion_13_pole_zero_conjugation():
    Z = 100.0
    worst = 0.0
    for n, k_start in ((0, 0.0999 - 0.005j), (1, 0.1414 - 0.001j)):
        for sign in (1, -1):
            start = sign * k_start.real + 1j * k_start.imag
            pole = find_root_secant(
                lambda k: smatrix_pole_equation_springy(n, k, Z),
                start, start * 1.0001)
            zero = find_root_secant(
                lambda k: _springy_zero_equation(n, k, Z),
                np.conj(pole) * 1.001, np.conj(pole) * 0.999)
            worst = max(worst, abs(zero - np.conj(pole)))
    ok = worst <= 1e-8
    report(13, ok, "zeros of s_n for the reflected impedance vs "
                   f"conj(poles), n in (0, 1), Z=100: worst gap "
                   f"{worst:.1e} (<=1e-8)")
    assert worst <= 1e-8


def test_criterion_14_calibration_formulas():
    h = 1e-3
    cal = springy_from_physical(h=h, **AIR_WATER_TABLE)
    t = AIR_WATER_TABLE
    beta_exact = t["gamma_g"] * h / (t["rho_g"] * t["c_g"] ** 2)
    beta_ok = cal.beta == pytest.approx(beta_exact, rel=1e-14)
    coeff_ok = cal.coeff_per_h == pytest.approx(1.87e4, rel=0.02)
    reported_ok = (cal.reported_coeff_per_h == 2.58e4
                   and cal.discrepancy_flag(t["gamma_g"]))
    signs = []
    for eps in (1e-4, -1e-4):
        model = Friction(beta=cal.beta, rho_l=t["rho_l"], epsilon=eps,
                         c_l=t["c_l"])
        signs.append(all(model.gamma(k).imag < 0.0 if eps > 0
                         else model.gamma(k).imag > 0.0
                         for k in (0.05, 0.2, 0.5)))
    friction_ok = all(signs)
    ok = beta_ok and coeff_ok and reported_ok and friction_ok
    report(14, ok, f"beta = gamma_g h / (rho_g c_g^2) reproduced to "
                   f"rounding; Z/h = {cal.coeff_per_h:.4g} vs quoted "
                   f"{cal.reported_coeff_per_h:.4g} (ratio "
                   f"{cal.reported_to_formula_ratio:.3f}, flagged "
                   f"consistent with a doubled gas index); friction "
                   f"sign Im gamma < 0 iff epsilon > 0: {friction_ok}")
    assert beta_ok
    assert coeff_ok
    assert reported_ok
    assert friction_ok
