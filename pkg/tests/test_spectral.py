import math
import warnings

import numpy as np
import pytest

from gluedanneal.column_model import column_hamiltonian, uniform_state
from gluedanneal.spectral import (
    DegenerateAnsatz,
    QuantizationSingularity,
    all_roots,
    analytic_F,
    analytic_G,
    analytic_gap10,
    ansatz_coefficients,
    ansatz_vector,
    crossing_point,
    eigen_low,
    f_quant,
    gap_profile,
    min_gap10,
    solve_quantization,
    stage_boundaries,
)


def test_eigen_low_diagonal(alpha):
    ev = eigen_low(column_hamiltonian(5, alpha, 0.0), 2)
    assert ev[0].value == pytest.approx(-alpha)
    assert ev[1].value == pytest.approx(0.0, abs=1e-15)


def test_eigen_low_contract(alpha):
    H = column_hamiltonian(12, alpha, 0.31)
    ev = eigen_low(H, 5)
    vals = [e.value for e in ev]
    assert vals == sorted(vals)
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(H.to_dense())[:5], atol=1e-12)
    V = np.array([e.vector for e in ev])
    np.testing.assert_allclose(V @ V.T, np.eye(5), atol=1e-10)
    for e in ev:
        assert np.linalg.norm(H.matvec(e.vector) - e.value * e.vector) <= 1e-10
        i = np.argmax(np.abs(e.vector))
        assert e.vector[i] > 0
    with pytest.raises(ValueError):
        eigen_low(H, 0)
    with pytest.raises(ValueError):
        eigen_low(H, H.dim + 1)


def test_ground_level_follows_F(alpha):
    lam = eigen_low(column_hamiltonian(10, alpha, 0.1), 1)[0].value
    assert abs(lam - analytic_F(alpha, 0.1)) <= 2**-5


def test_lambda2_at_half(alpha):
    lam = eigen_low(column_hamiltonian(10, alpha, 0.5), 3)[2].value
    assert abs(lam + 0.5 * math.cos(math.pi / 11)) <= 1 / 11**2


def test_f_quant_closed_form():
    for theta in (0.2, 1.0, 2.7):
        assert f_quant(math.pi / 2, 2, theta) == pytest.approx(-theta)


def test_f_quant_hyperbolic_branch_and_errors():
    q = 0.4
    n, th = 7, 1.3
    direct = (math.sinh((n + 2) * q) - th * math.sinh((n + 1) * q)) / (
        math.sinh((n + 1) * q) - th * math.sinh(n * q)
    )
    assert f_quant(-1j * q, n, th) == pytest.approx(direct, rel=1e-12)
    # large-argument (scaled) evaluation agrees with the limit e^q-like ratio
    assert f_quant(-1j * 2.0, 400, 1.3) == pytest.approx(
        (math.exp(2.0) - 1.3) / (1 - 1.3 * math.exp(-2.0)), rel=1e-12
    )
    with pytest.raises(ValueError):
        f_quant(0.3 + 0.2j, 4, 1.0)
    with pytest.raises(QuantizationSingularity):
        f_quant(0.0, 4, 0.5)


def test_hyperbolic_pole_at_qbar0(alpha):
    s = 0.1
    a1 = alpha / s
    q0 = math.log(a1)
    rel = [abs(math.sinh((n + 1) * q0) - a1 * math.sinh(n * q0)) / math.sinh((n + 1) * q0) for n in (5, 10, 20)]
    assert rel[0] > rel[1] > rel[2] and rel[2] < 1e-8


def test_hyperbolic_qbar1_product_tends_to_two(alpha):
    s = 0.2
    q1 = math.log(math.sqrt(2))
    errs = [abs(f_quant(-1j * q1, n, alpha / s) * f_quant(-1j * q1, n, alpha / (1 - s)) - 2) for n in (10, 20, 40)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-5


def test_hyperbolic_roots_n16(alpha):
    roots = solve_quantization(16, alpha, 0.15, "hyperbolic")
    assert len(roots) == 2
    ev = eigen_low(column_hamiltonian(16, alpha, 0.15), 2)
    for r, e in zip(sorted(roots, key=lambda r: r.lambda_), ev):
        assert abs(r.lambda_ - e.value) <= 1e-8
        assert r.residual <= 1e-9
        assert r.lambda_ == -2 * 0.15 * 0.85 * math.cosh(r.p)


def test_hyperbolic_roots_large_n(alpha):
    s = 0.15
    qs = sorted(r.p for r in solve_quantization(60, alpha, s, "hyperbolic"))
    assert qs[0] == pytest.approx(math.log(math.sqrt(2)), abs=1e-6)
    assert qs[1] == pytest.approx(math.log(alpha / s), abs=1e-6)


def test_goniometric_roots_basic(alpha):
    roots = solve_quantization(12, alpha, 0.4, "goniometric", k_max=3)
    assert len(roots) == 3
    ps = [r.p for r in roots]
    assert ps == sorted(ps)
    for r in roots:
        assert r.lambda_ == -2 * 0.4 * 0.6 * math.cos(r.p)
        assert r.residual <= 1e-9
        assert r.p == pytest.approx(r.k * math.pi / 13 + math.pi * r.x / 13**2)


def test_x_half_n10(alpha):
    root = solve_quantization(10, alpha, 0.5, "goniometric", k_max=1)[0]
    assert root.k == 1
    assert abs(root.x + 2.82) <= 0.3


def test_solve_quantization_rejects(alpha):
    with pytest.raises(ValueError):
        solve_quantization(8, alpha, 0.0, "hyperbolic")
    with pytest.raises(ValueError):
        solve_quantization(8, alpha, 0.3, "elliptic")


@pytest.mark.parametrize("n,s", [(10, 0.1), (16, 0.2), (16, 0.4), (24, 0.5), (12, 0.7)])
def test_ansatz_matches_eigen_low(alpha, n, s):
    H = column_hamiltonian(n, alpha, s)
    roots = all_roots(n, alpha, s)[:3]
    ev = eigen_low(H, 3)
    for r, e in zip(roots, ev):
        v = ansatz_vector(r, n, alpha, s)
        assert abs(v.value - e.value) <= 1e-8
        assert abs(np.dot(v.vector, e.vector)) >= 1 - 1e-6
        assert np.linalg.norm(H.matvec(v.vector) - r.lambda_ * v.vector) <= 1e-8


def test_ansatz_qbar1_is_u(alpha):
    n, s = 30, 0.2
    r = min(solve_quantization(n, alpha, s, "hyperbolic"), key=lambda r: abs(r.p - math.log(math.sqrt(2))))
    v = ansatz_vector(r, n, alpha, s).vector
    assert abs(np.dot(v, uniform_state(n).amplitudes.real)) >= 1 - 2 ** (-n / 2 + 2)


def test_ansatz_small_s_is_entrance(alpha):
    n, s = 10, 1e-3
    r = all_roots(n, alpha, s)[0]
    v = ansatz_vector(r, n, alpha, s).vector
    assert v[0] >= 1 - 1e-4


def test_ansatz_coefficients_rebuild_profile(alpha):
    n, s = 12, 0.3
    r = solve_quantization(n, alpha, s, "goniometric", k_max=1)[0]
    a, b, _, _ = ansatz_coefficients(r, n, alpha)
    j = np.arange(n + 1)
    gamma = a * np.exp(1j * r.p * j) + b * np.exp(-1j * r.p * j)
    v = ansatz_vector(r, n, alpha, s).vector[: n + 1]
    ratio = gamma / v
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-8)
    # ENTRANCE condition
    assert alpha / s * (a + b) == pytest.approx(a * np.exp(-1j * r.p) + b * np.exp(1j * r.p))


def test_ansatz_rejects_wrong_s(alpha):
    r = solve_quantization(8, alpha, 0.3, "goniometric", k_max=1)[0]
    with pytest.raises(ValueError):
        ansatz_vector(r, 8, alpha, 0.31)


def test_ansatz_degenerate_root(alpha):
    from gluedanneal.spectral import QuantizationRoot

    bogus = QuantizationRoot("goniometric", 0.7, -0.1, 0.0, 0.3, 1, 0.0)
    with pytest.raises(DegenerateAnsatz):
        ansatz_vector(bogus, 8, alpha)


def test_closed_forms(alpha):
    assert analytic_F(alpha, 0.0) == -alpha
    assert analytic_G(0.5) == pytest.approx(-0.530330, abs=1e-6)
    sx = crossing_point(alpha)
    assert sx == pytest.approx(0.25)
    assert crossing_point(0.2) == pytest.approx(0.141421, abs=1e-6)
    assert analytic_F(alpha, sx) == pytest.approx(analytic_G(sx), abs=1e-15)
    assert analytic_gap10(alpha, 0.0) == pytest.approx(alpha)
    assert analytic_gap10(alpha, sx) == pytest.approx(0.0, abs=1e-15)
    with pytest.warns(UserWarning):
        analytic_gap10(alpha, 0.4)


def test_gap10_closed_form_vs_numeric(alpha):
    ev = eigen_low(column_hamiltonian(12, alpha, 0.1), 2)
    assert abs(analytic_gap10(alpha, 0.1) - (ev[1].value - ev[0].value)) <= 2**-6


def test_gap_profile(alpha):
    grid = np.linspace(0.005, 0.995, 199)
    prof = gap_profile(10, alpha, grid)
    lower = grid <= 0.5
    assert abs(grid[lower][np.argmin(prof.delta10[lower])] - 0.25) <= 1e-2
    assert np.all(prof.delta10 >= 0) and np.all(prof.delta21 >= 0)
    np.testing.assert_allclose(prof.delta10, prof.delta10[::-1], atol=1e-12)
    np.testing.assert_allclose(prof.delta21, prof.delta21[::-1], atol=1e-12)
    d21 = gap_profile(10, alpha, [0.5]).delta21[0]
    assert abs(d21 - 0.009) <= 0.003
    with pytest.raises(ValueError):
        gap_profile(10, alpha, [0.0, 0.5])
    with pytest.raises(ValueError):
        gap_profile(10, alpha, [0.5, 0.4])


def test_min_gap10(alpha):
    g, s = min_gap10(12, alpha)
    assert abs(s - 0.25) <= 1e-2
    dense = gap_profile(12, alpha, np.linspace(0.2, 0.3, 2001)).delta10.min()
    assert g <= dense + 1e-15


def test_stage_boundaries(alpha):
    sb = stage_boundaries(10, alpha, 1.0)
    assert sb.delta == pytest.approx(1e-3)
    np.testing.assert_allclose([sb.s1, sb.s2, sb.s3, sb.s4], [0.249, 0.251, 0.749, 0.751])
    assert sb.s3 == 1 - sb.s2 and sb.s4 == 1 - sb.s1
    assert [sb.stage_of(x) for x in (0.0, 0.2485, 0.25, 0.5, 0.75, 0.9, 1.0)] == [1, 1, 2, 3, 4, 5, 5]
    with pytest.raises(ValueError):
        stage_boundaries(2, alpha, 5.0)
    with pytest.raises(ValueError):
        stage_boundaries(10, alpha, 0.0)


def test_analytic_gap_warning_silent_in_range(alpha):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        analytic_gap10(alpha, 0.2)


@pytest.mark.parametrize("n,s", [(8, 0.31), (14, 0.33), (15, 0.67)])
def test_negative_dip_is_not_a_root(alpha, n, s):
    # the cleared condition has a shallow negative dip here that never crosses zero
    roots = all_roots(n, alpha, s)
    vals = [e.value for e in eigen_low(column_hamiltonian(n, alpha, s), len(roots) + 2)]
    for r in roots:
        assert min(abs(v - r.lambda_) for v in vals) <= 1e-8
