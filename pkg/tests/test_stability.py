import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randrk.stability import (
    R0,
    SQRT_2E,
    F_quadrature,
    F_value,
    RegionKind,
    discriminant,
    f_ab,
    in_region,
    interval_endpoints,
    ln_moment2,
    mc_verify,
    ms_moment,
    p_eval,
    phi_mid,
    phi_ms,
    region_area,
    region_grid,
    singular_case,
)

coord = st.floats(-4.0, 2.0, allow_nan=False)
SQ3 = math.sqrt(3.0) / 2.0


def mp_moment(a, b, power):
    """``integral_0^1 (ln f_ab)^power`` in 30-digit arithmetic, split at the vertex."""
    mpmath.mp.dps = 30
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    z = mpmath.mpc(a, b)

    def g(t):
        return mpmath.log(abs(t * z * z + z + 1) ** 2) ** power

    pts = [0, 1]
    w = z * z
    if abs(w) > 0:
        # real minimiser of |t w + z + 1|
        t0 = -mpmath.re((z + 1) * mpmath.conj(w)) / abs(w) ** 2
        if 0 < t0 < 1:
            pts = [0, t0, 1]
    return float(mpmath.quad(g, pts))


# amplification factor and mean-square functionals -------------------------

def test_p_eval_examples():
    assert p_eval(0.0, 0.3) == 1.0
    assert p_eval(-1.0, 0.0) == 0.0
    assert p_eval(-1.0, 0.5) == 0.5


def test_ms_moment_examples():
    assert ms_moment(0.0) == 1.0
    assert ms_moment(-1.0) == pytest.approx(1.0 / 3.0, rel=1e-15)
    tau = np.random.default_rng(0).random(10**6)
    assert abs(np.mean(np.abs(p_eval(-1.0, tau)) ** 2) - 1.0 / 3.0) < 5 * np.std(tau**2) / 1e3


@given(coord, coord)
def test_ms_moment_moment_expansion(a, b):
    # E|tau w + u|^2 with E tau = 1/2 and E tau^2 = 1/3
    z = complex(a, b)
    w, u = z * z, z + 1
    want = abs(w) ** 2 / 3 + (w * u.conjugate()).real + abs(u) ** 2
    assert ms_moment(z) == pytest.approx(want, rel=1e-12, abs=1e-12)
    assert ms_moment(z) - 1.0 == pytest.approx(phi_ms(z), rel=1e-15, abs=1e-15)


@given(coord, coord)
def test_phi_mid_is_midpoint_modulus(a, b):
    z = complex(a, b)
    assert phi_mid(z) == pytest.approx(abs(0.5 * z * z + z + 1) ** 2 - 1.0, rel=1e-12, abs=1e-12)


@given(coord, coord)
def test_phi_gap_is_quartic(a, b):
    z = complex(a, b)
    gap = phi_ms(z) - phi_mid(z)
    assert gap >= 0.0
    assert gap == pytest.approx(abs(z) ** 4 / 12.0, rel=1e-9, abs=1e-12)


def test_phi_values():
    assert phi_ms(0.0) == 0.0 and phi_mid(0.0) == 0.0
    assert phi_mid(-1.0) == -0.75
    assert phi_ms(-1.0) == pytest.approx(-2.0 / 3.0, rel=1e-15)


# f_ab, discriminant, singular cases ---------------------------------------

def test_f_ab_examples():
    t = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(f_ab(0.0, 0.0, t), np.ones_like(t))
    np.testing.assert_allclose(f_ab(-1.0, 0.0, t), t**2, rtol=0, atol=1e-16)


def test_f_ab_matches_complex_modulus():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-3, 1, 10**4), rng.uniform(-3, 3, 10**4)
    t = rng.random(10**4)
    want = np.abs(p_eval(a + 1j * b, t)) ** 2
    np.testing.assert_allclose(f_ab(a, b, t), want, rtol=1e-14, atol=1e-14)


def test_f_ab_matches_expanded_quadratic():
    rng = np.random.default_rng(2)
    a, b, t = rng.uniform(-3, 1, 1000), rng.uniform(-3, 3, 1000), rng.random(1000)
    quad = ((a * a + b * b) ** 2 * t * t + 2 * (a * a + a**3 + a * b * b - b * b) * t
            + (a + 1) ** 2 + b * b)
    scale = (a * a + b * b) ** 2 + 2 * np.abs(a * a + a**3 + a * b * b - b * b) + (a + 1) ** 2 + b * b
    assert np.all(np.abs(f_ab(a, b, t) - quad) <= 1e-13 * scale)


def test_discriminant_examples():
    assert discriminant(0.7, 0.0) == 0.0
    assert discriminant(-1.0, 1.0) == 0.0
    a = -0.3
    assert abs(discriminant(a, math.sqrt(-a * a - 2 * a))) < 1e-15


@given(coord, coord)
def test_discriminant_is_b2_minus_4ac(a, b):
    A = (a * a + b * b) ** 2
    B = 2 * (a * a + a**3 + a * b * b - b * b)
    C = (a + 1) ** 2 + b * b
    d = discriminant(a, b)
    assert d <= 0.0
    assert d == pytest.approx(B * B - 4 * A * C, abs=1e-9 * (B * B + 4 * A * C + 1))


@pytest.mark.parametrize("a, b, case", [
    (-1.0, 0.0, "case1"),
    (-3.0, 0.0, "case1"),
    (-0.5, SQ3, "case2"),
    (-1.0, 1.0, "case2"),
    (1.0, 1.0, "regular"),
    (0.0, 0.0, "regular"),
    (-0.7, 0.0, "off_unit_special"),
    (-0.25, math.sqrt(0.4375), "off_unit_special"),
])
def test_singular_case(a, b, case):
    assert singular_case(a, b) == case


@pytest.mark.parametrize("a", [-1.7, -1.0, -0.6, -0.5])
def test_case2_root_lies_in_unit_interval(a):
    b = math.sqrt(-a * a - 2 * a)
    z = complex(a, b)
    t0 = -((z + 1) * (z * z).conjugate()).real / abs(z * z) ** 2
    assert 0.0 <= t0 <= 1.0 + 1e-12
    assert f_ab(a, b, t0) < 1e-12


# F -------------------------------------------------------------------------

def test_F_special_points_exact():
    assert F_value(0.0, 0.0) == 0.0
    assert F_value(-1.0, 0.0) == -1.0
    assert F_value(-0.5, SQ3) == -1.0
    assert F_value(-0.5, -SQ3) == -1.0


def test_F_at_minus_two():
    assert abs(F_value(-2.0, 0.0) - (0.75 * math.log(3.0) - 1.0)) < 1e-12


def test_F_quadrature_examples():
    assert F_quadrature(0.0, 0.0) == 0.0
    assert F_quadrature(-1.0, 0.0) == pytest.approx(-1.0, abs=1e-12)
    assert F_quadrature(-2.0, 0.0) == pytest.approx(0.75 * math.log(3.0) - 1.0, abs=1e-12)


@pytest.mark.parametrize("a, b", [
    (0.3, 0.4), (-2.5, 0.0), (-1.5, 0.0), (-0.2, 0.0), (0.8, 0.0), (-1.0, 1.0), (-1.8, 0.6),
    (-0.3, math.sqrt(0.51)), (-2.0, 1.5), (-0.5, 2.5), (-1.0, 1e-7), (-1.0, 1.0 + 1e-7), (1e-4, 2e-4),
])
def test_F_matches_high_precision_quadrature(a, b):
    want = 0.5 * mp_moment(a, b, 1)
    assert F_value(a, b) == pytest.approx(want, abs=1e-10)
    assert F_quadrature(a, b) == pytest.approx(want, abs=1e-10)


def test_F_closed_form_agrees_with_quadrature_sample():
    rng = np.random.default_rng(5)
    a, b = rng.uniform(-3, 1, 400), rng.uniform(-3, 3, 400)
    closed = F_value(a, b)
    quad = np.array([F_quadrature(x, y) for x, y in zip(a, b)])
    assert np.max(np.abs(closed - quad)) < 1e-8


def test_F_vectorised_matches_scalar():
    a = np.array([[-1.0, -2.0], [0.3, -0.5]])
    b = np.array([[0.0, 0.0], [0.4, SQ3]])
    v = F_value(a, b)
    assert v.shape == (2, 2)
    for idx in np.ndindex(2, 2):
        assert v[idx] == F_value(a[idx], b[idx])


@settings(max_examples=300)
@given(coord, coord)
def test_F_symmetric(a, b):
    assert F_value(a, b) == F_value(a, -b)
    for phi in (phi_ms, phi_mid):
        assert phi(complex(a, b)) == phi(complex(a, -b))


@settings(max_examples=100)
@given(st.floats(0.0, 3.0), st.floats(-3.0, 3.0))
def test_F_nonnegative_in_right_half_plane(a, b):
    assert F_value(a, b) >= -1e-12


# second moment --------------------------------------------------------------

def test_ln_moment2_examples():
    assert ln_moment2(0.0, 0.0) == 0.0
    assert ln_moment2(-1.0, 0.0) == pytest.approx(8.0, rel=1e-14)
    # f = (1 - t)^2 here, so the moment is 4 * integral of ln(u)^2 = 8
    assert ln_moment2(-0.5, SQ3) == pytest.approx(8.0, rel=1e-14)


@pytest.mark.parametrize("a, b", [
    (-1.5, 0.0), (-3.0, 0.0), (-1.2, math.sqrt(-1.44 + 2.4)), (-0.8, math.sqrt(-0.64 + 1.6)),
    (0.4, -0.3), (-2.2, 1.1), (-0.3, 0.0),
])
def test_ln_moment2_matches_high_precision(a, b):
    assert ln_moment2(a, b) == pytest.approx(mp_moment(a, b, 2), rel=1e-9, abs=1e-10)


@given(coord, coord)
def test_ln_moment2_dominates_square_of_mean(a, b):
    # Jensen: E X^2 >= (E X)^2 with X = ln f_ab(tau) and E X = 2F
    assert ln_moment2(a, b) >= (2 * F_value(a, b)) ** 2 - 1e-9


# regions -------------------------------------------------------------------

def test_region_kind_parse():
    assert RegionKind.parse("sp") is RegionKind.SP
    assert RegionKind.parse("MID") is RegionKind.Mid
    with pytest.raises(ValueError):
        RegionKind.parse("xx")


def test_in_region_examples():
    for kind in RegionKind:
        assert in_region(-1.0, kind)
        assert not in_region(1.0, kind)
    assert in_region(-2.0, "as") and in_region(-2.0, "sp")
    assert not in_region(-2.0, "mid") and not in_region(-2.0, "ms")
    # boundary points are excluded
    assert not in_region(0.0, "as")


def test_sp_is_as():
    rng = np.random.default_rng(3)
    for z in rng.uniform(-3, 1, 50) + 1j * rng.uniform(-3, 3, 50):
        assert in_region(z, "sp") == in_region(z, "as")


def test_interval_endpoints():
    assert interval_endpoints("mid") == (-2.0, 0.0)
    x0, right = interval_endpoints("ms")
    assert right == 0.0
    assert abs(x0**3 + 3 * x0**2 + 6 * x0 + 6) < 1e-12
    assert x0 == pytest.approx(-1.59607, abs=1e-5)
    xas, _ = interval_endpoints("as")
    assert -SQRT_2E <= xas <= -2.0
    assert abs(F_value(xas, 0.0)) < 1e-10
    assert interval_endpoints("sp") == interval_endpoints("as")


def test_grid_right_half_plane_empty():
    for kind in RegionKind:
        g = region_grid(kind, (0.01, 2.0, -1.0, 1.0), 20, 20)
        assert not g.membership.any()


def test_grid_pixel_at_minus_one_is_member():
    g = region_grid("ms", (-1.05, -0.95, -0.05, 0.05), 2, 2)
    assert g.membership.all()


@pytest.mark.parametrize("ny", [10, 11])
@pytest.mark.parametrize("kind", list(RegionKind))
def test_grid_symmetric_bitwise(kind, ny):
    g = region_grid(kind, (-3.0, 0.5, -2.0, 2.0), 13, ny)
    assert g.values.tobytes() == g.values[::-1].tobytes()
    np.testing.assert_array_equal(g.y, -g.y[::-1])
    assert g.n_singular == 0


def test_grid_matches_pointwise_indicator():
    g = region_grid("as", (-3.0, 0.5, -1.0, 2.5), 7, 5)
    for iy, y in enumerate(g.y):
        for ix, x in enumerate(g.x):
            assert g.values[iy, ix] == F_value(x, y)


def test_grid_csv_order():
    g = region_grid("mid", (-1.0, 0.0, -1.0, 1.0), 2, 2)
    lines = g.to_csv().splitlines()
    assert lines[0] == "x,y,value,member"
    pts = [tuple(map(float, ln.split(",")[:2])) for ln in lines[1:]]
    assert pts == [(-0.75, -0.5), (-0.25, -0.5), (-0.75, 0.5), (-0.25, 0.5)]


def test_grid_validation():
    with pytest.raises(ValueError):
        region_grid("ms", (0, 1, 0, 1), 1, 5)
    with pytest.raises(ValueError):
        region_grid("ms", (1, 0, 0, 1), 5, 5)


def test_area_coarse_resolution():
    areas = {k: region_area(k, 200) for k in ("ms", "as", "mid")}
    assert areas["ms"].area == pytest.approx(3.92, abs=0.05)
    assert areas["as"].area == pytest.approx(5.38, abs=0.05)
    assert areas["mid"].area == pytest.approx(5.87, abs=0.05)
    assert areas["ms"].area <= areas["as"].area <= areas["mid"].area
    assert region_area("sp", 200).area == areas["as"].area
    assert areas["ms"].to_csv().startswith("ms,")


def test_area_resolution_floor():
    with pytest.raises(ValueError):
        region_area("ms", 50)


def test_mid_region_contains_unit_disc_around_minus_one():
    # with w = z + 1: |w^2/2 + 1/2| <= (|w|^2 + 1)/2 < 1
    rng = np.random.default_rng(4)
    r, th = np.sqrt(rng.random(2000)) * 0.99, rng.uniform(0, 2 * np.pi, 2000)
    z = -1 + r * np.exp(1j * th)
    assert np.all(phi_mid(z) < 0)


# Monte-Carlo verification --------------------------------------------------

def test_mc_verify_decay_at_minus_one():
    v = mc_verify(-1.0, "as", 500, 50)
    assert v.verdict == "agree" and v.mc_member
    assert v.drift == pytest.approx(-1.0, abs=0.05)


def test_mc_verify_growth_at_minus_two_and_a_half():
    v = mc_verify(-2.5, "as", 1000, 100)
    assert not v.closed_form_member
    assert v.mc_member is False and v.verdict == "agree"
    assert v.drift == pytest.approx(F_value(-2.5, 0.0), abs=0.02)


def test_mc_verify_origin_inconclusive():
    for kind in ("as", "ms"):
        assert mc_verify(0.0, kind, 100, 10).verdict == "inconclusive"


def test_mc_verify_mid_is_deterministic():
    v = mc_verify(-1.0, "mid", 10, 3)
    assert v.drift == math.log(0.5)
    assert v.verdict == "agree"


def test_mc_verify_reproducible_and_csv():
    a, b = mc_verify(-0.5 + 0.5j, "ms", 200, 20, seed=3), mc_verify(-0.5 + 0.5j, "ms", 200, 20, seed=3)
    assert a == b
    head, row = a.to_csv().splitlines()
    assert head.startswith("kind,a,b,drift")
    assert row.startswith("ms,-0.5,0.5,")


def test_mc_verify_arguments():
    with pytest.raises(ValueError):
        mc_verify(-1.0, "as", 0, 10)


def test_bounding_radius():
    assert R0 == pytest.approx(1 + math.sqrt(5))
