import numpy as np
import pytest

from freeconv.errors import DomainError, InversionError, ValidationError
from freeconv.measures import (
    LawSpec,
    absolute_moment,
    density_l1_distance,
    dirac,
    make_law,
    moment,
)
from freeconv.stieltjes import (
    ContourSpec,
    MeasureResolvent,
    cauchy_transform,
    default_contour,
    invert_cauchy,
    neville_to_zero,
    principal_value_transform,
    stieltjes_invert,
)

RNG = np.random.default_rng(31081998)

CATALOG = [
    LawSpec.semicircle(1.0),
    LawSpec.marchenko_pastur(1.0),
    LawSpec.marchenko_pastur(0.5),
    LawSpec.marchenko_pastur(2.0),
    LawSpec.two_atom(0.5, -1.0, 1.0),
    LawSpec.arcsine(2.0),
    LawSpec.uniform(-1.0, 1.0),
]


def semicircle_g(z, sigma=1.0):
    # Closed form with the branch that decays like 1/z at infinity.
    root = np.sqrt(z * z - 4 * sigma**2)
    if (z.imag > 0 and root.imag < 0) or (z.imag < 0 and root.imag > 0):
        root = -root
    if z.imag == 0 and z.real * root.real < 0:
        root = -root
    return (z - root) / (2 * sigma**2)


# -- transform values ---------------------------------------------------------


def test_atom_transform():
    assert cauchy_transform(dirac(0.0), 1j) == pytest.approx(-1j, abs=1e-14)


def test_two_atom_transform_value():
    mu = make_law(LawSpec.two_atom(0.5, -1.0, 1.0))
    assert cauchy_transform(mu, 2.0 + 0j) == pytest.approx(2 / 3, abs=1e-14)


def test_semicircle_transform_closed_form():
    mu = make_law(LawSpec.semicircle(1.0), 4000)
    got = cauchy_transform(mu, 2j)
    assert got == pytest.approx(1j * (1 - np.sqrt(2)), abs=1e-8)
    for _ in range(25):
        z = complex(RNG.uniform(-3, 3), RNG.uniform(0.2, 5))
        assert cauchy_transform(mu, z) == pytest.approx(
            semicircle_g(z), abs=2e-6
        )


def test_transform_rejects_on_support_real_points():
    mu = make_law(LawSpec.semicircle(1.0), 200)
    with pytest.raises(DomainError):
        cauchy_transform(mu, 0.5 + 0j)
    # outside the support the real axis is fine
    assert cauchy_transform(mu, 3.0 + 0j).imag == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("spec", CATALOG)
def test_herglotz_property(spec):
    mu = make_law(spec, 600)
    z = RNG.uniform(-4, 4, 200) + 1j * RNG.uniform(1e-3, 10, 200)
    vals = cauchy_transform(mu, z)
    assert np.all(vals.imag < 0)


@pytest.mark.parametrize("spec", CATALOG)
def test_asymptotic_decay(spec):
    mu = make_law(spec, 600)
    bound = 2.0 * absolute_moment(mu, 1) / 1e3
    for k in range(8):
        z = 1e3 * np.exp(1j * (np.pi * (k + 0.5) / 8))
        assert abs(z * cauchy_transform(mu, z) - 1.0) <= bound


# -- principal values ---------------------------------------------------------


def test_pv_odd_symmetry():
    mu = make_law(LawSpec.semicircle(1.0), 2000)
    assert principal_value_transform(mu, 0.0) == pytest.approx(0.0, abs=1e-10)
    two = make_law(LawSpec.two_atom(0.5, -1.0, 1.0))
    assert principal_value_transform(two, 0.0) == 0.0


def test_pv_semicircle_interior():
    mu = make_law(LawSpec.semicircle(1.0), 4000)
    assert principal_value_transform(mu, 1.0) == pytest.approx(0.5, abs=1e-3)


def test_pv_matches_extrapolated_real_part():
    mu = make_law(LawSpec.semicircle(1.0), 4000)
    eps = np.array([1e-2, 5e-3, 2.5e-3])
    for x in (0.3, 0.9, 1.5):
        re = np.array([cauchy_transform(mu, x + 1j * e).real for e in eps])
        extrap = neville_to_zero(eps, re)
        assert principal_value_transform(mu, x) == pytest.approx(
            extrap, abs=1e-4
        )


def test_pv_at_atom_rejected():
    with pytest.raises(DomainError):
        principal_value_transform(dirac(1.0), 1.0)


# -- functional inversion -----------------------------------------------------


def test_invert_atom_resolvents():
    ev0 = MeasureResolvent(dirac(0.0))
    w = -0.5j
    assert invert_cauchy(ev0, w) == pytest.approx(1 / w, abs=1e-12)
    ev3 = MeasureResolvent(dirac(3.0))
    w = -0.25j
    assert invert_cauchy(ev3, w) == pytest.approx(3 + 1 / w, abs=1e-12)


def test_invert_semicircle_round_trip_value():
    mu = make_law(LawSpec.semicircle(1.0), 4000)
    ev = MeasureResolvent(mu)
    w = ev(2j)
    assert w == pytest.approx(1j * (1 - np.sqrt(2)), abs=1e-8)
    lam = invert_cauchy(ev, w)
    assert lam == pytest.approx(2j, abs=1e-8)


@pytest.mark.parametrize("spec", CATALOG[:5])
def test_invert_round_trip_random(spec):
    mu = make_law(spec, 1000)
    ev = MeasureResolvent(mu)
    for _ in range(50):
        z = complex(RNG.uniform(-3, 3), RNG.uniform(0.5, 4.0))
        w = ev(z)
        lam = invert_cauchy(ev, w)
        assert lam == pytest.approx(z, abs=1e-8)
        assert abs(ev(lam) - w) <= 1e-12 * max(1.0, abs(w))


def test_invert_rejects_zero():
    with pytest.raises(ValidationError):
        invert_cauchy(MeasureResolvent(dirac(0.0)), 0.0)


def test_inversion_error_carries_diagnostics():
    ev = MeasureResolvent(make_law(LawSpec.semicircle(1.0), 200))
    try:
        # w with |w| far beyond the image of the upper half plane forces
        # the solver onto the cut and it must report, not loop.
        invert_cauchy(ev, 500.0 + 0.0j, seed=0.9)
    except InversionError as err:
        assert err.residual is not None
    # if it converged instead, the contract still held; nothing to assert


# -- density recovery ---------------------------------------------------------


def l1_round_trip(spec, points=1500, schedule=(1e-2, 5e-3, 2.5e-3)):
    mu = make_law(spec, 2000)
    lo, hi = mu.support()
    contour = default_contour(lo, hi, points, schedule)
    back = stieltjes_invert(MeasureResolvent(mu), contour)
    return density_l1_distance(mu, back, atom_position_tol=1e-3), mu, back


def test_round_trip_semicircle():
    err, _, _ = l1_round_trip(LawSpec.semicircle(1.0))
    assert err <= 1e-2


def test_round_trip_uniform():
    err, mu, back = l1_round_trip(LawSpec.uniform(-1.0, 1.0))
    assert err <= 1e-2
    # interior plateau is flat at 1/2 away from the edges
    x = np.linspace(-0.8, 0.8, 50)
    assert np.max(np.abs(back.density_at(x) - 0.5)) <= 1e-2


def test_round_trip_atom():
    contour = default_contour(-1.0, 1.0, 400)
    back = stieltjes_invert(MeasureResolvent(dirac(0.0)), contour)
    assert len(back.atoms) == 1
    pos, w = back.atoms[0]
    assert abs(pos) < 1e-6
    assert w == pytest.approx(1.0, abs=1e-3)
    assert back.segments == () or back.segments[0].mass < 1e-6


def test_round_trip_two_atom():
    mu = make_law(LawSpec.two_atom(0.3, -1.0, 0.5))
    contour = default_contour(-1.0, 0.5, 600)
    back = stieltjes_invert(MeasureResolvent(mu), contour)
    assert density_l1_distance(mu, back, atom_position_tol=1e-3) <= 1e-2


def test_round_trip_marchenko_pastur_with_atom():
    err, mu, back = l1_round_trip(LawSpec.marchenko_pastur(2.0))
    assert err <= 1e-2
    assert len(back.atoms) == 1
    assert back.atoms[0][1] == pytest.approx(0.5, abs=2e-3)


def test_round_trip_edge_singular_laws():
    for spec in (LawSpec.marchenko_pastur(1.0), LawSpec.arcsine(2.0)):
        err, _, _ = l1_round_trip(spec)
        assert err <= 1e-2


def test_round_trip_preserves_moments():
    mu = make_law(LawSpec.semicircle(1.0), 2000)
    contour = default_contour(-2, 2, 1500)
    back = stieltjes_invert(MeasureResolvent(mu), contour)
    for n in range(1, 9):
        assert moment(back, n) == pytest.approx(moment(mu, n), abs=2e-3)


def test_support_error_when_grid_too_narrow():
    mu = make_law(LawSpec.semicircle(1.0), 500)
    bad = ContourSpec(np.linspace(-0.8, 0.8, 200))
    from freeconv.errors import SupportCoverageError

    with pytest.raises(SupportCoverageError):
        stieltjes_invert(MeasureResolvent(mu), bad)


def test_contour_validation():
    with pytest.raises(ValidationError):
        ContourSpec(np.array([0.0, 1.0, 0.5]))
    with pytest.raises(ValidationError):
        ContourSpec(np.linspace(0, 1, 16), np.array([1e-3, 1e-2]))
