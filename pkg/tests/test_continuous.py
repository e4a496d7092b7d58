import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from icin import (
    BivariateIcin,
    GridSpec,
    KdeDensity,
    WeightedSample,
    fit_bivariate,
    missingness_curves,
    pattern_functionals,
    pattern_proportions,
    silverman_bandwidth,
)
from icin.continuous import PATTERNS, fit_kde, grid_mass, kde_eval, silverman_rule, summary_table
from icin.errors import DegenerateSampleError, ExtrapolationError, FitError, InvalidArgumentError

NAN = np.nan


def synthetic(n, seed, shift=0.0):
    """Standard bivariate normal complete cases; x1-only and x2-only records."""
    rng = np.random.default_rng(seed)
    k = n // 4
    full = rng.multivariate_normal([0, 0], [[1, 0.5], [0.5, 1]], size=2 * k)
    x1 = np.concatenate([full[:, 0], rng.normal(shift, 1, k), np.full(k, NAN)])
    x2 = np.concatenate([full[:, 1], np.full(k, NAN), rng.normal(0, 1, k)])
    return WeightedSample(np.concatenate([x1, [NAN] * 10]), np.concatenate([x2, [NAN] * 10]))


@pytest.fixture(scope="module")
def model():
    return fit_bivariate(synthetic(2000, 1), GridSpec((-6, -6), (6, 6), (128, 128)))


# -- proportions and bandwidths ------------------------------------------------


def test_pattern_proportions_counting():
    s = WeightedSample([1.0, 2.0, 3.0, NAN], [1.0, 2.0, NAN, NAN])
    pi = pattern_proportions(s)
    assert [pi[m] for m in PATTERNS] == [0.5, 0.25, 0.0, 0.25]


def test_pattern_proportions_weighted():
    s = WeightedSample([1.0, NAN], [1.0, 2.0], [3.0, 1.0])
    pi = pattern_proportions(s)
    assert pi[PATTERNS[0]] == 0.75 and pi[PATTERNS[2]] == 0.25


def test_silverman_arithmetic():
    assert silverman_rule(1.0, 1.349, 100) == pytest.approx(0.9 * 100 ** -0.2, rel=1e-15)
    assert silverman_rule(1.0, 1.349, 100) == pytest.approx(0.3582, abs=1e-4)
    # the IQR branch wins when it is smaller
    assert silverman_rule(1.0, 0.67, 100) == pytest.approx(0.9 * 0.5 * 100 ** -0.2)


def test_silverman_against_direct_formula(rng):
    x = rng.normal(size=200)
    w = rng.uniform(0.5, 2, size=200)
    mean = np.average(x, weights=w)
    sigma = np.sqrt(np.average((x - mean) ** 2, weights=w))
    # weighted inverse-CDF quartiles by sorting
    order = np.argsort(x)
    cw = np.cumsum(w[order]) / w.sum()
    q25 = x[order][np.searchsorted(cw, 0.25)]
    q75 = x[order][np.searchsorted(cw, 0.75)]
    n_eff = w.sum() ** 2 / (w**2).sum()
    expected = 0.9 * min(sigma, (q75 - q25) / 1.34) * n_eff ** -0.2
    assert silverman_bandwidth(x, w) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_bandwidth_scale_equivariance(seed, c):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=50)
    w = rng.uniform(0.1, 1, size=50)
    assert silverman_bandwidth(c * x, w) == pytest.approx(c * silverman_bandwidth(x, w), rel=1e-10)


def test_duplicated_half_weight_records(rng):
    # moments and quantiles are unchanged but the Kish effective size doubles
    x = rng.normal(size=80)
    w = rng.uniform(0.5, 1.5, size=80)
    h = silverman_bandwidth(x, w)
    h2 = silverman_bandwidth(np.concatenate([x, x]), np.concatenate([w, w]) / 2)
    assert h2 == pytest.approx(h * 2 ** -0.2, rel=1e-12)


def test_bandwidth_degenerate():
    with pytest.raises(DegenerateSampleError):
        silverman_bandwidth([1.0, 1.0, 1.0])


# -- kernel density estimates --------------------------------------------------


def test_kde_standard_values():
    assert kde_eval(KdeDensity([0.0], [1.0], [1.0]), 0.0) == pytest.approx(0.398942, abs=1e-6)
    assert kde_eval(KdeDensity([[0.0, 0.0]], [1.0], [1.0, 1.0]), (0, 0)) == pytest.approx(
        0.159155, abs=1e-6
    )


def test_kde_matches_scipy_mixture(rng):
    c = rng.normal(size=(30, 2))
    w = rng.uniform(size=30)
    h = np.array([0.4, 0.7])
    d = KdeDensity(c, w / w.sum(), h)
    pts = rng.normal(size=(20, 2))
    ref = sum(
        wi * stats.norm.pdf(pts[:, 0], ci[0], h[0]) * stats.norm.pdf(pts[:, 1], ci[1], h[1])
        for wi, ci in zip(w / w.sum(), c)
    )
    np.testing.assert_allclose(d.pdf(pts), ref, rtol=1e-12)
    grid = [np.linspace(-2, 2, 7), np.linspace(-1, 3, 5)]
    direct = d.pdf(np.array([(a, b) for a in grid[0] for b in grid[1]])).reshape(7, 5)
    np.testing.assert_allclose(np.exp(d.log_grid(grid)), direct, rtol=1e-12)


def test_kde_grid_integral(rng):
    d1 = fit_kde(rng.normal(size=300))
    d2 = fit_kde(rng.normal(size=(300, 2)))
    assert abs(grid_mass(d1) - 1) < 1e-3
    assert abs(grid_mass(d2) - 1) < 1e-3


def test_grid_validation():
    with pytest.raises(InvalidArgumentError):
        GridSpec((0, 0), (1, 1), (16, 16))
    with pytest.raises(InvalidArgumentError):
        GridSpec((1, 0), (0, 1))


# -- bivariate construction --------------------------------------------------


def test_each_pattern_integrates_to_one(model):
    for m in PATTERNS:
        assert abs(model.grid_mass(m) - 1) < 1e-2


def test_g01_identity_pointwise(model, rng):
    pts = rng.uniform(-2.5, 2.5, size=(100, 2))
    f1 = model.f00.marginal(0)
    f2 = model.f00.marginal(1)
    for x1, x2 in pts:
        f00 = kde_eval(model.f00, (x1, x2))
        g01 = f00 * kde_eval(model.f01, x1) / kde_eval(f1, x1)
        g10 = f00 * kde_eval(model.f10, x2) / kde_eval(f2, x2)
        assert model.density_at("01", x1, x2) == pytest.approx(g01, rel=1e-12)
        assert model.density_at("10", x1, x2) == pytest.approx(g10, rel=1e-12)
        assert model.density_at("00", x1, x2) == pytest.approx(f00, rel=1e-12)


def test_g11_normaliser_by_direct_quadrature(model):
    a1, a2 = model.grid.axes
    f00 = np.exp(model.f00.log_grid([a1, a2]))
    r1 = model.f01.pdf(a1) / model.f00.marginal(0).pdf(a1)
    r2 = model.f10.pdf(a2) / model.f00.marginal(1).pdf(a2)
    raw = f00 * r1[:, None] * r2[None, :]
    z = np.trapezoid(np.trapezoid(raw, a2, axis=1), a1)
    assert np.exp(model.log_z11) == pytest.approx(z, rel=1e-10)


def test_fit_errors():
    with pytest.raises(FitError, match="00"):
        fit_bivariate(WeightedSample([1.0, NAN, 2.0], [NAN, 1.0, 3.0]))
    with pytest.raises(FitError, match="01"):
        fit_bivariate(WeightedSample([0.0, 1.0, 2.0, 5.0], [0.0, 2.0, 1.0, NAN]))


def test_exchangeable_density_is_symmetric(rng):
    z = rng.multivariate_normal([0, 0], [[1, 0.3], [0.3, 1]], size=400)
    both = np.vstack([z, z[:, ::-1]])
    s = WeightedSample(both[:, 0], both[:, 1])
    fun = pattern_functionals(fit_bivariate(s, GridSpec((-6, -6), (6, 6), (128, 128))), "00")
    assert fun["pr_x1_gt_x2"] == pytest.approx(0.5, abs=1e-9)
    assert fun["mean_x1"] == pytest.approx(fun["mean_x2"], abs=1e-9)


def test_complete_case_functionals_are_kde_moments(model):
    fun = pattern_functionals(model, "00")
    c, w = model.f00.centers, model.f00.weights
    assert fun["mean_x1"] == pytest.approx(w @ c[:, 0], abs=1e-4)
    assert fun["mean_x2"] == pytest.approx(w @ c[:, 1], abs=1e-4)
    rows = summary_table(model)
    assert [r["pattern"] for r in rows] == ["00", "01", "10", "11"]


# -- missingness curves ----------------------------------------------------------


def test_curve_zero_without_missing_x2(rng):
    z = rng.normal(size=(300, 2))
    x1 = np.concatenate([z[:, 0], [NAN] * 30])
    x2 = np.concatenate([z[:, 1], rng.normal(size=30)])
    m = fit_bivariate(WeightedSample(x1, x2))
    np.testing.assert_array_equal(missingness_curves(m, 2, [-1.0, 0.0, 1.0]), 0.0)
    assert np.all(missingness_curves(m, 1, [-1.0, 0.0, 1.0]) > 0)


def test_curve_constant_with_identical_components(model):
    f00 = model.f00
    pi = {"00": 0.4, "01": 0.3, "10": 0.2, "11": 0.1}
    same = BivariateIcin(f00, f00.marginal(0), f00.marginal(1), pi, model.grid)
    pts = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(missingness_curves(same, 2, pts), 0.3 + 0.1, atol=1e-9)
    np.testing.assert_allclose(missingness_curves(same, 1, pts), 0.2 + 0.1, atol=1e-9)


def test_marginal_dependence_witness():
    m = fit_bivariate(synthetic(2000, 4, shift=-1.0), GridSpec((-7, -7), (7, 7), (128, 128)))
    curve = missingness_curves(m, 2, np.linspace(-1.5, 1.5, 13))
    assert np.ptp(curve) > 0.01


def test_curve_extrapolation(model):
    with pytest.raises(ExtrapolationError):
        missingness_curves(model, 1, [100.0])
    with pytest.raises(InvalidArgumentError):
        missingness_curves(model, 3, [0.0])
