import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from icin import (
    CategoricalSpace,
    InvalidArgumentError,
    SensitivityFunction,
    SensitivityGrid,
    UndefinedConditionalError,
    build_full_data,
    build_full_data_xi,
    conditional_log_odds_ratio,
    event_probability,
    loglinear_decomposition,
    run_grid,
    xi_log_odds_ratio,
)
from icin.categorical import ObservedDistribution

from oracles import random_observed, random_pattern_set


def random_xi(rng, space):
    tables = []
    for k in space.levels:
        t = rng.uniform(-5, 5, size=k)
        t[0] = 0.0
        tables.append(t)
    return SensitivityFunction(space, tables)


@pytest.fixture
def p3_observed():
    rng = np.random.default_rng(11)
    return random_observed(rng, [2, 2, 2], list(np.ndindex(2, 2, 2)))


def test_zero_xi_reproduces_ordinary_model(p2_table):
    g = build_full_data(p2_table)
    g0 = build_full_data_xi(p2_table, SensitivityFunction.zero(p2_table.space))
    np.testing.assert_allclose(g0.table(), g.table(), atol=1e-12, rtol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_saturation_under_any_xi(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 4))
    f = random_observed(rng, [int(rng.integers(2, 4)) for _ in range(p)], random_pattern_set(rng, p))
    g = build_full_data_xi(f, random_xi(rng, f.space))
    for m in f.patterns:
        assert np.max(np.abs(g.observed_margin(m) - f.mass[m])) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_log_odds_ratio_matches_offsets(seed):
    rng = np.random.default_rng(seed)
    space = CategoricalSpace((3, 2, 2))
    f = random_observed(rng, space.levels, list(np.ndindex(2, 2, 2)))
    xi = random_xi(rng, space)
    g = build_full_data_xi(f, xi)
    j = int(rng.integers(0, 3))
    x = tuple(int(rng.integers(0, k)) for k in space.levels)
    z = int(rng.integers(0, space.levels[j]))
    m = tuple(int(b) for b in rng.integers(0, 2, size=2))
    direct = conditional_log_odds_ratio(g, j, x, z, m)
    assert direct == pytest.approx(xi_log_odds_ratio(xi, j, x, z, m), abs=1e-10)
    assert direct == pytest.approx(xi.tables[j][x[j]] - xi.tables[j][z], abs=1e-10)


def test_constant_offset_is_recovered_everywhere(p3_observed):
    c = 1.3
    xi = SensitivityFunction.from_offsets(p3_observed.space, {"x2": {"2": c}})
    g = build_full_data_xi(p3_observed, xi)
    for x in p3_observed.space.cells():
        if x[1] == 0:
            continue
        for m in np.ndindex(2, 2):
            assert conditional_log_odds_ratio(g, 1, x, 0, m) == pytest.approx(c, abs=1e-10)


@pytest.mark.parametrize("offset, multiplier", [(1.0, 2.718), (-5.0, 0.007)])
def test_odds_multipliers(p3_observed, offset, multiplier):
    xi = SensitivityFunction.from_offsets(p3_observed.space, {"x3": {"2": offset}})
    g = build_full_data_xi(p3_observed, xi)
    lor = conditional_log_odds_ratio(g, 2, (1, 0, 1), 0)
    assert math.exp(lor) == pytest.approx(math.exp(offset), rel=1e-9)
    assert round(math.exp(lor), 3) == multiplier


def test_xi_augments_loglinear_model(p3_observed):
    xi = SensitivityFunction.from_offsets(p3_observed.space, {"x1": {"2": -1.0}, "x3": {"2": 1.0}})
    g = build_full_data_xi(p3_observed, xi)
    dec = loglinear_decomposition(g)
    assert dec[(0,), (0,), (1,)] == -1.0
    assert dec[(2,), (2,), (1,)] == 1.0
    assert dec.pairs_item_with_own_indicator()
    for x in p3_observed.space.cells():
        for m in g.patterns:
            assert dec.log_mass(x, m) == pytest.approx(g.log_prob(x, m), abs=1e-10)
    base = loglinear_decomposition(build_full_data(p3_observed))
    assert not base.pairs_item_with_own_indicator()


def test_extrapolation_moves_with_xi(p3_observed):
    def conditional(xi):
        g = build_full_data_xi(p3_observed, xi)
        s = g.slice("100")
        return s / s.sum(axis=0, keepdims=True)

    space = p3_observed.space
    a = conditional(SensitivityFunction.zero(space))
    b = conditional(SensitivityFunction.from_offsets(space, {"x1": {"2": 2.0}}))
    assert np.max(np.abs(a - b)) > 0.01


def test_reference_level_validation(p2_space):
    with pytest.raises(InvalidArgumentError):
        SensitivityFunction(p2_space, [[1.0, 0.0], [0.0, 0.0]])
    xi = SensitivityFunction(p2_space, [[1.0, 0.0], [0.0, 0.0]], reference=(1, 0))
    assert xi.reference == (1, 0)
    with pytest.raises(InvalidArgumentError):
        SensitivityFunction(p2_space, [[0.0, np.inf], [0.0, 0.0]])
    with pytest.raises(InvalidArgumentError):
        SensitivityFunction(p2_space, lambda x, m: 0.0)


def test_undefined_odds_ratio(p2_space):
    f = ObservedDistribution(p2_space, {"00": [[0.2, 0.2], [0.2, 0.2]], "01": [0.1, 0.1]})
    g = build_full_data_xi(f, SensitivityFunction.zero(p2_space))
    with pytest.raises(UndefinedConditionalError):
        conditional_log_odds_ratio(g, 0, (0, 0), 1)


def test_run_grid_trivial(p2_table):
    grid = SensitivityGrid(("zero",), (SensitivityFunction.zero(p2_table.space),))
    rows = run_grid(p2_table, grid, {"all": None})
    assert len(rows) == 1
    assert rows[0]["value"] == pytest.approx(1, abs=1e-12)


def test_run_grid_fifteen_points(p3_observed):
    space = p3_observed.space
    grid = SensitivityGrid.cross(
        space, {"x1": ("2", [-5, -1, 0, 1, 5]), "x3": ("2", [-1, 0, 1])}
    )
    assert len(grid) == 15 and grid.dims == ("x1", "x3")
    rows = run_grid(p3_observed, grid, {"x1=1": {"x1": "1"}})
    assert len(rows) == 15
    assert [r["label"] for r in rows] == list(grid.labels)
    # shifting the offset of x1 changes the x1 marginal monotonically on this table
    vals = [r["value"] for r in rows if r["label"][1] == 0.0]
    diffs = np.diff(vals)
    assert np.all(diffs > 0) or np.all(diffs < 0)
    zero = next(r for r in rows if r["label"] == (0.0, 0.0))
    g = build_full_data(p3_observed)
    assert zero["value"] == pytest.approx(event_probability(g, {"x1": "1"}), abs=1e-12)


def test_grid_validation(p2_space):
    z = SensitivityFunction.zero(p2_space)
    with pytest.raises(InvalidArgumentError):
        SensitivityGrid((), ())
    with pytest.raises(InvalidArgumentError):
        SensitivityGrid(("a", "a"), (z, z))
