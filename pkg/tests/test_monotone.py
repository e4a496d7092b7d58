import math
from itertools import product

import numpy as np
import pytest

from icin import (
    CategoricalSpace,
    DropoutPatternSet,
    InvalidArgumentError,
    ObservedDistribution,
    Pattern,
    build_monotone,
    dropout_time,
    missingness_logit,
    sequential_log_odds,
)
from icin.monotone import _check_factorization, dropout_records, eta_at_time, pattern_for_time

from oracles import brute_force_full_data, observed_to_dict, random_observed


def chain_observed(seed, levels, earliest=1):
    p = len(levels)
    pats = [pattern_for_time(t, p) for t in range(earliest, p + 2)]
    return random_observed(np.random.default_rng(seed), levels, pats)


@pytest.mark.parametrize("bits, t", [("000", 4), ("011", 2), ("111", 1), ("001", 3)])
def test_dropout_time(bits, t):
    assert dropout_time(Pattern(bits)) == t
    assert pattern_for_time(t, 3) == Pattern(bits)


def test_non_monotone_rejected():
    with pytest.raises(InvalidArgumentError):
        dropout_time(Pattern("010"))
    with pytest.raises(InvalidArgumentError):
        DropoutPatternSet(["000", "010"])
    with pytest.raises(InvalidArgumentError):
        DropoutPatternSet(["000", "011"])  # skips T = 3


def test_chain_constructor():
    ch = DropoutPatternSet.chain(3)
    assert [str(m) for m in ch] == ["000", "001", "011", "111"]
    assert ch.times == [1, 2, 3, 4]
    assert DropoutPatternSet.chain(3, earliest=3).times == [3, 4]


def test_p2_chain_matches_brute_force():
    f = chain_observed(0, [3, 2])
    g = build_monotone(f)
    _, ref = brute_force_full_data([3, 2], observed_to_dict(f), f.patterns)
    for (x, m), value in ref.items():
        assert g.prob(x, m) == pytest.approx(value, rel=1e-12)


def test_complete_only_chain():
    space = CategoricalSpace((2, 3))
    mass = np.arange(1, 7).reshape(2, 3) / 21
    g = build_monotone(ObservedDistribution(space, {"00": mass}))
    np.testing.assert_allclose(g.slice("00"), mass, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_factorisation_identity(seed):
    f = chain_observed(seed, [2, 3, 2])
    g = build_monotone(f)
    assert _check_factorization(g, list(range(1, 5))) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_sequential_odds_direct_ratio_and_locality(seed):
    f = chain_observed(seed, [2, 3, 2], earliest=2)
    g = build_monotone(f)
    p = 3
    for t in (2, 3):
        for x in product(range(2), range(3), range(2)):
            direct = g.log_prob(x, pattern_for_time(t + 1, p)) - g.log_prob(x, pattern_for_time(t, p))
            value = sequential_log_odds(g, t, x)
            assert value == pytest.approx(direct, abs=1e-12)
            # depends only on x_<t
            for tail in product(*(range(k) for k in (2, 3, 2)[t - 1:])):
                y = tuple(x[: t - 1]) + tail
                assert sequential_log_odds(g, t, y) == value
    with pytest.raises(InvalidArgumentError):
        sequential_log_odds(g, 1, (0, 0, 0))
    with pytest.raises(InvalidArgumentError):
        sequential_log_odds(g, 4, (0, 0, 0))


def test_perturbation_moves_only_its_own_eta():
    f = chain_observed(1, [2, 2])
    g = build_monotone(f)
    mass = {m: a.copy() for m, a in f.mass.items()}
    t2 = pattern_for_time(2, 2)
    # move mass between cells of f(x_<2, T=2) keeping its total
    mass[t2] = mass[t2] + np.array([0.01, -0.01])
    g2 = build_monotone(ObservedDistribution(f.space, mass))
    np.testing.assert_allclose(eta_at_time(g2, 1), eta_at_time(g, 1), atol=1e-12)
    assert not np.allclose(eta_at_time(g2, 2), eta_at_time(g, 2))
    x = (0, 1)
    expected = -(math.log(mass[t2][0]) - math.log(g.slice("00")[0].sum()))
    assert sequential_log_odds(g2, 2, x) == pytest.approx(expected, abs=1e-12)


def test_adjacent_pattern_logits_are_constant():
    f = chain_observed(2, [3, 2, 2])
    g = build_monotone(f)
    # 001 vs 000 differ only in item 3: logit of M_3 with items 1, 2 observed
    for a, b in product(range(3), range(2)):
        vals = [missingness_logit(g, 2, (0, 0), (a, b, c)) for c in range(2)]
        assert vals[0] == pytest.approx(vals[1], abs=1e-10)


def test_dropout_records():
    space = CategoricalSpace((2, 2, 2))
    recs = dropout_records([["1", "2", "1"], ["2", "", ""], ["1", "1", "NA"]], space)
    assert recs.tolist() == [[0, 1, 0], [1, -1, -1], [0, 0, -1]]
    with pytest.raises(InvalidArgumentError, match="row 2"):
        dropout_records([["1", "2", "1"], ["1", "", "2"]], space)
