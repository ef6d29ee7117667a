import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aspectchain.correlation import (
    CorrelationReport,
    PairedSeries,
    average_ranks,
    dataset_level_correlations,
    kendall_tau_b,
    pair_counts,
    pearson,
    spearman,
)
from aspectchain.errors import InvalidInputError
from aspectchain.model import MetricScore, Provenance, ScoreTable

scipy_stats = pytest.importorskip("scipy.stats")


def brute_kendall(x, y):
    """Exhaustive pair classification; no numpy."""
    c = d = tx = ty = 0
    for i, j in combinations(range(len(x)), 2):
        dx, dy = x[i] - x[j], y[i] - y[j]
        if dx * dy > 0:
            c += 1
        elif dx * dy < 0:
            d += 1
        elif dx == 0 and dy != 0:
            tx += 1
        elif dy == 0 and dx != 0:
            ty += 1
    denom = (c + d + tx) * (c + d + ty)
    return None if denom == 0 else (c - d) / math.sqrt(denom)


def textbook_pearson(x, y):
    """Exact rational covariance over variance, converted once at the end."""
    n = len(x)
    fx, fy = [Fraction(v) for v in x], [Fraction(v) for v in y]
    mx, my = sum(fx) / n, sum(fy) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(fx, fy))
    vx = sum((a - mx) ** 2 for a in fx)
    vy = sum((b - my) ** 2 for b in fy)
    return float(cov) / math.sqrt(float(vx * vy))


def hand_ranks(values):
    """Rank by counting: rank = 1 + (#smaller) + (#equal - 1) / 2."""
    return [1 + sum(w < v for w in values) + (sum(w == v for w in values) - 1) / 2 for v in values]


paired = st.integers(min_value=2, max_value=40).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(1, 6), min_size=n, max_size=n),
        st.lists(st.integers(1, 6), min_size=n, max_size=n),
    )
)


class TestKnownValues:
    def test_pearson_perfect(self):
        assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_pearson_textbook_oracle(self):
        x, y = [1, 2, 4, 8], [2, 3, 5, 9]
        expected = textbook_pearson(x, y)
        assert expected == pytest.approx(1.0)
        assert pearson(x, y) == pytest.approx(expected, abs=1e-12)

    def test_pearson_textbook_oracle_nonlinear(self):
        x, y = [1, 2, 4, 8], [2, 3, 9, 5]
        assert pearson(x, y) == pytest.approx(textbook_pearson(x, y), abs=1e-12)

    def test_spearman_ties_by_hand(self):
        # ranks (1, 2.5, 2.5, 4) vs (1, 3, 2, 4): r = 4.5 / sqrt(4.5 * 5) = sqrt(0.9)
        assert hand_ranks([1, 2, 2, 3]) == [1, 2.5, 2.5, 4]
        assert spearman([1, 2, 2, 3], [1, 3, 2, 4]) == pytest.approx(math.sqrt(0.9), abs=1e-12)

    def test_spearman_monotone(self):
        assert spearman([1, 2, 3, 4], [1, 10, 100, 1000]) == pytest.approx(1.0)
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_kendall_pair_count_example(self):
        assert pair_counts([1, 2, 3], [1, 3, 2]) == (2, 1, 0, 0)
        assert kendall_tau_b([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3)

    def test_kendall_extremes(self):
        assert kendall_tau_b([1, 2, 3, 4], [2, 4, 6, 8]) == 1.0
        assert kendall_tau_b([1, 2, 3, 4], [8, 6, 4, 2]) == -1.0

    def test_constant_series_undefined(self):
        assert pearson([1, 1, 1], [1, 2, 3]) is None
        assert spearman([1, 2, 3], [4, 4, 4]) is None
        assert kendall_tau_b([2, 2, 2], [1, 2, 3]) is None

    @pytest.mark.parametrize("fn", [pearson, spearman, kendall_tau_b])
    def test_invalid_lengths(self, fn):
        with pytest.raises(InvalidInputError):
            fn([1, 2], [1, 2, 3])
        with pytest.raises(InvalidInputError):
            fn([1], [1])


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(paired)
    def test_kendall_matches_brute_force_exactly(self, xy):
        x, y = xy
        assert kendall_tau_b(x, y) == brute_kendall(x, y)

    @settings(max_examples=200, deadline=None)
    @given(paired)
    def test_spearman_is_pearson_of_hand_ranks(self, xy):
        x, y = xy
        expected = pearson(hand_ranks(x), hand_ranks(y))
        got = spearman(x, y)
        if expected is None:
            assert got is None
        else:
            assert abs(got - expected) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=50))
    def test_average_ranks_sum(self, values):
        n = len(values)
        assert average_ranks(values).sum() == pytest.approx(n * (n + 1) / 2)

    @settings(max_examples=100, deadline=None)
    @given(paired)
    def test_symmetry(self, xy):
        x, y = xy
        for fn in (pearson, spearman, kendall_tau_b):
            a, b = fn(x, y), fn(y, x)
            assert (a is None and b is None) or abs(a - b) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(paired)
    def test_bounded(self, xy):
        for value in (pearson(*xy), spearman(*xy), kendall_tau_b(*xy)):
            assert value is None or -1.0 <= value <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(paired, st.floats(0.1, 100), st.floats(-100, 100))
    def test_pearson_affine_invariance(self, xy, scale, shift):
        x, y = xy
        base = pearson(x, y)
        moved = pearson([scale * v + shift for v in x], y)
        assert (base is None and moved is None) or abs(base - moved) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(paired, st.sampled_from([lambda v: v**3 + v, lambda v: math.exp(v / 3), lambda v: 2 * v - 7]))
    def test_rank_coefficients_monotone_invariance(self, xy, f):
        x, y = xy
        fx = [f(v) for v in x]
        for fn in (spearman, kendall_tau_b):
            a, b = fn(x, y), fn(fx, y)
            assert (a is None and b is None) or abs(a - b) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(paired)
    def test_agrees_with_scipy(self, xy):
        x, y = xy
        if len(set(x)) < 2 or len(set(y)) < 2:
            return
        assert pearson(x, y) == pytest.approx(scipy_stats.pearsonr(x, y)[0], abs=1e-9)
        assert spearman(x, y) == pytest.approx(scipy_stats.spearmanr(x, y)[0], abs=1e-9)
        assert kendall_tau_b(x, y) == pytest.approx(scipy_stats.kendalltau(x, y, variant="b")[0], abs=1e-9)


def _table(dataset, values, name="m", excluded=()):
    table = ScoreTable(dataset.id, name, "overall")
    for inst, v in zip(dataset.instances, values):
        if inst.id in excluded:
            table.exclusions.append((inst.id, "scripted failure"))
        else:
            table.rows[inst.id] = MetricScore(inst.id, name, "overall", v, Provenance.LLM)
    return table


class TestDatasetLevel:
    def test_perfect_agreement(self, toy_dataset):
        human = [inst.human_mean("overall") for inst in toy_dataset.instances]
        row = dataset_level_correlations([_table(toy_dataset, human)], toy_dataset).rows[0]
        assert (row.pearson, row.spearman, row.kendall) == pytest.approx((1.0, 1.0, 1.0))
        assert (row.n_pairs, row.n_excluded) == (12, 0)

    def test_constant_metric_undefined(self, toy_dataset):
        row = dataset_level_correlations([_table(toy_dataset, [3.0] * 12)], toy_dataset).rows[0]
        assert (row.pearson, row.spearman, row.kendall) == (None, None, None)
        assert row.reason == "zero variance"

    def test_exclusions_are_per_metric(self, toy_dataset):
        human = [inst.human_mean("overall") for inst in toy_dataset.instances]
        a = _table(toy_dataset, human, "a", excluded={"toy-01", "toy-02"})
        b = _table(toy_dataset, human, "b")
        report = dataset_level_correlations([a, b], toy_dataset)
        assert (report.row("a").n_pairs, report.row("a").n_excluded) == (10, 2)
        assert (report.row("b").n_pairs, report.row("b").n_excluded) == (12, 0)

    def test_too_few_pairs(self, toy_dataset):
        ids = {inst.id for inst in toy_dataset.instances[1:]}
        row = dataset_level_correlations([_table(toy_dataset, [1.0] * 12, excluded=ids)], toy_dataset).rows[0]
        assert row.pearson is None and row.n_pairs == 1 and row.reason == "fewer than 2 pairs"

    def test_dataset_mismatch(self, toy_dataset):
        table = ScoreTable("other", "m", "overall")
        with pytest.raises(InvalidInputError):
            dataset_level_correlations([table], toy_dataset)

    def test_paired_series_rejects_duplicates(self):
        with pytest.raises(InvalidInputError):
            PairedSeries(("a", "a"), (1.0, 2.0), (1.0, 2.0))

    def test_report_lookup(self):
        with pytest.raises(KeyError):
            CorrelationReport("d").row("missing")


def test_numpy_inputs_accepted():
    x = np.arange(10.0)
    assert kendall_tau_b(x, x[::-1]) == -1.0
