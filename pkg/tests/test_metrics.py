import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlcluster.metrics import adjusted_rand, contingency, metrics_report, nmi, purity

# (pred, truth, purity, nmi, ari), all derived by hand from the contingency table
HAND_CASES = [
    ([0, 0, 1, 1], [0, 0, 1, 1], 1.0, 1.0, 1.0),
    ([0, 0, 0, 0], [0, 0, 1, 1], 0.5, 0.0, 0.0),
    ([0, 1, 2, 3], [0, 0, 1, 1], 1.0, math.log(2) / (0.5 * (math.log(4) + math.log(2))), 0.0),
    ([0, 0, 1, 1], [0, 1, 0, 1], 0.5, 0.0, -0.5),
    ([0, 0, 1, 1, 2, 2], [0, 0, 0, 1, 1, 1], 5 / 6, (4 / 3) * math.log(2) / math.log(6), 8 / 33),
    ([1, 1, 0, 0], [0, 0, 1, 1], 1.0, 1.0, 1.0),
    ([0, 0, 0], [0, 0, 0], 1.0, 1.0, 1.0),
    # counts [[2,1],[0,1]]: index 1, rows 3+0, cols 1+1, total 6, expected 1, max 2.5
    ([0, 0, 0, 1], [0, 0, 1, 1], 0.75,
     (0.5 * math.log(4 / 3) + 0.25 * math.log(2 / 3) + 0.25 * math.log(2))
     / (0.5 * ((-0.75 * math.log(0.75) - 0.25 * math.log(0.25)) + math.log(2))),
     0.0),
    ([5, 5, 9, 9], [0, 0, 1, 1], 1.0, 1.0, 1.0),
    ([0, 1, 0, 1, 0, 1], [0, 0, 0, 1, 1, 1], 4 / 6,
     (2 * (1 / 3) * math.log(4 / 3) + 2 * (1 / 6) * math.log(2 / 3)) / math.log(2),
     # counts [[2,1],[1,2]]: index 2, rows 3+3, cols 3+3, total 15, expected 2.4, max 6
     (2 - 2.4) / (6 - 2.4)),
]


class TestHandOracles:
    @pytest.mark.parametrize("pred,truth,p,n,a", HAND_CASES)
    def test_case(self, pred, truth, p, n, a):
        assert abs(purity(pred, truth) - p) < 1e-12
        assert abs(nmi(pred, truth) - n) < 1e-12
        assert abs(adjusted_rand(pred, truth) - a) < 1e-12

    def test_contingency_table(self):
        t = contingency([0, 0, 1, 1, 2, 2], [0, 0, 0, 1, 1, 1])
        np.testing.assert_array_equal(t.counts, [[2, 0], [1, 1], [0, 2]])
        assert t.n == 6 == t.counts.sum()

    def test_singletons_have_purity_one(self):
        assert purity(np.arange(7), [0, 1, 1, 0, 2, 2, 0]) == 1.0


class TestErrors:
    @pytest.mark.parametrize("fn", [purity, nmi, adjusted_rand, metrics_report])
    def test_length_mismatch(self, fn):
        with pytest.raises(ValueError, match="length"):
            fn([0, 1], [0, 1, 1])

    @pytest.mark.parametrize("fn", [purity, nmi, adjusted_rand])
    def test_empty(self, fn):
        with pytest.raises(ValueError):
            fn([], [])


labelings = st.integers(2, 60).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 5), min_size=n, max_size=n),
        st.lists(st.integers(0, 5), min_size=n, max_size=n),
    )
)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(labelings)
    def test_against_sklearn(self, pair):
        sk = pytest.importorskip("sklearn.metrics")
        pred, truth = pair
        assert nmi(pred, truth) == pytest.approx(
            sk.normalized_mutual_info_score(truth, pred, average_method="arithmetic"), abs=1e-10
        )
        assert adjusted_rand(pred, truth) == pytest.approx(sk.adjusted_rand_score(truth, pred), abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(labelings, st.permutations(range(6)), st.permutations(range(6)))
    def test_relabel_invariance(self, pair, perm_a, perm_b):
        pred, truth = np.array(pair[0]), np.array(pair[1])
        p2, t2 = np.array(perm_a)[pred], np.array(perm_b)[truth]
        for fn in (purity, nmi, adjusted_rand):
            assert fn(p2, t2) == pytest.approx(fn(pred, truth), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(labelings)
    def test_symmetry_and_range(self, pair):
        pred, truth = pair
        assert nmi(pred, truth) == pytest.approx(nmi(truth, pred), abs=1e-12)
        assert adjusted_rand(pred, truth) == pytest.approx(adjusted_rand(truth, pred), abs=1e-12)
        assert 0.0 <= nmi(pred, truth) <= 1.0
        assert 0.0 < purity(pred, truth) <= 1.0
        assert adjusted_rand(pred, truth) <= 1.0

    def test_purity_is_asymmetric(self):
        pred, truth = [0, 1, 2, 3], [0, 0, 1, 1]
        assert purity(pred, truth) != purity(truth, pred)

    @settings(max_examples=100, deadline=None)
    @given(labelings, st.integers(0, 2**32 - 1))
    def test_purity_monotone_under_refinement(self, pair, seed):
        pred, truth = np.array(pair[0]), np.array(pair[1])
        split = np.random.default_rng(seed).integers(0, 2, size=pred.size)
        refined = pred * 2 + split
        assert purity(refined, truth) >= purity(pred, truth) - 1e-15

    def test_random_ari_near_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(3):
            a, b = rng.integers(0, 5, 10000), rng.integers(0, 5, 10000)
            assert abs(adjusted_rand(a, b)) < 0.05


def test_report_fields():
    r = metrics_report([0, 0, 1, 1], [0, 1, 0, 1])
    assert set(r) == {"purity", "nmi", "ari", "n", "k_pred", "k_true"}
    assert r["ari"] == pytest.approx(-0.5) and r["n"] == 4 and r["k_pred"] == r["k_true"] == 2
