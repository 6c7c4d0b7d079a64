"""Dynamic scale filter: table construction, outlier counting, selection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokensieve import LofParams, build_lof_table, count_salient, dynamic_select
from tokensieve.synth import Pcg32, oracle_lof

# Hand-derived reference for scores [0.0, 0.1, 0.2, 0.9] at k=2.
# Distances: d(0,1)=0.1 d(0,2)=0.2 d(0,3)=0.9 d(1,2)=0.1 d(1,3)=0.8 d(2,3)=0.7
# k-distances [0.2, 0.1, 0.2, 0.8]; neighborhoods {1,2} {0,2} {0,1} {1,2};
# LRD [20/3, 5, 20/3, 4/3]; LOF [7/8, 4/3, 7/8, 35/8].
FOUR_SCORES = np.array([0.0, 0.1, 0.2, 0.9])
FOUR_KD = [0.2, 0.1, 0.2, 0.8]
FOUR_LRD = [20.0 / 3.0, 5.0, 20.0 / 3.0, 4.0 / 3.0]
FOUR_LOF = [7.0 / 8.0, 4.0 / 3.0, 7.0 / 8.0, 35.0 / 8.0]


def assert_tables_close(a, b, atol=1e-9):
    assert np.allclose(a.k_distance, b.k_distance, rtol=0.0, atol=atol)
    finite = np.isfinite(b.lrd)
    assert np.array_equal(np.isfinite(a.lrd), finite)
    assert np.allclose(a.lrd[finite], b.lrd[finite], rtol=0.0, atol=atol)
    finite = np.isfinite(b.lof)
    assert np.array_equal(np.isfinite(a.lof), finite)
    assert np.allclose(a.lof[finite], b.lof[finite], rtol=0.0, atol=atol)
    for na, nb in zip(a.neighborhoods, b.neighborhoods):
        assert np.array_equal(np.sort(na), np.sort(nb))


class TestHandDerivedCase:
    """Both the oracle and the production table must match the reference."""

    @pytest.mark.parametrize("build", [
        lambda s: build_lof_table(s, LofParams(k=2)),
        lambda s: oracle_lof(s, 2),
    ], ids=["table", "oracle"])
    def test_four_point_values(self, build):
        table = build(FOUR_SCORES)
        assert table.k_distance == pytest.approx(FOUR_KD, rel=1e-12)
        assert table.lrd == pytest.approx(FOUR_LRD, rel=1e-12)
        assert table.lof == pytest.approx(FOUR_LOF, rel=1e-12)
        expected_neigh = [{1, 2}, {0, 2}, {0, 1}, {1, 2}]
        for got, want in zip(table.neighborhoods, expected_neigh):
            assert set(int(i) for i in got) == want

    def test_spike_is_flagged(self):
        table = build_lof_table(FOUR_SCORES, LofParams(k=2))
        assert table.lof[3] > 1.0

    def test_count_salient_is_one(self):
        params = LofParams(k=2)
        table = build_lof_table(FOUR_SCORES, params)
        # index 1 also has LOF > 1 but sits below the median: not counted
        assert count_salient(FOUR_SCORES, table, params) == 1

    def test_dynamic_select_picks_spike(self):
        assert list(dynamic_select(FOUR_SCORES, LofParams(k=2), fallback=True)) == [3]


class TestDegenerateInputs:
    def test_constant_scores_all_lof_one(self):
        scores = np.full(50, 0.5)
        table = build_lof_table(scores, LofParams(k=5))
        assert np.all(table.lof == 1.0)
        assert np.all(table.k_distance == 0.0)
        assert np.all(np.isinf(table.lrd))

    def test_constant_scores_zero_salient(self):
        scores = np.full(50, 0.5)
        params = LofParams(k=5)
        table = build_lof_table(scores, params)
        assert count_salient(scores, table, params) == 0

    def test_duplicate_cluster_plus_spike(self):
        # 30 copies of one value and a lone spike: only the spike stands out
        scores = np.concatenate([np.full(30, 0.1), [0.9]])
        params = LofParams(k=5)
        table = build_lof_table(scores, params)
        assert np.all(table.lof[:30] == 1.0)
        assert np.isinf(table.lof[30])
        assert count_salient(scores, table, params) == 1

    def test_too_few_points(self):
        with pytest.raises(ValueError, match="too few points"):
            build_lof_table(np.arange(5.0), LofParams(k=5))
        with pytest.raises(ValueError, match="too few points"):
            oracle_lof(np.arange(5.0), 5)


class TestOracleEquivalence:
    def test_random_cases(self):
        rng = Pcg32(2024)
        for _ in range(40):
            k = (5, 20, 30, 90)[int(rng.uint32(1)[0]) % 4]
            n = k + 1 + int(rng.uint32(1)[0]) % (600 - k)
            scores = rng.uniform(n)
            assert_tables_close(
                build_lof_table(scores, LofParams(k=k)), oracle_lof(scores, k)
            )

    def test_with_heavy_ties(self):
        rng = Pcg32(99)
        for _ in range(20):
            n = 40 + int(rng.uint32(1)[0]) % 200
            # quantized scores force duplicate values and boundary ties
            scores = np.round(rng.uniform(n) * 8.0) / 8.0
            k = 3 + int(rng.uint32(1)[0]) % 20
            assert_tables_close(
                build_lof_table(scores, LofParams(k=k)), oracle_lof(scores, k)
            )

    def test_neighborhood_at_least_k(self):
        rng = Pcg32(5)
        for _ in range(10):
            n = 30 + int(rng.uint32(1)[0]) % 100
            k = 2 + int(rng.uint32(1)[0]) % 10
            table = build_lof_table(rng.uniform(n), LofParams(k=k))
            assert all(len(nb) >= k for nb in table.neighborhoods)


class TestDynamicSelect:
    def test_constant_with_fallback(self):
        got = dynamic_select(np.full(30, 0.25), LofParams(k=4), fallback=True)
        assert list(got) == [0]

    def test_constant_without_fallback(self):
        got = dynamic_select(np.full(30, 0.25), LofParams(k=4), fallback=False)
        assert got.size == 0

    def test_fallback_keep_width(self):
        params = LofParams(k=4, fallback_keep=3)
        got = dynamic_select(np.full(30, 0.25), params, fallback=True)
        assert list(got) == [0, 1, 2]

    def test_small_input_keeps_everything(self):
        got = dynamic_select(np.array([0.3, 0.9]), LofParams(k=5), fallback=False)
        assert list(got) == [0, 1]

    def test_selected_scores_dominate_unselected(self):
        rng = Pcg32(17)
        for _ in range(20):
            n = 30 + int(rng.uint32(1)[0]) % 300
            scores = rng.uniform(n)
            sel = dynamic_select(scores, LofParams(k=7), fallback=True)
            assert sel.size > 0
            unsel = np.setdiff1d(np.arange(n), sel)
            if unsel.size:
                assert scores[sel].min() >= scores[unsel].max()

    def test_two_sided_spikes_only_high_side_counts(self):
        # symmetric outliers around a tied mid cluster: only the top one selected
        scores = np.concatenate([[0.0], np.full(40, 0.5), [1.0]])
        params = LofParams(k=5)
        table = build_lof_table(scores, params)
        assert table.lof[0] > 1.0 and table.lof[-1] > 1.0
        assert count_salient(scores, table, params) == 1
        assert list(dynamic_select(scores, params, fallback=True)) == [len(scores) - 1]

    @given(
        st.lists(st.floats(0.0, 1.0, width=32), min_size=12, max_size=80),
        st.floats(0.1, 10.0),
        st.floats(-5.0, 5.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_increasing_affine_map_keeps_selection(self, raw, scale, shift):
        """Min-max normalization cancels any increasing affine map of the raw
        scores, so the selected index set is unchanged."""
        from tokensieve import minmax_normalize

        raw = np.asarray(raw, dtype=np.float64)
        params = LofParams(k=3)
        base = dynamic_select(minmax_normalize(raw), params, fallback=True)
        mapped = dynamic_select(minmax_normalize(raw * scale + shift), params, fallback=True)
        assert np.array_equal(base, mapped)
