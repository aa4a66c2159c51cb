import numpy as np
import pytest
from conftest import cell_function, direct_negative_loglik, table_loss_under

from lmboost.core import CovariatePath, SubjectRecord, make_partition, time_grid
from lmboost.errors import InvalidArgumentError
from lmboost.landmark import (
    MIXED_SUBJECT,
    LandmarkDraw,
    LandmarkScheme,
    build_collapsed_super_dataset,
    build_super_dataset,
    collapse,
    concat_tables,
    draw_landmarks,
    draw_landmarks_panel,
    read_table_csv,
    write_table_csv,
)
from lmboost.rng import substream
from lmboost.simulate import scenario_linear, scenario_nonlinear, simulate_panel


def _subject(sid, jumps, values, event, censor, T=1.0):
    path = CovariatePath(np.asarray(jumps, dtype=np.float64),
                         np.asarray(values, dtype=np.float64))
    return SubjectRecord(sid, path, event, censor, T)


def _grid_partition(p, step=0.25, names=None):
    return make_partition(time_grid(1.0, step), p, covariate_names=names)


class TestDraws:
    def test_uniform_count_and_range(self):
        sub = _subject(1, [0.0], [[0.0]], None, 1.0)
        scheme = LandmarkScheme("uniform", 7, 1.0)
        draws = draw_landmarks(scheme, sub, substream(0, 3, 1))
        assert len(draws) == 7
        assert all(0.0 <= d.s < 1.0 for d in draws)
        assert [d.q for d in draws] == list(range(1, 8))

    def test_visit_based_values(self):
        # exit at 0.5: eligible picks are the observed visits before it
        sub = _subject(2, [0.0, 0.1, 0.3, 0.7], [[0], [1], [2], [3]], None, 0.5)
        scheme = LandmarkScheme("visit", 200, 1.0)
        draws = draw_landmarks(scheme, sub, substream(0, 3, 2))
        eligible = {0.1, 0.3}
        kept_small = [d.s for d in draws if d.s <= 0.5]
        assert kept_small and set(kept_small) <= eligible
        assert all(d.s > 0.5 for d in draws if d.s not in eligible)

    def test_visit_based_no_visits_discards(self):
        sub = _subject(3, [0.0], [[0.0]], None, 1.0)
        scheme = LandmarkScheme("visit", 50, 1.0)
        assert draw_landmarks(scheme, sub, substream(0, 3, 3)) == []

    def test_panel_order_invariance(self):
        subs = simulate_panel(scenario_linear(), 12, seed=4)
        scheme = LandmarkScheme("uniform", 3, 1.0)
        a = draw_landmarks_panel(scheme, subs, seed=9)
        b = draw_landmarks_panel(scheme, list(reversed(subs)), seed=9)
        assert sorted(a, key=lambda d: (d.subject_id, d.q)) == \
            sorted(b, key=lambda d: (d.subject_id, d.q))

    def test_bad_scheme(self):
        with pytest.raises(InvalidArgumentError):
            LandmarkScheme("monthly", 5, 1.0)
        with pytest.raises(InvalidArgumentError):
            LandmarkScheme("uniform", 0, 1.0)


class TestBuild:
    def test_exposure_conservation_per_draw(self):
        subs = simulate_panel(scenario_linear(), 80, seed=7)
        scheme = LandmarkScheme("uniform", 1, 1.0)
        draws = draw_landmarks_panel(scheme, subs, seed=8)
        part = _grid_partition(3, names=("w1", "w2", "w3"))
        table = build_super_dataset(subs, draws, part)
        by_id = {s.id: s for s in subs}
        for d in draws:
            exit_time = by_id[d.subject_id].exit_time
            mask = table.subject_id == d.subject_id
            if d.s >= exit_time:
                assert not mask.any()
            else:
                assert table.exp[mask].sum() == pytest.approx(exit_time - d.s, rel=1e-12)

    def test_occurrence_totals(self):
        subs = simulate_panel(scenario_linear(), 80, seed=17)
        scheme = LandmarkScheme("uniform", 4, 1.0)
        draws = draw_landmarks_panel(scheme, subs, seed=18)
        part = _grid_partition(3)
        table = build_super_dataset(subs, draws, part)
        by_id = {s.id: s for s in subs}
        want = sum(1 for d in draws
                   if d.s < by_id[d.subject_id].exit_time
                   and by_id[d.subject_id].event_time is not None)
        assert table.occ.sum() == want

    def test_event_on_boundary_gets_zero_exposure_row(self):
        sub = _subject(1, [0.0], [[1.0]], 0.5, 0.9)
        part = _grid_partition(1)
        table = build_super_dataset([sub], [LandmarkDraw(1, 1, 0.1)], part)
        hit = (table.occ == 1.0).nonzero()[0]
        assert hit.size == 1
        i = hit[0]
        assert table.t[i] == 0.5
        assert table.exp[i] == 0.0
        # exposure still stops at the event
        assert table.exp.sum() == pytest.approx(0.5 - 0.1)

    def test_event_at_horizon_lands_in_last_bin(self):
        sub = _subject(1, [0.0], [[1.0]], 1.0, 1.0)
        part = _grid_partition(1)
        table = build_super_dataset([sub], [LandmarkDraw(1, 1, 0.6)], part)
        i = (table.occ == 1.0).nonzero()[0][0]
        assert table.t[i] == 0.75
        assert table.exp.sum() == pytest.approx(0.4)

    def test_draw_past_exit_contributes_nothing(self):
        sub = _subject(1, [0.0], [[1.0]], None, 0.3)
        part = _grid_partition(1)
        table = build_super_dataset([sub], [LandmarkDraw(1, 1, 0.3),
                                            LandmarkDraw(1, 2, 0.8)], part)
        assert len(table) == 0

    def test_feature_columns_are_bin_representatives(self):
        # s binned on a coarse grid, one covariate binned, one raw
        sub = _subject(1, [0.0], [[0.37, 5.5]], None, 1.0)
        part = make_partition(
            time_grid(1.0, 0.25), 2, covariate_names=("a", "b"),
            s_boundaries=np.array([0.0, 0.5, 1.0]),
            covariate_boundaries={0: np.array([0.0, 0.25, 0.5, 1.0])},
        )
        table = build_super_dataset([sub], [LandmarkDraw(1, 1, 0.6)], part)
        assert np.all(table.s == 0.5)
        assert np.all(table.w[:, 0] == 0.25)
        assert np.all(table.w[:, 1] == 5.5)

    def test_missing_covariate_is_nan_flagged(self):
        vals = np.array([[np.nan, 2.0]])
        sub = _subject(1, [0.0], vals, None, 1.0)
        part = _grid_partition(2)
        table = build_super_dataset([sub], [LandmarkDraw(1, 1, 0.2)], part)
        assert table.w_miss[:, 0].all()
        assert np.isnan(table.w[:, 0]).all()
        assert not table.w_miss[:, 1].any()


class TestLikelihood:
    @pytest.mark.parametrize("scen_fn,seed", [(scenario_linear, 31), (scenario_nonlinear, 32)])
    def test_table_loss_matches_direct_loglik(self, scen_fn, seed):
        subs = simulate_panel(scen_fn(), 40, seed=seed)
        scheme = LandmarkScheme("uniform", 3, 1.0)
        draws = draw_landmarks_panel(scheme, subs, seed=seed + 100)
        part = make_partition(
            time_grid(1.0, 0.1), 3, covariate_names=("w1", "w2", "w3"),
            s_boundaries=np.linspace(0.0, 1.0, 6),
            covariate_boundaries={2: np.array([-50.0, 0.0, 0.5, 50.0])},
        )
        table = build_super_dataset(subs, draws, part)
        F = cell_function(seed)
        direct = direct_negative_loglik(subs, draws, part, F)
        assert table_loss_under(table, F) == pytest.approx(direct, rel=1e-12)
        assert table_loss_under(collapse(table), F) == pytest.approx(direct, rel=1e-12)


class TestCollapse:
    def _table(self, n=120, seed=43, Q=3):
        subs = simulate_panel(scenario_linear(), n, seed=seed)
        draws = draw_landmarks_panel(LandmarkScheme("uniform", Q, 1.0), subs, seed=seed + 1)
        part = make_partition(
            time_grid(1.0, 0.2), 3, covariate_names=("w1", "w2", "w3"),
            s_boundaries=np.linspace(0.0, 1.0, 5),
            covariate_boundaries={2: np.array([-50.0, 0.5, 50.0])},
        )
        return build_super_dataset(subs, draws, part)

    def test_totals_preserved(self):
        table = self._table()
        small = collapse(table)
        assert len(small) < len(table)
        assert small.occ.sum() == table.occ.sum()
        assert small.exp.sum() == pytest.approx(table.exp.sum(), rel=1e-12)
        assert small.weight.sum() == len(table)

    def test_keys_unique_after_collapse(self):
        small = collapse(self._table())
        key = np.column_stack([small.t, small.s, np.where(small.w_miss, np.inf, small.w)])
        assert np.unique(key, axis=0).shape[0] == len(small)

    def test_collapse_idempotent(self):
        small = collapse(self._table())
        again = collapse(small)
        assert len(again) == len(small)
        assert np.array_equal(again.occ, small.occ)
        assert np.allclose(again.exp, small.exp)

    def test_mixed_subject_marker(self):
        a = _subject(1, [0.0], [[1.0]], None, 1.0)
        b = _subject(2, [0.0], [[1.0]], None, 1.0)
        part = _grid_partition(1)
        table = build_super_dataset(
            [a, b], [LandmarkDraw(1, 1, 0.0), LandmarkDraw(2, 1, 0.0)], part)
        small = collapse(table)
        assert np.all(small.subject_id == MIXED_SUBJECT)
        assert np.all(small.weight == 2)

    def test_single_subject_keeps_id(self):
        a = _subject(5, [0.0], [[1.0]], None, 1.0)
        part = _grid_partition(1)
        table = build_super_dataset([a], [LandmarkDraw(5, 1, 0.0)], part)
        small = collapse(table)
        assert np.all(small.subject_id == 5)

    def test_chunked_build_matches_single_shot(self):
        subs = simulate_panel(scenario_linear(), 50, seed=3)
        draws = draw_landmarks_panel(LandmarkScheme("uniform", 5, 1.0), subs, seed=4)
        part = _grid_partition(3)
        whole = collapse(build_super_dataset(subs, draws, part))
        chunked = build_collapsed_super_dataset(subs, draws, part, chunk_draws=37)
        assert len(whole) == len(chunked)
        assert np.array_equal(whole.t, chunked.t)
        assert np.array_equal(whole.s, chunked.s)
        assert np.array_equal(whole.occ, chunked.occ)
        assert np.allclose(whole.exp, chunked.exp, rtol=1e-12)
        assert np.array_equal(whole.weight, chunked.weight)

    def test_concat_roundtrip(self):
        table = self._table(n=30)
        halves = concat_tables([table.subset(np.arange(len(table)) < 10),
                                table.subset(np.arange(len(table)) >= 10)])
        assert len(halves) == len(table)
        assert np.array_equal(halves.t, table.t)


class TestCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        subs = simulate_panel(scenario_linear(), 25, seed=51)
        draws = draw_landmarks_panel(LandmarkScheme("uniform", 2, 1.0), subs, seed=52)
        part = _grid_partition(3, names=("w1", "w2", "w3"))
        table = collapse(build_super_dataset(subs, draws, part))
        path = tmp_path / "table.csv"
        write_table_csv(table, path, comment="test artifact")
        back = read_table_csv(path, partition=part)
        assert back.names == table.names
        assert np.array_equal(back.t, table.t)
        assert np.array_equal(back.s, table.s)
        assert np.array_equal(back.occ, table.occ)
        assert np.array_equal(back.exp, table.exp)  # repr rounds trips exactly
        assert np.array_equal(back.subject_id, table.subject_id)
        assert np.array_equal(back.weight, table.weight)
        assert np.array_equal(back.w_miss, table.w_miss)
        assert np.array_equal(np.where(back.w_miss, 0.0, back.w),
                              np.where(table.w_miss, 0.0, table.w))

    def test_reader_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(InvalidArgumentError):
            read_table_csv(path)
