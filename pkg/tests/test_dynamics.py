import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eclab.dynamics import (
    SpecializationPanel,
    build_panel,
    build_transition_dataset,
    classify_pattern,
    correlate_ubiquity_external,
    detect_events,
    load_external_scores,
    transform_ubiquity,
)
from eclab.exceptions import (
    EmptyAtRiskSet,
    InsufficientOverlap,
    UnparsableRow,
    ValidationError,
    WindowOverlap,
    YearMissing,
)
from eclab.ingest import YearlyCounts
from eclab.specialization import SpecializationMatrix
from oracles import classify_by_enumeration, density_loops, pearson_textbook, proximity_loops


def panel_from_arrays(arrays, years=None):
    years = years or list(range(2020, 2020 + len(arrays)))
    n, k = np.asarray(arrays[0]).shape
    countries = [f"c{i}" for i in range(n)]
    activities = [f"a{j}" for j in range(k)]
    mats = {y: SpecializationMatrix(tuple(countries), tuple(activities), np.asarray(a), y)
            for y, a in zip(years, arrays)}
    return SpecializationPanel.from_matrices(mats)


def random_panel(rng, n_years, n, k, p=0.5):
    arrays = []
    while len(arrays) < n_years:
        a = (rng.random((n, k)) < p).astype(int)
        if (a.sum(axis=0) > 0).all():
            arrays.append(a)
    return panel_from_arrays(arrays)


def yearly_from_counts(counts, years):
    rows = []
    for y, X in zip(years, counts):
        for i, j in itertools.product(range(X.shape[0]), range(X.shape[1])):
            rows.append((y, f"c{i}", f"a{j}", float(X[i, j])))
    return YearlyCounts(pd.DataFrame(rows, columns=["year", "country", "language", "developers"]))


class TestClassification:
    @pytest.mark.parametrize("pattern", list(itertools.product([0, 1], repeat=4)))
    def test_every_two_by_two_pattern(self, pattern):
        assert classify_pattern(pattern[:2], pattern[2:]) == classify_by_enumeration(pattern, 2)

    def test_counts_of_each_class(self):
        labels = [classify_pattern(p[:2], p[2:]) for p in itertools.product([0, 1], repeat=4)]
        assert labels.count("entry") == 1 and labels.count("exit") == 1 and labels.count(None) == 14


class TestDetectEvents:
    def test_single_pair(self):
        panel = panel_from_arrays([[[0]], [[0]], [[1]], [[1]]])
        ev = detect_events(panel, [2020, 2021], [2022, 2023])
        assert ev.pairs("entry") == {("c0", "a0")}
        assert list(ev.frame.columns) == ["country", "activity", "event", "base_years", "post_years"]
        assert ev.frame.loc[0, "base_years"] == "2020;2021"

    def test_window_overlap(self):
        panel = panel_from_arrays([[[1]], [[0]], [[1]]])
        with pytest.raises(WindowOverlap):
            detect_events(panel, [2020, 2021], [2021, 2022])

    def test_year_missing(self):
        panel = panel_from_arrays([[[1]], [[0]]])
        with pytest.raises(YearMissing):
            detect_events(panel, [2020], [2025])

    def test_empty_window(self):
        with pytest.raises(ValidationError):
            detect_events(panel_from_arrays([[[1]], [[0]]]), [], [2021])

    def test_planted_panel_matches_enumeration(self, rng):
        for _ in range(10):
            panel = random_panel(rng, 4, 5, 5)
            ev = detect_events(panel, [2020, 2021], [2022, 2023])
            expect = {"entry": set(), "exit": set()}
            for i, j in itertools.product(range(5), range(5)):
                label = classify_by_enumeration(list(panel.m[:, i, j]), 2)
                if label:
                    expect[label].add((f"c{i}", f"a{j}"))
            assert ev.pairs("entry") == expect["entry"]
            assert ev.pairs("exit") == expect["exit"]

    def test_constant_panel_has_no_events(self, rng):
        a = (rng.random((6, 4)) < 0.5).astype(int)
        a[0] = 1
        assert len(detect_events(panel_from_arrays([a] * 4), [2020, 2021], [2022, 2023])) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_events_mutually_exclusive_and_stable(seed):
    rng = np.random.default_rng(seed)
    panel = random_panel(rng, 4, 4, 4)
    ev = detect_events(panel, [2020, 2021], [2022, 2023])
    assert not (ev.pairs("entry") & ev.pairs("exit"))
    assert not ev.frame.duplicated(["country", "activity"]).any()
    # every entry is an at-risk row with outcome 1 when there is no count floor
    ds = build_transition_dataset(panel, ev, "entry", at_risk="none") if (panel.m[:2] == 0).all(axis=0).any() else None
    if ds is not None:
        assert ds.frame["outcome"].sum() == len(ev.pairs("entry"))


class TestTransitions:
    def test_single_cell_panel(self):
        panel = panel_from_arrays([[[1, 0], [0, 1]], [[1, 0], [0, 1]], [[1, 1], [0, 1]], [[1, 1], [0, 1]]])
        ev = detect_events(panel, [2020, 2021], [2022, 2023])
        ds = build_transition_dataset(panel, ev, "entry", at_risk="none", ubiquity_transform="raw")
        assert list(zip(ds.frame["country"], ds.frame["activity"], ds.frame["outcome"])) == [
            ("c0", "a1", 1), ("c1", "a0", 0)]
        # each activity held by one country: proximity is zero off the diagonal
        assert ds.frame["density"].tolist() == [0.0, 0.0]
        assert ds.frame["ubiquity"].tolist() == [1.0, 1.0]

    def test_stable_panel_exit_outcomes_are_zero(self, rng):
        a = (rng.random((5, 4)) < 0.6).astype(int)
        a[0] = 1
        panel = panel_from_arrays([a] * 4)
        ds = build_transition_dataset(panel, detect_events(panel, [2020, 2021], [2022, 2023]), "exit")
        assert (ds.frame["outcome"] == 0).all()
        assert len(ds) == a.sum()

    def test_matches_brute_force(self, rng):
        for _ in range(10):
            panel = random_panel(rng, 4, 5, 5)
            ev = detect_events(panel, [2020, 2021], [2022, 2023])
            M0 = panel.m[0]
            dens = density_loops(M0, proximity_loops(M0))
            ubi = M0.sum(axis=0).astype(float)
            for kind in ("entry", "exit"):
                want = 0 if kind == "entry" else 1
                rows = [(i, j) for i, j in itertools.product(range(5), range(5))
                        if panel.m[0, i, j] == want and panel.m[1, i, j] == want]
                if not rows:
                    with pytest.raises(EmptyAtRiskSet):
                        build_transition_dataset(panel, ev, kind, at_risk="none")
                    continue
                ds = build_transition_dataset(panel, ev, kind, at_risk="none", ubiquity_transform="raw")
                assert len(ds) == len(rows)
                hits = ev.pairs(kind)
                for (i, j), r in zip(rows, ds.frame.itertuples()):
                    assert (r.country, r.activity) == (f"c{i}", f"a{j}")
                    assert r.outcome == int((r.country, r.activity) in hits)
                    assert r.density == pytest.approx(dens[i, j], abs=1e-12)
                    assert r.ubiquity == ubi[j]
                assert ds.metadata["n_events"] == len(hits)

    def test_at_risk_rules(self, rng):
        years = [2020, 2021, 2022, 2023]
        counts = [rng.integers(0, 6, size=(6, 5)).astype(float) for _ in years]
        for X in counts:
            X[:, 0] += 1
            X[0] += 1
        panel = build_panel(yearly_from_counts(counts, years))
        ev = detect_events(panel, years[:2], years[2:])
        none = build_transition_dataset(panel, ev, "entry", at_risk="none")
        floor = build_transition_dataset(panel, ev, "entry", at_risk="nonzero-count")
        rcapos = build_transition_dataset(panel, ev, "entry", at_risk="rca-positive")
        expect = {(f"c{i}", f"a{j}") for i, j in itertools.product(range(6), range(5))
                  if panel.m[0, i, j] == 0 and panel.m[1, i, j] == 0 and counts[0][i, j] > 0 and counts[1][i, j] > 0}
        assert set(zip(floor.frame["country"], floor.frame["activity"])) == expect
        pd.testing.assert_frame_equal(floor.frame, rcapos.frame)
        assert len(none) >= len(floor)

    def test_at_risk_needs_counts(self):
        panel = panel_from_arrays([[[1, 0], [0, 1]]] * 2)
        ev = detect_events(panel, [2020], [2021])
        with pytest.raises(ValidationError):
            build_transition_dataset(panel, ev, "entry", at_risk="nonzero-count")

    def test_bad_kind_and_rule(self):
        panel = panel_from_arrays([[[1, 0], [0, 1]]] * 2)
        ev = detect_events(panel, [2020], [2021])
        with pytest.raises(ValidationError):
            build_transition_dataset(panel, ev, "stay")
        with pytest.raises(ValidationError):
            build_transition_dataset(panel, ev, "entry", at_risk="sometimes")


class TestUbiquityTransform:
    def test_variants(self):
        u = pd.Series([1.0, 2.0, 3.0], index=list("abc"))
        assert transform_ubiquity(u, "raw").tolist() == [1.0, 2.0, 3.0]
        z = transform_ubiquity(u, "z")
        assert z.mean() == pytest.approx(0, abs=1e-15) and z.std(ddof=0) == pytest.approx(1, abs=1e-15)
        np.testing.assert_allclose(transform_ubiquity(u, "log"), np.log([1, 2, 3]), atol=0)

    def test_errors(self):
        with pytest.raises(ValidationError):
            transform_ubiquity(pd.Series([0.0, 1.0]), "log")
        with pytest.raises(ValidationError):
            transform_ubiquity(pd.Series([1.0]), "rank")


class TestCorrelation:
    def test_perfect(self):
        u = pd.Series([1.0, 2.0, 3.0, 4.0], index=list("abcd"))
        assert correlate_ubiquity_external(u, 3 * u + 1).pearson_r == pytest.approx(1, abs=1e-12)
        rep = correlate_ubiquity_external(u, -u)
        assert rep.pearson_r == pytest.approx(-1, abs=1e-12)
        assert rep.spearman_rho == pytest.approx(-1, abs=1e-12)

    def test_textbook(self, rng):
        labels = [f"l{i}" for i in range(20)]
        u = pd.Series(rng.normal(size=20), index=labels)
        e = pd.Series(rng.normal(size=20), index=labels)
        rep = correlate_ubiquity_external(u, e)
        assert rep.n == 20
        assert rep.pearson_r == pytest.approx(pearson_textbook(list(u), list(e)), abs=1e-12)

    def test_unmatched_and_overlap(self):
        u = pd.Series([1.0, 2.0, 5.0, 3.0], index=list("abcd"))
        e = pd.Series([2.0, 1.0, 4.0, 9.0], index=list("abcz"))
        assert correlate_ubiquity_external(u, e).unmatched == ["d", "z"]
        with pytest.raises(InsufficientOverlap):
            correlate_ubiquity_external(u[["a", "b"]], e)

    def test_load_scores(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("language,impact_score\nPython,1.5\n Go ,2\n")
        assert load_external_scores(p).to_dict() == {"Python": 1.5, "Go": 2.0}
        p.write_text("language,impact_score\nPython,high\n")
        with pytest.raises(UnparsableRow):
            load_external_scores(p)
