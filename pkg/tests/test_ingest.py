import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eclab.exceptions import (
    DuplicateKey,
    EmptyAfterFilter,
    MissingColumn,
    SelfLoop,
    UnparsableRow,
    ValidationError,
)
from eclab.ingest import (
    QuarterlyCounts,
    apply_sample_filters,
    clean_filter_aggregate,
    default_exclusions,
    load_adjacency,
    load_exclusions,
    load_indicators,
    parse_ghig,
    rank_languages,
)

HEADER = "num_pushers,language,language_type,iso2_code,year,quarter"


def write(tmp_path, name, lines):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def quarterly(rows):
    frame = pd.DataFrame(rows, columns=["year", "quarter", "country", "language", "developers"])
    return QuarterlyCounts(frame.astype({"year": "int64", "quarter": "int64", "developers": "float64"}))


class TestParseGhig:
    def test_valid_rows_pass_through(self, tmp_path):
        p = write(tmp_path, "l.csv", [
            HEADER,
            "10,Python,programming,US,2020,1",
            "20,Python,programming,DE,2020,1",
            "30,C,programming,US,2020,2",
            "40,C,programming,DE,2020,2",
        ])
        q = parse_ghig(p)
        assert len(q) == 4
        assert q.n_dropped == 0
        assert list(q.frame.columns) == ["year", "quarter", "country", "language", "developers"]
        assert q.frame["developers"].tolist() == [10, 20, 30, 40]

    def test_empty_country_dropped_and_counted(self, tmp_path):
        p = write(tmp_path, "l.csv", [HEADER, "10,Python,programming,,2020,1", "5,C,programming,US,2020,1"])
        q = parse_ghig(p)
        assert len(q) == 1
        assert q.n_dropped == 1

    def test_duplicate_key(self, tmp_path):
        p = write(tmp_path, "l.csv", [HEADER, "10,Python,programming,US,2020,1", "11,Python,programming,US,2020,1"])
        with pytest.raises(DuplicateKey) as err:
            parse_ghig(p)
        assert err.value.row == 3

    def test_missing_column(self, tmp_path):
        p = write(tmp_path, "l.csv", ["num_pushers,language,year,quarter", "1,C,2020,1"])
        with pytest.raises(MissingColumn) as err:
            parse_ghig(p)
        assert err.value.column == "iso2_code"

    def test_column_map(self, tmp_path):
        p = write(tmp_path, "l.csv", ["devs,lang,cc,yr,q", "7,C,US,2021,3"])
        q = parse_ghig(p, {"developers": "devs", "language": "lang", "country": "cc", "year": "yr", "quarter": "q"})
        assert q.frame.iloc[0].to_dict() == {
            "year": 2021, "quarter": 3, "country": "US", "language": "C", "developers": 7.0,
        }

    @pytest.mark.parametrize("bad", ["x,C,programming,US,2020,1", "-1,C,programming,US,2020,1",
                                     "1,C,programming,US,2020,5", "1,C,programming,US,20x0,1"])
    def test_unparsable(self, tmp_path, bad):
        p = write(tmp_path, "l.csv", [HEADER, "1,C,programming,DE,2020,1", bad])
        with pytest.raises(UnparsableRow) as err:
            parse_ghig(p)
        assert err.value.row == 3


class TestCleanFilterAggregate:
    def test_exclusion_removes_yaml(self):
        q = quarterly([(2020, 1, "US", "yaml", 100), (2020, 1, "US", "C", 5), (2020, 1, "DE", "YAML", 3)])
        y = clean_filter_aggregate(q, ["yaml"], 10)
        assert y.languages == ["C"]

    def test_default_exclusions(self):
        assert default_exclusions() == ["yaml", "json", "text", "svg", "Markdown", "xml"]

    def test_load_exclusions_comments(self, tmp_path):
        p = write(tmp_path, "ex.txt", ["# data formats", "yaml", "json  # trailing", "", "  xml  "])
        assert load_exclusions(p) == ["yaml", "json", "xml"]

    def test_quarter_mean(self):
        q = quarterly([(2020, k, "US", "C", v) for k, v in zip((1, 2, 3, 4), (100, 200, 300, 400))])
        y = clean_filter_aggregate(q, [], 5)
        assert y.frame["developers"].tolist() == [250.0]

    def test_partial_year_mean_over_present_quarters(self):
        q = quarterly([(2020, 1, "US", "C", 10), (2020, 3, "US", "C", 30)])
        assert clean_filter_aggregate(q, [], 5).frame["developers"].tolist() == [20.0]

    def test_everything_excluded(self):
        q = quarterly([(2020, 1, "US", "json", 1)])
        with pytest.raises(EmptyAfterFilter):
            clean_filter_aggregate(q, ["JSON"], 5)

    def test_top_n_validation(self):
        q = quarterly([(2020, 1, "US", "C", 1)])
        with pytest.raises(ValidationError):
            clean_filter_aggregate(q, [], 0)

    def test_top_n_matches_independent_ranking(self, rng):
        # 200 languages with many ties in the mean; some absent from some periods
        rows = []
        periods = [(2020, 1), (2020, 2), (2021, 1)]
        for i in range(200):
            lang = f"L{rng.integers(0, 10**6):06d}_{i}"
            for (yr, qt) in periods:
                if rng.random() < 0.8:
                    for c in ("US", "DE"):
                        rows.append((yr, qt, c, lang, float(rng.integers(0, 4))))
        q = quarterly(rows)
        y = clean_filter_aggregate(q, [], 150)
        assert len(y.languages) == 150

        totals = {}
        for yr, qt, c, lang, d in rows:
            totals[lang] = totals.get(lang, 0.0) + d
        n_periods = len(periods)
        expected = sorted(totals, key=lambda a: (-totals[a] / n_periods, -totals[a], a))[:150]
        assert sorted(expected) == y.languages

    def test_rank_tie_breaks(self):
        frame = quarterly([
            (2020, 1, "US", "b", 2), (2020, 1, "US", "a", 2), (2020, 2, "US", "c", 1), (2020, 2, "DE", "c", 1),
        ]).frame
        assert rank_languages(frame)["language"].tolist() == ["a", "b", "c"]


triples = st.lists(
    st.tuples(
        st.sampled_from([2020, 2021]),
        st.integers(1, 4),
        st.sampled_from(["US", "DE", "FR"]),
        st.sampled_from(["C", "Go", "R", "yaml", "Rust"]),
        st.integers(0, 50),
    ),
    min_size=1,
    max_size=60,
    unique_by=lambda t: t[:4],
)


@settings(max_examples=60, deadline=None)
@given(triples, st.integers(1, 5))
def test_clean_properties(rows, top_n):
    q = quarterly(rows)
    try:
        y = clean_filter_aggregate(q, ["yaml"], top_n)
    except EmptyAfterFilter:
        assert all(r[3] == "yaml" for r in rows)
        return
    # row count never exceeds the distinct (year, country, language) triples
    assert len(y) <= len({(r[0], r[2], r[3]) for r in rows})
    # quarterly means never raise totals
    assert y.frame["developers"].sum() <= q.frame["developers"].sum() + 1e-9
    # idempotent: feed the yearly table back as single-quarter data
    again = quarterly([(r.year, 1, r.country, r.language, r.developers) for r in y.frame.itertuples()])
    y2 = clean_filter_aggregate(again, ["yaml"], top_n)
    pd.testing.assert_frame_equal(y.frame.reset_index(drop=True), y2.frame.reset_index(drop=True))


INDICATOR_HEADER = "country,gdp_pc,population,natural_resources,gini_avg,emissions_per_gdp,exports_usd,patents"


class TestIndicators:
    def test_blank_is_absent(self, tmp_path):
        p = write(tmp_path, "i.csv", [INDICATOR_HEADER, "US,,1000000,1,30,0.2,1e12,100"])
        ind = load_indicators(p)
        assert ind.get("US", "gdp_pc") is None
        assert ind.get("US", "population") == 1_000_000
        # optional ECI columns exist and are absent
        assert np.isnan(ind.frame.at["US", "eci_trade"])

    def test_malformed_number(self, tmp_path):
        p = write(tmp_path, "i.csv", [INDICATOR_HEADER, "US,1,1,1,1,1,1,1", "DE,abc,1,1,1,1,1,1"])
        with pytest.raises(UnparsableRow) as err:
            load_indicators(p)
        assert err.value.row == 3

    def test_missing_column(self, tmp_path):
        p = write(tmp_path, "i.csv", ["country,gdp_pc", "US,1"])
        with pytest.raises(MissingColumn):
            load_indicators(p)

    def test_fixture_loads(self, fixture_dir):
        ind = load_indicators(fixture_dir / "indicators.csv")
        assert len(ind) == 7
        assert ind.get("DE", "eci_trade") == 1.9


class TestAdjacency:
    def test_symmetric(self, tmp_path):
        g = load_adjacency(write(tmp_path, "a.csv", ["country_a,country_b", "A,B"]))
        assert g.are_neighbors("A", "B") and g.are_neighbors("B", "A")
        assert g.directed_pairs() == [("A", "B"), ("B", "A")]
        assert g.neighbors("A") == {"B"}

    def test_self_loop(self, tmp_path):
        with pytest.raises(SelfLoop):
            load_adjacency(write(tmp_path, "a.csv", ["country_a,country_b", "A,A"]))

    def test_empty_file(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("")
        g = load_adjacency(p)
        assert len(g) == 0
        assert not g.are_neighbors("A", "B")


class TestSampleFilters:
    def ind(self, tmp_path, rows):
        return load_indicators(write(tmp_path, "i.csv", [INDICATOR_HEADER] + rows))

    def test_thresholds(self, tmp_path):
        ind = self.ind(tmp_path, [
            "AA,1,2e6,1,1,1,5e9,10",
            "BB,1,5e5,1,1,1,5e9,10",
            "CC,1,2e6,1,1,1,5e9,",
            "DD,1,2e6,1,1,1,1e9,10",
            "EE,1,2e6,1,1,1,5e9,4",
        ])
        res = apply_sample_filters(ind)
        assert res.included == ["AA", "EE"]
        assert set(res.excluded) == {"BB", "CC", "DD"}
        assert "patents" in res.excluded["CC"]

    def test_configurable(self, tmp_path):
        ind = self.ind(tmp_path, ["BB,1,5e5,1,1,1,5e9,10"])
        assert apply_sample_filters(ind, min_population=1e5).included == ["BB"]
