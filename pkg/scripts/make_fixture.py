"""Write the bundled 6-country x 8-language fixture under src/eclab/data/fixture.

Counts are hand-specified per year; each year's four quarters are the yearly
value plus offsets (-3, -1, +1, +3), so the quarterly mean equals the value
below. YAML and JSON rows exercise the exclusion list.
"""

from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "eclab" / "data" / "fixture"

LANGS = ["Python", "JavaScript", "Java", "C", "Go", "Rust", "R", "Ruby"]
COUNTRIES = ["US", "DE", "FR", "IN", "BR", "NG"]

# rows: countries, columns: LANGS
BASE = {
    "US": [900, 800, 500, 300, 260, 120, 160, 140],
    "DE": [400, 300, 220, 200, 140, 110, 40, 30],
    "FR": [300, 260, 180, 60, 90, 20, 60, 40],
    "IN": [500, 450, 420, 40, 30, 10, 20, 50],
    "BR": [200, 260, 120, 20, 20, 6, 30, 60],
    "NG": [80, 120, 40, 6, 8, 4, 6, 10],
}
# (country, language): (2022 value, 2023 value) replacing the base in later years.
# RCA is relative, so these shifts move several pairs across the threshold:
# the resulting panel has 4 entries and 2 exits.
CHANGES = {
    ("IN", "Go"): (90, 100),
    ("NG", "Ruby"): (30, 32),
    ("FR", "R"): (20, 18),
    ("BR", "Ruby"): (20, 22),
    ("DE", "R"): (60, 62),
}
YEARS = [2020, 2021, 2022, 2023]
OFFSETS = [-3, -1, 1, 3]


def value(country, lang, year):
    base = BASE[country][LANGS.index(lang)]
    if year >= 2022 and (country, lang) in CHANGES:
        return CHANGES[(country, lang)][year - 2022]
    return base + (year - 2020) * 4


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    lines = ["num_pushers,language,language_type,iso2_code,year,quarter"]
    for year in YEARS:
        for q, off in enumerate(OFFSETS, start=1):
            for c in COUNTRIES:
                for lang in LANGS:
                    lines.append(f"{value(c, lang, year) + off},{lang},programming,{c},{year},{q}")
                lines.append(f"{1000 + off},YAML,data,{c},{year},{q}")
                lines.append(f"{900 + off},JSON,data,{c},{year},{q}")
    (OUT / "languages.csv").write_text("\n".join(lines) + "\n")

    ind = [
        "country,gdp_pc,population,natural_resources,gini_avg,emissions_per_gdp,exports_usd,patents,"
        "eci_trade,eci_tech,eci_research",
        "US,63000,331000000,0.6,41.1,0.25,2.1e12,285000,1.5,1.4,2.5",
        "DE,46000,83000000,0.1,31.7,0.17,1.6e12,62000,1.9,1.6,1.2",
        "FR,39000,67000000,0.05,32.4,0.12,6.0e11,15000,1.1,1.0,0.9",
        "IN,1900,1380000000,2.3,35.7,0.67,4.9e11,24000,0.4,0.2,-0.45",
        "BR,6800,212000000,3.2,53.4,0.30,2.1e11,5000,-0.1,-0.2,-0.3",
        "NG,2100,206000000,6.6,35.1,0.28,3.5e10,20,-1.3,-1.0,-1.2",
        "LU,115000,630000,0.02,34.9,0.10,2.0e10,150,1.0,1.1,0.7",
    ]
    (OUT / "indicators.csv").write_text("\n".join(ind) + "\n")
    (OUT / "adjacency.csv").write_text("country_a,country_b\nDE,FR\nBR,NG\nFR,LU\nDE,LU\n")
    impact = ["language,impact_score", "Python,0.9", "JavaScript,0.7", "Java,0.6", "C,0.8",
              "Go,0.5", "Rust,0.4", "R,0.3", "Ruby,0.2"]
    (OUT / "impact_scores.csv").write_text("\n".join(impact) + "\n")
    (OUT / "config.toml").write_text(
        "# Bundled fixture run; paths are relative to this file.\n"
        'languages = "languages.csv"\n'
        'indicators = "indicators.csv"\n'
        'adjacency = "adjacency.csv"\n'
        'impact_scores = "impact_scores.csv"\n'
        "top_n = 8\n"
        "base_years = [2020, 2021]\n"
        "post_years = [2022, 2023]\n"
        "backbone_threshold = 0.5\n"
    )


if __name__ == "__main__":
    main()
