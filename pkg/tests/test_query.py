import random
import string

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vizex.errors import QuerySyntaxError, SeriesTooShort, UnknownKpi, UnknownMetric
from vizex.project import EngineConfig, Project
from vizex.query import (
    ANY_SIGN,
    KEYWORDS,
    KpiAtom,
    QueryAst,
    QueryOptions,
    execute,
    parse,
    pretty_print,
    summarize,
)
from vizex.synth import build_scenario, lighting_scenario


class TestParse:
    def test_reference_query(self):
        ast = parse("SELECT * FROM Video WHERE metrics = 0 BECAUSE kpi_1 OR kpi_2")
        assert ast.select is None
        assert ast.source == "Video"
        assert ast.metric == "metrics"
        assert ast.comparator == "="
        assert ast.value == 0.0
        assert ast.disjuncts == ((KpiAtom("kpi_1"),), (KpiAtom("kpi_2"),))

    def test_sign_constraints_and_conjunction(self):
        ast = parse(
            "SELECT * FROM v WHERE count_error = -1 "
            "BECAUSE luminosity FALLING AND edge_fraction"
        )
        assert ast.value == -1.0
        assert ast.disjuncts == (
            (KpiAtom("luminosity", "falling"), KpiAtom("edge_fraction", ANY_SIGN)),
        )

    def test_case_insensitive_keywords(self):
        ast = parse("select * from v where m = 1 because k")
        assert ast.metric == "m"

    def test_options(self):
        ast = parse(
            "SELECT * FROM v WHERE m = 0 BECAUSE k WITH BANDWIDTH = 30, DELTA = 7, ALPHA = 0.01"
        )
        assert ast.options == QueryOptions(bandwidth=30.0, delta=7.0, alpha=0.01)

    def test_select_list(self):
        ast = parse("SELECT a, b FROM v WHERE m = 0 BECAUSE k")
        assert ast.select == ("a", "b")

    def test_error_position(self):
        with pytest.raises(QuerySyntaxError) as exc:
            parse("SELECT FROM WHERE")
        assert exc.value.line == 1
        assert exc.value.col == 8  # FROM cannot start a select list
        assert exc.value.expected

    def test_all_comparators(self):
        for cmp in ("=", "!=", "<", "<=", ">", ">="):
            ast = parse(f"SELECT * FROM v WHERE m {cmp} 2.5 BECAUSE k")
            assert ast.comparator == cmp

    def test_duplicate_option_rejected(self):
        with pytest.raises(QuerySyntaxError):
            parse("SELECT * FROM v WHERE m = 0 BECAUSE k WITH ALPHA = 0.1, ALPHA = 0.2")

    def test_trailing_garbage(self):
        with pytest.raises(QuerySyntaxError):
            parse("SELECT * FROM v WHERE m = 0 BECAUSE k extra")


MALFORMED = [
    "",
    "SELECT",
    "SELECT *",
    "SELECT * FROM",
    "SELECT * FROM v",
    "SELECT * FROM v WHERE",
    "SELECT * FROM v WHERE m",
    "SELECT * FROM v WHERE m =",
    "SELECT * FROM v WHERE m = x BECAUSE k",
    "SELECT * FROM v WHERE m = 0",
    "SELECT * FROM v WHERE m = 0 BECAUSE",
    "SELECT * FROM v WHERE m = 0 BECAUSE 5",
    "SELECT * FROM v WHERE m = 0 BECAUSE k AND",
    "SELECT * FROM v WHERE m = 0 BECAUSE k OR",
    "SELECT * FROM v WHERE m = 0 BECAUSE k WITH",
    "SELECT * FROM v WHERE m = 0 BECAUSE k WITH NOPE = 3",
    "SELECT * FROM v WHERE m = 0 BECAUSE k WITH BANDWIDTH",
    "SELECT * FROM v WHERE m = 0 BECAUSE k WITH BANDWIDTH =",
    "SELECT * FROM v WHERE m = 0 BECAUSE k WITH BANDWIDTH = x",
    "SELECT * FROM v WHERE m = 0 BECAUSE k WITH BANDWIDTH = 5,",
    "SELECT , FROM v WHERE m = 0 BECAUSE k",
    "SELECT a, FROM v WHERE m = 0 BECAUSE k",
    "SELECT * FROM 5 WHERE m = 0 BECAUSE k",
    "SELECT * FROM v WHERE 5 = 0 BECAUSE k",
    "SELECT * FROM v WHERE m == 0 BECAUSE k",
    "SELECT * FROM v WHERE m ! 0 BECAUSE k",
    "SELECT * FROM v WHERE m = - BECAUSE k",
    "SELECT * FROM v WHERE m = 0 BECAUSE AND k",
    "SELECT * FROM v WHERE m = 0 BECAUSE OR",
    "SELECT * FROM v WHERE m = 0 BECAUSE k RISING FALLING extra",
    "FROM v SELECT * WHERE m = 0 BECAUSE k",
    "select * from v because k",
    "SELECT * FROM v WHERE m = 0 BECAUSE k, j",
    "SELECT * * FROM v WHERE m = 0 BECAUSE k",
    "SELECT * FROM v v WHERE m = 0 BECAUSE k",
    "SELECT * FROM v WHERE m = 0 0 BECAUSE k",
    "SELECT * FROM v WHERE m = 0 BECAUSE k k",
    "SELECT * FROM v WHERE m < = 0 BECAUSE k",
    "SELECT * FROM v WHERE m = .5 BECAUSE k",
    "SELECT * FROM v WHERE m = 0 BECAUSE k WITH DELTA == 2",
    "SELECT * FROM v WHERE m = 0 BECAUSE k AND OR j",
    "WHERE m = 0 BECAUSE k",
    "BECAUSE k",
    "SELECT @ FROM v WHERE m = 0 BECAUSE k",
    "SELECT * FROM v WHERE m = 0 BECAUSE k WITH ALPHA 0.05",
    "SELECT * FROM v WHERE m = 0 BECAUSE (k)",
    "SELECT * FROM v WHERE m = 0 BECAUSE k OR AND",
    "SELECT a b FROM v WHERE m = 0 BECAUSE k",
    "SELECT * FROM v WHERE m >= BECAUSE k",
    "SELECT * FROM v WHERE m = 1e BECAUSE k",
]


class TestMalformedCorpus:
    def test_fifty_cases_raise_with_positions(self):
        assert len(MALFORMED) == 50
        for text in MALFORMED:
            with pytest.raises(QuerySyntaxError) as exc:
                parse(text)
            assert exc.value.line >= 1
            assert exc.value.col >= 1
            assert exc.value.expected


def random_ast(rng: random.Random) -> QueryAst:
    def ident():
        first = rng.choice(string.ascii_letters + "_")
        rest = "".join(rng.choices(string.ascii_letters + string.digits + "_", k=rng.randint(0, 8)))
        word = first + rest
        return word if word.upper() not in KEYWORDS else word + "_x"

    def number():
        if rng.random() < 0.5:
            return float(rng.randint(-100, 100))
        return rng.uniform(-1e4, 1e4)

    disjuncts = tuple(
        tuple(
            KpiAtom(ident(), rng.choice(["any", "rising", "falling"]))
            for _ in range(rng.randint(1, 3))
        )
        for _ in range(rng.randint(1, 3))
    )
    options = QueryOptions(
        bandwidth=float(rng.randint(2, 60)) if rng.random() < 0.5 else None,
        delta=float(rng.randint(1, 30)) if rng.random() < 0.5 else None,
        alpha=rng.choice([0.01, 0.05, 0.1]) if rng.random() < 0.5 else None,
    )
    return QueryAst(
        select=None if rng.random() < 0.5 else tuple(ident() for _ in range(rng.randint(1, 3))),
        source=ident(),
        metric=ident(),
        comparator=rng.choice(["=", "!=", "<", "<=", ">", ">="]),
        value=number(),
        disjuncts=disjuncts,
        options=options,
    )


class TestPrettyPrint:
    def test_reference_round_trip(self):
        ast = parse("select * from Video where metrics = 0 because kpi_1 or kpi_2")
        text = pretty_print(ast)
        assert text == "SELECT * FROM Video WHERE metrics = 0 BECAUSE kpi_1 OR kpi_2"
        assert parse(text) == ast

    def test_sign_constraints_preserved(self):
        ast = parse("SELECT * FROM v WHERE m = 0 BECAUSE a RISING AND b OR c FALLING")
        assert parse(pretty_print(ast)) == ast
        assert "RISING" in pretty_print(ast) and "FALLING" in pretty_print(ast)

    def test_thousand_generated_asts_round_trip(self):
        rng = random.Random(1234)
        for _ in range(1000):
            ast = random_ast(rng)
            assert parse(pretty_print(ast)) == ast

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_property(self, seed):
        ast = random_ast(random.Random(seed))
        assert parse(pretty_print(ast)) == ast


@pytest.fixture(scope="module")
def lighting_project():
    scenario = build_scenario(lighting_scenario(seed=3, frame_count=600))
    return scenario.project(), scenario


class TestExecute:
    def test_planted_cause_recovered(self, lighting_project):
        project, scenario = lighting_project
        cut = scenario.spec.events[0].frame
        result = execute(parse("SELECT * FROM scene WHERE count_error = -1 BECAUSE luminosity"), project)
        assert result.windows
        top = result.windows[0]
        assert top.start_frame <= cut <= top.end_frame
        assert any(name == "luminosity" for name, _ in top.matched_atoms)

    def test_constant_kpi_no_windows(self, lighting_project):
        project, _ = lighting_project
        result = execute(parse("SELECT * FROM scene WHERE count_error = -1 BECAUSE edge_fraction"), project)
        assert result.windows == ()

    def test_unknown_kpi(self, lighting_project):
        project, _ = lighting_project
        with pytest.raises(UnknownKpi):
            execute(parse("SELECT * FROM s WHERE count_error = -1 BECAUSE nonsense"), project)

    def test_unknown_metric(self, lighting_project):
        project, _ = lighting_project
        with pytest.raises(UnknownMetric):
            execute(parse("SELECT * FROM s WHERE nonsense = -1 BECAUSE luminosity"), project)

    def test_series_too_short(self, lighting_project):
        project, _ = lighting_project
        with pytest.raises(SeriesTooShort):
            execute(
                parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity WITH BANDWIDTH = 500"),
                project,
            )

    def test_or_monotonicity(self, lighting_project):
        # adding a disjunct never removes a window
        project, _ = lighting_project
        base = execute(parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity"), project)
        extended = execute(
            parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity OR detection_count"),
            project,
        )
        for w in base.windows:
            assert any(
                e.start_frame <= w.start_frame and w.end_frame <= e.end_frame
                for e in extended.windows
            )

    def test_and_restriction(self, lighting_project):
        # A AND B never adds a window relative to A
        project, _ = lighting_project
        base = execute(parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity"), project)
        restricted = execute(
            parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity AND edge_fraction"),
            project,
        )
        for w in restricted.windows:
            assert any(
                b.start_frame <= w.start_frame and w.end_frame <= b.end_frame
                for b in base.windows
            )
        assert restricted.windows == ()  # edge leg is silent in this scenario

    def test_and_both_legs_match(self, lighting_project):
        project, _ = lighting_project
        both = execute(
            parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity AND detection_count"),
            project,
        )
        assert both.windows
        names = {name for name, _ in both.windows[0].matched_atoms}
        assert names == {"luminosity", "detection_count"}

    def test_sign_constraint_filters(self, lighting_project):
        project, _ = lighting_project
        falling = execute(
            parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity FALLING"), project
        )
        rising = execute(
            parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity RISING"), project
        )
        assert falling.windows
        assert not rising.windows

    def test_score_consistency(self, lighting_project):
        # window score equals max over disjuncts of min over conjunct scores;
        # single-atom query: max of its evidences' scores
        project, _ = lighting_project
        result = execute(parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity"), project)
        for w in result.windows:
            assert w.score == max(e.score for _, e in w.matched_atoms)

    def test_determinism(self, lighting_project):
        import json
        project, scenario = lighting_project
        ast = parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity OR detection_count")
        a = execute(ast, project)
        fresh = scenario.project()
        b = execute(ast, fresh)
        assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)

    def test_window_invariants(self, lighting_project):
        project, _ = lighting_project
        result = execute(parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity"), project)
        for w in result.windows:
            assert w.start_frame <= w.end_frame
            assert w.score > 0
            assert all(w.start_frame <= f <= w.end_frame for f in w.sample_frames)
            assert len(w.sample_frames) <= 4
            for _, e in w.matched_atoms:
                assert w.start_frame - result.delta <= e.kpi_disc.cutpoint <= w.end_frame + result.delta

    def test_select_list_filters_plot_data(self, lighting_project):
        project, _ = lighting_project
        full = execute(
            parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity OR detection_count"),
            project,
        )
        filtered = execute(
            parse("SELECT luminosity FROM s WHERE count_error = -1 BECAUSE luminosity OR detection_count"),
            project,
        )
        full_names = {k["name"] for w in full.windows for k in w.plot_data["kpis"]}
        filtered_names = {k["name"] for w in filtered.windows for k in w.plot_data["kpis"]}
        assert "detection_count" in full_names
        assert filtered_names <= {"luminosity"}


class TestSummarize:
    def test_empty_result(self, lighting_project):
        project, _ = lighting_project
        result = execute(parse("SELECT * FROM s WHERE count_error = -1 BECAUSE edge_fraction"), project)
        text = summarize(result)
        assert "No evidence windows" in text

    def test_single_window_fields(self, lighting_project):
        project, _ = lighting_project
        result = execute(parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity"), project)
        text = summarize(result)
        assert "luminosity" in text
        assert str(result.windows[0].start_frame) in text

    def test_summary_recomputable(self, lighting_project):
        project, _ = lighting_project
        result = execute(parse("SELECT * FROM s WHERE count_error = -1 BECAUSE luminosity"), project)
        s = result.summary["per_kpi"]["luminosity"]
        windows_with = [w for w in result.windows if any(n == "luminosity" for n, _ in w.matched_atoms)]
        assert s["windows"] == len(windows_with)
        taus = [abs(e.kpi_disc.tau) for w in windows_with for n, e in w.matched_atoms if n == "luminosity"]
        assert s["mean_abs_tau"] == pytest.approx(float(np.mean(taus)))
