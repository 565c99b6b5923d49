import json
import math
from random import Random

import pytest

from anstype.dataset import Question, QuestionSet, load_dataset
from anstype.errors import ValidationError
from anstype.evaluation import (
    CAP_NOTE,
    PredictionRun,
    error_analysis,
    evaluate_run,
    mrr,
    ndcg_at_k,
    reciprocal_rank,
)
from anstype.typehier import TypeHierarchy


# --- independent oracles -----------------------------------------------------

def _oracle_gain(t, gold, parent, h):
    """Ancestor-walk gain, written independently of the library code."""
    def chain(node):
        out = [node]
        while parent.get(node) is not None:
            node = parent[node]
            out.append(node)
        return out

    if t not in parent:
        return 0.0
    best = None
    t_chain = chain(t)
    for g in gold:
        if g not in parent:
            continue
        g_chain = chain(g)
        if t in g_chain:
            d = g_chain.index(t)
        elif g in t_chain:
            d = t_chain.index(g)
        else:
            continue
        best = d if best is None else min(best, d)
    return 0.0 if best is None else 1.0 - best / h


def _oracle_ndcg(predicted, gold, parent, h, k):
    dcg = 0.0
    for i, t in enumerate(predicted[:k]):
        dcg += _oracle_gain(t, gold, parent, h) / math.log2(i + 2)
    idcg = sum(1.0 / math.log2(i + 2) for i in range(min(k, len(gold))))
    return min(1.0, dcg / idcg)


def _oracle_mrr(runs):
    total = 0.0
    for predicted, gold in runs:
        for i, t in enumerate(predicted):
            if t in gold:
                total += 1.0 / (i + 1)
                break
    return total / len(runs)


def _random_hierarchy(rng, n_types):
    parent = {}
    names = [f"T{i}" for i in range(n_types)]
    for i, name in enumerate(names):
        parent[name] = None if i == 0 else names[rng.randrange(0, i)]
    return parent


# --- ndcg -------------------------------------------------------------------

class TestNdcg:
    def test_exact_single_gold(self, tiny_hier):
        for k in (1, 3, 5, 10):
            assert ndcg_at_k(["Gymnast"], {"Gymnast"}, tiny_hier, k) == 1.0

    def test_all_off_path(self, tiny_hier):
        assert ndcg_at_k(["Country", "City"], {"Gymnast"}, tiny_hier, 5) == 0.0

    def test_capped_with_uncapped_debug_value(self, dbpedia_hierarchy):
        pred = ["dbo:Athlete", "dbo:Gymnast"]
        gold = {"dbo:Gymnast"}
        assert ndcg_at_k(pred, gold, dbpedia_hierarchy, 5) == 1.0
        expected = (6 / 7) / math.log2(2) + 1.0 / math.log2(3)
        uncapped = ndcg_at_k(pred, gold, dbpedia_hierarchy, 5, capped=False)
        assert uncapped == pytest.approx(expected, abs=1e-9)
        assert uncapped == pytest.approx(1.4880726107, abs=1e-9)

    def test_accepts_scored_pairs(self, tiny_hier):
        assert ndcg_at_k([("Gymnast", 3.2)], {"Gymnast"}, tiny_hier, 5) == 1.0

    def test_empty_gold_rejected(self, tiny_hier):
        with pytest.raises(ValidationError):
            ndcg_at_k(["Gymnast"], set(), tiny_hier, 5)

    def test_prefix_invariance_beyond_k(self, tiny_hier):
        pred = ["Gymnast", "Athlete", "Person", "Agent", "Country", "City"]
        gold = {"Athlete", "Opera"}
        for k in (1, 2, 3):
            assert ndcg_at_k(pred[:k], gold, tiny_hier, k) == ndcg_at_k(pred, gold, tiny_hier, k)

    def test_matches_brute_force_on_random_instances(self):
        rng = Random(4242)
        for _ in range(200):
            parent = _random_hierarchy(rng, rng.randint(2, 12))
            hier = TypeHierarchy(parent)
            names = list(parent)
            predicted = [rng.choice(names + ["Unknown"]) for _ in range(rng.randint(1, 10))]
            # rankings are duplicate-free
            predicted = list(dict.fromkeys(predicted))
            gold = set(rng.sample(names, k=rng.randint(1, min(5, len(names)))))
            k = rng.randint(1, 10)
            expected = _oracle_ndcg(predicted, gold, parent, hier.h, k)
            assert ndcg_at_k(predicted, gold, hier, k) == pytest.approx(expected, abs=1e-9)


class TestMrr:
    def test_all_first(self):
        assert mrr([(["A"], {"A"}), (["B", "C"], {"B"})]) == 1.0

    def test_hit_at_rank_three(self):
        assert mrr([(["X", "Y", "A"], {"A"})]) == pytest.approx(1 / 3)

    def test_two_questions_mean(self):
        runs = [(["A"], {"A"}), (["X", "B"], {"B"})]
        assert mrr(runs) == pytest.approx(0.75)

    def test_no_hit_is_zero(self):
        assert mrr([(["X", "Y"], {"A"})]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            mrr([])

    def test_matches_brute_force_on_random_instances(self):
        rng = Random(77)
        labels = [f"L{i}" for i in range(12)]
        for _ in range(200):
            runs = []
            for _ in range(rng.randint(1, 6)):
                predicted = rng.sample(labels, k=rng.randint(1, 8))
                gold = set(rng.sample(labels, k=rng.randint(1, 4)))
                runs.append((predicted, gold))
            assert mrr(runs) == pytest.approx(_oracle_mrr(runs), abs=1e-12)

    def test_reciprocal_rank_scored_pairs(self):
        assert reciprocal_rank([("A", 2.0), ("B", 1.0)], {"B"}) == 0.5


# --- prediction runs and evaluate_run ----------------------------------------

def _gold_set():
    questions = [
        Question("q1", "who are the gymnasts", "resource", ("Gymnast", "Athlete")),
        Question("q2", "how many medals", "literal", ("number",)),
        Question("q3", "when did it happen", "literal", ("date",)),
        Question("q4", "is it true", "boolean", ("boolean",)),
    ]
    return QuestionSet("dbpedia", "test", questions)


def _perfect_run():
    return PredictionRun({
        "q1": ("resource", ["Gymnast", "Athlete"]),
        "q2": ("literal", ["number"]),
        "q3": ("literal", ["date"]),
        "q4": ("boolean", ["boolean"]),
    })


class TestPredictionRun:
    def test_validates_resource_needs_types(self):
        with pytest.raises(ValidationError):
            PredictionRun({"q": ("resource", [])})

    def test_validates_literal_single_subtype(self):
        with pytest.raises(ValidationError):
            PredictionRun({"q": ("literal", ["number", "date"])})
        with pytest.raises(ValidationError):
            PredictionRun({"q": ("literal", ["year"])})

    def test_validates_boolean(self):
        with pytest.raises(ValidationError):
            PredictionRun({"q": ("boolean", ["no"])})

    def test_file_roundtrip_plain_array(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps([
            {"id": "q1", "category": "boolean", "type": ["boolean"]},
        ]))
        run = PredictionRun.from_file(path)
        assert run.predictions == {"q1": ("boolean", ["boolean"])}

    def test_file_roundtrip_with_metadata(self, tmp_path):
        run = PredictionRun({"q1": ("boolean", ["boolean"])}, metadata={"seeds": {"a": 1}})
        path = tmp_path / "run.json"
        run.to_file(path)
        back = PredictionRun.from_file(path)
        assert back.predictions == run.predictions
        assert back.metadata == run.metadata

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps([
            {"id": "q1", "category": "boolean", "type": ["boolean"]},
            {"id": "q1", "category": "boolean", "type": ["boolean"]},
        ]))
        with pytest.raises(ValidationError):
            PredictionRun.from_file(path)


class TestEvaluateRun:
    def test_perfect_run(self, tiny_hier):
        report = evaluate_run(_perfect_run(), _gold_set(), tiny_hier, "dbpedia")
        assert report.accuracy_3way == 1.0
        assert report.accuracy_5way == 1.0
        assert report.ndcg5 == 1.0
        assert report.ndcg10 == 1.0
        assert report.note == CAP_NOTE

    def test_boolean_everywhere_on_literal_gold(self, tiny_hier):
        gold = QuestionSet("dbpedia", "test", [
            Question("a", "how many", "literal", ("number",)),
            Question("b", "when", "literal", ("date",)),
        ])
        run = PredictionRun({
            "a": ("boolean", ["boolean"]),
            "b": ("boolean", ["boolean"]),
        })
        report = evaluate_run(run, gold, tiny_hier, "dbpedia")
        assert report.accuracy_3way == 0.0
        assert report.ndcg5 == 0.0

    def test_wrong_category_zeroes_resource_question(self, tiny_hier):
        gold = QuestionSet("dbpedia", "test", [
            Question("a", "who", "resource", ("Gymnast",)),
        ])
        run = PredictionRun({"a": ("literal", ["number"])})
        report = evaluate_run(run, gold, tiny_hier, "dbpedia")
        assert report.ndcg5 == 0.0
        assert report.accuracy_3way == 0.0

    def test_literal_needs_matching_subtype_and_category(self, tiny_hier):
        gold = QuestionSet("dbpedia", "test", [
            Question("a", "how many", "literal", ("number",)),
        ])
        run = PredictionRun({"a": ("literal", ["date"])})
        report = evaluate_run(run, gold, tiny_hier, "dbpedia")
        assert report.accuracy_3way == 1.0  # category right
        assert report.ndcg5 == 0.0          # subtype wrong

    def test_missing_prediction_counts_and_scores_zero(self, tiny_hier):
        report = evaluate_run(PredictionRun({}), _gold_set(), tiny_hier, "dbpedia")
        assert report.n_missing == 4
        assert report.accuracy_3way == 0.0
        assert report.ndcg5 == 0.0

    def test_unusable_gold_scored_incorrect(self, tiny_hier):
        gold = QuestionSet("dbpedia", "test", [
            Question("a", "", "boolean", ("boolean",)),
            Question("b", "is it", "boolean", ("boolean",)),
        ])
        run = PredictionRun({
            "a": ("boolean", ["boolean"]),
            "b": ("boolean", ["boolean"]),
        })
        report = evaluate_run(run, gold, tiny_hier, "dbpedia")
        assert report.n_unusable == 1
        assert report.accuracy_3way == 0.5

    def test_empty_gold_resource_types_skipped(self, tiny_hier):
        gold = QuestionSet("dbpedia", "test", [
            Question("a", "who", "resource", ()),
            Question("b", "who else", "resource", ("Gymnast",)),
        ])
        run = PredictionRun({
            "a": ("resource", ["Gymnast"]),
            "b": ("resource", ["Gymnast"]),
        })
        report = evaluate_run(run, gold, tiny_hier, "dbpedia")
        assert report.n_skipped_empty_gold == 1
        assert report.n_type_scored == 1
        assert report.ndcg5 == 1.0

    def test_dbpedia_mode_requires_hierarchy(self):
        with pytest.raises(ValidationError):
            evaluate_run(_perfect_run(), _gold_set(), None, "dbpedia")

    def test_wikidata_mode_uses_reciprocal_rank(self):
        gold = QuestionSet("wikidata", "test", [
            Question("a", "who", "resource", ("person",)),
            Question("b", "how many", "literal", ("number",)),
        ])
        run = PredictionRun({
            "a": ("resource", ["thing", "person"]),
            "b": ("literal", ["number"]),
        })
        report = evaluate_run(run, gold, None, "wikidata")
        assert report.mrr == pytest.approx((0.5 + 1.0) / 2)
        assert report.ndcg5 is None

    def test_report_serialization(self, tiny_hier):
        report = evaluate_run(_perfect_run(), _gold_set(), tiny_hier, "dbpedia")
        parsed = json.loads(report.to_json())
        assert parsed["accuracy_3way"] == 1.0
        assert parsed["ndcg@5"] == 1.0
        assert "NDCG capped" in parsed["note"]
        text = report.to_text()
        assert "NDCG@5" in text and "1.0000" in text

    def test_sample_file_as_its_own_prediction(self, sample_questions_path, dbpedia_hierarchy):
        gold = load_dataset(sample_questions_path, "dbpedia", "test")
        run = PredictionRun({q.id: (q.category, list(q.types)) for q in gold})
        report = evaluate_run(run, gold, dbpedia_hierarchy, "dbpedia")
        assert report.accuracy_3way == 1.0
        assert report.ndcg5 == 1.0
        wikidata_view = evaluate_run(run, gold, None, "wikidata")
        assert wikidata_view.mrr == 1.0


class TestErrorAnalysis:
    def test_perfect_run_empty_table(self, tiny_hier):
        analysis = error_analysis(_perfect_run(), _gold_set())
        assert analysis.rows == []

    def test_single_dropped_type(self):
        gold = QuestionSet("dbpedia", "test", [
            Question("a", "who", "resource", ("Gymnast", "Athlete")),
        ])
        run = PredictionRun({"a": ("resource", ["Athlete"])})
        analysis = error_analysis(run, gold)
        assert analysis.rows == [("Gymnast", 1, 1)]

    def test_sorted_by_miss_count(self):
        gold = QuestionSet("dbpedia", "test", [
            Question("a", "t", "resource", ("X", "Y")),
            Question("b", "t", "resource", ("X",)),
            Question("c", "t", "resource", ("Y",)),
        ])
        run = PredictionRun({
            "a": ("resource", ["Z"]),
            "b": ("resource", ["Z"]),
            "c": ("resource", ["Y"]),
        })
        analysis = error_analysis(run, gold, n=10)
        assert analysis.rows[0] == ("X", 2, 2)
        assert analysis.rows[1] == ("Y", 2, 1)

    def test_table_shape(self):
        gold = QuestionSet("dbpedia", "test", [
            Question("a", "t", "resource", ("X",)),
        ])
        run = PredictionRun({"a": ("resource", ["Z"])})
        text = error_analysis(run, gold).to_text()
        assert text.splitlines()[0] == "type\t#Total\t#Errors"
        assert json.loads(error_analysis(run, gold).to_json())[0]["type"] == "X"

    def test_top_n_enforced(self):
        gold = QuestionSet("dbpedia", "test", [
            Question(f"q{i}", "t", "resource", (f"T{i}",)) for i in range(8)
        ])
        run = PredictionRun({f"q{i}": ("resource", ["Z"]) for i in range(8)})
        assert len(error_analysis(run, gold, n=3).rows) == 3
