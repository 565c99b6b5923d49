"""The evaluation protocol: accuracy, lenient NDCG@k, MRR, error analysis.

    python demos/05_evaluation_protocol.py
"""

from pathlib import Path

from anstype.dataset import Question, QuestionSet, load_dataset
from anstype.evaluation import PredictionRun, error_analysis, evaluate_run, mrr, ndcg_at_k
from anstype.typehier import load_hierarchy

DATA = Path(__file__).resolve().parents[1] / "data"
hier = load_hierarchy(DATA / "dbpedia_types.tsv")

# Lenient gain: a predicted ancestor of a gold type earns 1 - d/h.
gold = {"dbo:Gymnast"}
for predicted in ["dbo:Gymnast", "dbo:Athlete", "dbo:Person", "dbo:Country"]:
    print(f"gain({predicted} | gold=dbo:Gymnast) = {hier.lenient_gain(predicted, gold):.4f}")

# NDCG@5 for a ranking that puts the parent first: ancestor credit can push
# raw DCG above the ideal, so the reported value is capped at 1.
pred = ["dbo:Athlete", "dbo:Gymnast"]
print(f"NDCG@5 capped:   {ndcg_at_k(pred, gold, hier, 5):.4f}")
print(f"NDCG@5 uncapped: {ndcg_at_k(pred, gold, hier, 5, capped=False):.4f}")

# MRR is the flat-taxonomy metric: reciprocal rank of the first exact hit.
print(f"MRR: {mrr([(['a', 'b', 'gold'], {'gold'}), (['gold'], {'gold'})]):.4f}")

# Full report over a small gold set with one wrong prediction.
gold_set = QuestionSet("dbpedia", "test", [
    Question("q1", "who are the gymnasts", "resource", ("dbo:Gymnast", "dbo:Athlete")),
    Question("q2", "how many medals", "literal", ("number",)),
    Question("q3", "is it windy", "boolean", ("boolean",)),
])
run = PredictionRun({
    "q1": ("resource", ["dbo:Athlete", "dbo:Country"]),
    "q2": ("literal", ["date"]),   # wrong subtype
    "q3": ("boolean", ["boolean"]),
})
report = evaluate_run(run, gold_set, hier, "dbpedia")
print()
print(report.to_text())
print(error_analysis(run, gold_set).to_text())

# The same protocol drives full files, e.g. the shipped sample questions.
sample = load_dataset(Path(__file__).parent.parent / "tests" / "data" / "sample_questions.json",
                      "dbpedia", "test")
perfect = PredictionRun({q.id: (q.category, list(q.types)) for q in sample})
print(evaluate_run(perfect, sample, hier, "dbpedia").to_text())
