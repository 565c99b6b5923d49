"""Extreme multi-label type prediction on the DBpedia questions.

Builds the full stack: label embeddings -> balanced label clustering ->
per-cluster linear matchers -> pairwise ensemble ranker, then ranks types
for held-out questions. Takes a minute or two.

    python demos/04_xmc_type_prediction.py
"""

from pathlib import Path

from anstype.dataset import QuestionSet, load_dataset, split_folds
from anstype.linear import SGDParams
from anstype.textproc import fit_vocabulary, vectorize
from anstype.xmc import (
    build_label_embeddings,
    cluster_labels,
    predict_types_xmc,
    train_ensemble_ranker,
    train_matchers,
)

DATA = Path(__file__).resolve().parents[1] / "data"

dbpedia = load_dataset(DATA / "smarttask_dbpedia_train.json", "dbpedia", "train")
resource = [q for q in dbpedia if q.usable and q.category == "resource" and q.types]
print(f"resource questions: {len(resource)}")

# Hold out one tenth for the ensemble ranker (it must not see matcher data).
folds = split_folds(QuestionSet("dbpedia", "train", resource), 10, seed=13)
held = set(folds.ids_in(0))
matcher_qs = [q for q in resource if q.id not in held]
ranker_qs = [q for q in resource if q.id in held]

vocab = fit_vocabulary([q.text for q in matcher_qs + ranker_qs])
X = [vectorize(vocab, q.text) for q in matcher_qs]
gold = [q.types for q in matcher_qs]

emb = build_label_embeddings(X, gold, n_features=len(vocab))
index = cluster_labels(emb, branching=8, max_leaf=64, seed=11)
print(f"labels: {len(index.labels)}, clusters: {index.n_clusters} "
      f"(sizes {[len(c) for c in index.clusters]})")

matcher = train_matchers(index, X, gold, n_features=len(vocab),
                         params=SGDParams(C=1.0, epochs=20, batch_size=32, eta0=2.0, seed=11))
ranker = train_ensemble_ranker(matcher, [vectorize(vocab, q.text) for q in ranker_qs],
                               [q.types for q in ranker_qs])
print(f"ranker weights (cluster, label, prior): {ranker.weights.round(3)}")

for q in ranker_qs[:4]:
    ranked = predict_types_xmc(matcher, ranker, vectorize(vocab, q.text), beam=4, k=5)
    print(f"\n  {q.text}")
    print(f"  gold: {list(q.types)}")
    print(f"  pred: {[label for label, _ in ranked]}")
