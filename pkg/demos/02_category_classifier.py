"""Train the stage-1 category classifier and inspect held-out accuracy.

Trains on 4 of 5 folds of the combined train sets and evaluates on the
held-out fold (a few minutes on a laptop). For the full 5-fold protocol see
tests/test_acceptance.py.

    python demos/02_category_classifier.py
"""

from pathlib import Path

from anstype.catclf import accuracy, predict_category, train_category_classifier
from anstype.dataset import combine_sets, load_dataset, split_folds, unflatten_category
from anstype.linear import SGDParams
from anstype.textproc import fit_vocabulary, vectorize

DATA = Path(__file__).resolve().parents[1] / "data"

dbpedia = load_dataset(DATA / "smarttask_dbpedia_train.json", "dbpedia", "train")
wikidata = load_dataset(DATA / "lcquad2_anstype_wikidata_train.json", "wikidata", "train")
combined = combine_sets(dbpedia, wikidata)

folds = split_folds(combined, n=5, seed=7)
byid = combined.by_id()
train = [byid[i] for i in folds.ids_not_in(0) if byid[i].usable]
test = [byid[i] for i in folds.ids_in(0) if byid[i].usable]

# Vocabulary and IDF weights come from the training portion only.
vocab = fit_vocabulary([q.text for q in train])
print(f"vocabulary: {len(vocab)} terms over {vocab.n_docs} documents")

X = [vectorize(vocab, q.text) for q in train]
model = train_category_classifier(
    X, [q.flat for q in train],
    SGDParams(C=4.0, epochs=40, batch_size=32, eta0=10.0, seed=1),
    n_features=len(vocab),
)
print(f"objective after each epoch (first/last): "
      f"{model.loss_history[0]:.4f} -> {model.loss_history[-1]:.4f}")

pred = [predict_category(model, vectorize(vocab, q.text))[0] for q in test]
acc5 = accuracy(pred, [q.flat for q in test])
acc3 = accuracy([unflatten_category(p)[0] for p in pred], [q.category for q in test])
print(f"held-out fold: 5-way accuracy {acc5:.4f}, 3-way accuracy {acc3:.4f}")

for text in [
    "Is Azerbaijan a member of European Go Federation?",
    "When did Margaret Mead marry Gregory Bateson?",
    "Who are the gymnasts coached by Amanda Reddin?",
]:
    flat, _ = predict_category(model, vectorize(vocab, text))
    print(f"  [{flat.value:>15}] {text}")
