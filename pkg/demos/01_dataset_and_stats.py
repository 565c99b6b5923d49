"""Load the challenge datasets, flatten categories, and reproduce the corpus statistics.

Expects the data files under data/ (shipped with the repository). Run from
the repository root:

    python demos/01_dataset_and_stats.py
"""

from pathlib import Path

from anstype.dataset import combine_sets, dataset_stats, load_dataset, split_folds

DATA = Path(__file__).resolve().parents[1] / "data"

# Each file is a JSON array of {id, question, category, type} records.
dbpedia = load_dataset(DATA / "smarttask_dbpedia_train.json", "dbpedia", "train")
wikidata = load_dataset(DATA / "lcquad2_anstype_wikidata_train.json", "wikidata", "train")

print("== DBpedia train ==")
print(dataset_stats(dbpedia).to_tsv())
print("== Wikidata train ==")
print(dataset_stats(wikidata).to_tsv())

# Category classification trains on both sets together; ids get source
# prefixes so they stay unique.
combined = combine_sets(dbpedia, wikidata)
print(f"combined train questions: {len(combined)}")

# Stratified folds drive cross-validation; same seed, same assignment.
folds = split_folds(combined, n=5, seed=7)
print(f"fold sizes: {folds.fold_sizes()}")

# A few raw records, flattened.
for q in list(dbpedia)[:3]:
    print(f"  [{q.flat.value:>15}] {q.text[:60]}")
