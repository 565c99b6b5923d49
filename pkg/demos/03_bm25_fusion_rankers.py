"""Rank types with the unsupervised BM25 fusion baselines.

Type-centric (early fusion) ranks one pseudo-document per type; the
entity-centric variant (late fusion) retrieves the top-k entities and sums
their scores onto the types they bear. Entity abstracts here are
synthesized type descriptions, since real abstract dumps are not
desk-scale; see anstype.corpus.

    python demos/03_bm25_fusion_rankers.py
"""

from pathlib import Path

from anstype.corpus import synthesize_entities
from anstype.fusion import build_entity_index, build_type_index, rank_types_ec, rank_types_tc
from anstype.typehier import load_hierarchy

DATA = Path(__file__).resolve().parents[1] / "data"

hier = load_hierarchy(DATA / "dbpedia_types.tsv")
print(f"hierarchy: {len(hier)} types, max depth {hier.h}")

entities = synthesize_entities(sorted(hier.parent), hier, per_type=3, seed=13)
print(f"synthesized entities: {len(entities)}; one example:")
print("  ", entities[0])

type_index = build_type_index(entities)
entity_index = build_entity_index(entities)
print(f"type index: {type_index.n_docs} documents; "
      f"entity index: {entity_index.n_docs} documents")

question = "Who are the gymnasts coached by Amanda Reddin?"
print(f"\nquestion: {question}")
print("type-centric (BM25 over type documents):")
for label, score in rank_types_tc(question, type_index, k=5):
    print(f"  {score:7.3f}  {label}")
print("entity-centric (top-20 entities, scores summed per type):")
for label, score in rank_types_ec(question, entity_index, k=20)[:5]:
    print(f"  {score:7.3f}  {label}")
