"""Answer type prediction for natural-language questions.

Two-phase pipeline over knowledge-base type systems: a coarse category
classifier (boolean / literal-number / literal-string / literal-date /
resource) followed by fine-grained type ranking for resource questions,
with BM25 fusion baselines, an extreme multi-label classifier, and the
matching evaluation protocol (accuracy, lenient hierarchical NDCG@k, MRR).
"""

__version__ = "0.1.0"
