"""Pipeline orchestration: config, model bundles, and the train/predict/evaluate flow.

A model bundle is a directory holding everything needed to reproduce a
prediction run: the fitted vocabulary, the stage-1 category classifier,
the stage-2 type ranker (BM25 indexes or the XMC stack), and a manifest
recording the resolved config, its hash, and all seeds. Bundles contain no
timestamps, so identical configs produce identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from . import catclf, fusion, textproc, xmc
from .dataset import (
    FlatCategory,
    Question,
    QuestionSet,
    combine_sets,
    dataset_stats,
    load_dataset,
    split_folds,
    unflatten_category,
)
from .errors import ValidationError
from .evaluation import PredictionRun, error_analysis, evaluate_run
from .linear import SGDParams
from .typehier import load_hierarchy

MANIFEST_FORMAT = "anstype-bundle-v1"

STAGE1_METHODS = ("linear", "imported")
STAGE2_METHODS = ("tc", "ec", "xmc", "imported")

DEFAULT_CONFIG = {
    "mode": "dbpedia",
    "datasets": {},          # e.g. {"dbpedia_train": "...", "wikidata_train": "..."}
    "hierarchy": None,       # TSV path, required to evaluate in dbpedia mode
    "abstracts": None,       # entity TSV, required for tc / ec
    "output_dir": "runs/out",
    "top_k": 10,
    "stage1": {
        "method": "linear",
        "C": 4.0,
        "epochs": 40,
        "batch_size": 32,
        "eta0": 10.0,
        "seed": 7,
        "imported_path": None,
    },
    "stage2": {
        "method": "xmc",
        "branching": 8,
        "max_leaf": 64,
        "beam": 4,
        "ec_cutoff": 20,
        "ec_aggregate": "sum",
        "C": 1.0,
        "epochs": 20,
        "batch_size": 32,
        "eta0": 2.0,
        "seed": 11,
        "ranker_folds": 10,
        "imported_path": None,
    },
    "seeds": {"folds": 13},
}


def merge_config(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None, overrides: dict | None = None) -> dict:
    config = DEFAULT_CONFIG
    if path is not None:
        user = json.loads(Path(path).read_text(encoding="utf-8"))
        config = merge_config(config, user)
    if overrides:
        config = merge_config(config, overrides)
    validate_config(config)
    return config


def validate_config(config: dict) -> None:
    if config["mode"] not in ("dbpedia", "wikidata"):
        raise ValidationError(f"unknown mode {config['mode']!r}")
    if config["stage1"]["method"] not in STAGE1_METHODS:
        raise ValidationError(f"unknown stage-1 method {config['stage1']['method']!r}")
    if config["stage2"]["method"] not in STAGE2_METHODS:
        raise ValidationError(f"unknown stage-2 method {config['stage2']['method']!r}")
    for key, path in config["datasets"].items():
        parts = key.rsplit("_", 1)
        if len(parts) != 2 or parts[0] not in ("dbpedia", "wikidata") or parts[1] not in ("train", "test"):
            raise ValidationError(f"dataset key {key!r} is not <source>_<split>")
        if not Path(path).exists():
            raise ValidationError(f"dataset file {path} does not exist")
    for field in ("hierarchy", "abstracts"):
        if config.get(field) and not Path(config[field]).exists():
            raise ValidationError(f"{field} file {config[field]} does not exist")


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _load_train_sets(config: dict) -> dict[str, QuestionSet]:
    sets = {}
    for key, path in config["datasets"].items():
        source, split = key.rsplit("_", 1)
        sets[key] = load_dataset(path, source, split)
    return sets


def _combined_train(sets: dict[str, QuestionSet]) -> QuestionSet:
    train = [sets[k] for k in sorted(sets) if k.endswith("_train")]
    if not train:
        raise ValidationError("config lists no *_train dataset")
    combined = train[0]
    for qs in train[1:]:
        combined = combine_sets(combined, qs)
    return combined


def _stage1_params(cfg: dict) -> SGDParams:
    return SGDParams(
        C=cfg["C"], epochs=cfg["epochs"], batch_size=cfg["batch_size"],
        eta0=cfg["eta0"], seed=cfg["seed"],
    )


def _stage2_params(cfg: dict) -> SGDParams:
    return SGDParams(
        C=cfg["C"], epochs=cfg["epochs"], batch_size=cfg["batch_size"],
        eta0=cfg["eta0"], seed=cfg["seed"],
    )


@dataclass
class Bundle:
    """In-memory view of a trained bundle directory."""

    config: dict
    manifest: dict
    vocab: textproc.Vocabulary
    stage1_model: catclf.LinearModel | None = None
    stage1_imported: catclf.ImportedCategories | None = None
    type_index: fusion.InvertedIndex | None = None
    entity_index: fusion.InvertedIndex | None = None
    matcher: xmc.MatcherModel | None = None
    ranker: xmc.EnsembleRanker | None = None
    stage2_imported: xmc.ImportedTypeScores | None = None
    fallback_types: list[str] | None = None


def cmd_train(config: dict) -> Path:
    """Train stage 1 on the combined train sets and stage 2 on the mode's
    resource questions; write the bundle directory and return its path."""
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    sets = _load_train_sets(config)
    combined = _combined_train(sets)
    usable = [q for q in combined if q.usable]
    vocab = textproc.fit_vocabulary([q.text for q in usable])
    (out_dir / "vocab.json").write_text(vocab.to_json(), encoding="utf-8")
    vocab_hash = vocab.content_hash()

    manifest: dict = {
        "format": MANIFEST_FORMAT,
        "config": config,
        "config_hash": config_hash(config),
        "vocab_hash": vocab_hash,
        "seeds": {
            "stage1": config["stage1"]["seed"],
            "stage2": config["stage2"]["seed"],
            "folds": config["seeds"]["folds"],
        },
        "train_questions": len(combined),
        "train_unusable": len(combined) - len(usable),
    }

    # Stage 1 on the combined training sets.
    if config["stage1"]["method"] == "linear":
        X = [textproc.vectorize(vocab, q.text) for q in usable]
        y = [q.flat for q in usable]
        model = catclf.train_category_classifier(
            X, y, _stage1_params(config["stage1"]),
            n_features=len(vocab), vocab_hash=vocab_hash,
        )
        model.save(out_dir / "catclf.npz")
        manifest["stage1"] = {"method": "linear", "loss_history": model.loss_history}
    else:
        path = config["stage1"]["imported_path"]
        if not path or not Path(path).exists():
            raise ValidationError("stage-1 'imported' needs an existing imported_path")
        manifest["stage1"] = {"method": "imported", "imported_path": str(path)}

    # Stage 2 on the mode's own training resource questions.
    mode_key = f"{config['mode']}_train"
    if mode_key not in sets:
        raise ValidationError(f"config datasets must include {mode_key!r} for stage 2")
    resource = [q for q in sets[mode_key] if q.usable and q.category == "resource" and q.types]
    type_counts = Counter(t for q in resource for t in q.types)
    fallback = [t for t, _ in sorted(type_counts.items(), key=lambda kv: (-kv[1], kv[0]))]
    manifest["fallback_types"] = fallback[: config["top_k"]]

    method = config["stage2"]["method"]
    if method in ("tc", "ec"):
        if not config.get("abstracts"):
            raise ValidationError(f"stage-2 {method!r} needs an abstracts file")
        entities = list(fusion.read_entity_file(config["abstracts"]))
        if method == "tc":
            index = fusion.build_type_index(entities)
            index.save(out_dir / "type_index.npz")
        else:
            index = fusion.build_entity_index(entities)
            index.save(out_dir / "entity_index.npz")
        manifest["stage2"] = {
            "method": method,
            "documents": index.n_docs,
            "skipped_untyped": index.skipped_untyped,
        }
    elif method == "xmc":
        folds = split_folds(
            QuestionSet(sets[mode_key].source, "train", list(resource)),
            n=config["stage2"]["ranker_folds"],
            seed=config["seeds"]["folds"],
        )
        held_ids = set(folds.ids_in(0))
        matcher_qs = [q for q in resource if q.id not in held_ids]
        ranker_qs = [q for q in resource if q.id in held_ids]

        Xm = [textproc.vectorize(vocab, q.text) for q in matcher_qs]
        golds = [q.types for q in matcher_qs]
        emb = xmc.build_label_embeddings(Xm, golds, n_features=len(vocab))
        index = xmc.cluster_labels(
            emb,
            branching=config["stage2"]["branching"],
            max_leaf=config["stage2"]["max_leaf"],
            seed=config["stage2"]["seed"],
        )
        index.save(out_dir / "label_index.json")
        matcher = xmc.train_matchers(
            index, Xm, golds, n_features=len(vocab), params=_stage2_params(config["stage2"]),
        )
        matcher.save(out_dir / "matchers.npz")
        Xr = [textproc.vectorize(vocab, q.text) for q in ranker_qs]
        ranker = xmc.train_ensemble_ranker(matcher, Xr, [q.types for q in ranker_qs])
        ranker.save(out_dir / "ranker.json")
        manifest["stage2"] = {
            "method": "xmc",
            "labels": len(index.labels),
            "clusters": index.n_clusters,
            "matcher_questions": len(matcher_qs),
            "ranker_questions": len(ranker_qs),
            "ranker_fallback": ranker.fallback,
            "ranker_weights": ranker.weights.tolist(),
        }
    else:  # imported
        path = config["stage2"]["imported_path"]
        if not path or not Path(path).exists():
            raise ValidationError("stage-2 'imported' needs an existing imported_path")
        manifest["stage2"] = {"method": "imported", "imported_path": str(path)}

    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8"
    )
    return out_dir


def load_bundle(bundle_dir: str | Path) -> Bundle:
    bundle_dir = Path(bundle_dir)
    manifest = json.loads((bundle_dir / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValidationError(f"unsupported bundle format {manifest.get('format')!r}")
    config = manifest["config"]
    vocab = textproc.Vocabulary.from_json(
        (bundle_dir / "vocab.json").read_text(encoding="utf-8")
    )
    if vocab.content_hash() != manifest["vocab_hash"]:
        raise ValidationError("bundle vocabulary does not match the manifest hash")
    bundle = Bundle(config=config, manifest=manifest, vocab=vocab,
                    fallback_types=manifest.get("fallback_types"))

    if manifest["stage1"]["method"] == "linear":
        bundle.stage1_model = catclf.LinearModel.load(bundle_dir / "catclf.npz")
        if bundle.stage1_model.vocab_hash != manifest["vocab_hash"]:
            raise ValidationError("stage-1 model was trained with a different vocabulary")
    else:
        bundle.stage1_imported = catclf.ImportedCategories.load(
            manifest["stage1"]["imported_path"]
        )

    method = manifest["stage2"]["method"]
    if method == "tc":
        bundle.type_index = fusion.InvertedIndex.load(bundle_dir / "type_index.npz")
    elif method == "ec":
        bundle.entity_index = fusion.InvertedIndex.load(bundle_dir / "entity_index.npz")
    elif method == "xmc":
        index = xmc.LabelIndex.load(bundle_dir / "label_index.json")
        bundle.matcher = xmc.MatcherModel.load(bundle_dir / "matchers.npz", index)
        bundle.ranker = xmc.EnsembleRanker.load(bundle_dir / "ranker.json")
    else:
        bundle.stage2_imported = xmc.ImportedTypeScores.load(
            manifest["stage2"]["imported_path"]
        )
    return bundle


def _predict_one(bundle: Bundle, q: Question) -> tuple[str, list[str]]:
    config = bundle.config
    x = textproc.vectorize(bundle.vocab, q.text)
    if bundle.stage1_imported is not None:
        flat = bundle.stage1_imported.predict_for_id(q.id)
    else:
        flat, _ = catclf.predict_category(bundle.stage1_model, x)
    category, subtype = unflatten_category(flat)
    if flat is FlatCategory.BOOLEAN:
        return category, ["boolean"]
    if category == "literal":
        return category, [subtype]

    k = config["top_k"]
    method = config["stage2"]["method"]
    if method == "tc":
        ranked = fusion.rank_types_tc(q.text, bundle.type_index, k=k)
    elif method == "ec":
        ranked = fusion.rank_types_ec(
            q.text, bundle.entity_index,
            k=config["stage2"]["ec_cutoff"], aggregate=config["stage2"]["ec_aggregate"],
        )[:k]
    elif method == "xmc":
        ranked = xmc.predict_types_xmc(
            bundle.matcher, bundle.ranker, x,
            beam=config["stage2"]["beam"], k=k,
        )
    else:
        ranked = bundle.stage2_imported.rank_for_id(q.id, k=k)
    types = [t for t, _ in ranked]
    if not types:
        types = list(bundle.fallback_types or [])[:k]
    if not types:
        raise ValidationError(
            f"no types available for resource question {q.id!r} and no fallback"
        )
    return category, types


def cmd_predict(config: dict, bundle_dir: str | Path, question_file: str | Path,
                out_file: str | Path | None = None) -> PredictionRun:
    """Predict a SMART submission run for every question in the file."""
    bundle = load_bundle(bundle_dir)
    questions = load_dataset(question_file, config["mode"], "test", require_labels=False)
    predictions = {q.id: _predict_one(bundle, q) for q in questions}
    run = PredictionRun(
        predictions,
        metadata={
            "config_hash": bundle.manifest["config_hash"],
            "seeds": bundle.manifest["seeds"],
            "stage1": bundle.manifest["stage1"]["method"],
            "stage2": bundle.manifest["stage2"]["method"],
        },
    )
    if out_file is not None:
        run.to_file(out_file)
    return run


def cmd_evaluate(run_file: str | Path, gold_file: str | Path, mode: str,
                 hierarchy_file: str | Path | None = None,
                 out_prefix: str | Path | None = None):
    """Evaluate a run file against a gold file; optionally write report files."""
    run = PredictionRun.from_file(run_file)
    source = mode if mode in ("dbpedia", "wikidata") else "combined"
    gold = load_dataset(gold_file, source, "test")
    hier = load_hierarchy(hierarchy_file) if hierarchy_file else None
    report = evaluate_run(run, gold, hier, mode)
    if out_prefix is not None:
        prefix = Path(out_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.json").write_text(report.to_json(), encoding="utf-8")
        Path(f"{prefix}.txt").write_text(report.to_text(), encoding="utf-8")
    return report


def cmd_analyze(run_file: str | Path, gold_file: str | Path, mode: str, n: int = 10,
                out_prefix: str | Path | None = None):
    """Error analysis: gold resource types most often missing from predictions."""
    run = PredictionRun.from_file(run_file)
    source = mode if mode in ("dbpedia", "wikidata") else "combined"
    gold = load_dataset(gold_file, source, "test")
    analysis = error_analysis(run, gold, n=n)
    if out_prefix is not None:
        prefix = Path(out_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.json").write_text(analysis.to_json(), encoding="utf-8")
        Path(f"{prefix}.tsv").write_text(analysis.to_text(), encoding="utf-8")
    return analysis


def cmd_ingest(config: dict) -> dict:
    """Validate every configured dataset and write its statistics files."""
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    for key, path in config["datasets"].items():
        source, split = key.rsplit("_", 1)
        qs = load_dataset(path, source, split)
        stats = dataset_stats(qs)
        (out_dir / f"stats_{key}.json").write_text(stats.to_json(), encoding="utf-8")
        (out_dir / f"stats_{key}.tsv").write_text(stats.to_tsv(), encoding="utf-8")
        results[key] = stats
    if not results:
        raise ValidationError("config lists no datasets to ingest")
    return results
