"""The end-to-end pipeline through the library API (mirrors the CLI).

Trains a bundle on the DBpedia train questions, predicts on the shipped
sample file, and evaluates the run. The same flow is available as shell
commands:

    anstype train --config demos/config_dbpedia.json --output-dir runs/dbpedia
    anstype predict runs/dbpedia tests/data/sample_questions.json --out runs/sample_run.json
    anstype evaluate runs/sample_run.json tests/data/sample_questions.json \
        --mode dbpedia --hierarchy data/dbpedia_types.tsv

    python demos/06_full_pipeline_cli.py
"""

import tempfile
from pathlib import Path

from anstype.pipeline import cmd_evaluate, cmd_predict, cmd_train, load_config

ROOT = Path(__file__).resolve().parents[1]
workdir = Path(tempfile.mkdtemp(prefix="anstype_demo_"))

config = load_config(ROOT / "demos" / "config_dbpedia.json", {
    "datasets": {
        "dbpedia_train": str(ROOT / "data" / "smarttask_dbpedia_train.json"),
        "wikidata_train": str(ROOT / "data" / "lcquad2_anstype_wikidata_train.json"),
    },
    "hierarchy": str(ROOT / "data" / "dbpedia_types.tsv"),
    "output_dir": str(workdir / "bundle"),
})
print("training bundle (a few minutes)...")
bundle = cmd_train(config)
print(f"bundle: {bundle}")

sample = ROOT / "tests" / "data" / "sample_questions.json"
run = cmd_predict(config, bundle, sample, workdir / "run.json")
for qid, (category, types) in run.predictions.items():
    print(f"  {qid}: {category} {types[:4]}")

report = cmd_evaluate(workdir / "run.json", sample, "dbpedia",
                      ROOT / "data" / "dbpedia_types.tsv", workdir / "report")
print(report.to_text())
