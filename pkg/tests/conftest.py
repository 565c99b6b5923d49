import json
from pathlib import Path
from random import Random

import pytest

from anstype import corpus, typehier

REPO = Path(__file__).resolve().parents[1]
DATA = REPO / "data"

TINY_HIER_ROWS = [
    ("Agent", "ROOT"),
    ("Person", "Agent"),
    ("Athlete", "Person"),
    ("Gymnast", "Athlete"),
    ("Organisation", "Agent"),
    ("Place", "ROOT"),
    ("PopulatedPlace", "Place"),
    ("Country", "PopulatedPlace"),
    ("City", "PopulatedPlace"),
    ("Work", "ROOT"),
    ("MusicalWork", "Work"),
    ("Opera", "MusicalWork"),
]


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def dbpedia_hierarchy():
    return typehier.load_hierarchy(DATA / "dbpedia_types.tsv")


@pytest.fixture(scope="session")
def tiny_hier(tmp_path_factory):
    path = tmp_path_factory.mktemp("hier") / "tiny.tsv"
    path.write_text("\n".join(f"{c}\t{p}" for c, p in TINY_HIER_ROWS) + "\n")
    return typehier.load_hierarchy(path)


@pytest.fixture(scope="session")
def sample_questions_path() -> Path:
    return Path(__file__).parent / "data" / "sample_questions.json"


# --- synthetic dataset -----------------------------------------------------
#
# Deterministic question generator over the tiny hierarchy, with separable
# word patterns per category and per resource type, so small models can
# actually learn from it.

_RESOURCE_THEMES = {
    "Gymnast": (["gymnast", "gymnasts", "vault", "routine", "coach"], ("Gymnast", "Athlete", "Person", "Agent")),
    "Country": (["country", "border", "capital", "anthem", "nation"], ("Country", "PopulatedPlace", "Place")),
    "City": (["city", "mayor", "district", "downtown", "suburb"], ("City", "PopulatedPlace", "Place")),
    "Opera": (["opera", "aria", "composer", "libretto", "soprano"], ("Opera", "MusicalWork", "Work")),
    "Organisation": (["organisation", "federation", "committee", "union", "board"], ("Organisation", "Agent")),
}

_NAMES = ["amanda", "boris", "clara", "dmitri", "elena", "farid", "greta", "hugo",
          "irene", "janos", "karin", "luis", "marta", "nils", "olga", "pavel"]


def synthetic_records(n: int, seed: int) -> list[dict]:
    rng = Random(seed)
    records = []
    themes = sorted(_RESOURCE_THEMES)
    for i in range(n):
        name = rng.choice(_NAMES)
        other = rng.choice(_NAMES)
        kind = i % 5
        if kind == 0:
            rec = {
                "category": "boolean",
                "type": ["boolean"],
                "question": f"is {name} a member of the {other} club",
            }
        elif kind == 1:
            rec = {
                "category": "literal",
                "type": ["number"],
                "question": f"how many medals does {name} have",
            }
        elif kind == 2:
            rec = {
                "category": "literal",
                "type": ["date"],
                "question": f"when did {name} marry {other}",
            }
        elif kind == 3:
            rec = {
                "category": "literal",
                "type": ["string"],
                "question": f"what is the motto of the {name} estate",
            }
        else:
            theme = themes[(i // 5) % len(themes)]
            words, chain = _RESOURCE_THEMES[theme]
            w1, w2 = rng.choice(words), rng.choice(words)
            rec = {
                "category": "resource",
                "type": list(chain),
                "question": f"which {w1} related to {name} has the best {w2}",
            }
        rec["id"] = f"syn_{i}"
        records.append(rec)
    return records


@pytest.fixture(scope="session")
def synthetic_paths(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    train = root / "synth_train.json"
    test = root / "synth_test.json"
    train.write_text(json.dumps(synthetic_records(400, seed=101)))
    test_records = synthetic_records(100, seed=202)
    for rec in test_records:
        rec["id"] = "t" + rec["id"]
    test.write_text(json.dumps(test_records))
    return {"train": train, "test": test}


@pytest.fixture(scope="session")
def synthetic_abstracts(tiny_hier, tmp_path_factory):
    entities = corpus.synthesize_entities(
        [c for c, _ in TINY_HIER_ROWS], tiny_hier, per_type=3, seed=5
    )
    path = tmp_path_factory.mktemp("abstracts") / "entities.tsv"
    corpus.write_entity_file(entities, path)
    return path
