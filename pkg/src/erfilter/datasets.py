"""Dataset discovery and the reference benchmark catalogue.

A dataset is a directory holding ``e1.csv``, ``e2.csv`` and ``gt.csv`` plus an
optional ``dataset.json`` overriding the file names and CSV dialect::

    {"delimiter": "|", "id_column": "id", "e1": "rest1.csv", "e2": "rest2.csv",
     "gt": "matches.csv", "vectors1": "e1.vec", "vectors2": "e2.vec"}

Named datasets are resolved under ``$ERFILTER_DATA/<name>``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .core import ConfigError
from .ingest import load_collection, load_groundtruth, load_vectors
from .methods import Dataset

DATA_ENV = "ERFILTER_DATA"


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    sources: str
    sizes: tuple[int, int]
    duplicates: int
    best_attribute: str


CATALOGUE = {
    d.name: d
    for d in (
        DatasetInfo("restaurants", "Rest. 1 / Rest. 2", (339, 2256), 89, "Name"),
        DatasetInfo("abt-buy", "Abt / Buy", (1076, 1076), 1076, "Name"),
        DatasetInfo("amazon-gb", "Amazon / GB", (1354, 3039), 1104, "Title"),
        DatasetInfo("dblp-acm", "DBLP / ACM", (2616, 2294), 2224, "Title"),
        DatasetInfo("imdb-tmdb", "IMDb / TMDb", (5118, 6056), 1968, "Title"),
        DatasetInfo("imdb-tvdb", "IMDb / TVDB", (5118, 7810), 1072, "Name"),
        DatasetInfo("tmdb-tvdb", "TMDb / TVDB", (6056, 7810), 1095, "Name"),
        DatasetInfo("walmart-amazon", "Walmart / Amazon", (2554, 22074), 853, "Title"),
        DatasetInfo("dblp-scholar", "DBLP / GS", (2516, 61353), 2308, "Title"),
        DatasetInfo("imdb-dbpedia", "IMDb / DBpedia", (27615, 23182), 22863, "Title"),
    )
}


def data_root() -> Path | None:
    root = os.environ.get(DATA_ENV)
    return Path(root) if root else None


def resolve(name_or_path: str) -> Path:
    """A directory path, or a dataset name looked up under $ERFILTER_DATA."""
    p = Path(name_or_path)
    if p.is_dir():
        return p
    root = data_root()
    if root is not None and (root / name_or_path).is_dir():
        return root / name_or_path
    where = f"{DATA_ENV}={root}" if root else f"{DATA_ENV} unset"
    raise FileNotFoundError(f"dataset {name_or_path!r} not found ({where})")


def available(name: str) -> bool:
    try:
        resolve(name)
        return True
    except FileNotFoundError:
        return False


def load_dataset(name_or_path: str, *, lenient: bool = False) -> Dataset:
    """Load both collections and the ground truth. ``lenient`` skips the
    one-match-per-id check for ground truths that are not strictly Clean-Clean."""
    root = resolve(name_or_path)
    meta = {}
    if (root / "dataset.json").exists():
        meta = json.loads((root / "dataset.json").read_text(encoding="utf-8"))
    known = {"delimiter", "id_column", "encoding", "e1", "e2", "gt", "vectors1", "vectors2"}
    extra = set(meta) - known
    if extra:
        raise ConfigError(f"{root}/dataset.json: unknown keys {sorted(extra)}")
    opts = dict(delimiter=meta.get("delimiter", ","), encoding=meta.get("encoding", "utf-8"))
    e1 = load_collection(root / meta.get("e1", "e1.csv"), "E1", id_column=meta.get("id_column", "id"), **opts)
    e2 = load_collection(root / meta.get("e2", "e2.csv"), "E2", id_column=meta.get("id_column", "id"), **opts)
    gt = load_groundtruth(root / meta.get("gt", "gt.csv"), e1, e2, clean_clean=not lenient, **opts)
    ds = Dataset(e1, e2, gt, name=root.name)
    if "vectors1" in meta and "vectors2" in meta:
        ds.attach_vectors(load_vectors(root / meta["vectors1"]), load_vectors(root / meta["vectors2"]))
    return ds


# Best configurations and their reported effectiveness, per (dataset, schema).
# Suffix-array rows carry no purging/filtering settings, so none is applied.
REFERENCE_ROWS: dict[tuple[str, str], dict[str, tuple[dict, float, float]]] = {
    ("restaurants", "agnostic"): {
        "pbw": ({}, 1.000, 0.307),
        "sbw": (dict(bp=False, bfr=0.05, pa="WEP", ws="ARCS"), 1.000, 0.533),
        "qbw": (dict(q=4, bp=True, bfr=0.325, pa="RCNP", ws="CBS"), 0.978, 0.465),
        "eqbw": (dict(q=4, t=0.80, bp=False, bfr=0.025, pa="WEP", ws="ECBS"), 0.910, 0.757),
        "sabw": (dict(lmin=4, bmax=2, pa="WEP", ws="ECBS"), 1.000, 0.767),
        "esabw": (dict(lmin=2, bmax=3, pa="RWNP", ws="ARCS"), 0.921, 0.469),
        "eps-join": (dict(cl=True, rm="T1G", sm="cosine", t=0.82), 0.921, 0.732),
        "knn-join": (dict(cl=True, rvs=True, rm="C4GM", sm="dice", K=1), 1.000, 0.224),
    },
    ("dblp-acm", "agnostic"): {
        "dbw": ({}, 1.000, 0.042),
        "sbw": (dict(bp=True, bfr=0.225, pa="RCNP", ws="EJS"), 0.903, 0.957),
        "qbw": (dict(q=6, bp=True, bfr=0.100, pa="WEP", ws="EJS"), 0.915, 0.897),
        "eqbw": (dict(q=2, t=0.85, bp=True, bfr=0.025, pa="WEP", ws="EJS"), 0.918, 0.926),
        "sabw": (dict(lmin=2, bmax=16, pa="BLAST", ws="CHI2"), 0.969, 0.804),
        "esabw": (dict(lmin=2, bmax=8, pa="BLAST", ws="CHI2"), 0.902, 0.751),
    },
    ("dblp-acm", "based:Title"): {
        "eps-join": (dict(cl=False, rm="T1G", sm="cosine", t=1.00), 0.913, 0.886),
        "knn-join": (dict(cl=False, rvs=False, rm="C3G", sm="cosine", K=1), 0.994, 0.836),
    },
    ("restaurants", "based:Name"): {
        "dknn-join": ({}, 1.000, 0.100),
    },
}
