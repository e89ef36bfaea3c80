"""Seeded synthetic Clean-Clean datasets for tests, demos and benchmarks.

Each E1 record gets at most one noisy copy in E2 (typos, dropped and swapped
words); the remaining E2 records are fresh non-matches.
"""

from __future__ import annotations

import numpy as np

from .core import CandidatePair, EntityCollection, EntityProfile, GroundTruth
from .methods import Dataset

_SYLLABLES = ("ka", "lo", "mi", "ren", "tas", "vo", "qui", "zen", "dor", "pha", "lum", "ber",
              "sto", "nix", "gal", "ur", "bel", "cor", "dea", "fin")


def _word(rng: np.random.Generator) -> str:
    return "".join(rng.choice(_SYLLABLES, size=int(rng.integers(1, 4))))


def _typo(word: str, rng: np.random.Generator) -> str:
    if len(word) < 3:
        return word
    i = int(rng.integers(0, len(word)))
    op = rng.integers(0, 3)
    if op == 0:
        return word[:i] + word[i + 1:]
    ch = "abcdefghijklmnopqrstuvwxyz"[int(rng.integers(0, 26))]
    if op == 1:
        return word[:i] + ch + word[i + 1:]
    return word[:i] + ch + word[i:]


def _record(rng, n_words):
    return {"name": " ".join(_word(rng) for _ in range(n_words)),
            "city": _word(rng).capitalize(),
            "phone": "-".join(str(int(x)) for x in rng.integers(100, 999, size=2))}


def _perturb(rec: dict, rng, noise: float) -> dict:
    words = rec["name"].split()
    words = [_typo(w, rng) if rng.random() < noise else w for w in words]
    if len(words) > 2 and rng.random() < noise:
        words.pop(int(rng.integers(0, len(words))))
    if len(words) > 1 and rng.random() < noise / 2:
        i = int(rng.integers(0, len(words) - 1))
        words[i], words[i + 1] = words[i + 1], words[i]
    out = {"name": " ".join(words), "city": rec["city"],
           "phone": rec["phone"] if rng.random() > noise else ""}
    return out


def make_dataset(n1: int = 200, n2: int = 300, matches: int = 100, noise: float = 0.3,
                 seed: int = 0, words: tuple[int, int] = (2, 5)) -> Dataset:
    if matches > min(n1, n2):
        raise ValueError("more matches than records on the smaller side")
    rng = np.random.default_rng(seed)
    left = [_record(rng, int(rng.integers(words[0], words[1] + 1))) for _ in range(n1)]
    right = [_perturb(left[i], rng, noise) for i in range(matches)]
    right += [_record(rng, int(rng.integers(words[0], words[1] + 1))) for _ in range(n2 - matches)]
    order = rng.permutation(n2)
    right = [right[i] for i in order]
    pos = {int(o): j for j, o in enumerate(order)}
    e1 = EntityCollection("E1", tuple(EntityProfile(f"a{i}", tuple(r.items())) for i, r in enumerate(left)))
    e2 = EntityCollection("E2", tuple(EntityProfile(f"b{j}", tuple(r.items())) for j, r in enumerate(right)))
    gt = GroundTruth(frozenset(CandidatePair(f"a{i}", f"b{pos[i]}") for i in range(matches)))
    return Dataset(e1, e2, gt, name=f"synth-{seed}")
