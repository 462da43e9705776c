#!/usr/bin/env python3
"""Regenerate the committed corpora under data/fixtures/ and configs/.

Deterministic: fixed RNG seed, sorted pools. Entity slots are filled with
single nouns or adjective-noun pairs from the tagger lexicon so that every
slot abstracts to exactly one placeholder and all triples of one template
share one abstract pattern. Held-out triples use reserved words that never
appear in the training split.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "data" / "fixtures"
CONFIGS = ROOT / "configs"

TRAIN_NOUNS = [
    "wolf", "rabbit", "deer", "fox", "bear", "bird", "fish", "insect", "bee",
    "ant", "dog", "cat", "animal", "plant", "tree", "flower", "seed", "root",
    "soil", "rock", "water", "food", "energy", "sunlight", "rain", "snow",
    "wind", "storm", "cloud", "river", "lake", "forest", "mountain", "ocean",
    "garden", "farm", "city", "house", "car", "machine", "iron", "metal",
    "heat", "sun", "star", "earth", "winter", "summer",
]
HELDOUT_NOUNS = [
    "human", "person", "child", "scientist", "farmer", "village", "school",
    "book", "engine", "copper", "oxygen", "carbon", "moon", "planet",
    "desert", "island", "spring", "autumn",
]
TRAIN_ADJS = [
    "primitive", "feudal", "social", "big", "small", "large", "tiny", "young",
    "old", "wild", "warm", "cold", "dry", "wet", "bright", "dark", "heavy",
    "fast", "slow", "deep", "ancient", "modern", "hungry", "strong", "weak",
    "quiet",
]
HELDOUT_ADJS = [
    "red", "green", "blue", "yellow", "tall", "short", "hot", "cool",
    "shallow", "thirsty", "happy", "loud", "tame",
]

FILLERS = [
    "runs", "grows", "falls", "rises", "sleeps", "moves", "eats", "drinks",
    "becomes", "stays", "turns", "looks", "seems", "finds", "keeps", "holds",
    "near", "under", "over", "with", "without", "and", "or", "but", "while",
    "when", "because", "quickly", "slowly", "often", "never", "here",
    "there", "today",
]
# Every surface form the tagger knows, for the free-form round-trip corpus.
ALL_NOUN_FORMS = sorted(
    set(TRAIN_NOUNS + HELDOUT_NOUNS)
    | {
        "societies", "development", "dogs", "cats", "animals", "plants",
        "trees", "birds", "humans", "people", "cities", "forests", "rivers",
        "mountains", "oceans", "houses", "cars", "books", "children",
        "schools", "scientists", "farmers", "rocks", "seeds", "leaf",
        "leaves", "flowers", "roots", "stem", "stems", "insects", "bees",
        "ants", "wolves", "rabbits", "foxes", "bears", "deserts", "lakes",
        "islands", "villages", "farms", "gardens", "machines", "engines",
        "metals", "storms", "clouds", "stars", "planets", "society",
    }
)
ALL_ADJS = sorted(set(TRAIN_ADJS + HELDOUT_ADJS))
DETS = ["the", "a", "an", "this", "that", "these", "those"]


def make_span(rng, nouns, adjs):
    noun = rng.choice(nouns)
    if rng.random() < 0.5:
        return f"{rng.choice(adjs)} {noun}", noun
    return noun, noun


def pick_slots(rng, nouns, adjs, k):
    """k spans with pairwise-distinct base nouns."""
    while True:
        spans = [make_span(rng, nouns, adjs) for _ in range(k)]
        if len({base for _, base in spans}) == k:
            return [s for s, _ in spans]


# Every conclusion is exactly three abstract tokens so all training targets
# and bag-of-words bags share one size; the summed BOW term then has the same
# uniform-over-bag optimum on every example and the loss curve converges to a
# composition-independent plateau.
def stage_of(x, y, z):
    return {
        "p1": f"{x} is a stage of {z}",
        "p2": f"{y} is a stage of {z}",
        "c": f"{x} resembles {y}",
        "type": "stage-of",
    }


def substitution(x, y, z):
    return {
        "p1": f"{x} is a kind of {y}",
        "p2": f"{y} needs {z}",
        "c": f"{x} needs {z}",
        "type": "substitution",
    }


def if_then(x, y, z):
    return {
        "p1": f"if {x} gets {y} then {x} makes {z}",
        "p2": f"{x} gets {y}",
        "c": f"{x} makes {z}",
        "type": "if-then",
    }


TEMPLATES = [("stage-of", stage_of), ("substitution", substitution),
             ("if-then", if_then)]


def make_patterns(rng, nouns, adjs, per_template):
    out = []
    seen = set()
    for name, build in TEMPLATES:
        made = 0
        while made < per_template:
            slots = pick_slots(rng, nouns, adjs, 3)
            key = (name, *slots)
            if key in seen:
                continue
            seen.add(key)
            out.append(build(*slots))
            made += 1
    return out


def write_jsonl(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")


def norm_word(w):
    """Mirror of the entity matcher's word normalization: the corpus must
    never pair two surface forms of one base inside a triple, or the
    placeholder map becomes ambiguous and cannot be restored."""
    for suf in ("ses", "xes", "zes", "ches", "shes"):
        if len(w) > len(suf) + 2 and w.endswith(suf):
            return w[:-2]
    if len(w) > 3 and w.endswith("s") and w[-2] != "s":
        return w[:-1]
    return w


def make_random_corpus(_rng, n_triples):
    """Free-form sentences (determiners, plurals, lone adjectives) for the
    abstraction round-trip checks; never used for training.  Uses its own
    stream so the other fixtures are unaffected by its draw count."""
    rng = random.Random(20260818 + 1)

    def pick_noun(used):
        while True:
            form = rng.choice(ALL_NOUN_FORMS)
            base = norm_word(form)
            if base not in used:
                used.add(base)
                return form

    def sentence(used):
        parts = []
        for _ in range(rng.randint(2, 5)):
            roll = rng.random()
            if roll < 0.55:
                phrase = []
                if rng.random() < 0.4:
                    phrase.append(rng.choice(DETS))
                if rng.random() < 0.4:
                    phrase.append(rng.choice(ALL_ADJS))
                phrase.append(pick_noun(used))
                parts.extend(phrase)
            elif roll < 0.7:
                parts.append(rng.choice(ALL_ADJS))
            else:
                parts.append(rng.choice(FILLERS))
        return " ".join(parts)

    out = []
    for _ in range(n_triples):
        used = set()
        out.append({"p1": sentence(used), "p2": sentence(used),
                    "c": sentence(used)})
    return out


# ---- entailment trees ----------------------------------------------------


def sub_chain(rng, tid, task2_distractors=0):
    w, x, y, z = pick_slots(rng, TRAIN_NOUNS, TRAIN_ADJS, 4)
    int1 = f"{x} needs {z}"
    rec = {
        "id": tid,
        "hypothesis": f"{w} needs {z}",
        "sentences": {
            "s1": f"{x} is a kind of {y}",
            "s2": f"{y} needs {z}",
            "s3": f"{w} is a kind of {x}",
        },
        "proof": f"s1 & s2 -> int1: {int1}; s3 & int1 -> hypothesis",
    }
    add_distractors(rng, rec, task2_distractors, exclude={w, x, y, z})
    return rec


def conj_tree(rng, tid, task2_distractors=0):
    x, y, z = pick_slots(rng, TRAIN_NOUNS, TRAIN_ADJS, 3)
    rec = {
        "id": tid,
        "hypothesis": f"{x} and {y} are different stages of {z}",
        "sentences": {
            "s1": f"{x} is a stage of {z}",
            "s2": f"{y} is a stage of {z}",
        },
        "proof": "s1 & s2 -> hypothesis",
    }
    add_distractors(rng, rec, task2_distractors, exclude={x, y, z})
    return rec


def ifthen_tree(rng, tid, task2_distractors=0):
    x, y, z = pick_slots(rng, TRAIN_NOUNS, TRAIN_ADJS, 3)
    rec = {
        "id": tid,
        "hypothesis": f"{x} makes {z}",
        "sentences": {
            "s1": f"if {x} gets {y} then {x} makes {z}",
            "s2": f"{x} gets {y}",
        },
        "proof": "s1 & s2 -> hypothesis",
    }
    add_distractors(rng, rec, task2_distractors, exclude={x, y, z})
    return rec


def wide3_tree(rng, tid):
    a, b, c, z = pick_slots(rng, TRAIN_NOUNS, TRAIN_ADJS, 4)
    return {
        "id": tid,
        "hypothesis": f"{a} and {b} and {c} are different stages of {z}",
        "sentences": {
            "s1": f"{a} is a stage of {z}",
            "s2": f"{b} is a stage of {z}",
            "s3": f"{c} is a stage of {z}",
        },
        "proof": "s1 & s2 & s3 -> hypothesis",
    }


def add_distractors(rng, rec, count, exclude):
    if count == 0:
        return
    n = len(rec["sentences"])
    for i in range(count):
        while True:
            d1, d2 = pick_slots(rng, TRAIN_NOUNS, TRAIN_ADJS, 2)
            if not ({d1, d2} & exclude):
                break
        shape = rng.choice(["{} needs {}", "{} is a kind of {}"])
        rec["sentences"][f"s{n + 1 + i}"] = shape.format(d1, d2)
    rec["task"] = "task2"


def make_treebank(rng):
    train, dev, test = [], [], []

    def fill(bucket, prefix, recipe):
        for i, (fn, kwargs) in enumerate(recipe, 1):
            bucket.append(fn(rng, f"{prefix}-{i:03d}", **kwargs))

    fill(train, "train",
         [(sub_chain, {})] * 10 + [(conj_tree, {})] * 8 +
         [(ifthen_tree, {})] * 8 + [(wide3_tree, {})] * 2 +
         [(sub_chain, {"task2_distractors": 1})] * 2)
    fill(dev, "dev",
         [(sub_chain, {})] * 3 + [(conj_tree, {})] * 2 +
         [(ifthen_tree, {})] * 2 + [(conj_tree, {"task2_distractors": 1})])
    fill(test, "test",
         [(sub_chain, {})] * 3 + [(conj_tree, {})] * 2 +
         [(ifthen_tree, {})] * 2 + [(wide3_tree, {})] +
         [(sub_chain, {"task2_distractors": 2})] * 2)
    return train, dev, test


def write_configs():
    CONFIGS.mkdir(parents=True, exist_ok=True)
    fixture_pretrain = {
        "epochs": 300, "batch_size": 10, "lr": 1e-3, "seed": 0,
        "d_model": 64, "n_layers": 2, "n_heads": 4, "d_ff": 128,
        "max_len": 48, "d_m": 64, "slots": 3,
    }
    fixture_finetune = {"epochs": 200, "batch_size": 4, "lr": 1e-3, "seed": 0}
    full_scale_pretrain = {
        "epochs": 2, "batch_size": 35, "lr": 3e-5, "seed": 0,
        "d_model": 768, "n_layers": 12, "n_heads": 12, "d_ff": 3072,
        "max_len": 512, "d_m": 4096, "slots": 7,
    }
    full_scale_finetune = {"epochs": 80, "batch_size": 30, "lr": 3e-5, "seed": 0}
    for name, doc in [("fixture_pretrain", fixture_pretrain),
                      ("fixture_finetune", fixture_finetune),
                      ("full_scale_pretrain", full_scale_pretrain),
                      ("full_scale_finetune", full_scale_finetune)]:
        (CONFIGS / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")


def main():
    rng = random.Random(20260818)

    worked = [{
        "p1": "primitive society is a stage of social development",
        "p2": "feudal society is a stage of social development",
        "c": ("primitive society and feudal society are different stages "
              "of social development"),
        "type": "conjunction",
    }]
    write_jsonl(FIXTURES / "worked_example.jsonl", worked)

    train = make_patterns(rng, TRAIN_NOUNS, TRAIN_ADJS, 20)
    heldout = make_patterns(rng, HELDOUT_NOUNS, HELDOUT_ADJS, 6)
    write_jsonl(FIXTURES / "patterns_train.jsonl", train)
    write_jsonl(FIXTURES / "patterns_heldout.jsonl", heldout)

    write_jsonl(FIXTURES / "random_sentences.jsonl",
                make_random_corpus(rng, 334))

    tb_train, tb_dev, tb_test = make_treebank(rng)
    write_jsonl(FIXTURES / "treebank_train.jsonl", tb_train)
    write_jsonl(FIXTURES / "treebank_dev.jsonl", tb_dev)
    write_jsonl(FIXTURES / "treebank_test.jsonl", tb_test)
    manifest = {
        "splits": {
            "train": {"file": "treebank_train.jsonl", "count": len(tb_train)},
            "dev": {"file": "treebank_dev.jsonl", "count": len(tb_dev)},
            "test": {"file": "treebank_test.jsonl", "count": len(tb_test)},
        }
    }
    (FIXTURES / "manifest.json").write_text(json.dumps(manifest, indent=2)
                                            + "\n")

    write_configs()
    print(f"fixtures written under {FIXTURES} and {CONFIGS}")


if __name__ == "__main__":
    main()
