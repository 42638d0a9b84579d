"""Deterministic synthetic English corpus for desk-scale experiments.

The benchmark-sized parliamentary corpus is far larger than this simulator
needs, and the sandbox it runs in has no data downloads, so experiments use
sentences drawn from a small template grammar with a parliament-flavoured
vocabulary (~250 distinct words).  Generation is seeded and reproducible;
any UTF-8 one-sentence-per-line file can be substituted via the config
paths.

Usage:  python -m ris_semcom.corpus --out train.txt --n 10000 --seed 7
"""

from __future__ import annotations

import argparse
import random
from pathlib import Path

DETERMINERS = ["the", "a", "every", "this", "that", "each"]

NOUNS = [
    "committee", "report", "minister", "parliament", "proposal", "debate", "budget",
    "policy", "council", "amendment", "government", "president", "member", "question",
    "answer", "decision", "agreement", "treaty", "market", "economy", "region",
    "border", "project", "programme", "directive", "regulation", "strategy", "reform",
    "crisis", "union", "state", "country", "court", "law", "rule", "plan", "measure",
    "fund", "tax", "trade", "industry", "farmer", "worker", "teacher", "student",
    "journalist", "scientist", "engineer", "doctor", "lawyer", "mayor", "city",
    "village", "school", "hospital", "library", "museum", "station", "airport",
    "harbour", "factory", "office", "meeting", "session", "vote", "speech", "letter",
    "document", "chapter", "article", "summary", "review", "survey", "study",
    "result", "problem", "solution", "idea", "opinion",
]

TRANSITIVE_VERBS = [
    "supports", "rejects", "examines", "approves", "welcomes", "criticises",
    "reviews", "amends", "accepts", "defends", "presents", "discusses", "prepares",
    "publishes", "signs", "blocks", "delays", "funds", "improves", "monitors",
    "oversees", "proposes", "questions", "reads", "repeats", "respects", "restores",
    "revises", "shapes", "simplifies", "strengthens", "studies", "submits",
    "suspends", "translates", "understands", "updates", "values", "visits", "wants",
]

INTRANSITIVE_VERBS = [
    "speaks", "arrives", "resigns", "agrees", "disagrees", "listens", "responds",
    "travels", "votes", "waits", "works", "adjourns", "applauds", "continues",
    "departs", "hesitates", "intervenes", "objects", "participates", "protests",
]

ADJECTIVES = [
    "new", "common", "difficult", "annual", "regional", "national", "european",
    "financial", "economic", "social", "political", "technical", "cultural",
    "digital", "environmental", "agricultural", "ambitious", "balanced", "careful",
    "clear", "complex", "detailed", "fair", "final", "formal", "important", "legal",
    "modern", "necessary", "official", "open", "practical", "public", "recent",
    "serious", "simple", "strict", "strong", "urgent", "useful",
]

ADVERBS = [
    "clearly", "finally", "strongly", "carefully", "quickly", "slowly", "openly",
    "firmly", "briefly", "formally", "gladly", "calmly", "warmly", "rarely", "often",
]

PREPOSITIONS = [
    "in", "on", "under", "with", "without", "across", "near", "behind", "beside",
    "during", "after", "before",
]

MODALS = ["must", "should", "can", "will"]

INFINITIVES = [
    "accept", "reject", "examine", "approve", "review", "amend", "defend",
    "present", "discuss", "prepare", "publish", "sign", "improve", "support",
]

TIME_PHRASES = [
    ["today"], ["yesterday"], ["tomorrow"], ["this", "week"], ["this", "year"],
    ["next", "month"], ["in", "january"], ["in", "march"], ["in", "october"],
]


def _noun_phrase(r: random.Random) -> list[str]:
    parts = [r.choice(DETERMINERS)]
    if r.random() < 0.45:
        parts.append(r.choice(ADJECTIVES))
    parts.append(r.choice(NOUNS))
    return parts


def _prep_phrase(r: random.Random) -> list[str]:
    return [r.choice(PREPOSITIONS)] + _noun_phrase(r)


def _sentence_words(r: random.Random) -> list[str]:
    roll = r.randrange(10)
    if roll == 0:
        words = _noun_phrase(r) + [r.choice(TRANSITIVE_VERBS)] + _noun_phrase(r)
    elif roll == 1:
        words = _noun_phrase(r) + [r.choice(TRANSITIVE_VERBS)] + _noun_phrase(r) + _prep_phrase(r)
    elif roll == 2:
        words = _noun_phrase(r) + [r.choice(INTRANSITIVE_VERBS), r.choice(ADVERBS)]
    elif roll == 3:
        words = _noun_phrase(r) + [r.choice(INTRANSITIVE_VERBS)] + _prep_phrase(r)
    elif roll == 4:
        words = (
            _noun_phrase(r) + [r.choice(TRANSITIVE_VERBS)] + _noun_phrase(r)
            + ["and"] + _noun_phrase(r)
        )
    elif roll == 5:
        words = [r.choice(ADVERBS), ","] + _noun_phrase(r) + [r.choice(TRANSITIVE_VERBS)] + _noun_phrase(r)
    elif roll == 6:
        words = (
            _noun_phrase(r) + [r.choice(TRANSITIVE_VERBS)] + _noun_phrase(r)
            + ["because"] + _noun_phrase(r) + [r.choice(INTRANSITIVE_VERBS)]
        )
    elif roll == 7:
        words = r.choice(TIME_PHRASES) + _noun_phrase(r) + [r.choice(TRANSITIVE_VERBS)] + _noun_phrase(r)
    elif roll == 8:
        words = _noun_phrase(r) + [r.choice(MODALS), r.choice(INFINITIVES)] + _noun_phrase(r)
    else:
        words = (
            _noun_phrase(r) + [r.choice(MODALS), r.choice(INFINITIVES)] + _noun_phrase(r)
            + _prep_phrase(r)
        )
    return words + ["."]


def _render(words: list[str]) -> str:
    text = " ".join(words).replace(" ,", ",").replace(" .", ".")
    return text[0].upper() + text[1:]


def generate_sentences(n: int, seed: int) -> list[str]:
    """n grammar sentences, 5 to ~18 tokens each, reproducible per seed."""
    r = random.Random(seed)
    return [_render(_sentence_words(r)) for _ in range(n)]


def write_corpus(path: str | Path, n: int, seed: int) -> None:
    Path(path).write_text("\n".join(generate_sentences(n, seed)) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="generate a synthetic corpus")
    parser.add_argument("--out", required=True, help="output file, one sentence per line")
    parser.add_argument("--n", type=int, default=10000, help="number of sentences")
    parser.add_argument("--seed", type=int, default=7, help="generator seed")
    args = parser.parse_args(argv)
    write_corpus(args.out, args.n, args.seed)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
