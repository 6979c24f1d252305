#!/usr/bin/env python3
"""Regenerate crates/core/data/pos_lexicon.tsv from WordNet 3.0.

Usage: gen_pos_lexicon.py <wordnet-3.0 dict dir> [supplement.tsv] > pos_lexicon.tsv

Candidate tags per lemma are ordered by SemCor tagged-sense counts
(cntlist.rev), then by synset count, then NOUN, VERB, ADJ, OTHER.
Adverbs map to OTHER. Only single-word lowercase ASCII lemmas are kept.
Entries in the supplement file replace the WordNet entry for that lemma.
"""
import re
import sys
from collections import defaultdict

FILES = {"noun": "NOUN", "verb": "VERB", "adj": "ADJ", "adv": "OTHER"}
SS_TYPE = {"1": "NOUN", "2": "VERB", "3": "ADJ", "5": "ADJ", "4": "OTHER"}
ORDER = {"NOUN": 0, "VERB": 1, "ADJ": 2, "OTHER": 3}
WORD = re.compile(r"^[a-z]+$")


def main():
    root = sys.argv[1]
    synsets = defaultdict(lambda: defaultdict(int))
    for fname, tag in FILES.items():
        with open(f"{root}/index.{fname}", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith(" "):
                    continue
                parts = line.split()
                lemma = parts[0]
                if WORD.match(lemma):
                    synsets[lemma][tag] += int(parts[2])
    counts = defaultdict(lambda: defaultdict(int))
    with open(f"{root}/cntlist.rev", encoding="utf-8") as fh:
        for line in fh:
            key, _, tag_cnt = line.split()
            lemma, rest = key.split("%", 1)
            if lemma in synsets:
                counts[lemma][SS_TYPE[rest[0]]] += int(tag_cnt)

    entries = {}
    for lemma, by_tag in synsets.items():
        tags = sorted(
            by_tag,
            key=lambda t: (-counts[lemma][t], -by_tag[t], ORDER[t]),
        )
        entries[lemma] = tags

    if len(sys.argv) > 2:
        with open(sys.argv[2], encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                lemma, tags = line.split("\t")
                entries[lemma] = tags.split(",")

    out = sys.stdout
    out.write("# generated by scripts/gen_pos_lexicon.py from WordNet 3.0; do not edit\n")
    for lemma in sorted(entries):
        out.write(f"{lemma}\t{','.join(entries[lemma])}\n")


if __name__ == "__main__":
    main()
