#!/usr/bin/env python3
"""Regenerates data/lexicon/dictionary.txt.

Line order is the frequency rank used to break spelling-correction ties.
Scene vocabulary (data/lexicon/scene_terms.txt) is ranked first, followed by
general English words from the pyspellchecker frequency list (MIT licensed),
most frequent first.

usage: build_dictionary.py path/to/en.json.gz [count]
"""
import gzip
import json
import re
import sys
from pathlib import Path

root = Path(__file__).resolve().parent.parent / "data" / "lexicon"
freq = json.load(gzip.open(sys.argv[1]))
count = int(sys.argv[2]) if len(sys.argv) > 2 else 10000

words = []
seen = set()
for line in (root / "scene_terms.txt").read_text().splitlines():
    w = line.strip()
    if w and not w.startswith("#") and w not in seen:
        seen.add(w)
        words.append(w)

for w, _ in sorted(freq.items(), key=lambda kv: (-kv[1], kv[0])):
    if len(words) >= count:
        break
    if re.fullmatch(r"[a-z]+", w) and w not in seen:
        seen.add(w)
        words.append(w)

(root / "dictionary.txt").write_text("\n".join(words) + "\n")
print(f"wrote {len(words)} words")
