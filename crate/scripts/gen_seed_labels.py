#!/usr/bin/env python3
"""Regenerate crates/core/data/seed_labels.jsonl, a synthetic 200-sentence
starter set for the informative-sentence classifier (100 per class)."""
import json
import random

rng = random.Random(7)

features = ["dark mode", "offline playback", "the search bar", "notifications", "the lyrics view",
            "landscape mode", "the login screen", "video upload", "comment translation", "the widget",
            "playlist sorting", "the sleep timer", "apple watch support", "ipad layout", "voice messages"]
problems = ["crashes", "freezes", "keeps logging me out", "stopped working", "shows a blank screen",
            "drains the battery", "is very slow", "fails to load", "skips songs", "loses my settings"]
informative_templates = [
    "Please add {f}.",
    "The app {p} when I open {f}.",
    "Since the last update the app {p}.",
    "I wish there was {f} in the settings.",
    "Every time I use {f} it {p}.",
    "Can you fix {f}? It {p}.",
    "Would love to see {f} added soon.",
    "After updating to the new version it {p} on my iPhone.",
    "{F} is missing and it makes the app hard to use.",
    "Bring back {f}, the new design is confusing.",
]
praise = ["Love it", "Best app ever", "Great app", "Awesome", "Amazing", "So good", "Five stars",
          "Really nice", "Perfect", "Highly recommend", "Totally worth it", "Just wow"]
filler = ["!", "!!", ".", " :)", " lol", " <3", "!!!", ""]
noninformative_templates = [
    "{x}{e}",
    "{x}, {y}{e}",
    "I {v} this app{e}",
    "{x} app, {v} it{e}",
    "Thank you so much{e}",
    "This is the best{e}",
    "My favorite app{e}",
    "I use it every day{e}",
    "Ok{e}",
    "Meh{e}",
]
verbs = ["love", "like", "adore", "enjoy"]

rows = []
seen = set()
while len([r for r in rows if r["label"] == "informative"]) < 100:
    f = rng.choice(features)
    t = rng.choice(informative_templates).format(f=f, F=f[0].upper() + f[1:], p=rng.choice(problems))
    if t not in seen:
        seen.add(t)
        rows.append({"text": t, "label": "informative"})
while len([r for r in rows if r["label"] == "non-informative"]) < 100:
    t = rng.choice(noninformative_templates).format(
        x=rng.choice(praise), y=rng.choice(praise).lower(), v=rng.choice(verbs), e=rng.choice(filler))
    if t not in seen:
        seen.add(t)
        rows.append({"text": t, "label": "non-informative"})
rng.shuffle(rows)
with open("crates/core/data/seed_labels.jsonl", "w") as fh:
    for r in rows:
        fh.write(json.dumps(r) + "\n")
