"""Deterministic synthetic movie-style datasets for tests and demos."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .types import InteractionEvent, ItemRecord

GENRES = (
    "Action", "Adventure", "Animation", "Comedy", "Crime", "Documentary", "Drama",
    "Fantasy", "Horror", "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)
MOODS = ("uplifting", "bleak", "quirky", "tense", "nostalgic", "cerebral")
_ONSETS = ("b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z")
_VOWELS = ("a", "e", "i", "o", "u")
_CODAS = ("n", "r", "x", "l", "m", "th")
OCCUPATIONS = ("engineer", "teacher", "artist", "student", "clerk", "nurse")


def _word(rng) -> str:
    parts = [rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(2)]
    return ("".join(parts) + rng.choice(_CODAS)).capitalize()


def make_catalog(n_items: int, rng) -> dict[str, ItemRecord]:
    titles = set()
    items = {}
    for idx in range(n_items):
        title = f"{_word(rng)} {_word(rng)}"
        while title in titles:
            title = f"{_word(rng)} {_word(rng)}"
        titles.add(title)
        n_genres = int(rng.integers(1, 3))
        genres = [GENRES[g] for g in sorted(rng.choice(len(GENRES), size=n_genres, replace=False))]
        item_id = f"i{idx + 1:03d}"
        items[item_id] = ItemRecord(item_id, {
            "title": title,
            "genres": ", ".join(genres),
            "mood": str(rng.choice(MOODS)),
            "year": str(int(rng.integers(1950, 2001))),
        })
    return items


def make_toy_dataset(n_users: int = 40, n_items: int = 60, events_per_user=(18, 30), seed: int = 0,
                     horizon: int = 1_000_000, start: int = 946_684_800):
    """Generate ``(events, items, user_metadata)``.

    Users favor two genres and a mood; item choice is weighted by a Zipf-like
    popularity prior times the preference match, so popular items and
    preference-matched items both show up in the test split. Ratings are
    higher for matched items, so a rating filter at 3 removes mostly
    off-taste events.
    """
    rng = np.random.default_rng(seed)
    items = make_catalog(n_items, rng)
    item_ids = list(items)
    prior = 1.0 / (1.0 + rng.permutation(n_items)) ** 0.8
    item_genres = [set(items[i].raw_metadata["genres"].split(", ")) for i in item_ids]
    item_moods = [items[i].raw_metadata["mood"] for i in item_ids]

    events = []
    user_metadata = {}
    width = len(str(n_users))
    for u in range(n_users):
        user_id = f"u{u + 1:0{width}d}"
        favorites = {GENRES[g] for g in rng.choice(len(GENRES), size=2, replace=False)}
        mood = rng.choice(MOODS)
        match = np.array([len(g & favorites) for g in item_genres], dtype=float)
        mood_match = np.array([m == mood for m in item_moods], dtype=float)
        weights = prior * (1.0 + 4.0 * match + mood_match)
        n = int(rng.integers(events_per_user[0], events_per_user[1] + 1))
        n = min(n, n_items)
        chosen = rng.choice(n_items, size=n, replace=False, p=weights / weights.sum())
        stamps = np.sort(rng.integers(start, start + horizon, size=n))
        for idx, ts in zip(chosen, stamps):
            if match[idx] > 0:
                rating = float(rng.integers(3, 6))
            else:
                rating = float(rng.integers(1, 6))
            events.append(InteractionEvent(user_id, item_ids[idx], int(ts), rating))
        user_metadata[user_id] = {
            "age_group": str(rng.choice(("18-24", "25-34", "35-44", "45+"))),
            "occupation": str(rng.choice(OCCUPATIONS)),
        }
    return events, items, user_metadata


def write_ml1m_files(directory, events, items) -> tuple[Path, Path]:
    """Write ``ratings.dat`` and ``movies.dat`` in MovieLens-1M layout.

    Item ids are written as-is, so any string id without ``::`` works.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ratings = directory / "ratings.dat"
    movies = directory / "movies.dat"
    with open(ratings, "w", encoding="latin-1") as fh:
        for e in events:
            fh.write(f"{e.user_id}::{e.item_id}::{int(e.rating or 0)}::{e.timestamp}\n")
    with open(movies, "w", encoding="latin-1") as fh:
        for item_id, rec in items.items():
            genres = rec.raw_metadata.get("genres", "").replace(", ", "|")
            fh.write(f"{item_id}::{rec.raw_metadata.get('title', item_id)}::{genres}\n")
    return ratings, movies
