"""Readability and lexical statistics with a vowel-group syllable heuristic."""

from __future__ import annotations

import re

from .stopwords import STOPWORDS

_WORD = re.compile(r"[^\W\d_]+(?:['’][^\W\d_]+)*")
_SENTENCE_END = re.compile(r"[.!?]+")
_VOWEL_GROUP = re.compile(r"[aeiouy]+")


def words(text: str) -> list[str]:
    return _WORD.findall(text)


def count_sentences(text: str) -> int:
    """Terminator-delimited segments that contain a word; unterminated text counts as one."""
    n = sum(1 for seg in _SENTENCE_END.split(text) if _WORD.search(seg))
    return max(n, 1)


def count_syllables(word: str) -> int:
    """Contiguous vowel groups, minus a silent final e (but not consonant + le); at least 1."""
    w = word.lower()
    n = len(_VOWEL_GROUP.findall(w))
    if n > 1 and w.endswith("e"):
        if not (w.endswith("le") and len(w) > 2 and w[-3] not in "aeiouy"):
            n -= 1
    return max(n, 1)


def readability(text: str) -> dict[str, float]:
    ws = words(text)
    if not ws:
        raise ValueError("text has no words")
    n_words = len(ws)
    n_sent = count_sentences(text)
    syl = [count_syllables(w) for w in ws]
    complex_words = sum(1 for s in syl if s >= 3)
    wps = n_words / n_sent
    spw = sum(syl) / n_words
    tokens = [w.lower() for w in ws]
    return {
        "flesch": 206.835 - 1.015 * wps - 84.6 * spw,
        "fk_grade": 0.39 * wps + 11.8 * spw - 15.59,
        "gunning_fog": 0.4 * (wps + 100.0 * complex_words / n_words),
        "ttr": len(set(tokens)) / len(tokens),
        "lexical_density": sum(1 for t in tokens if t not in STOPWORDS) / len(tokens),
    }
