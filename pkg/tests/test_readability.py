import pytest

from semkg.readability import count_sentences, count_syllables, readability, words

# Three fixed paragraphs with hand-counted words, sentences and syllables
# under the vowel-group heuristic (silent final e, consonant + le kept).
P1 = "The cat sat on the mat. It was happy."
# 9 words, 2 sentences, 10 syllables (happy = 2), 0 complex
P2 = "Beautiful people create wonderful little gardens."
# 6 words, 1 sentence; beautiful 3, people 2, create 1, wonderful 3, little 2, gardens 2 -> 13; complex 2
P3 = "Dogs bark! Do they? Yes."
# 5 words, 3 sentences, 5 syllables

HAND = {
    P1: dict(flesch=108.2675, fk_grade=-0.723889, gunning_fog=1.8),
    P2: dict(flesch=17.445, fk_grade=12.316667, gunning_fog=15.733333),
    P3: dict(flesch=120.543333, fk_grade=-3.14, gunning_fog=0.666667),
}


@pytest.mark.parametrize("text", list(HAND))
def test_hand_computed(text):
    got = readability(text)
    for k, v in HAND[text].items():
        assert got[k] == pytest.approx(v, abs=0.1), k


@pytest.mark.parametrize("word,n", [
    ("cat", 1), ("happy", 2), ("create", 1), ("people", 2), ("little", 2), ("table", 2),
    ("beautiful", 3), ("the", 1), ("rhythm", 1), ("queue", 1), ("make", 1), ("be", 1),
])
def test_syllables(word, n):
    assert count_syllables(word) == n


def test_counts():
    assert words("It's 3 o'clock, Bob.") == ["It's", "o'clock", "Bob"]
    assert count_sentences("One. Two! Three?") == 3
    assert count_sentences("no terminator") == 1
    assert count_sentences("Wait... what?!") == 2


def test_lexical():
    r = readability("The cat and the dog.")
    assert r["ttr"] == pytest.approx(4 / 5)
    assert r["lexical_density"] == pytest.approx(2 / 5)


def test_empty_rejected():
    with pytest.raises(ValueError):
        readability("123 ...")
