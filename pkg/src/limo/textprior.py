"""Annotation-to-text template engine and its exact inverse.

Listener annotations (emotion label, activated facial action units with
intensity levels, optional head motion) render into one English sentence:

    A person <emotion phrase> and listens with <au phrase> and <au phrase>
    and <head phrase>.

The "with ..." block is omitted when no unit is active; the head phrase
rides on a final "and". Every phrase slot draws a synonym with a seeded
RNG, and every rendered sentence parses back to exactly the annotation it
came from. Catalog wording is artifact-defined; the unit ids follow the
common facial action coding numbering.

AU phrases are always "<adverb> <adjective> <noun...>". The adverb encodes
the intensity level (the five level groups are disjoint), the noun names
the unit, and the adjective must belong to that unit's set. No phrase in
any catalog contains the token pair "and", which keeps the sentence
splittable on " and ".
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from .errors import EmptyText, UnknownAu, UnknownEmotion

EMOTIONS: dict[str, list[str]] = {
    "happy": ["looks happy", "seems joyful", "appears cheerful"],
    "sad": ["looks sad", "seems downcast", "appears gloomy"],
    "angry": ["looks angry", "seems irritated", "appears furious"],
    "surprised": ["looks surprised", "seems astonished", "appears startled"],
    "neutral": ["looks calm", "seems composed", "appears relaxed"],
    "disgusted": ["looks disgusted", "seems repulsed", "appears revolted"],
    "fearful": ["looks fearful", "seems anxious", "appears alarmed"],
}

# au_id -> (noun phrase, adjective synonyms)
AU_CATALOG: dict[int, tuple[str, list[str]]] = {
    1: ("inner brows", ["raised", "lifted", "arched"]),
    2: ("outer brows", ["raised", "lifted", "arched"]),
    4: ("brows", ["furrowed", "lowered", "knitted"]),
    5: ("upper eyelids", ["raised", "widened", "opened"]),
    6: ("cheeks", ["raised", "lifted", "bunched"]),
    7: ("eyelids", ["tightened", "narrowed", "squeezed"]),
    9: ("nose", ["wrinkled", "scrunched", "crinkled"]),
    12: ("lip corners", ["raised", "pulled", "upturned"]),
    15: ("mouth corners", ["lowered", "drooping", "downturned"]),
    17: ("chin", ["raised", "lifted", "crumpled"]),
    25: ("lips", ["parted", "opened", "separated"]),
    26: ("jaw", ["dropped", "lowered", "slackened"]),
}

# intensity level -> adverb synonyms (disjoint across levels)
LEVEL_ADVERBS: dict[int, list[str]] = {
    1: ["slightly", "faintly", "barely"],
    2: ["mildly", "somewhat", "gently"],
    3: ["fully", "extremely", "markedly"],
    4: ["strongly", "intensely", "sharply"],
    5: ["utterly", "profoundly", "overwhelmingly"],
}

HEAD_MOTIONS: dict[str, list[str]] = {
    "nod": ["nodding along", "nodding gently", "nodding repeatedly"],
    "shake": ["shaking the head", "swiveling the head", "shaking the head slowly"],
}

_PHRASE_TO_EMOTION = {p: e for e, ps in EMOTIONS.items() for p in ps}
_ADVERB_TO_LEVEL = {a: lvl for lvl, advs in LEVEL_ADVERBS.items() for a in advs}
_NOUN_TO_AU = {noun: au for au, (noun, _) in AU_CATALOG.items()}
_PHRASE_TO_HEAD = {p: h for h, ps in HEAD_MOTIONS.items() for p in ps}


@dataclass
class AuActivation:
    id: int
    level: int

    def __post_init__(self):
        if self.id not in AU_CATALOG:
            raise UnknownAu(f"unknown action unit id {self.id}")
        if not 1 <= self.level <= 5:
            raise UnknownAu(f"au {self.id}: level {self.level} outside 1..5")


@dataclass
class ListenerAnnotation:
    emotion: str
    aus: list[AuActivation] = field(default_factory=list)
    head_motion: str | None = None

    def __post_init__(self):
        if self.emotion not in EMOTIONS:
            raise UnknownEmotion(f"unknown emotion {self.emotion!r}")
        seen = set()
        for au in self.aus:
            if au.id in seen:
                raise UnknownAu(f"duplicate action unit id {au.id}")
            seen.add(au.id)
        if self.head_motion is not None and self.head_motion not in HEAD_MOTIONS:
            raise UnknownAu(f"unknown head motion {self.head_motion!r}")

    def to_json_dict(self) -> dict:
        return {
            "emotion": self.emotion,
            "aus": [{"id": a.id, "level": a.level} for a in self.aus],
            "head_motion": self.head_motion,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ListenerAnnotation":
        return cls(
            emotion=d["emotion"],
            aus=[AuActivation(a["id"], a["level"]) for a in d.get("aus", [])],
            head_motion=d.get("head_motion"),
        )


def render_text_prior(ann: ListenerAnnotation, seed: int = 0) -> str:
    """Render the annotation to one sentence; synonym picks are seeded.

    Draw order is fixed: emotion phrase, then per unit its adjective and
    adverb, then the head phrase.
    """
    r = random.Random(seed)
    emotion_phrase = r.choice(EMOTIONS[ann.emotion])
    chunks = []
    for au in ann.aus:
        noun, adjectives = AU_CATALOG[au.id]
        adj = r.choice(adjectives)
        adv = r.choice(LEVEL_ADVERBS[au.level])
        chunks.append(f"{adv} {adj} {noun}")
    if ann.head_motion is not None:
        chunks.append(r.choice(HEAD_MOTIONS[ann.head_motion]))

    sentence = f"A person {emotion_phrase} and listens"
    if ann.aus:
        sentence += " with " + " and ".join(chunks)
    elif chunks:
        sentence += " and " + chunks[0]
    return sentence + "."


def parse_text_prior(text: str) -> ListenerAnnotation:
    """Invert render_text_prior. Raises DataError subclasses on bad input."""
    if not text or not text.strip():
        raise EmptyText("empty text prior")
    s = text.strip()
    if not s.startswith("A person ") or not s.endswith("."):
        raise UnknownEmotion(f"sentence does not match the template: {text!r}")
    s = s[len("A person ") : -1]
    try:
        emo_part, tail = s.split(" and listens", 1)
    except ValueError:
        raise UnknownEmotion(f"sentence does not match the template: {text!r}")
    if emo_part not in _PHRASE_TO_EMOTION:
        raise UnknownEmotion(f"unknown emotion phrase {emo_part!r}")
    emotion = _PHRASE_TO_EMOTION[emo_part]

    aus: list[AuActivation] = []
    head: str | None = None
    if tail == "":
        return ListenerAnnotation(emotion=emotion)
    if tail.startswith(" with "):
        chunks = tail[len(" with ") :].split(" and ")
    elif tail.startswith(" and "):
        chunks = [tail[len(" and ") :]]
    else:
        raise UnknownAu(f"unparseable clause {tail!r}")
    for i, chunk in enumerate(chunks):
        if chunk in _PHRASE_TO_HEAD:
            if head is not None or i != len(chunks) - 1:
                raise UnknownAu(f"head phrase in unexpected position: {chunk!r}")
            head = _PHRASE_TO_HEAD[chunk]
            continue
        words = chunk.split(" ")
        if len(words) < 3:
            raise UnknownAu(f"unparseable unit phrase {chunk!r}")
        adv, adj, noun = words[0], words[1], " ".join(words[2:])
        if adv not in _ADVERB_TO_LEVEL:
            raise UnknownAu(f"unknown intensity adverb {adv!r}")
        if noun not in _NOUN_TO_AU:
            raise UnknownAu(f"unknown unit noun {noun!r}")
        au_id = _NOUN_TO_AU[noun]
        if adj not in AU_CATALOG[au_id][1]:
            raise UnknownAu(f"adjective {adj!r} not valid for {noun!r}")
        aus.append(AuActivation(id=au_id, level=_ADVERB_TO_LEVEL[adv]))
    return ListenerAnnotation(emotion=emotion, aus=aus, head_motion=head)


# -- tokenization ----------------------------------------------------------------

_PUNCT = re.compile(r"[^\w\s]")
OOV_ID = 0


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    if not text or not text.strip():
        raise EmptyText("cannot tokenize empty text")
    cleaned = _PUNCT.sub("", text.lower())
    toks = cleaned.split()
    if not toks:
        raise EmptyText("text contains no word tokens")
    return toks


def build_vocabulary() -> dict[str, int]:
    """Closed vocabulary over every word the template grammar can emit.

    Id 0 is reserved for out-of-vocabulary words.
    """
    words = {"a", "person", "and", "listens", "with"}
    for phrases in EMOTIONS.values():
        for p in phrases:
            words.update(p.split())
    for noun, adjectives in AU_CATALOG.values():
        words.update(noun.split())
        words.update(adjectives)
    for advs in LEVEL_ADVERBS.values():
        words.update(advs)
    for phrases in HEAD_MOTIONS.values():
        for p in phrases:
            words.update(p.split())
    vocab = {"<oov>": OOV_ID}
    for i, w in enumerate(sorted(words), start=1):
        vocab[w] = i
    assert len(vocab) <= 512
    return vocab


def token_ids(text: str, vocab: dict[str, int]) -> list[int]:
    return [vocab.get(tok, OOV_ID) for tok in tokenize(text)]


def grammar_regex() -> re.Pattern:
    """Regex over the full catalog; every rendered sentence must match."""

    def alt(items):
        return "(?:" + "|".join(re.escape(x) for x in items) + ")"

    emotion = alt([p for ps in EMOTIONS.values() for p in ps])
    adv = alt([a for advs in LEVEL_ADVERBS.values() for a in advs])
    unit = "(?:" + "|".join(
        f"{adv} {alt(adjs)} {re.escape(noun)}" for noun, adjs in AU_CATALOG.values()
    ) + ")"
    head = alt([p for ps in HEAD_MOTIONS.values() for p in ps])
    pattern = (
        rf"\AA person {emotion} and listens"
        rf"(?: with {unit}(?: and {unit})*(?: and {head})?| and {head})?\.\Z"
    )
    return re.compile(pattern)
