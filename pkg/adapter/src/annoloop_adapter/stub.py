"""Checkpoint-free model bundle: deterministic, content-keyed, protocol-complete.

Stands in for the real models in tests and desk runs.  Every output is a pure
function of the request, so repeated requests give byte-identical responses.
"""

import hashlib
import random
import re

_TEMPLATES = (
    "What does the passage say about {a}?",
    "Which statement involves {a}?",
    "What is reported alongside {a}?",
    "How is {a} introduced in the text?",
    "What role does {a} play here?",
    "Where does {a} appear in the account?",
    "Why is {a} brought up?",
)

_TOKEN = re.compile(r"\S+")


def _rng(*parts: str) -> random.Random:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _content_word(tok: str) -> str:
    return tok.strip(".,;:!?()[]\"'")


def entity_spans(passage: str) -> list[tuple[str, int]]:
    """Maximal capitalized runs plus standalone number tokens, with offsets."""
    tokens = [(m.group(), m.start()) for m in _TOKEN.finditer(passage)]
    spans: list[tuple[str, int]] = []
    run_start = None
    run_end = None
    for tok, pos in tokens:
        word = _content_word(tok)
        if word and word[0].isupper():
            if run_start is None:
                run_start = pos + tok.index(word)
            run_end = pos + tok.index(word) + len(word)
            continue
        if run_start is not None:
            spans.append((passage[run_start:run_end], run_start))
            run_start = run_end = None
        if word.isdigit():
            start = pos + tok.index(word)
            spans.append((word, start))
    if run_start is not None:
        spans.append((passage[run_start:run_end], run_start))
    return spans


class StubModels:
    def __init__(self, seed: int = 0):
        self.seed = str(seed)

    def generate(self, passage, answer_text, answer_start, n, top_p):
        rng = _rng(self.seed, "gen", passage, answer_text, str(answer_start), str(top_p))
        out = []
        for i in range(n):
            question = _TEMPLATES[i % len(_TEMPLATES)].format(a=answer_text)
            if i >= len(_TEMPLATES):
                question = f"{question[:-1]} (variant {i})?"
            out.append((question, -0.05 - 4.9 * rng.random()))
        return out

    def predict(self, passage, question):
        spans = entity_spans(passage)
        if not spans:
            # fall back to the first token so the span invariant still holds
            match = _TOKEN.search(passage)
            if match is None:
                raise ValueError("cannot answer over an empty passage")
            spans = [(match.group(), match.start())]
        rng = _rng(self.seed, "qa", passage, question)
        text, start = spans[rng.randrange(len(spans))]
        return text, start, 0.55 + 0.44 * rng.random()

    def extract(self, passage, max_candidates):
        rng = _rng(self.seed, "cand", passage)
        out = []
        for text, start in entity_spans(passage):
            score = len(text.split()) + 0.5 * rng.random()
            out.append((text, start, score))
        return out
