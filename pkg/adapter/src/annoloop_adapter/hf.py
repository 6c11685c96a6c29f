"""Transformers-backed bundle: seq2seq question generator plus extractive QA.

Checkpoints are inputs, named in the config; nothing here trains or downloads.
The span math is kept in plain-list helpers so it can be tested without
loading a model.

Config keys:
    generator           path of a seq2seq LM checkpoint (question generation)
    qa                  path of an extractive QA checkpoint
    device              torch device string, default "cpu"
    prompt_format       generator input, default "{answer} </s> {passage}"
    max_question_tokens default 48
    max_span_tokens     default 30
    probe_question      generic question used to propose answer candidates
"""

import hashlib
import threading


def sum_log_probs(row: list[float]) -> float:
    """Sequence log-likelihood from per-step transition scores.

    Padded steps surface as -inf or nan depending on the model; both mean
    "no token was generated here" and are skipped.
    """
    total = 0.0
    for value in row:
        if value == value and value != float("-inf"):  # finite check without math import
            total += value
    return min(total, 0.0)


def best_span(
    start_probs: list[float],
    end_probs: list[float],
    offsets: list,
    max_span_tokens: int = 30,
    top_k: int = 20,
):
    """Highest P(start)*P(end) span with start <= end, over real passage tokens.

    offsets holds (char_start, char_end) per token position, or None for
    special/question tokens.  Returns (char_start, char_end, p_start, p_end).
    """
    order_s = sorted(range(len(start_probs)), key=lambda i: -start_probs[i])[:top_k]
    order_e = sorted(range(len(end_probs)), key=lambda i: -end_probs[i])[:top_k]
    best = None
    for i in order_s:
        if offsets[i] is None:
            continue
        for j in order_e:
            if offsets[j] is None or j < i or j - i >= max_span_tokens:
                continue
            score = start_probs[i] * end_probs[j]
            if best is None or score > best[0]:
                best = (score, i, j)
    if best is None:
        raise ValueError("no valid span in the passage window")
    _, i, j = best
    return offsets[i][0], offsets[j][1], float(start_probs[i]), float(end_probs[j])


def top_spans(
    start_probs: list[float],
    end_probs: list[float],
    offsets: list,
    limit: int,
    max_span_tokens: int = 8,
    top_k: int = 20,
):
    """Up to limit distinct spans ranked by joint probability."""
    order_s = sorted(range(len(start_probs)), key=lambda i: -start_probs[i])[:top_k]
    order_e = sorted(range(len(end_probs)), key=lambda i: -end_probs[i])[:top_k]
    scored = []
    for i in order_s:
        if offsets[i] is None:
            continue
        for j in order_e:
            if offsets[j] is None or j < i or j - i >= max_span_tokens:
                continue
            scored.append((start_probs[i] * end_probs[j], offsets[i][0], offsets[j][1]))
    scored.sort(key=lambda t: (-t[0], t[1]))
    out = []
    seen = set()
    for score, cs, ce in scored:
        if (cs, ce) in seen:
            continue
        seen.add((cs, ce))
        out.append((cs, ce, float(score)))
        if len(out) == limit:
            break
    return out


def _request_seed(*parts: str) -> int:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class HFModels:
    def __init__(self, config: dict):
        import torch
        from transformers import (
            AutoModelForQuestionAnswering,
            AutoModelForSeq2SeqLM,
            AutoTokenizer,
        )

        self.torch = torch
        self.device = config.get("device", "cpu")
        self.prompt_format = config.get("prompt_format", "{answer} </s> {passage}")
        self.max_question_tokens = int(config.get("max_question_tokens", 48))
        self.max_span_tokens = int(config.get("max_span_tokens", 30))
        self.probe_question = config.get("probe_question", "What is the key detail?")
        # generation mutates torch's global RNG; serialize to keep requests pure
        self._lock = threading.Lock()

        gen_path = config["generator"]
        qa_path = config["qa"]
        self.gen_tokenizer = AutoTokenizer.from_pretrained(gen_path)
        self.gen_model = AutoModelForSeq2SeqLM.from_pretrained(gen_path).to(self.device).eval()
        self.qa_tokenizer = AutoTokenizer.from_pretrained(qa_path)
        self.qa_model = AutoModelForQuestionAnswering.from_pretrained(qa_path).to(self.device).eval()

    def generate(self, passage, answer_text, answer_start, n, top_p):
        torch = self.torch
        prompt = self.prompt_format.format(answer=answer_text, passage=passage)
        inputs = self.gen_tokenizer(prompt, return_tensors="pt", truncation=True).to(self.device)
        with self._lock:
            torch.manual_seed(
                _request_seed("gen", passage, answer_text, str(answer_start), str(top_p))
            )
            with torch.no_grad():
                out = self.gen_model.generate(
                    **inputs,
                    do_sample=True,
                    top_p=top_p,
                    top_k=0,
                    num_return_sequences=n,
                    max_new_tokens=self.max_question_tokens,
                    output_scores=True,
                    return_dict_in_generate=True,
                )
        transition = self.gen_model.compute_transition_scores(
            out.sequences, out.scores, normalize_logits=True
        )
        questions = []
        for seq, row in zip(out.sequences, transition.tolist()):
            text = self.gen_tokenizer.decode(seq, skip_special_tokens=True).strip()
            questions.append((text, sum_log_probs(row)))
        return questions

    def _span_distributions(self, passage, question):
        torch = self.torch
        enc = self.qa_tokenizer(
            question,
            passage,
            return_tensors="pt",
            return_offsets_mapping=True,
            truncation="only_second",
            max_length=384,
        )
        offset_mapping = enc.pop("offset_mapping")[0].tolist()
        sequence_ids = enc.sequence_ids(0)
        enc = enc.to(self.device)
        with torch.no_grad():
            out = self.qa_model(**enc)
        mask = torch.tensor(
            [0.0 if sid == 1 else float("-inf") for sid in sequence_ids], device=self.device
        )
        start = torch.softmax(out.start_logits[0] + mask, dim=-1).tolist()
        end = torch.softmax(out.end_logits[0] + mask, dim=-1).tolist()
        offsets = [
            tuple(offset_mapping[i]) if sid == 1 else None
            for i, sid in enumerate(sequence_ids)
        ]
        return start, end, offsets

    def predict(self, passage, question):
        start, end, offsets = self._span_distributions(passage, question)
        char_s, char_e, p_s, p_e = best_span(start, end, offsets, self.max_span_tokens)
        return passage[char_s:char_e], char_s, p_s * p_e

    def extract(self, passage, max_candidates):
        start, end, offsets = self._span_distributions(passage, self.probe_question)
        spans = top_spans(start, end, offsets, limit=max_candidates * 2)
        return [(passage[cs:ce], cs, score) for cs, ce, score in spans]
