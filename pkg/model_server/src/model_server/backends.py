"""Masked-token backends.

NgramBackend is the deterministic offline backend: an interpolated
bidirectional trigram over whitespace-split corpus lines. It exists so the
protocol can be served (and conformance-tested) with no model weights and
no nondeterminism.

HFMaskedLM serves a real pretrained masked language model through the same
interface. Engine tokens are mapped onto the model's subword vocabulary
with the model's own tokenizer; predict returns only candidates whose
surface form round-trips to a single subword (which makes score/predict
coherence exact), and score falls back to greedy left-to-right mask
filling for multi-subword targets, summing the subword log probabilities.
"""

from __future__ import annotations

import math


class NgramBackend:
    """Add-one-smoothed left/right trigram, equal-weight interpolation.

    Context slots that fall outside the sequence or on the mask sentinel
    count as unknowns.
    """

    BOUNDARY = "\x02"
    UNKNOWN = "\x01"

    def __init__(self, corpus_lines, mask_sentinel="<mask>", max_tokens=512,
                 name="ngram-trigram"):
        self.mask_sentinel = mask_sentinel
        self.max_tokens = max_tokens
        self.name = name
        self.left = {}
        self.right = {}
        self.left_totals = {}
        self.right_totals = {}
        vocabulary = set()
        for line in corpus_lines:
            texts = line.split()
            vocabulary.update(texts)
            for i, target in enumerate(texts):
                left = (self._at(texts, i - 2), self._at(texts, i - 1))
                right = (self._at(texts, i + 1), self._at(texts, i + 2))
                self.left[left + (target,)] = self.left.get(left + (target,), 0) + 1
                self.left_totals[left] = self.left_totals.get(left, 0) + 1
                self.right[right + (target,)] = self.right.get(right + (target,), 0) + 1
                self.right_totals[right] = self.right_totals.get(right, 0) + 1
        self.vocabulary = sorted(vocabulary)
        if not self.vocabulary:
            raise ValueError("backend corpus produced an empty vocabulary")

    def _at(self, texts, index):
        if index < 0 or index >= len(texts):
            return self.BOUNDARY
        if texts[index] == self.mask_sentinel:
            return self.UNKNOWN
        return texts[index]

    def _logprob(self, tokens, mask_index, target):
        size = len(self.vocabulary)
        left = (self._at(tokens, mask_index - 2), self._at(tokens, mask_index - 1))
        right = (self._at(tokens, mask_index + 1), self._at(tokens, mask_index + 2))
        left_p = (self.left.get(left + (target,), 0) + 1) / \
            (self.left_totals.get(left, 0) + size)
        right_p = (self.right.get(right + (target,), 0) + 1) / \
            (self.right_totals.get(right, 0) + size)
        return math.log(0.5 * left_p + 0.5 * right_p)

    def predict(self, tokens, mask_index, top_k):
        scored = [(token, self._logprob(tokens, mask_index, token))
                  for token in self.vocabulary]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:top_k]

    def score(self, tokens, mask_index, target):
        return self._logprob(tokens, mask_index, target)

    def info_extras(self):
        return {"vocabulary_size": len(self.vocabulary)}


class HFMaskedLM:
    """Pretrained masked-LM backend (requires torch + transformers and
    retrievable weights)."""

    def __init__(self, model_name, device="cpu", max_tokens=None):
        import torch
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        self._torch = torch
        self.name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModelForMaskedLM.from_pretrained(model_name)
        self.model.eval()
        resolved = "cuda" if device == "accelerator" else device
        self.device = resolved
        self.model.to(resolved)
        self.mask_sentinel = self.tokenizer.mask_token
        limit = getattr(self.model.config, "max_position_embeddings", 512)
        self.max_tokens = min(max_tokens or limit, limit)

    def _encode_token(self, text, first):
        if text == self.mask_sentinel:
            return [self.tokenizer.mask_token_id]
        surface = text if first else " " + text
        return self.tokenizer.encode(surface, add_special_tokens=False)

    def _build(self, tokens, mask_index, mask_slots=1):
        """Input ids with the engine's mask token expanded to mask_slots
        model masks; returns (ids, first mask position)."""
        ids = [self.tokenizer.cls_token_id]
        mask_position = None
        for i, text in enumerate(tokens):
            if i == mask_index:
                mask_position = len(ids)
                ids.extend([self.tokenizer.mask_token_id] * mask_slots)
                continue
            ids.extend(self._encode_token(text, first=(i == 0)))
        ids.append(self.tokenizer.sep_token_id)
        return ids, mask_position

    def _log_softmax_at(self, ids, position):
        torch = self._torch
        with torch.no_grad():
            batch = torch.tensor([ids], device=self.device)
            logits = self.model(batch).logits[0, position]
            return torch.log_softmax(logits, dim=-1)

    def predict(self, tokens, mask_index, top_k):
        ids, position = self._build(tokens, mask_index)
        log_probs = self._log_softmax_at(ids, position)
        ranked = self._torch.argsort(log_probs, descending=True)
        results = []
        for candidate_id in ranked.tolist():
            surface = self.tokenizer.decode([candidate_id]).strip()
            if not surface or "\n" in surface:
                continue
            # keep only candidates whose surface form re-encodes to this one
            # subword: score() then reproduces the identical logprob
            if self._encode_token(surface, first=False) != [candidate_id] and \
                    self._encode_token(surface, first=True) != [candidate_id]:
                continue
            results.append((surface, float(log_probs[candidate_id])))
            if len(results) == top_k:
                break
        return results

    def score(self, tokens, mask_index, target):
        pieces = self._encode_token(target, first=False)
        if len(pieces) == 1:
            ids, position = self._build(tokens, mask_index)
            return float(self._log_softmax_at(ids, position)[pieces[0]])
        alternate = self._encode_token(target, first=True)
        if len(alternate) == 1:
            ids, position = self._build(tokens, mask_index)
            return float(self._log_softmax_at(ids, position)[alternate[0]])
        # multi-subword target: greedy left-to-right fill, sum of logprobs
        total = 0.0
        ids, position = self._build(tokens, mask_index, mask_slots=len(pieces))
        for offset, piece_id in enumerate(pieces):
            log_probs = self._log_softmax_at(ids, position + offset)
            total += float(log_probs[piece_id])
            ids[position + offset] = piece_id
        return total

    def info_extras(self):
        return {
            "device": str(self.device),
            "multi_subword_scoring": "greedy-left-to-right-sum",
        }
