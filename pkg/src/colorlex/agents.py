"""Speaker and listener policies for the referential game.

The speaker maps (target, context) to a distribution over words; the
listener scores each candidate chip against the word's embedding.  Both are
small dense networks; hot evaluation paths are batched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .colorspace import ColorChip, context_ease, delta_e
from .neuralnet import (Mlp, OptimizerState, init_layer, log_softmax,
                        mlp_from_checkpoint, mlp_to_checkpoint, softmax)

DEFAULT_HIDDEN = 64
DEFAULT_EMBED = 64


@dataclass(frozen=True)
class Vocabulary:
    """Ordered universe of word tokens, fixed at construction."""

    words: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.words)) != len(self.words):
            raise ValueError("duplicate words in vocabulary")

    @classmethod
    def from_corpus(cls, corpus) -> "Vocabulary":
        seen: dict[str, None] = {}
        for t in corpus.trials:
            if t.human_word is not None:
                seen.setdefault(t.human_word, None)
        return cls(words=tuple(seen))

    @property
    def index(self) -> dict[str, int]:
        return {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def word_id(self, word: str) -> int:
        return self.index[word]


def normalize_chip(c: ColorChip) -> np.ndarray:
    """Scale CIELAB to roughly [-1, 1] per axis for network input."""
    return np.array([c.L / 100.0, c.a / 128.0, c.b / 128.0])


def normalize_rows(lab: np.ndarray) -> np.ndarray:
    return lab / np.array([100.0, 128.0, 128.0])


def canonical_distractors(trial) -> tuple[ColorChip, ColorChip]:
    """Distractors sorted by distance to the target, ties lexicographic."""
    d1, d2 = trial.distractors
    k1 = (delta_e(trial.target, d1), d1.as_tuple())
    k2 = (delta_e(trial.target, d2), d2.as_tuple())
    return (d1, d2) if k1 <= k2 else (d2, d1)


class Speaker:
    """Maps 9 normalized inputs (target + 2 canonical distractors) to logits."""

    def __init__(self, vocab: Vocabulary, net: Mlp, context_aware: bool = True):
        if net.n_out != len(vocab):
            raise ValueError("speaker head size must equal vocabulary size")
        if net.n_in != 9:
            raise ValueError("speaker input must be 9-dimensional")
        self.vocab = vocab
        self.net = net
        self.context_aware = context_aware

    @classmethod
    def create(cls, vocab: Vocabulary, rng: np.random.Generator,
               hidden: int = DEFAULT_HIDDEN, context_aware: bool = True) -> "Speaker":
        net = Mlp.create([9, hidden, len(vocab)], ["relu", "identity"], rng)
        return cls(vocab, net, context_aware)

    def input_vector(self, trial) -> np.ndarray:
        d1, d2 = canonical_distractors(trial)
        if not self.context_aware:
            ctx = np.zeros(6)
        else:
            ctx = np.concatenate([normalize_chip(d1), normalize_chip(d2)])
        return np.concatenate([normalize_chip(trial.target), ctx])

    def input_matrix(self, trials) -> np.ndarray:
        return np.stack([self.input_vector(t) for t in trials])

    def speak(self, trial, mode: str, rng: np.random.Generator | None = None):
        """Emit a word id with its log-probability under the policy."""
        logits = self.net.forward(self.input_vector(trial))
        logp = log_softmax(logits)
        if mode == "argmax":
            wid = int(np.argmax(logits))
        elif mode == "sample":
            wid = int(rng.choice(len(logits), p=softmax(logits)))
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return wid, float(logp[wid])

    def argmax_words(self, trials) -> np.ndarray:
        logits = self.net.forward_batch(self.input_matrix(trials))
        return logits.argmax(axis=1)

    def to_checkpoint(self, metadata: dict) -> dict:
        doc = mlp_to_checkpoint(self.net, metadata)
        doc["vocabulary"] = list(self.vocab.words)
        doc["context_aware"] = self.context_aware
        return doc

    @classmethod
    def from_checkpoint(cls, doc: dict) -> "Speaker":
        vocab = Vocabulary(words=tuple(doc["vocabulary"]))
        return cls(vocab, mlp_from_checkpoint(doc), bool(doc["context_aware"]))


class Listener:
    """Scores candidates by dot(embed(word), encode(candidate))."""

    def __init__(self, vocab: Vocabulary, embeddings: np.ndarray, encoder: Mlp):
        if embeddings.shape[0] != len(vocab):
            raise ValueError("embedding rows must equal vocabulary size")
        if embeddings.shape[1] != encoder.n_out:
            raise ValueError("embedding width must match encoder output")
        self.vocab = vocab
        self.embeddings = embeddings
        self.encoder = encoder

    @classmethod
    def create(cls, vocab: Vocabulary, rng: np.random.Generator,
               hidden: int = DEFAULT_HIDDEN, embed_dim: int = DEFAULT_EMBED) -> "Listener":
        table = init_layer(embed_dim, len(vocab), "identity", rng).weights
        encoder = Mlp.create([3, hidden, embed_dim], ["relu", "identity"], rng)
        return cls(vocab, table, encoder)

    def parameters(self) -> list[np.ndarray]:
        return [self.embeddings] + self.encoder.parameters()

    def scores(self, word_id: int, candidates) -> np.ndarray:
        x = np.stack([normalize_chip(c) for c in candidates])
        enc = self.encoder.forward_batch(x)
        return enc @ self.embeddings[word_id]

    def listen(self, word_id: int, candidates, mode: str,
               rng: np.random.Generator | None = None):
        """Choose a candidate index (in presented order) and its log-prob."""
        if len(candidates) != 3:
            raise ValueError("listener expects exactly 3 candidates")
        s = self.scores(word_id, candidates)
        logp = log_softmax(s)
        if mode == "argmax":
            idx = int(np.argmax(s))
        elif mode == "sample":
            idx = int(rng.choice(3, p=softmax(s)))
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return idx, float(logp[idx])

    def scores_batch(self, word_ids: np.ndarray, cand_norm: np.ndarray) -> np.ndarray:
        """(B,) word ids and (B, 3, 3) normalized candidates -> (B, 3) scores."""
        b = cand_norm.shape[0]
        enc = self.encoder.forward_batch(cand_norm.reshape(b * 3, 3)).reshape(b, 3, -1)
        emb = self.embeddings[word_ids]
        return np.einsum("bd,bcd->bc", emb, enc)

    def to_checkpoint(self, metadata: dict) -> dict:
        doc = mlp_to_checkpoint(self.encoder, metadata)
        doc["vocabulary"] = list(self.vocab.words)
        doc["embeddings"] = {
            "rows": int(self.embeddings.shape[0]),
            "cols": int(self.embeddings.shape[1]),
            "data": [repr(float(x)) for x in self.embeddings.ravel(order="C")],
        }
        return doc

    @classmethod
    def from_checkpoint(cls, doc: dict) -> "Listener":
        vocab = Vocabulary(words=tuple(doc["vocabulary"]))
        emb = doc["embeddings"]
        table = np.array([float(s) for s in emb["data"]],
                         dtype=float).reshape(emb["rows"], emb["cols"])
        return cls(vocab, table, mlp_from_checkpoint(doc))


def produce_lexicon(speaker: Speaker, eval_corpus, seed_id: int = 0):
    """Argmax production over an evaluation corpus.

    Returns a metrics.Lexicon holding word -> chip multiset plus the
    per-trial (word, target, context ease) log used downstream.
    """
    from .metrics import Lexicon, TrialRecord

    trials = eval_corpus.trials
    if not trials:
        raise ValueError("evaluation corpus is empty")
    word_ids = speaker.argmax_words(trials)
    entries: dict[str, list[ColorChip]] = {}
    log = []
    for t, wid in zip(trials, word_ids):
        word = speaker.vocab.words[int(wid)]
        entries.setdefault(word, []).append(t.target)
        log.append(TrialRecord(word=word, target=t.target,
                               e_ctx=context_ease(t), seed_id=seed_id))
    return Lexicon(entries=entries, trial_log=log)
