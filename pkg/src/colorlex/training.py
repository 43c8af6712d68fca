"""Supervised and reinforcement training loops.

SL minimizes cross-entropy on human labels; RL plays referential games with
a shared binary reward and per-agent EMA baselines.  One run consumes a
single RNG stream in a fixed order, so (seed, config) pins every float.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agents import Listener, Speaker, normalize_rows
from .neuralnet import OptimizerState, clip_gradients, log_softmax, softmax

SL_LEARNING_RATE = 1e-3
# calibrated: the referential game needs a hotter optimizer than SL to reach
# its reward plateau within the fixed 30-epoch budget
RL_LEARNING_RATE = 2e-3
BATCH_SIZE = 32


@dataclass
class RlConfig:
    epochs: int = 30
    listeners: int = 1
    baseline_decay: float = 0.99
    entropy_coef: float = 0.01
    clip_norm: float | None = None
    learning_rate: float = RL_LEARNING_RATE
    listener_learning_rate: float | None = None  # None: same as learning_rate
    batch_size: int = BATCH_SIZE
    baseline_init: float = 1.0 / 3.0

    def __post_init__(self):
        if self.listeners < 1:
            raise ValueError("need at least one listener")
        if self.epochs % self.listeners != 0:
            raise ValueError(
                f"epochs ({self.epochs}) must be divisible by listeners ({self.listeners})")
        if not (0.0 <= self.baseline_decay < 1.0):
            raise ValueError("baseline_decay must be in [0, 1)")
        if self.entropy_coef < 0:
            raise ValueError("entropy_coef must be non-negative")


@dataclass
class EpochRecord:
    phase: str          # sl_speaker | sl_listener | rl
    epoch: int
    listener_id: int
    mean_reward: float | None
    mean_loss_speaker: float | None
    mean_loss_listener: float | None


@dataclass
class RunRecord:
    seed: int
    config_digest: str = ""
    epochs: list[EpochRecord] = field(default_factory=list)
    checkpoints: dict[str, str] = field(default_factory=dict)

    def curves_rows(self) -> list[list]:
        rows = [["epoch", "phase", "listener_id", "mean_reward",
                 "mean_loss_speaker", "mean_loss_listener"]]
        for r in self.epochs:
            rows.append([r.epoch, r.phase, r.listener_id,
                         "" if r.mean_reward is None else repr(r.mean_reward),
                         "" if r.mean_loss_speaker is None else repr(r.mean_loss_speaker),
                         "" if r.mean_loss_listener is None else repr(r.mean_loss_listener)])
        return rows

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config_digest": self.config_digest,
            "checkpoints": dict(self.checkpoints),
            "epochs": [vars(r) for r in self.epochs],
        }


def _assert_finite(params, where: str):
    for p in params:
        if not np.isfinite(p).all():
            raise FloatingPointError(f"non-finite parameters after {where}")


def _check_words_in_vocab(corpus, vocab):
    index = vocab.index
    for t in corpus.trials:
        if t.human_word is None or t.human_word not in index:
            raise ValueError(
                f"trial word {t.human_word!r} missing from vocabulary; "
                "the vocabulary must be built from the SL training corpus")


def sl_train_speaker(speaker: Speaker, train, epochs: int,
                     rng: np.random.Generator, lr: float = SL_LEARNING_RATE,
                     batch_size: int = BATCH_SIZE):
    """Cross-entropy training of the speaker on human labels.

    Returns the (mutated) speaker and the per-epoch mean loss curve.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    _check_words_in_vocab(train, speaker.vocab)
    index = speaker.vocab.index
    x_all = speaker.input_matrix(train.trials)
    y_all = np.array([index[t.human_word] for t in train.trials], dtype=int)
    n = len(train.trials)
    opt = OptimizerState(lr=lr)
    params = speaker.net.parameters()
    curve = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, yb = x_all[idx], y_all[idx]
            logits, cache = speaker.net.forward_batch_cached(xb)
            logp = log_softmax(logits)
            total += -logp[np.arange(len(idx)), yb].sum()
            dlogits = softmax(logits)
            dlogits[np.arange(len(idx)), yb] -= 1.0
            grads, _ = speaker.net.backward_batch(cache, dlogits / len(idx))
            opt.step(params, grads)
        curve.append(total / n)
        _assert_finite(params, "speaker SL epoch")
    return speaker, curve


def _candidate_tensor(trials) -> np.ndarray:
    """Normalized [target, d1, d2] rows per trial, shape (n, 3, 3)."""
    lab = np.array([[t.target.as_tuple(),
                     t.distractors[0].as_tuple(),
                     t.distractors[1].as_tuple()] for t in trials])
    return normalize_rows(lab.reshape(-1, 3)).reshape(-1, 3, 3)


def _permute_candidates(cands: np.ndarray, rng: np.random.Generator):
    """Fresh per-trial permutation; returns permuted tensor + target position."""
    n = cands.shape[0]
    perms = np.argsort(rng.random((n, 3)), axis=1)
    permuted = np.take_along_axis(cands, perms[:, :, None], axis=1)
    target_pos = np.argmin(perms, axis=1)  # where index 0 (the target) landed
    return permuted, target_pos


def _sample_rows(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized categorical sampling, one draw per row."""
    cs = p.cumsum(axis=1)
    cs[:, -1] = 1.0  # guard against cumulative rounding below 1
    return (cs > rng.random((p.shape[0], 1))).argmax(axis=1)


def _listener_forward(listener: Listener, word_ids, cand_norm):
    b = cand_norm.shape[0]
    enc, cache = listener.encoder.forward_batch_cached(cand_norm.reshape(b * 3, 3))
    enc3 = enc.reshape(b, 3, -1)
    emb = listener.embeddings[word_ids]
    scores = np.einsum("bd,bcd->bc", emb, enc3)
    return scores, (cache, enc3, emb)


def _listener_grads(listener: Listener, word_ids, fwd_state, dscores):
    cache, enc3, emb = fwd_state
    b = dscores.shape[0]
    demb = np.einsum("bc,bcd->bd", dscores, enc3)
    g_table = np.zeros_like(listener.embeddings)
    np.add.at(g_table, word_ids, demb)
    denc = (dscores[:, :, None] * emb[:, None, :]).reshape(b * 3, -1)
    enc_grads, _ = listener.encoder.backward_batch(cache, denc)
    return [g_table] + enc_grads


def sl_train_listener(listener: Listener, train, epochs: int,
                      rng: np.random.Generator, lr: float = SL_LEARNING_RATE,
                      batch_size: int = BATCH_SIZE):
    """Cross-entropy training of the listener on (human word, shuffled
    candidates) -> target index."""
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    _check_words_in_vocab(train, listener.vocab)
    index = listener.vocab.index
    words_all = np.array([index[t.human_word] for t in train.trials], dtype=int)
    cands_all = _candidate_tensor(train.trials)
    n = len(train.trials)
    opt = OptimizerState(lr=lr)
    params = listener.parameters()
    curve = []
    for _ in range(epochs):
        order = rng.permutation(n)
        permuted, target_pos = _permute_candidates(cands_all[order], rng)
        words = words_all[order]
        total = 0.0
        for start in range(0, n, batch_size):
            sl = slice(start, start + batch_size)
            wb, cb, yb = words[sl], permuted[sl], target_pos[sl]
            scores, state = _listener_forward(listener, wb, cb)
            logp = log_softmax(scores)
            total += -logp[np.arange(len(wb)), yb].sum()
            dscores = softmax(scores)
            dscores[np.arange(len(wb)), yb] -= 1.0
            grads = _listener_grads(listener, wb, state, dscores / len(wb))
            opt.step(params, grads)
        curve.append(total / n)
        _assert_finite(params, "listener SL epoch")
    return listener, curve


def rl_play_round(speaker: Speaker, listener: Listener, trial,
                  rng: np.random.Generator):
    """One sampled referential game round.

    Returns (reward, speaker log-prob, listener log-prob, word id).
    """
    wid, logp_s = speaker.speak(trial, "sample", rng)
    perm = rng.permutation(3)
    raw = [trial.target, trial.distractors[0], trial.distractors[1]]
    candidates = [raw[j] for j in perm]
    choice, logp_l = listener.listen(wid, candidates, "sample", rng)
    reward = 1.0 if perm[choice] == 0 else 0.0
    return reward, logp_s, logp_l, wid


def rl_train(speaker: Speaker, listeners: list[Listener], train,
             cfg: RlConfig, rng: np.random.Generator,
             record: RunRecord | None = None):
    """Round-robin REINFORCE over a listener population.

    Listeners are shuffled once; the speaker spends epochs/len(listeners)
    consecutive epochs with each.  Per minibatch both agents take a policy
    gradient step with advantage (r - baseline); the speaker additionally
    gets an entropy bonus.
    """
    if len(listeners) != cfg.listeners:
        raise ValueError(
            f"expected {cfg.listeners} listeners, got {len(listeners)}")
    record = record if record is not None else RunRecord(seed=-1)
    x_all = speaker.input_matrix(train.trials)
    cands_all = _candidate_tensor(train.trials)
    n = len(train.trials)
    epochs_per = cfg.epochs // cfg.listeners

    order_listeners = rng.permutation(cfg.listeners)
    opt_s = OptimizerState(lr=cfg.learning_rate)
    params_s = speaker.net.parameters()
    baseline_s = cfg.baseline_init

    epoch_no = 0
    listener_lr = (cfg.listener_learning_rate
                   if cfg.listener_learning_rate is not None else cfg.learning_rate)
    for li in order_listeners:
        listener = listeners[int(li)]
        opt_l = OptimizerState(lr=listener_lr)
        params_l = listener.parameters()
        baseline_l = cfg.baseline_init
        for _ in range(epochs_per):
            epoch_no += 1
            order = rng.permutation(n)
            sum_r = sum_ls = sum_ll = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                b = len(idx)
                rows = np.arange(b)

                logits, cache_s = speaker.net.forward_batch_cached(x_all[idx])
                p_s = softmax(logits)
                logp_s = log_softmax(logits)
                wid = _sample_rows(p_s, rng)

                permuted, target_pos = _permute_candidates(cands_all[idx], rng)
                scores, state_l = _listener_forward(listener, wid, permuted)
                p_l = softmax(scores)
                logp_l = log_softmax(scores)
                choice = _sample_rows(p_l, rng)
                reward = (choice == target_pos).astype(float)

                adv_s = reward - baseline_s
                adv_l = reward - baseline_l
                entropy = -(p_s * logp_s).sum(axis=1)

                dlogits = -adv_s[:, None] * (np.eye(p_s.shape[1])[wid] - p_s)
                if cfg.entropy_coef > 0:
                    dlogits += cfg.entropy_coef * p_s * (logp_s + entropy[:, None])
                grads_s, _ = speaker.net.backward_batch(cache_s, dlogits / b)
                if cfg.clip_norm is not None:
                    clip_gradients(grads_s, cfg.clip_norm)
                opt_s.step(params_s, grads_s)

                dscores = -adv_l[:, None] * (np.eye(3)[choice] - p_l)
                grads_l = _listener_grads(listener, wid, state_l, dscores / b)
                if cfg.clip_norm is not None:
                    clip_gradients(grads_l, cfg.clip_norm)
                opt_l.step(params_l, grads_l)

                baseline_s = cfg.baseline_decay * baseline_s + \
                    (1.0 - cfg.baseline_decay) * reward.mean()
                baseline_l = cfg.baseline_decay * baseline_l + \
                    (1.0 - cfg.baseline_decay) * reward.mean()

                sum_r += reward.sum()
                sum_ls += float((-adv_s * logp_s[rows, wid]
                                 - cfg.entropy_coef * entropy).sum())
                sum_ll += float((-adv_l * logp_l[rows, choice]).sum())
            _assert_finite(params_s, "RL epoch (speaker)")
            _assert_finite(params_l, "RL epoch (listener)")
            record.epochs.append(EpochRecord(
                phase="rl", epoch=epoch_no, listener_id=int(li),
                mean_reward=sum_r / n, mean_loss_speaker=sum_ls / n,
                mean_loss_listener=sum_ll / n))
    return speaker, listeners, record
