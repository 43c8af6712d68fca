"""Evaluation metrics for produced lexicons.

Covers communication accuracy, word spread / informativeness, system-level
informativeness, lexical diversity, hull-based convexity, semantic drift,
and the context-ease regression (linear mixed model with crossed random
intercepts for agent seed and target chip).

Spread S_w is the mean CIELAB distance over unordered pairs of a word's
*unique* chips; informativeness is I_w = 1/S_w, undefined below two unique
chips.  System informativeness I_L averages I_w over interactions, so
frequent words weigh more.  Convexity averages, unweighted over words, the
fraction of in-hull universe chips that belong to the word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .colorspace import ColorChip
from .geometry import EPSILON, contains_many, convex_hull
from .kernels import pairwise_mean_distance


@dataclass(frozen=True)
class TrialRecord:
    """One evaluation interaction: produced word, target, and context ease."""

    word: str
    target: ColorChip
    e_ctx: float
    seed_id: int = 0


@dataclass
class Lexicon:
    """Word -> denotation multiset plus the per-trial record stream."""

    entries: dict[str, list[ColorChip]]
    trial_log: list[TrialRecord] = field(default_factory=list)

    @classmethod
    def from_human_corpus(cls, corpus, seed_id: int = 0) -> "Lexicon":
        """Lexicon of the human word labels over a corpus."""
        ease = corpus.context_ease_values()
        entries: dict[str, list[ColorChip]] = {}
        log = []
        for t, e in zip(corpus.trials, ease):
            if t.human_word is None:
                raise ValueError("corpus contains unlabeled trials")
            entries.setdefault(t.human_word, []).append(t.target)
            log.append(TrialRecord(word=t.human_word, target=t.target,
                                   e_ctx=float(e), seed_id=seed_id))
        return cls(entries=entries, trial_log=log)

    def unique_chips(self, word: str) -> list[ColorChip]:
        return sorted(set(self.entries[word]))


@dataclass
class WordStats:
    word: str
    unique_chip_count: int
    spread: float | None          # S_w, mean pairwise ΔE over unique chips
    informativeness: float | None  # I_w = 1/S_w

    @property
    def defined(self) -> bool:
        return self.informativeness is not None


def word_spread(word: str, denotation) -> WordStats:
    """Spread and informativeness of one denotation multiset.

    Undefined (None fields) when the denotation has fewer than two unique
    chips; S_w = 0 cannot occur for two or more distinct quantized chips.
    """
    unique = sorted(set(denotation))
    if len(unique) < 2:
        return WordStats(word=word, unique_chip_count=len(unique),
                         spread=None, informativeness=None)
    pts = np.array([c.as_tuple() for c in unique])
    s = pairwise_mean_distance(pts)
    return WordStats(word=word, unique_chip_count=len(unique),
                     spread=s, informativeness=1.0 / s)


def compute_word_stats(lex: Lexicon) -> dict[str, WordStats]:
    return {w: word_spread(w, chips) for w, chips in lex.entries.items()}


@dataclass
class InformativenessResult:
    value: float
    used_trials: int
    skipped_trials: int


def system_informativeness(lex: Lexicon,
                           stats: dict[str, WordStats] | None = None) -> InformativenessResult:
    """Interaction-weighted mean informativeness over the trial log.

    Trials whose word has undefined I_w are skipped and counted.
    """
    stats = stats if stats is not None else compute_word_stats(lex)
    total = 0.0
    used = 0
    skipped = 0
    for rec in lex.trial_log:
        st = stats[rec.word]
        if st.defined:
            total += st.informativeness
            used += 1
        else:
            skipped += 1
    if used == 0:
        raise ValueError("no trial has a word with defined informativeness")
    return InformativenessResult(value=total / used, used_trials=used,
                                 skipped_trials=skipped)


def lexical_diversity(lex: Lexicon) -> int:
    """Number of distinct words with at least one trial."""
    return sum(1 for chips in lex.entries.values() if chips)


def convexity_degrees(lex: Lexicon, universe,
                      eps: float = EPSILON) -> dict[str, float]:
    """Per-word convexity degree: own unique chips / in-hull universe chips."""
    uni_set = set(universe)
    uni_arr = np.array([c.as_tuple() for c in sorted(uni_set)])
    degrees: dict[str, float] = {}
    for word, chips in lex.entries.items():
        if not chips:
            continue
        unique = set(chips)
        outside = unique - uni_set
        if outside:
            raise ValueError(
                f"denotation of {word!r} has {len(outside)} chips outside the universe")
        hull = convex_hull(unique)
        inside = int(contains_many(hull, uni_arr, eps).sum())
        degrees[word] = len(unique) / inside
    return degrees


def convexity(lex: Lexicon, universe, eps: float = EPSILON) -> float:
    """Unweighted mean convexity degree over the lexicon's words."""
    degrees = convexity_degrees(lex, universe, eps)
    if not degrees:
        raise ValueError("lexicon has no words with trials")
    return float(np.mean(list(degrees.values())))


@dataclass
class DriftResult:
    value: float
    shared_words: int
    agent_only: int
    human_only: int


def _prototype(chips) -> np.ndarray:
    unique = sorted(set(chips))
    return np.array([c.as_tuple() for c in unique]).mean(axis=0)


def semantic_drift(agent: Lexicon, human: Lexicon) -> DriftResult:
    """Mean distance between agent and human prototypes of shared words."""
    agent_words = {w for w, c in agent.entries.items() if c}
    human_words = {w for w, c in human.entries.items() if c}
    shared = sorted(agent_words & human_words)
    if not shared:
        raise ValueError("no words shared between agent and human lexicons")
    dists = []
    for w in shared:
        pa = _prototype(agent.entries[w])
        ph = _prototype(human.entries[w])
        dists.append(float(np.linalg.norm(pa - ph)))
    return DriftResult(value=float(np.mean(dists)), shared_words=len(shared),
                       agent_only=len(agent_words - human_words),
                       human_only=len(human_words - agent_words))


@dataclass
class AccuracyResult:
    overall: float
    by_condition: dict[str, float]
    n_trials: int


def communication_accuracy(speaker, listener, eval_corpus,
                           rng: np.random.Generator) -> AccuracyResult:
    """Fraction of trials where the argmax listener picks the target.

    Candidates are presented in a fresh per-trial random permutation drawn
    from the supplied generator; both agents run in argmax mode.
    """
    from .agents import normalize_rows

    trials = eval_corpus.trials
    if not trials:
        raise ValueError("evaluation corpus is empty")
    n = len(trials)
    word_ids = speaker.argmax_words(trials)
    cands = np.zeros((n, 3, 3))
    target_pos = np.zeros(n, dtype=int)
    for i, t in enumerate(trials):
        perm = rng.permutation(3)
        raw = [t.target, t.distractors[0], t.distractors[1]]
        lab = np.array([raw[j].as_tuple() for j in perm])
        cands[i] = normalize_rows(lab)
        target_pos[i] = int(np.flatnonzero(perm == 0)[0])
    scores = listener.scores_batch(word_ids, cands)
    correct = scores.argmax(axis=1) == target_pos
    by_condition: dict[str, float] = {}
    conds = np.array([t.condition for t in trials])
    for c in sorted(set(conds)):
        mask = conds == c
        by_condition[str(c)] = float(correct[mask].mean())
    return AccuracyResult(overall=float(correct.mean()),
                          by_condition=by_condition, n_trials=n)


# ---------------------------------------------------------------------------
# context-ease regression: I_w ~ E_ctx with crossed random intercepts
# ---------------------------------------------------------------------------

class RegressionError(RuntimeError):
    def __init__(self, message: str, last_iterate: dict | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass
class RegressionResult:
    beta: float
    intercept: float
    se_beta: float
    p_value: float
    var_seed: float
    var_chip: float
    var_resid: float
    n_obs: int
    n_skipped: int
    n_seeds: int
    n_chips: int
    iterations: int
    converged: bool


def _compact(values) -> tuple[np.ndarray, int]:
    uniq = {v: i for i, v in enumerate(dict.fromkeys(values))}
    return np.array([uniq[v] for v in values], dtype=int), len(uniq)


def _one_way_moments(r: np.ndarray, groups: np.ndarray, n_groups: int,
                     sigma_e2_ref: float):
    """Unbalanced one-way ANOVA moment estimates for one factor.

    Returns (sigma_group^2, within-group sigma_e^2 estimate, within df).
    The residual variance is estimated from multi-observation groups only
    (singleton groups carry no within-group information), and the group
    variance uses the caller's current residual estimate so that a
    saturated factor cannot zero out the residual term.
    """
    n = r.size
    counts = np.bincount(groups, minlength=n_groups).astype(float)
    means = np.bincount(groups, weights=r, minlength=n_groups) / np.maximum(counts, 1.0)
    ss_within = float(((r - means[groups]) ** 2).sum())
    df_within = int((counts[counts >= 2] - 1).sum())
    sigma_e2 = ss_within / df_within if df_within > 0 else None
    if n_groups < 2:
        return 0.0, sigma_e2, df_within
    grand = float(r.mean())
    ms_between = float((counts * (means - grand) ** 2).sum()) / (n_groups - 1)
    nbar = (n - float((counts ** 2).sum()) / n) / (n_groups - 1)
    if nbar <= 0:
        return 0.0, sigma_e2, df_within
    sigma_g2 = max(0.0, (ms_between - sigma_e2_ref) / nbar)
    return sigma_g2, sigma_e2, df_within


def _henderson_solve(x: np.ndarray, y: np.ndarray, s: np.ndarray, c: np.ndarray,
                     n_s: int, n_c: int, lam_s: float, lam_c: float):
    """GLS fixed effects + BLUPs via the mixed-model normal equations.

    The chip block is diagonal, so it is eliminated by a Schur complement
    and only a (2 + n_seeds) dense system is solved.
    """
    p = x.shape[1]
    top = p + n_s

    xtx = x.T @ x
    xts = np.stack([np.bincount(s, weights=x[:, j], minlength=n_s)
                    for j in range(p)])
    sts = np.bincount(s, minlength=n_s).astype(float)
    t_mat = np.zeros((top, top))
    t_mat[:p, :p] = xtx
    t_mat[:p, p:] = xts
    t_mat[p:, :p] = xts.T
    t_mat[p:, p:] = np.diag(sts + lam_s)

    xtc = np.stack([np.bincount(c, weights=x[:, j], minlength=n_c)
                    for j in range(p)])
    n_sc = np.zeros((n_s, n_c))
    np.add.at(n_sc, (s, c), 1.0)
    a_tc = np.vstack([xtc, n_sc])
    d = np.bincount(c, minlength=n_c).astype(float) + lam_c

    rhs_top = np.concatenate([x.T @ y, np.bincount(s, weights=y, minlength=n_s)])
    rhs_c = np.bincount(c, weights=y, minlength=n_c)

    schur = t_mat - (a_tc / d) @ a_tc.T
    rhs = rhs_top - a_tc @ (rhs_c / d)
    z = np.linalg.solve(schur, rhs)
    beta = z[:p]
    u = z[p:]
    v = (rhs_c - a_tc.T @ z) / d
    cov_fixed = np.linalg.inv(schur)[:p, :p]
    return beta, u, v, cov_fixed


def regression_rows(lexicons) -> tuple[np.ndarray, np.ndarray, list, list, int]:
    """Pool (I_w, E_ctx, seed, chip) rows from one or more lexicons.

    Trials whose word has undefined informativeness are dropped; the
    returned skip count reports how many.
    """
    if isinstance(lexicons, Lexicon):
        lexicons = [lexicons]
    iw, ectx, seeds, chips = [], [], [], []
    skipped = 0
    for lex in lexicons:
        stats = compute_word_stats(lex)
        for rec in lex.trial_log:
            st = stats[rec.word]
            if not st.defined:
                skipped += 1
                continue
            iw.append(st.informativeness)
            ectx.append(rec.e_ctx)
            seeds.append(rec.seed_id)
            chips.append(rec.target.as_tuple())
    return (np.array(iw), np.array(ectx), seeds, chips, skipped)


def fit_context_regression(lexicons, chip_binning: float | None = None,
                           tol: float = 1e-8, max_iter: int = 200) -> RegressionResult:
    """Fit I_w = beta * E_ctx + intercept (+ seed and chip intercepts).

    Iterative backfitting: (i) solve the mixed-model equations for the fixed
    effects given the current variance components, (ii) refresh each variance
    component by method-of-moments on residuals with the other factor's BLUP
    removed.  Stops when no parameter moves by more than tol.  The p-value
    is a Wald test on beta with the model-based standard error.
    """
    y, e, seed_keys, chip_keys, skipped = regression_rows(lexicons)
    n = y.size
    if n < 3:
        raise RegressionError(f"too few usable observations: {n}")
    if float(np.var(e)) < 1e-12:
        raise RegressionError("context ease is constant; beta not identifiable")
    if chip_binning:
        chip_keys = [tuple(np.round(np.array(k) / chip_binning).astype(int))
                     for k in chip_keys]
    s_idx, n_s = _compact(seed_keys)
    c_idx, n_c = _compact(chip_keys)
    x = np.stack([np.ones(n), e], axis=1)

    # OLS warm start
    beta_hat, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta_hat
    var0 = float(resid.var())
    sig_e, sig_s, sig_c = 0.8 * var0 + 1e-12, 0.1 * var0 + 1e-12, 0.1 * var0 + 1e-12

    state = np.array([beta_hat[0], beta_hat[1], sig_e, sig_s, sig_c])
    converged = False
    it = 0
    beta = u = v = None
    cov_fixed = None
    sig_floor = max(1e-6 * var0, 1e-14)  # identifiability floor for sigma_e
    for it in range(1, max_iter + 1):
        lam_s = sig_e / max(sig_s, 1e-12)
        lam_c = sig_e / max(sig_c, 1e-12)
        beta, u, v, cov_fixed = _henderson_solve(
            x, y, s_idx, c_idx, n_s, n_c, min(lam_s, 1e12), min(lam_c, 1e12))
        fitted_fixed = x @ beta
        r_seed = y - fitted_fixed - v[c_idx]
        sig_s_new, sig_e_seed, df_seed = _one_way_moments(r_seed, s_idx, n_s, sig_e)
        r_chip = y - fitted_fixed - u[s_idx]
        sig_c_new, sig_e_chip, df_chip = _one_way_moments(r_chip, c_idx, n_c, sig_e)
        # pool the residual-variance estimates by their within-group df,
        # preferring passes with real replication
        num, den = 0.0, 0
        for est, df in ((sig_e_seed, df_seed), (sig_e_chip, df_chip)):
            if est is not None and df >= 10:
                num += est * df
                den += df
        sig_e_new = num / den if den > 0 else sig_e
        sig_e_new = max(sig_e_new, sig_floor)

        new_state = np.array([beta[0], beta[1], sig_e_new, sig_s_new, sig_c_new])
        delta = float(np.max(np.abs(new_state - state)))
        sig_e, sig_s, sig_c = sig_e_new, sig_s_new, sig_c_new
        state = new_state
        if delta < tol:
            converged = True
            break

    if not converged:
        raise RegressionError(
            f"backfitting did not converge in {max_iter} iterations "
            f"(last change {delta:.3e})",
            last_iterate={"beta": float(beta[1]), "intercept": float(beta[0]),
                          "var_resid": sig_e, "var_seed": sig_s, "var_chip": sig_c})

    # Henderson system is scaled by 1/sigma_e^2, so the covariance of the
    # fixed effects is sigma_e^2 times the inverted Schur block
    se_beta = float(np.sqrt(max(cov_fixed[1, 1] * sig_e, 0.0)))
    z = abs(beta[1]) / se_beta if se_beta > 0 else math.inf
    p_value = float(2.0 * (1.0 - ndtr(z)))
    return RegressionResult(
        beta=float(beta[1]), intercept=float(beta[0]), se_beta=se_beta,
        p_value=p_value, var_seed=float(sig_s), var_chip=float(sig_c),
        var_resid=float(sig_e), n_obs=int(n), n_skipped=int(skipped),
        n_seeds=int(n_s), n_chips=int(n_c), iterations=it, converged=True)
