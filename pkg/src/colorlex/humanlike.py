"""Synthetic stand-in for the human reference-game corpus.

The original human corpus is third-party data that this package does not
ship or re-collect.  This generator produces a structurally matched
replacement: same trial/condition counts, a 49-word lexicon with realistic
frequency skew, context-dependent word choice (harder context -> more
precise word), and denotation geometry tuned so the corpus-level metrics
(lexical diversity, system informativeness, convexity, context-ease slope)
land near the published human reference values.

Word structure, per perceptual region:
  * a dominant broad word covering the whole region field;
  * a "flip" word denoting a tight sub-niche, chosen mostly in hard
    contexts while easy contexts fall back to the dominant word (this is
    what gives trained speakers context-dependent argmax production);
  * two rare synonyms with offset niches and small usage shares (the
    natural upsampling targets, alongside the run words);
  * a few high-frequency "pinpoint" words denoting 3-chip clusters (high
    informativeness, trivially convex);
  * rare "run" words owning the two endpoints of a short collinear chip
    run whose interior chips are named by the dominant word (low
    convexity, medium informativeness).

Close-condition distractors are mostly drawn as a second referent from the
same region (exchangeable with the target, so no word choice can separate
the pair), which pins communication accuracy near the human level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .colorspace import ColorChip, hsl_grid_to_cielab
from .dataset import (ContextThresholds, Corpus, Trial, _sample_distractors,
                      apportion)
from .kernels import min_cross_distances

DEFAULT_SEED = 7311

TOTAL_TRIALS = 15_434
CONDITION_COUNTS = {"far": 9_309, "split": 3_886, "close": 2_239}

# (hue, saturation, lightness) anchors; saturation/lightness chosen so the
# regions' far-distractor distance profile matches uniform chip sampling
REGION_ANCHORS = (
    (0.0, 0.65, 0.35),
    (30.0, 0.65, 0.55),
    (55.0, 0.55, 0.65),
    (120.0, 0.45, 0.65),
    (225.0, 0.65, 0.35),
    (280.0, 0.55, 0.65),
    (0.0, 0.02, 0.5),
)

# per region: (dominant, flip, rare, rare)
BROAD_WORDS = (
    ("red", "crimson", "scarlet", "brick"),
    ("orange", "tangerine", "rust", "apricot"),
    ("yellow", "gold", "mustard", "lemon"),
    ("green", "forest", "olive", "lime"),
    ("blue", "navy", "azure", "cobalt"),
    ("purple", "violet", "plum", "lavender"),
    ("grey", "charcoal", "silver", "slate"),
)

PIN_WORDS = ("teal", "aqua", "turquoise", "cyan")

RUN_WORDS = ("mint", "sage", "peach", "coral", "burgundy", "mauve",
             "periwinkle", "chartreuse", "khaki", "beige", "tan", "ochre",
             "cerulean", "fuchsia", "emerald", "indigo", "maroon")


@dataclass(frozen=True)
class HumanlikeParams:
    """Geometry and labeling knobs; defaults are the calibrated values."""

    region_radius: float = 15.0
    field_sigma: float = 8.5
    # flip-word niche
    flip_sigma: float = 4.0
    flip_offset: float = 7.0
    flip_fraction: float = 0.40      # fraction of field trials in the niche
    flip_p: float = 0.95             # P(flip word | niche target, hard ctx)
    flip_e_threshold: float = 30.0   # hard/easy boundary for the flip rule
    # rare synonyms
    rare_offset: float = 6.0
    rare_sigma: float = 8.5
    nonniche_shares: tuple[float, float, float] = (0.84, 0.10, 0.06)
    # pinpoint and run words
    pin_site_trials: int = 6_050
    run_endpoint_trials: int = 1_800
    run_interior_trials: int = 800
    run_length: int = 9              # chips per run, 0.1 apart; endpoints owned
    pin_p0: float = 0.852
    pin_slope: float = 0.0019
    run_p0: float = 0.45
    run_slope: float = 0.0015
    p_floor: float = 0.05
    # context machinery
    thresholds: ContextThresholds = ContextThresholds()
    # relative weight of pinpoint-word trials when the split/close conditions
    # are allocated (pins resolve hard trials easily, so they get slightly
    # fewer of them)
    pin_hard_weight: float = 0.85
    # fraction of pin-slot close distractors drawn right next to the site
    # (disabled by default: sub-4ΔE mass would distort the context-ease law)
    pin_site_close_prob: float = 0.0
    # close-distractor mixture: exchangeable region referents plus a small
    # sub-4ΔE tail, remainder uniform chips
    in_zone_prob: float = 0.97
    in_zone_tau: float = 5.0         # exp((d-cap)/tau) acceptance shaping
    tilt_prob: float = 0.0
    tilt_max: float = 4.0


def region_centers() -> np.ndarray:
    """CIELAB centers of the perceptual regions."""
    anchors = np.array(REGION_ANCHORS)
    return hsl_grid_to_cielab(anchors[:, 0], anchors[:, 1], anchors[:, 2])


def _clip_chip(vec: np.ndarray) -> ColorChip:
    return ColorChip(float(np.clip(vec[0], 0.0, 100.0)),
                     float(np.clip(vec[1], -128.0, 128.0)),
                     float(np.clip(vec[2], -128.0, 128.0)))


def _axis_unit(idx: int) -> np.ndarray:
    e = np.zeros(3)
    e[idx % 3] = 1.0
    return e


def _ball_point(rng: np.random.Generator, center: np.ndarray, radius: float) -> np.ndarray:
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    return center + u * radius * rng.random() ** (1.0 / 3.0)


def synthesize_human_corpus(seed: int = DEFAULT_SEED,
                            params: HumanlikeParams | None = None) -> Corpus:
    """Build the 15,434-trial stand-in corpus (deterministic per seed)."""
    p = params or HumanlikeParams()
    rng = np.random.default_rng(seed)
    centers = region_centers()
    n_regions = len(REGION_ANCHORS)

    # --- word geometry -----------------------------------------------------
    pin_sites: dict[str, list[ColorChip]] = {}
    pin_region: dict[str, int] = {}
    for i, word in enumerate(PIN_WORDS):
        region = i % n_regions
        base = np.round(_ball_point(rng, centers[region], 0.6 * p.region_radius), 1)
        sites = [base,
                 base + np.array([0.1, 0.0, 0.0]),
                 base + np.array([0.0, 0.1, 0.0])]
        pin_sites[word] = [_clip_chip(s) for s in sites]
        pin_region[word] = region

    run_sites: dict[str, list[ColorChip]] = {}
    run_region: dict[str, int] = {}
    for i, word in enumerate(RUN_WORDS):
        region = i % n_regions
        base = np.round(_ball_point(rng, centers[region], 0.55 * p.region_radius), 1)
        sites = [base + 0.1 * k * _axis_unit(i) for k in range(p.run_length)]
        run_sites[word] = [_clip_chip(s) for s in sites]
        run_region[word] = region

    def flip_center(region: int) -> np.ndarray:
        return centers[region] + _axis_unit(region) * p.flip_offset

    def field_draw(region: int, kind: str, syn: int = 0) -> np.ndarray:
        """Region referent: dominant field, flip niche, or rare niche."""
        while True:
            if kind == "flip":
                cand = flip_center(region) + rng.normal(scale=p.flip_sigma, size=3)
            elif kind == "rare":
                off = _axis_unit(region + syn) * p.rare_offset
                if syn % 2:
                    off = -off
                cand = centers[region] + off + rng.normal(scale=p.rare_sigma, size=3)
            else:
                cand = centers[region] + rng.normal(scale=p.field_sigma, size=3)
            if np.linalg.norm(cand - centers[region]) <= p.region_radius:
                return _clip_chip(np.round(cand, 1)).as_array()

    # --- per-trial slots ---------------------------------------------------
    # ("pin", word) | ("run_end", word) | ("run_int", word) |
    # ("niche", region) | ("field", region, syn in {0 dominant, 2, 3 rare})
    slots: list[tuple] = []
    for word, k in zip(PIN_WORDS,
                       apportion(p.pin_site_trials, [1 / len(PIN_WORDS)] * len(PIN_WORDS))):
        slots.extend([("pin", word)] * k)
    for word, k in zip(RUN_WORDS,
                       apportion(p.run_endpoint_trials, [1 / len(RUN_WORDS)] * len(RUN_WORDS))):
        slots.extend([("run_end", word)] * k)
    for word, k in zip(RUN_WORDS,
                       apportion(p.run_interior_trials, [1 / len(RUN_WORDS)] * len(RUN_WORDS))):
        slots.extend([("run_int", word)] * k)

    n_field = TOTAL_TRIALS - len(slots)
    for r, k in enumerate(apportion(n_field, [1 / n_regions] * n_regions)):
        k_niche = int(round(p.flip_fraction * k))
        slots.extend([("niche", r)] * k_niche)
        for syn, kk in zip((0, 2, 3), apportion(k - k_niche, p.nonniche_shares)):
            slots.extend([("field", r, syn)] * kk)
    rng.shuffle(slots)

    # conditions: exact global counts; pin slots are down-weighted for the
    # hard (split/close) allocations
    weights = np.array([p.pin_hard_weight if s[0] == "pin" else 1.0 for s in slots])
    n_hard = CONDITION_COUNTS["split"] + CONDITION_COUNTS["close"]
    hard_idx = rng.choice(TOTAL_TRIALS, size=n_hard, replace=False,
                          p=weights / weights.sum())
    hard_labels = (["split"] * CONDITION_COUNTS["split"]
                   + ["close"] * CONDITION_COUNTS["close"])
    rng.shuffle(hard_labels)
    conditions = ["far"] * TOTAL_TRIALS
    for i, lab in zip(hard_idx, hard_labels):
        conditions[int(i)] = lab

    # --- targets -----------------------------------------------------------
    targets = np.zeros((TOTAL_TRIALS, 3))
    trial_region = np.zeros(TOTAL_TRIALS, dtype=int)
    seen: dict[tuple, int] = {}
    for i, slot in enumerate(slots):
        kind = slot[0]
        nth = seen.get(slot[:2], 0)
        seen[slot[:2]] = nth + 1
        if kind == "pin":
            sites = pin_sites[slot[1]]
            targets[i] = sites[nth % 3 if nth < 3 else int(rng.integers(3))].as_array()
            trial_region[i] = pin_region[slot[1]]
        elif kind == "run_end":
            sites = run_sites[slot[1]]
            j = 0 if nth == 0 else (p.run_length - 1 if nth == 1
                                    else int(rng.integers(2)) * (p.run_length - 1))
            targets[i] = sites[j].as_array()
            trial_region[i] = run_region[slot[1]]
        elif kind == "run_int":
            sites = run_sites[slot[1]]
            interior = p.run_length - 2
            j = 1 + (nth % interior if nth < interior else int(rng.integers(interior)))
            targets[i] = sites[j].as_array()
            trial_region[i] = run_region[slot[1]]
        elif kind == "niche":
            targets[i] = field_draw(slot[1], "flip")
            trial_region[i] = slot[1]
        else:
            _, region, syn = slot
            targets[i] = field_draw(region, "dominant" if syn == 0 else "rare", syn)
            trial_region[i] = region

    # --- distractors (same machinery as the synthetic triplet generator) ---
    cond_arr = np.array(conditions)
    d1 = np.zeros((TOTAL_TRIALS, 3))
    d2 = np.zeros((TOTAL_TRIALS, 3))
    far = lambda d: d > p.thresholds.far_min

    def tilt_draw(t: np.ndarray) -> np.ndarray:
        # uniform-in-ball keeps the r^2 small-distance law of chip sampling
        while True:
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            cand = np.round(t + u * p.tilt_max * rng.random() ** (1.0 / 3.0), 1)
            cand = _clip_chip(cand).as_array()
            d = float(np.linalg.norm(cand - t))
            if 0.0 < d < p.tilt_max:
                return cand

    is_niche_slot = np.array([s[0] == "niche" for s in slots])

    def exchangeable_draw(i: int) -> np.ndarray:
        # a second referent from the target's own sub-population, conditioned
        # close; exchangeability with the target is what makes the trial
        # hard, and the exp acceptance (symmetric in the pair) shapes the
        # distance law
        t = targets[i]
        region = int(trial_region[i])
        for _ in range(10_000):
            if is_niche_slot[i]:
                kind = "flip"
            else:
                kind = "flip" if rng.random() < p.flip_fraction else "dominant"
            cand = field_draw(region, kind)
            d = float(np.linalg.norm(cand - t))
            if not (0.0 < d < p.thresholds.close_max):
                continue
            if rng.random() < np.exp((d - p.thresholds.close_max) / p.in_zone_tau):
                return cand
        raise RuntimeError("exchangeable close draw did not converge")

    is_pin_slot = np.array([s[0] == "pin" for s in slots])

    def sample_close(idx: np.ndarray) -> np.ndarray:
        out = np.zeros((idx.size, 3))
        u = rng.random(idx.size)
        near_site = is_pin_slot[idx] & (rng.random(idx.size) < p.pin_site_close_prob)
        uniform_mask = (u >= p.tilt_prob + p.in_zone_prob) & ~near_site
        sub = idx[uniform_mask]
        if sub.size:
            out[uniform_mask] = _sample_distractors(
                rng, targets[sub], lambda d: d < p.thresholds.close_max,
                "close", p.thresholds)
        for k in np.flatnonzero(~uniform_mask):
            if near_site[k] or u[k] < p.tilt_prob:
                out[k] = tilt_draw(targets[idx[k]])
            else:
                out[k] = exchangeable_draw(int(idx[k]))
        return out

    for cond in ("far", "split", "close"):
        idx = np.flatnonzero(cond_arr == cond)
        if cond == "far":
            d1[idx] = _sample_distractors(rng, targets[idx], far, cond, p.thresholds)
            d2[idx] = _sample_distractors(rng, targets[idx], far, cond, p.thresholds)
        elif cond == "split":
            d1[idx] = _sample_distractors(rng, targets[idx], far, cond, p.thresholds)
            d2[idx] = sample_close(idx)
        else:
            d1[idx] = sample_close(idx)
            d2[idx] = sample_close(idx)
    swap = rng.random(TOTAL_TRIALS) < 0.5
    d1[swap], d2[swap] = d2[swap].copy(), d1[swap].copy()
    ease = min_cross_distances(targets, d1, d2)

    # --- word labels -------------------------------------------------------
    words: list[str] = []
    forced: dict[tuple, int] = {}
    for i, slot in enumerate(slots):
        kind = slot[0]
        e = ease[i]
        if kind == "pin":
            word = slot[1]
            prob = np.clip(p.pin_p0 - p.pin_slope * e, p.p_floor, p.pin_p0)
            if forced.get(("pin", word), 0) < 3 or rng.random() < prob:
                forced[("pin", word)] = forced.get(("pin", word), 0) + 1
                words.append(word)
            else:
                words.append(BROAD_WORDS[pin_region[word]][0])
        elif kind == "run_end":
            word = slot[1]
            prob = np.clip(p.run_p0 - p.run_slope * e, p.p_floor, p.run_p0)
            if forced.get(("run", word), 0) < 2 or rng.random() < prob:
                forced[("run", word)] = forced.get(("run", word), 0) + 1
                words.append(word)
            else:
                words.append(BROAD_WORDS[run_region[word]][0])
        elif kind == "run_int":
            words.append(BROAD_WORDS[run_region[slot[1]]][0])
        elif kind == "niche":
            region = slot[1]
            hard = e < p.flip_e_threshold
            use_flip = rng.random() < (p.flip_p if hard else 1.0 - p.flip_p)
            if forced.get(("flip", region), 0) < 2:
                forced[("flip", region)] = forced.get(("flip", region), 0) + 1
                use_flip = True
            words.append(BROAD_WORDS[region][1] if use_flip else BROAD_WORDS[region][0])
        else:
            _, region, syn = slot
            words.append(BROAD_WORDS[region][syn])

    trials = []
    for i in range(TOTAL_TRIALS):
        trials.append(Trial(
            target=ColorChip(*targets[i]),
            distractors=(ColorChip(*d1[i]), ColorChip(*d2[i])),
            condition=str(cond_arr[i]), human_word=words[i], source="human"))
    return Corpus(trials=trials)
