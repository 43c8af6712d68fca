"""Corpus ingestion, splits, upsampling, and synthetic triplet generation.

The ingest schema mirrors the source reference-game CSV (HSL or CIELAB
column sets); the canonical persistence schema is CIELAB-only at one decimal
place and round-trips bit-exactly.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import ks_2samp

from .colorspace import ColorChip, HslColor, context_ease, hsl_grid_to_cielab, hsl_to_cielab
from .kernels import min_cross_distances

CONDITIONS = ("far", "split", "close")

# condition mix of the human reference data (far, split, close)
HUMAN_CONDITION_COUNTS = (9309, 3886, 2239)
HUMAN_CONDITION_MIX = tuple(c / sum(HUMAN_CONDITION_COUNTS) for c in HUMAN_CONDITION_COUNTS)

_SUCCESS_TOKENS = {"1", "true", "yes", "success", "t"}


@dataclass(frozen=True)
class Trial:
    """One referential-game instance."""

    target: ColorChip
    distractors: tuple[ColorChip, ColorChip]
    condition: str
    human_word: str | None = None
    source: str = "human"

    def __post_init__(self):
        if len(self.distractors) != 2:
            raise ValueError("a trial has exactly 2 distractors")
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.source not in ("human", "generated"):
            raise ValueError(f"unknown source {self.source!r}")
        for d in self.distractors:
            if d == self.target:
                raise ValueError("distractor equals target chip")


@dataclass
class Corpus:
    """Ordered trials plus cached word frequencies."""

    trials: list[Trial]
    skipped_multiword: int = 0
    skipped_unsuccessful: int = 0
    word_counts: Counter = field(init=False)

    def __post_init__(self):
        self.word_counts = Counter(
            t.human_word for t in self.trials if t.human_word is not None)

    def __len__(self) -> int:
        return len(self.trials)

    def condition_counts(self) -> dict[str, int]:
        c = Counter(t.condition for t in self.trials)
        return {k: c.get(k, 0) for k in CONDITIONS}

    def words(self) -> list[str]:
        return list(self.word_counts)

    def target_matrix(self) -> np.ndarray:
        return np.array([t.target.as_tuple() for t in self.trials], dtype=float)

    def context_ease_values(self) -> np.ndarray:
        t = self.target_matrix()
        d1 = np.array([tr.distractors[0].as_tuple() for tr in self.trials])
        d2 = np.array([tr.distractors[1].as_tuple() for tr in self.trials])
        return min_cross_distances(t, d1, d2)


@dataclass(frozen=True)
class UpsamplingConfig:
    """Duplicate rare-word trials until each word reaches target_count."""

    target_count: int = 0

    def __post_init__(self):
        if self.target_count < 0 or self.target_count != int(self.target_count):
            raise ValueError("target_count must be a non-negative integer")


class IngestError(ValueError):
    pass


def _parse_float(row_no: int, name: str, raw: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise IngestError(f"row {row_no}: bad numeric value {raw!r} for {name}")


def ingest_colors_csv(path, schema_mode: str = "hsl") -> Corpus:
    """Load successful single-word trials from a source CSV.

    schema_mode selects the coordinate columns: "hsl" expects
    target_h/s/l and alt{1,2}_h/s/l (converted through sRGB to CIELAB),
    "cielab" expects target_L/a/b and alt{1,2}_L/a/b already in LAB.
    Multi-word and unsuccessful rows are skipped and counted; malformed
    rows and unknown condition labels are hard errors carrying the row
    number.  Row order is preserved.
    """
    if schema_mode not in ("hsl", "cielab"):
        raise ValueError(f"unknown schema_mode {schema_mode!r}")
    trials: list[Trial] = []
    skipped_multiword = 0
    skipped_unsuccessful = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError("missing header row")
        for row_no, row in enumerate(reader, start=2):  # header is row 1
            try:
                condition = (row["condition"] or "").strip()
                word_raw = (row["word"] or "").strip()
                outcome = (row.get("outcome") or "true").strip().lower()
            except KeyError as exc:
                raise IngestError(f"row {row_no}: missing column {exc}")
            if condition not in CONDITIONS:
                raise IngestError(f"row {row_no}: unknown condition {condition!r}")
            if outcome not in _SUCCESS_TOKENS:
                skipped_unsuccessful += 1
                continue
            if len(word_raw.split()) != 1:
                skipped_multiword += 1
                continue
            chips = []
            for prefix in ("target", "alt1", "alt2"):
                if schema_mode == "hsl":
                    h = _parse_float(row_no, f"{prefix}_h", row.get(f"{prefix}_h"))
                    s = _parse_float(row_no, f"{prefix}_s", row.get(f"{prefix}_s"))
                    l = _parse_float(row_no, f"{prefix}_l", row.get(f"{prefix}_l"))
                    try:
                        chips.append(hsl_to_cielab(HslColor(h, s, l)))
                    except ValueError as exc:
                        raise IngestError(f"row {row_no}: {exc}")
                else:
                    L = _parse_float(row_no, f"{prefix}_L", row.get(f"{prefix}_L"))
                    a = _parse_float(row_no, f"{prefix}_a", row.get(f"{prefix}_a"))
                    b = _parse_float(row_no, f"{prefix}_b", row.get(f"{prefix}_b"))
                    try:
                        chips.append(ColorChip(L, a, b))
                    except ValueError as exc:
                        raise IngestError(f"row {row_no}: {exc}")
            try:
                trials.append(Trial(target=chips[0], distractors=(chips[1], chips[2]),
                                    condition=condition, human_word=word_raw.lower(),
                                    source="human"))
            except ValueError as exc:
                raise IngestError(f"row {row_no}: {exc}")
    return Corpus(trials=trials, skipped_multiword=skipped_multiword,
                  skipped_unsuccessful=skipped_unsuccessful)


def split_corpus(c: Corpus, test_size: int, seed: int) -> tuple[Corpus, Corpus]:
    """Deterministic uniform split; corpus order preserved within each side."""
    if test_size > len(c):
        raise ValueError(f"test_size {test_size} exceeds corpus size {len(c)}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(c))
    test_idx = np.sort(perm[:test_size])
    mask = np.zeros(len(c), dtype=bool)
    mask[test_idx] = True
    train = Corpus(trials=[t for t, m in zip(c.trials, mask) if not m])
    test = Corpus(trials=[t for t, m in zip(c.trials, mask) if m])
    return train, test


def upsample(c: Corpus, cfg: UpsamplingConfig, seed: int = 0) -> Corpus:
    """Duplicate each rare word's trials, cycling in order, up to the target.

    Words at or above the target are untouched.  Output is the original
    corpus followed by the duplicates (word-major, original word order);
    shuffling is the trainer's job.  The rule is deterministic, so the seed
    argument is accepted for interface stability but unused.
    """
    n = cfg.target_count
    if n == 0:
        return Corpus(trials=list(c.trials))
    by_word: dict[str, list[Trial]] = {}
    for t in c.trials:
        if t.human_word is not None:
            by_word.setdefault(t.human_word, []).append(t)
    duplicates: list[Trial] = []
    for word, trials in by_word.items():
        need = n - len(trials)
        for k in range(max(0, need)):
            duplicates.append(trials[k % len(trials)])
    return Corpus(trials=list(c.trials) + duplicates)


@dataclass(frozen=True)
class ContextThresholds:
    """Distance cut-offs (ΔE) for distractor sampling."""

    close_max: float = 20.0
    far_min: float = 50.0

    def __post_init__(self):
        if not self.close_max < self.far_min:
            raise ValueError("close_max must be below far_min")


def apportion(n: int, mix) -> list[int]:
    """Largest-remainder apportionment of n into len(mix) integer counts."""
    mix = np.asarray(mix, dtype=float)
    if mix.min() < 0 or not np.isclose(mix.sum(), 1.0):
        raise ValueError("condition_mix must be a probability vector")
    raw = n * mix
    counts = np.floor(raw).astype(int)
    rest = n - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    for i in range(rest):
        counts[order[i]] += 1
    return list(counts)


def _uniform_chips(rng: np.random.Generator, n: int) -> np.ndarray:
    """Chips drawn uniformly over the full HSL cube (all saturation levels)."""
    h = rng.uniform(0.0, 360.0, size=n)
    s = rng.uniform(0.0, 1.0, size=n)
    l = rng.uniform(0.0, 1.0, size=n)
    return hsl_grid_to_cielab(h, s, l)


class SamplingError(RuntimeError):
    pass


def _sample_distractors(rng: np.random.Generator, targets: np.ndarray,
                        predicate, label: str, thresholds: ContextThresholds,
                        max_rounds: int = 10_000) -> np.ndarray:
    """Rejection-sample one distractor per target satisfying the predicate."""
    n = targets.shape[0]
    out = np.zeros((n, 3))
    unfilled = np.arange(n)
    for _ in range(max_rounds):
        if unfilled.size == 0:
            return out
        cand = _uniform_chips(rng, unfilled.size)
        d = np.linalg.norm(cand - targets[unfilled], axis=1)
        ok = predicate(d) & (d > 0.0)  # distractor must differ from target
        out[unfilled[ok]] = cand[ok]
        unfilled = unfilled[~ok]
    raise SamplingError(
        f"rejection sampling failed for condition {label!r} with "
        f"close_max={thresholds.close_max} far_min={thresholds.far_min}")


def generate_triplets(n: int, condition_mix=HUMAN_CONDITION_MIX,
                      thresholds: ContextThresholds = ContextThresholds(),
                      seed: int = 0) -> Corpus:
    """Generate n synthetic trials with the given condition mix.

    Targets are uniform over the HSL cube; per condition the two distractors
    are rejection-sampled so that close means both inside close_max, far
    means both beyond far_min, and split means one of each.  Per-condition
    counts are apportioned deterministically (within ±1 of n * mix).
    """
    rng = np.random.default_rng(seed)
    counts = apportion(n, condition_mix)
    labels = [c for c, k in zip(CONDITIONS, counts) for _ in range(k)]
    rng.shuffle(labels)
    labels = np.array(labels)

    targets = _uniform_chips(rng, n)
    d1 = np.zeros((n, 3))
    d2 = np.zeros((n, 3))
    close = lambda d: d < thresholds.close_max
    far = lambda d: d > thresholds.far_min
    for cond, p1, p2 in (("far", far, far), ("split", far, close),
                         ("close", close, close)):
        idx = np.flatnonzero(labels == cond)
        if idx.size == 0:
            continue
        d1[idx] = _sample_distractors(rng, targets[idx], p1, cond, thresholds)
        d2[idx] = _sample_distractors(rng, targets[idx], p2, cond, thresholds)
    swap = rng.random(n) < 0.5  # randomize stored distractor order
    d1[swap], d2[swap] = d2[swap].copy(), d1[swap].copy()

    trials = []
    for i in range(n):
        trials.append(Trial(
            target=ColorChip(*targets[i]),
            distractors=(ColorChip(*d1[i]), ColorChip(*d2[i])),
            condition=str(labels[i]), human_word=None, source="generated"))
    return Corpus(trials=trials)


@dataclass
class CalibrationResult:
    thresholds: ContextThresholds
    ks_by_condition: dict[str, float]

    @property
    def max_ks(self) -> float:
        return max(self.ks_by_condition.values())


def calibrate_thresholds(human: Corpus, seed: int = 0, n_probe: int = 3000,
                         ks_target: float = 0.1,
                         start: ContextThresholds = ContextThresholds()) -> CalibrationResult:
    """Adjust (close_max, far_min) until generated per-condition context-ease
    distributions match the human ones within the KS target.

    The two cutoffs act on disjoint conditions, so each is scanned
    independently against single-condition probes (split inherits both and
    is verified in the final full-mix probe).  Raises SamplingError if the
    target cannot be met.
    """
    ease = human.context_ease_values()
    conds = np.array([t.condition for t in human.trials])
    human_ease = {c: ease[conds == c] for c in CONDITIONS}
    for c in CONDITIONS:
        if human_ease[c].size == 0:
            raise ValueError(f"human corpus has no {c!r} trials")

    def probe_ks(thresholds: ContextThresholds, mix, cond: str, probe_seed: int) -> float:
        probe = generate_triplets(n_probe, mix, thresholds, seed=probe_seed)
        probe_ease = probe.context_ease_values()
        return float(ks_2samp(human_ease[cond], probe_ease).statistic)

    def scan(param: str, anchor: float) -> float:
        mix = (0.0, 0.0, 1.0) if param == "close_max" else (1.0, 0.0, 0.0)
        cond = "close" if param == "close_max" else "far"
        best_val, best_ks = anchor, np.inf
        for k, factor in enumerate((0.85, 0.925, 1.0, 1.075, 1.15, 1.25, 1.4)):
            value = anchor * factor
            if param == "close_max":
                t = ContextThresholds(close_max=value,
                                      far_min=max(start.far_min, value + 1.0))
            else:
                t = ContextThresholds(close_max=min(start.close_max, value - 1.0),
                                      far_min=value)
            ks = probe_ks(t, mix, cond, seed + 100 * k)
            if ks < best_ks:
                best_val, best_ks = value, ks
        return best_val

    close_max = scan("close_max", float(np.quantile(human_ease["close"], 0.999)))
    far_min = scan("far_min", float(np.quantile(human_ease["far"], 0.001)))
    if close_max >= far_min:
        far_min = close_max + 1.0
    thresholds = ContextThresholds(close_max=close_max, far_min=far_min)

    best: CalibrationResult | None = None
    for it, t in enumerate((thresholds, start)):
        probe = generate_triplets(n_probe, HUMAN_CONDITION_MIX, t, seed=seed + it)
        probe_ease = probe.context_ease_values()
        probe_conds = np.array([tr.condition for tr in probe.trials])
        ks = {c: float(ks_2samp(human_ease[c],
                                probe_ease[probe_conds == c]).statistic)
              for c in CONDITIONS}
        result = CalibrationResult(thresholds=t, ks_by_condition=ks)
        if best is None or result.max_ks < best.max_ks:
            best = result
        if result.max_ks <= ks_target:
            return result
    raise SamplingError(
        f"threshold calibration did not reach KS <= {ks_target}; "
        f"best {best.max_ks:.3f} at close_max={best.thresholds.close_max:.2f} "
        f"far_min={best.thresholds.far_min:.2f}")


# ---------------------------------------------------------------------------
# canonical persistence (bit-exact round-trip)
# ---------------------------------------------------------------------------

_CANONICAL_HEADER = ["condition", "word", "source",
                     "target_L", "target_a", "target_b",
                     "alt1_L", "alt1_a", "alt1_b",
                     "alt2_L", "alt2_a", "alt2_b"]


def save_corpus_csv(corpus: Corpus, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CANONICAL_HEADER)
        for t in corpus.trials:
            coords = [f"{v:.1f}" for chip in (t.target, *t.distractors)
                      for v in chip.as_tuple()]
            writer.writerow([t.condition, t.human_word or "", t.source] + coords)


def load_corpus_csv(path) -> Corpus:
    trials = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row_no, row in enumerate(reader, start=2):
            try:
                chips = [ColorChip(float(row[f"{p}_L"]), float(row[f"{p}_a"]),
                                   float(row[f"{p}_b"]))
                         for p in ("target", "alt1", "alt2")]
                word = row["word"] or None
                trials.append(Trial(target=chips[0],
                                    distractors=(chips[1], chips[2]),
                                    condition=row["condition"],
                                    human_word=word, source=row["source"]))
            except (KeyError, ValueError) as exc:
                raise IngestError(f"row {row_no}: {exc}")
    return Corpus(trials=trials)


def save_ingest_csv(corpus: Corpus, path):
    """Write a corpus in the cielab ingest schema (with an outcome column)."""
    header = ["condition", "word", "outcome",
              "target_L", "target_a", "target_b",
              "alt1_L", "alt1_a", "alt1_b",
              "alt2_L", "alt2_a", "alt2_b"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t in corpus.trials:
            coords = [f"{v:.1f}" for chip in (t.target, *t.distractors)
                      for v in chip.as_tuple()]
            writer.writerow([t.condition, t.human_word or "", "true"] + coords)
