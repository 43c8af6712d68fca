"""Experiment orchestration: config, run matrix, reports, trends, exports.

The matrix driver trains and evaluates one (listeners, upsampling, seed)
cell at a time, persisting checkpoints, logs, and per-seed metrics under
out/<digest>/<listeners>-<upsampling>/<seed>/.  Completed cells are
digest-stamped and skipped on --resume; aggregation always recomputes from
the persisted per-seed artifacts.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import humanlike
from .agents import Listener, Speaker, Vocabulary, produce_lexicon
from .colorspace import ColorChip
from .dataset import (ContextThresholds, Corpus, calibrate_thresholds,
                      generate_triplets, ingest_colors_csv, load_corpus_csv,
                      save_corpus_csv, save_ingest_csv, split_corpus,
                      upsample, UpsamplingConfig)
from .metrics import (Lexicon, TrialRecord, communication_accuracy, convexity,
                      fit_context_regression, lexical_diversity,
                      semantic_drift, system_informativeness)
from .neuralnet import load_checkpoint, checkpoint_dumps
from .training import RlConfig, RunRecord, rl_train, sl_train_listener, sl_train_speaker

# execution knobs that do not affect results and stay out of the digest
_NON_SEMANTIC_FIELDS = ("out_dir", "workers", "resume")


@dataclass
class ExperimentConfig:
    corpus_path: str = ""            # empty -> built-in synthetic corpus
    corpus_seed: int = humanlike.DEFAULT_SEED
    schema_mode: str = "cielab"
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    listeners_grid: tuple[int, ...] = (1, 5, 30)
    upsampling_grid: tuple[int, ...] = (0, 100, 200)
    sl_epochs: int = 30
    rl_epochs: int = 30
    test_size: int = 3000
    split_seed: int = 20_000
    gen_train_size: int = 12_400
    gen_eval_size: int = 15_400
    gen_train_seed: int = 10_001
    gen_eval_seed: int = 10_000
    close_max: float = 20.0
    far_min: float = 50.0
    hidden: int = 64
    embed_dim: int = 64
    sl_lr: float = 1e-3
    rl_lr: float = 2e-3
    batch_size: int = 32
    baseline_decay: float = 0.99
    entropy_coef: float = 0.01
    clip_norm: float = 0.0           # 0 disables clipping
    eval_seed: int = 424_242
    chip_binning: float = 0.0        # 0 disables coarse chip grouping
    out_dir: str = "out"
    workers: int = 1
    resume: bool = False

    def digest(self) -> str:
        lines = []
        for f in sorted(dataclasses.fields(self), key=lambda f: f.name):
            if f.name in _NON_SEMANTIC_FIELDS:
                continue
            lines.append(f"{f.name}={getattr(self, f.name)!r}")
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]

    def thresholds(self) -> ContextThresholds:
        return ContextThresholds(close_max=self.close_max, far_min=self.far_min)

    @classmethod
    def from_file(cls, path: str, overrides: dict | None = None) -> "ExperimentConfig":
        """Flat `key = value` config file; '#' starts a comment."""
        values: dict = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{line_no}: expected key = value")
                key, val = (part.strip() for part in line.split("=", 1))
                values[key] = val
        if overrides:
            values.update(overrides)
        return cls.from_values(values)

    @classmethod
    def from_values(cls, values: dict) -> "ExperimentConfig":
        kwargs = {}
        by_name = {f.name: f for f in dataclasses.fields(cls)}
        for key, val in values.items():
            if key not in by_name:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(val, by_name[key].type)
        return cls(**kwargs)


def _coerce(val, ftype):
    if not isinstance(val, str):
        return val
    if ftype == "int":
        return int(val)
    if ftype == "float":
        return float(val)
    if ftype == "bool":
        return val.strip().lower() in ("1", "true", "yes")
    if ftype.startswith("tuple"):
        parts = [p for p in val.replace(",", " ").split() if p]
        return tuple(int(p) for p in parts)
    return val


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


_corpus_cache: dict = {}
_triplet_cache: dict = {}


def load_human_corpus(cfg: ExperimentConfig) -> Corpus:
    key = (cfg.corpus_path, cfg.corpus_seed, cfg.schema_mode)
    if key not in _corpus_cache:
        if cfg.corpus_path:
            _corpus_cache[key] = ingest_colors_csv(cfg.corpus_path, cfg.schema_mode)
        else:
            _corpus_cache[key] = humanlike.synthesize_human_corpus(seed=cfg.corpus_seed)
    return _corpus_cache[key]


def _cached_triplets(n: int, seed: int, thresholds: ContextThresholds) -> Corpus:
    key = (n, seed, thresholds.close_max, thresholds.far_min)
    if key not in _triplet_cache:
        _triplet_cache[key] = generate_triplets(n, seed=seed, thresholds=thresholds)
    return _triplet_cache[key]


# ---------------------------------------------------------------------------
# per-cell pipeline
# ---------------------------------------------------------------------------

def _cell_dir(cfg: ExperimentConfig, listeners: int, ups: int, seed: int) -> str:
    return os.path.join(cfg.out_dir, cfg.digest(), f"{listeners}-{ups}", str(seed))


def _save_trial_log(path: str, lex: Lexicon):
    rows = ["word,target_L,target_a,target_b,e_ctx,seed_id"]
    for rec in lex.trial_log:
        t = rec.target
        rows.append(f"{rec.word},{t.L:.1f},{t.a:.1f},{t.b:.1f},{rec.e_ctx!r},{rec.seed_id}")
    _atomic_write(path, "\n".join(rows) + "\n")


def load_trial_log(path: str) -> Lexicon:
    entries: dict[str, list[ColorChip]] = {}
    log = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            chip = ColorChip(float(row["target_L"]), float(row["target_a"]),
                             float(row["target_b"]))
            entries.setdefault(row["word"], []).append(chip)
            log.append(TrialRecord(word=row["word"], target=chip,
                                   e_ctx=float(row["e_ctx"]),
                                   seed_id=int(row["seed_id"])))
    return Lexicon(entries=entries, trial_log=log)


def _phase_metrics(speaker, listener, eval_corpus, universe, human_lex, seed,
                   eval_rng) -> tuple[dict, Lexicon]:
    acc = communication_accuracy(speaker, listener, eval_corpus, eval_rng)
    lex = produce_lexicon(speaker, eval_corpus, seed_id=seed)
    info = system_informativeness(lex)
    drift = semantic_drift(lex, human_lex)
    metrics = {
        "acc_comm": acc.overall,
        "acc_by_condition": acc.by_condition,
        "lexical_diversity": lexical_diversity(lex),
        "informativeness": info.value,
        "informativeness_skipped_trials": info.skipped_trials,
        "convexity": convexity(lex, universe),
        "drift": drift.value,
        "drift_shared_words": drift.shared_words,
        "drift_agent_only": drift.agent_only,
    }
    return metrics, lex


def run_cell(cfg: ExperimentConfig, listeners_n: int, ups: int, seed: int,
             phase: str = "both") -> dict:
    """Train and evaluate one (listeners, upsampling, seed) cell."""
    cell = _cell_dir(cfg, listeners_n, ups, seed)
    stamp_path = os.path.join(cell, "metrics.json")
    if cfg.resume and os.path.exists(stamp_path):
        with open(stamp_path, encoding="utf-8") as fh:
            existing = json.load(fh)
        if existing.get("digest") != cfg.digest():
            raise RuntimeError(
                f"refusing to resume: digest mismatch in {stamp_path}")
        return existing

    os.makedirs(os.path.join(cell, "checkpoints"), exist_ok=True)
    os.makedirs(os.path.join(cell, "logs"), exist_ok=True)

    human = load_human_corpus(cfg)
    train, test = split_corpus(human, cfg.test_size, cfg.split_seed)
    vocab = Vocabulary.from_corpus(train)
    train_up = upsample(train, UpsamplingConfig(target_count=ups))
    human_lex = Lexicon.from_human_corpus(human)

    record = RunRecord(seed=seed, config_digest=cfg.digest())
    meta = {"seed": seed, "config_digest": cfg.digest()}

    rng = np.random.default_rng(seed)
    speaker = Speaker.create(vocab, rng, hidden=cfg.hidden)
    speaker, sl_curve = sl_train_speaker(speaker, train_up, cfg.sl_epochs, rng,
                                         lr=cfg.sl_lr, batch_size=cfg.batch_size)
    listeners = []
    for k in range(listeners_n):
        lrng = np.random.default_rng(seed * 1000 + k)
        listener = Listener.create(vocab, lrng, hidden=cfg.hidden,
                                   embed_dim=cfg.embed_dim)
        listener, _ = sl_train_listener(listener, train_up, cfg.sl_epochs, lrng,
                                        lr=cfg.sl_lr, batch_size=cfg.batch_size)
        listeners.append(listener)

    universe_h = {t.target for t in test.trials}
    sl_metrics, sl_lex = _phase_metrics(
        speaker, listeners[0], test, universe_h, human_lex, seed,
        np.random.default_rng([cfg.eval_seed, seed, 0]))
    _save_trial_log(os.path.join(cell, "trial_log_sl.csv"), sl_lex)
    _atomic_write(os.path.join(cell, "checkpoints", "speaker_sl.json"),
                  checkpoint_dumps(speaker.to_checkpoint(dict(meta, phase="sl"))))
    _atomic_write(os.path.join(cell, "checkpoints", "listener0_sl.json"),
                  checkpoint_dumps(listeners[0].to_checkpoint(dict(meta, phase="sl"))))

    result = {
        "digest": cfg.digest(),
        "listeners": listeners_n,
        "upsampling": ups,
        "seed": seed,
        "sl": sl_metrics,
        "sl_loss_curve": sl_curve,
    }

    if phase in ("both", "rl"):
        gen_train = _cached_triplets(cfg.gen_train_size, cfg.gen_train_seed,
                                     cfg.thresholds())
        gen_eval = _cached_triplets(cfg.gen_eval_size, cfg.gen_eval_seed,
                                    cfg.thresholds())
        rl_cfg = RlConfig(epochs=cfg.rl_epochs, listeners=listeners_n,
                          baseline_decay=cfg.baseline_decay,
                          entropy_coef=cfg.entropy_coef,
                          clip_norm=cfg.clip_norm or None,
                          learning_rate=cfg.rl_lr, batch_size=cfg.batch_size)
        speaker, listeners, record = rl_train(
            speaker, listeners, gen_train, rl_cfg,
            np.random.default_rng([seed, 2]), record)
        universe_g = {t.target for t in gen_eval.trials}
        rl_metrics, rl_lex = _phase_metrics(
            speaker, listeners[0], gen_eval, universe_g, human_lex, seed,
            np.random.default_rng([cfg.eval_seed, seed, 1]))
        _save_trial_log(os.path.join(cell, "trial_log_rl.csv"), rl_lex)
        _atomic_write(os.path.join(cell, "checkpoints", "speaker_rl.json"),
                      checkpoint_dumps(speaker.to_checkpoint(dict(meta, phase="rl"))))
        _atomic_write(os.path.join(cell, "checkpoints", "listener0_rl.json"),
                      checkpoint_dumps(listeners[0].to_checkpoint(dict(meta, phase="rl"))))
        result["rl"] = rl_metrics

    curves = record.curves_rows()
    _atomic_write(os.path.join(cell, "logs", "curves.csv"),
                  "\n".join(",".join(str(v) for v in row) for row in curves) + "\n")
    _atomic_write(os.path.join(cell, "logs", "run.json"),
                  json.dumps(record.to_json_dict(), indent=1, sort_keys=True))
    _atomic_write(stamp_path, json.dumps(result, indent=1, sort_keys=True))
    return result


def _run_cell_star(args):
    return run_cell(*args)


def run_matrix(cfg: ExperimentConfig, phase: str = "both") -> list[dict]:
    """Run every (listeners, upsampling, seed) cell, optionally in parallel."""
    cells = [(cfg, L, N, seed, phase)
             for L in cfg.listeners_grid
             for N in cfg.upsampling_grid
             for seed in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_cell_star, cells))
    else:
        results = [run_cell(*c) for c in cells]
    return results


# ---------------------------------------------------------------------------
# aggregation and reporting
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    phase: str                      # "SL" | "SL+RL" | "Human"
    listeners: int | None
    upsampling: int | None
    acc_comm: float | None = None
    acc_se: float | None = None
    beta: float | None = None
    beta_se: float | None = None
    beta_p: float | None = None
    diversity: float | None = None
    diversity_se: float | None = None
    informativeness: float | None = None
    informativeness_se: float | None = None
    convexity: float | None = None
    convexity_se: float | None = None
    drift: float | None = None
    drift_se: float | None = None
    n_seeds: int = 0
    per_seed: dict = field(default_factory=dict)


def _mean_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), se


def _aggregate_phase(cells: list[dict], phase_key: str, label: str,
                     listeners: int | None, ups: int,
                     lexicons: list[Lexicon],
                     chip_binning: float) -> ConditionReport:
    rows = [c[phase_key] for c in cells]
    rep = ConditionReport(phase=label, listeners=listeners, upsampling=ups,
                          n_seeds=len(rows))
    rep.acc_comm, rep.acc_se = _mean_se([r["acc_comm"] for r in rows])
    rep.diversity, rep.diversity_se = _mean_se([r["lexical_diversity"] for r in rows])
    rep.informativeness, rep.informativeness_se = _mean_se(
        [r["informativeness"] for r in rows])
    rep.convexity, rep.convexity_se = _mean_se([r["convexity"] for r in rows])
    rep.drift, rep.drift_se = _mean_se([r["drift"] for r in rows])
    rep.per_seed = {c["seed"]: c[phase_key] for c in cells}
    reg = fit_context_regression(lexicons, chip_binning=chip_binning or None)
    rep.beta, rep.beta_se, rep.beta_p = reg.beta, reg.se_beta, reg.p_value
    return rep


def aggregate(cfg: ExperimentConfig) -> list[ConditionReport]:
    """Build condition reports from persisted per-seed artifacts."""
    base = os.path.join(cfg.out_dir, cfg.digest())
    reports: list[ConditionReport] = []
    sl_done: set[int] = set()
    for L in cfg.listeners_grid:
        for N in cfg.upsampling_grid:
            cells, sl_lexs, rl_lexs = [], [], []
            for seed in cfg.seeds:
                cell = _cell_dir(cfg, L, N, seed)
                path = os.path.join(cell, "metrics.json")
                if not os.path.exists(path):
                    continue
                with open(path, encoding="utf-8") as fh:
                    cells.append(json.load(fh))
                sl_lexs.append(load_trial_log(os.path.join(cell, "trial_log_sl.csv")))
                if os.path.exists(os.path.join(cell, "trial_log_rl.csv")):
                    rl_lexs.append(load_trial_log(os.path.join(cell, "trial_log_rl.csv")))
            if not cells:
                continue
            # the SL phase does not involve the listener grid; report it once
            if N not in sl_done:
                reports.append(_aggregate_phase(cells, "sl", "SL", None, N,
                                                sl_lexs, cfg.chip_binning))
                sl_done.add(N)
            if all("rl" in c for c in cells) and rl_lexs:
                reports.append(_aggregate_phase(cells, "rl", "SL+RL", L, N,
                                                rl_lexs, cfg.chip_binning))
    return reports


def human_reference_report(cfg: ExperimentConfig) -> ConditionReport:
    corpus = load_human_corpus(cfg)
    lex = Lexicon.from_human_corpus(corpus)
    universe = {t.target for t in corpus.trials}
    info = system_informativeness(lex)
    reg = fit_context_regression(lex, chip_binning=cfg.chip_binning or None)
    return ConditionReport(
        phase="Human", listeners=None, upsampling=None,
        acc_comm=1.0, acc_se=0.0,
        beta=reg.beta, beta_se=reg.se_beta, beta_p=reg.p_value,
        diversity=float(lexical_diversity(lex)), diversity_se=0.0,
        informativeness=info.value, informativeness_se=0.0,
        convexity=convexity(lex, universe), convexity_se=0.0,
        drift=None, n_seeds=1)


_REPORT_COLUMNS = ["phase", "listeners", "upsampling", "acc_comm", "beta",
                   "beta_p", "diversity", "informativeness", "convexity", "drift",
                   "acc_se", "beta_se", "diversity_se", "informativeness_se",
                   "convexity_se", "drift_se", "n_seeds"]


def report_csv(reports: list[ConditionReport]) -> str:
    lines = [",".join(_REPORT_COLUMNS)]
    for r in reports:
        vals = []
        for col in _REPORT_COLUMNS:
            v = getattr(r, col)
            vals.append("" if v is None else (v if isinstance(v, str) else repr(v)))
        lines.append(",".join(str(v) for v in vals))
    return "\n".join(lines) + "\n"


def reports_from_csv(text: str) -> list[ConditionReport]:
    out = []
    for row in csv.DictReader(text.splitlines()):
        kwargs = {}
        for col in _REPORT_COLUMNS:
            raw = row[col]
            if col == "phase":
                kwargs[col] = raw
            elif raw == "":
                kwargs[col] = None
            elif col in ("listeners", "upsampling", "n_seeds"):
                kwargs[col] = int(raw)
            else:
                kwargs[col] = float(raw)
        kwargs["n_seeds"] = kwargs.get("n_seeds") or 0
        out.append(ConditionReport(**kwargs))
    return out


def _fmt(v, spec: str) -> str:
    return "--" if v is None else format(v, spec)


def render_table(reports: list[ConditionReport]) -> str:
    """Fixed-width rendering in the reference column order."""
    header = (f"{'Phase':8s} {'Listeners':>9s} {'Upsampling':>10s} "
              f"{'Acc_comm':>9s} {'beta(E_ctx)':>12s} {'|W|':>6s} "
              f"{'I_L':>7s} {'Convexity':>9s} {'D_L':>7s}")
    lines = [header, "-" * len(header)]
    order = {"SL": 0, "SL+RL": 1, "Human": 2}
    for r in sorted(reports, key=lambda r: (order.get(r.phase, 3),
                                            r.listeners or 0, r.upsampling or 0)):
        lines.append(
            f"{r.phase:8s} "
            f"{('--' if r.listeners is None else str(r.listeners)):>9s} "
            f"{('--' if r.upsampling is None else str(r.upsampling)):>10s} "
            f"{_fmt(r.acc_comm, '.2f'):>9s} {_fmt(r.beta, '.4f'):>12s} "
            f"{_fmt(r.diversity, '.1f'):>6s} {_fmt(r.informativeness, '.2f'):>7s} "
            f"{_fmt(r.convexity, '.2f'):>9s} {_fmt(r.drift, '.2f'):>7s}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# trend checks
# ---------------------------------------------------------------------------

@dataclass
class TrendCheck:
    name: str
    evaluable: bool
    passed: bool
    margin: float | None
    detail: str


def _rl_cell(reports, listeners, ups) -> ConditionReport | None:
    for r in reports:
        if r.phase == "SL+RL" and r.listeners == listeners and r.upsampling == ups:
            return r
    return None


def check_trends(reports: list[ConditionReport],
                 listeners_pair: tuple[int, int] = (1, 30),
                 upsampling_grid: tuple[int, ...] = (0, 100, 200)) -> list[TrendCheck]:
    """Evaluate the directional claims over across-seed means."""
    lo, hi = listeners_pair
    checks: list[TrendCheck] = []

    def grid_cells(listeners):
        return [_rl_cell(reports, listeners, n) for n in upsampling_grid]

    # (a) |W| strictly increases with upsampling within each listener setting
    margins, evaluable = [], True
    for L in listeners_pair:
        cells = grid_cells(L)
        if any(c is None for c in cells):
            evaluable = False
            break
        margins.extend(b.diversity - a.diversity for a, b in zip(cells, cells[1:]))
    checks.append(TrendCheck(
        name="diversity_increases_with_upsampling", evaluable=evaluable,
        passed=evaluable and all(m > 0 for m in margins),
        margin=min(margins) if margins and evaluable else None,
        detail=f"per-step |W| gains {['%.2f' % m for m in margins]}" if evaluable else "missing cells"))

    # (b) |W| and I_L lower with many listeners, for each upsampling level
    margins, evaluable = [], True
    for n in upsampling_grid:
        a, b = _rl_cell(reports, lo, n), _rl_cell(reports, hi, n)
        if a is None or b is None:
            evaluable = False
            break
        margins.append(a.diversity - b.diversity)
        margins.append(a.informativeness - b.informativeness)
    checks.append(TrendCheck(
        name="many_listeners_reduce_diversity_and_informativeness",
        evaluable=evaluable,
        passed=evaluable and all(m > 0 for m in margins),
        margin=min(margins) if margins and evaluable else None,
        detail=f"{lo}-vs-{hi} listener margins {['%.3f' % m for m in margins]}" if evaluable else "missing cells"))

    # (c) convexity higher with many listeners for upsampling in {0, 100}
    margins, evaluable = [], True
    for n in (u for u in upsampling_grid if u in (0, 100)):
        a, b = _rl_cell(reports, lo, n), _rl_cell(reports, hi, n)
        if a is None or b is None:
            evaluable = False
            break
        margins.append(b.convexity - a.convexity)
    checks.append(TrendCheck(
        name="many_listeners_increase_convexity", evaluable=evaluable,
        passed=evaluable and all(m > 0 for m in margins),
        margin=min(margins) if margins and evaluable else None,
        detail=f"convexity gains {['%.3f' % m for m in margins]}" if evaluable else "missing cells"))

    # (d) drift decreases with upsampling within each listener setting
    margins, evaluable = [], True
    for L in listeners_pair:
        cells = grid_cells(L)
        if any(c is None for c in cells):
            evaluable = False
            break
        margins.extend(a.drift - b.drift for a, b in zip(cells, cells[1:]))
    checks.append(TrendCheck(
        name="upsampling_reduces_drift", evaluable=evaluable,
        passed=evaluable and all(m > 0 for m in margins),
        margin=min(margins) if margins and evaluable else None,
        detail=f"per-step drift drops {['%.2f' % m for m in margins]}" if evaluable else "missing cells"))

    # (e) beta negative and significant in every condition
    rl_rows = [r for r in reports if r.phase in ("SL", "SL+RL") and r.beta is not None]
    evaluable = bool(rl_rows)
    ok = all(r.beta < 0 and r.beta_p < 1e-3 for r in rl_rows)
    margin = min((-r.beta for r in rl_rows), default=None) if evaluable else None
    checks.append(TrendCheck(
        name="context_ease_slope_negative_everywhere", evaluable=evaluable,
        passed=evaluable and ok, margin=margin,
        detail=(f"{len(rl_rows)} conditions, max p "
                f"{max((r.beta_p for r in rl_rows), default=float('nan')):.2e}")
        if evaluable else "missing cells"))
    return checks


# ---------------------------------------------------------------------------
# denotation export
# ---------------------------------------------------------------------------

def export_denotations(lex: Lexicon, words: list[str], out_dir: str) -> list[str]:
    """One CSV per word: L, a, b, count rows for 3-D scatter plotting."""
    missing = [w for w in words if w not in lex.entries]
    if missing:
        raise ValueError(
            f"unknown words {missing}; available: {sorted(lex.entries)}")
    paths = []
    os.makedirs(out_dir, exist_ok=True)
    for word in words:
        counts: dict[ColorChip, int] = {}
        for chip in lex.entries[word]:
            counts[chip] = counts.get(chip, 0) + 1
        lines = ["L,a,b,count"]
        for chip in sorted(counts):
            lines.append(f"{chip.L:.1f},{chip.a:.1f},{chip.b:.1f},{counts[chip]}")
        path = os.path.join(out_dir, f"denotation_{word}.csv")
        _atomic_write(path, "\n".join(lines) + "\n")
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--listeners", help="comma-separated listener grid")
    p.add_argument("--upsampling", help="comma-separated upsampling grid")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--data", help="human corpus CSV (default: built-in synthetic)")
    p.add_argument("--schema", choices=["hsl", "cielab"])


def _config_from_args(args) -> ExperimentConfig:
    overrides: dict = {}
    if args.seeds:
        overrides["seeds"] = args.seeds
    if args.listeners:
        overrides["listeners_grid"] = args.listeners
    if args.upsampling:
        overrides["upsampling_grid"] = args.upsampling
    if args.out:
        overrides["out_dir"] = args.out
    if args.workers:
        overrides["workers"] = args.workers
    if args.resume:
        overrides["resume"] = True
    if args.data:
        overrides["corpus_path"] = args.data
    if args.schema:
        overrides["schema_mode"] = args.schema
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig.from_values(overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="colorlex",
        description="Referential-game color lexicon simulator and metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-corpus", help="write the synthetic human-like corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=humanlike.DEFAULT_SEED)

    p = sub.add_parser("ingest", help="ingest a source CSV and report counts")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", choices=["hsl", "cielab"], default="hsl")
    p.add_argument("--out", help="write the canonical corpus CSV here")

    p = sub.add_parser("sample-triplets", help="generate synthetic triplets")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--close-max", type=float, default=20.0)
    p.add_argument("--far-min", type=float, default=50.0)
    p.add_argument("--calibrate", help="human corpus CSV to calibrate thresholds against")
    p.add_argument("--schema", choices=["hsl", "cielab"], default="cielab")

    p = sub.add_parser("train", help="run the experiment matrix")
    _add_config_args(p)
    p.add_argument("--phase", choices=["sl", "rl", "both"], default="both")

    p = sub.add_parser("evaluate", help="re-aggregate metrics from artifacts")
    _add_config_args(p)

    p = sub.add_parser("report", help="render the aggregate table")
    _add_config_args(p)

    p = sub.add_parser("check-trends", help="evaluate directional claims")
    _add_config_args(p)

    p = sub.add_parser("export-denotations", help="per-word denotation CSVs")
    p.add_argument("--trial-log", required=True, help="a persisted trial_log CSV")
    p.add_argument("--words", required=True, help="comma-separated word list")
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)

    try:
        if args.command == "make-corpus":
            corpus = humanlike.synthesize_human_corpus(seed=args.seed)
            save_ingest_csv(corpus, args.out)
            print(f"wrote {len(corpus)} trials to {args.out} "
                  f"({corpus.condition_counts()})")
            return 0

        if args.command == "ingest":
            corpus = ingest_colors_csv(args.data, args.schema)
            counts = corpus.condition_counts()
            print(f"trials: {len(corpus)}  far: {counts['far']}  "
                  f"split: {counts['split']}  close: {counts['close']}")
            print(f"words: {len(corpus.word_counts)}  "
                  f"skipped multiword: {corpus.skipped_multiword}  "
                  f"skipped unsuccessful: {corpus.skipped_unsuccessful}")
            if args.out:
                save_corpus_csv(corpus, args.out)
                print(f"canonical corpus written to {args.out}")
            return 0

        if args.command == "sample-triplets":
            thresholds = ContextThresholds(close_max=args.close_max,
                                           far_min=args.far_min)
            if args.calibrate:
                human = ingest_colors_csv(args.calibrate, args.schema)
                result = calibrate_thresholds(human, seed=args.seed)
                thresholds = result.thresholds
                print(f"calibrated thresholds: close_max={thresholds.close_max:.2f} "
                      f"far_min={thresholds.far_min:.2f}  "
                      f"KS={ {k: round(v, 3) for k, v in result.ks_by_condition.items()} }")
            corpus = generate_triplets(args.n, thresholds=thresholds, seed=args.seed)
            save_corpus_csv(corpus, args.out)
            print(f"wrote {len(corpus)} generated trials to {args.out}")
            return 0

        if args.command == "train":
            cfg = _config_from_args(args)
            results = run_matrix(cfg, phase=args.phase)
            print(f"completed {len(results)} cells under "
                  f"{os.path.join(cfg.out_dir, cfg.digest())}")
            return 0

        if args.command in ("evaluate", "report"):
            cfg = _config_from_args(args)
            reports = aggregate(cfg)
            reports.append(human_reference_report(cfg))
            base = os.path.join(cfg.out_dir, cfg.digest())
            _atomic_write(os.path.join(base, "report.csv"), report_csv(reports))
            table = render_table(reports)
            _atomic_write(os.path.join(base, "report.txt"), table)
            print(table, end="")
            return 0

        if args.command == "check-trends":
            cfg = _config_from_args(args)
            reports = aggregate(cfg)
            pair = (min(cfg.listeners_grid), max(cfg.listeners_grid))
            checks = check_trends(reports, listeners_pair=pair,
                                  upsampling_grid=cfg.upsampling_grid)
            failed = 0
            for c in checks:
                status = "PASS" if c.passed else ("N/A " if not c.evaluable else "FAIL")
                if c.evaluable and not c.passed:
                    failed += 1
                margin = "" if c.margin is None else f" margin={c.margin:.4f}"
                print(f"[{status}] {c.name}{margin}  ({c.detail})")
            return 2 if failed else 0

        if args.command == "export-denotations":
            lex = load_trial_log(args.trial_log)
            words = [w.strip() for w in args.words.split(",") if w.strip()]
            paths = export_denotations(lex, words, args.out)
            for path in paths:
                print(path)
            return 0
    except Exception as exc:  # CLI boundary: report and signal failure
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
