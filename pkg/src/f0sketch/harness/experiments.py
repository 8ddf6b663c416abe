"""Distributed-merge simulation and accuracy experiments.

A simulated deployment splits a stream across p workers, each worker
sketches its share, and the worker sketches are combined along a merge
topology:

    sequential  one process sees the whole stream
    balanced    p workers, merged pairwise level by level
    random      p workers, a uniformly random binary merge tree
    star        p workers, a coordinator merges them one at a time in
                arrival (random) order

Duplication policies decide how elements reach workers:

    disjoint    every occurrence goes to one random worker
    overlap     every element also goes to each other worker with
                probability ``overlap_rate``
    replicate   every worker sees the whole stream
"""
from __future__ import annotations

import csv
import io
import math
import random
import sys
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import api
from ..params import PRACTICAL, STRICT, derive_params

TOPOLOGIES = ("sequential", "balanced", "random", "star")
DUPLICATION = ("disjoint", "overlap", "replicate")
CSV_COLUMNS = ("cardinality", "trial", "estimate", "rel_error", "failed")
INFEASIBLE_BINS = 1 << 20


@dataclass
class ExperimentConfig:
    n: int = 1 << 20
    eps: float = 0.1
    delta: float = 0.05
    profile: str = PRACTICAL
    cardinalities: Sequence[int] = (10, 1000, 100_000)
    trials: int = 400
    topology: str = "sequential"
    workers: int = 8
    duplication: str = "disjoint"
    overlap_rate: float = 0.25
    repeat_rate: float = 0.0
    entropy_seed: int = 0
    layer: str = "inner"
    c6_practical: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}; choose from {TOPOLOGIES}")
        if self.duplication not in DUPLICATION:
            raise ValueError(f"unknown duplication policy {self.duplication!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if any(c < 1 or c > self.n for c in self.cardinalities):
            raise ValueError("cardinalities must lie in [1, n]")
        if not 0 <= self.overlap_rate <= 1 or self.repeat_rate < 0:
            raise ValueError("rates out of range")

    def seed_kwargs(self) -> dict:
        kw = {"profile": self.profile, "layer": self.layer}
        if self.c6_practical is not None:
            kw["c6_practical"] = self.c6_practical
        return kw


# --- streams and topologies ---------------------------------------------------


def distinct_elements(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    if count * 4 > n:
        return rng.choice(n, size=count, replace=False).astype(np.uint64)
    out = np.unique(rng.integers(0, n, size=count + count // 8 + 16, dtype=np.uint64))
    while out.size < count:
        more = rng.integers(0, n, size=count, dtype=np.uint64)
        out = np.unique(np.concatenate([out, more]))
    return rng.permutation(out)[:count]


def make_stream(elements: np.ndarray, repeat_rate: float, rng: np.random.Generator) -> np.ndarray:
    """Shuffled stream of ``elements`` with about repeat_rate*|A| extra repeats."""
    extra = rng.poisson(repeat_rate * elements.size) if repeat_rate > 0 else 0
    stream = np.concatenate([elements, rng.choice(elements, size=extra)]) if extra else elements
    return rng.permutation(stream)


def partition(
    stream: np.ndarray, workers: int, policy: str, rng: np.random.Generator, overlap_rate: float = 0.25
) -> list[np.ndarray]:
    if policy == "replicate":
        return [stream.copy() for _ in range(workers)]
    owner = rng.integers(0, workers, size=stream.size)
    if policy == "disjoint":
        return [stream[owner == w] for w in range(workers)]
    if policy == "overlap":
        parts = []
        for w in range(workers):
            extra = rng.random(stream.size) < overlap_rate
            parts.append(stream[(owner == w) | extra])
        return parts
    raise ValueError(f"unknown duplication policy {policy!r}")


def merge_tree(items: list, merge: Callable, topology: str, rng: random.Random):
    """Combine ``items`` along the named topology."""
    if not items:
        raise ValueError("nothing to merge")
    items = list(items)
    if topology in ("sequential", "star"):
        if topology == "star":
            rng.shuffle(items)
        acc = items[0]
        for it in items[1:]:
            acc = merge(acc, it)
        return acc
    if topology == "balanced":
        while len(items) > 1:
            nxt = [merge(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
            if len(items) % 2:
                nxt.append(items[-1])
            items = nxt
        return items[0]
    if topology == "random":
        while len(items) > 1:
            i, j = sorted(rng.sample(range(len(items)), 2))
            merged = merge(items[i], items[j]) if rng.random() < 0.5 else merge(items[j], items[i])
            items[i] = merged
            items.pop(j)
        return items[0]
    raise ValueError(f"unknown topology {topology!r}")


def run_pipeline(stream: np.ndarray, seed: api.AnySeed, cfg: ExperimentConfig, rng: np.random.Generator):
    """Sketch ``stream`` the way the configured deployment would."""
    if cfg.topology == "sequential":
        return api.sketch_elements(stream, seed)
    parts = partition(stream, cfg.workers, cfg.duplication, rng, cfg.overlap_rate)
    sketches = [api.sketch_elements(p, seed) for p in parts]
    tree_rng = random.Random(int(rng.integers(0, 2**63)))
    return merge_tree(sketches, api.merge, cfg.topology, tree_rng)


# --- accuracy experiment ------------------------------------------------------


@dataclass
class TrialRow:
    cardinality: int
    trial: int
    estimate: float
    rel_error: float
    failed: bool


@dataclass
class PointSummary:
    cardinality: int
    trials: int
    failures: int
    mean_estimate: float
    mean_rel_error: float

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[TrialRow] = field(default_factory=list)
    summaries: list[PointSummary] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.cardinality, r.trial, repr(r.estimate), repr(r.rel_error), int(r.failed)])
        for s in self.summaries:
            w.writerow([s.cardinality, "summary", repr(s.mean_estimate), repr(s.mean_rel_error),
                        repr(s.failure_rate)])
        return buf.getvalue()


def trial_rngs(entropy_seed: int, point: int, trial: int) -> tuple[np.random.Generator, random.Random]:
    """Independent, reproducible randomness for one trial.

    The numpy generator drives the workload, the Random instance is the
    entropy source for the sketch seed.
    """
    ss = np.random.SeedSequence([entropy_seed, point, trial])
    work, coins = ss.spawn(2)
    return np.random.default_rng(work), random.Random(int(coins.generate_state(2, np.uint64)[0]))


def warn_if_infeasible(cfg: ExperimentConfig) -> None:
    if cfg.profile != STRICT:
        return
    b = derive_params(cfg.n, cfg.eps, max(cfg.delta, 1 / math.log(cfg.n)), STRICT).b
    if b >= INFEASIBLE_BINS:
        msg = f"strict profile needs b = {b} bins per row; this run will be extremely slow"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        print(f"WARNING: {msg}", file=sys.stderr)


def run_accuracy_experiment(
    cfg: ExperimentConfig, progress: Callable[[str], None] | None = None
) -> ExperimentResult:
    warn_if_infeasible(cfg)
    result = ExperimentResult(cfg)
    for point, card in enumerate(cfg.cardinalities):
        failures, est_sum, err_sum = 0, 0.0, 0.0
        for trial in range(cfg.trials):
            rng, coins = trial_rngs(cfg.entropy_seed, point, trial)
            seed = api.make_seed(cfg.n, cfg.eps, cfg.delta, coins, **cfg.seed_kwargs())
            elements = distinct_elements(cfg.n, card, rng)
            stream = make_stream(elements, cfg.repeat_rate, rng)
            y = api.estimate(run_pipeline(stream, seed, cfg, rng))
            err = abs(y - card) / card
            failed = abs(y - card) > cfg.eps * card
            failures += failed
            est_sum += y
            err_sum += err
            result.rows.append(TrialRow(card, trial, y, err, failed))
        summary = PointSummary(card, cfg.trials, failures, est_sum / cfg.trials, err_sum / cfg.trials)
        result.summaries.append(summary)
        if progress:
            progress(
                f"|A|={card}: {failures}/{cfg.trials} failures "
                f"(rate {summary.failure_rate:.4f}, delta {cfg.delta})"
            )
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(result.to_csv())
    return result
