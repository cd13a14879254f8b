"""Desk-scale experiment harness.

Synthetic frame-labeled corpora, a per-frame linear classifier trained with
the exact CTC loss under any topology variant, and blank-ratio measurement.
The trainer runs a dense forward-backward over the cached per-utterance
training graphs, vectorized across the batch; it computes the same loss and
occupancy as the lattice path (tested against it), just much faster.

Token runs are emitted with an onset/sustain amplitude envelope: the first
frame of a run carries the full class mean, later frames a scaled-down copy.
A memoryless frame classifier can therefore separate run onsets from
continuations, which is what lets the blank ratio approach its theoretical
maximum under strong regularization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleAlignmentError, TrainingDivergedError
from .fsa import TERMINAL, Fst
from .loss import greedy_decode, log_softmax
from .skip import SWEEP_BETAS, SweepPoint, sweep_thresholds
from .topology import STANDARD, TopologyVariant, build_training_graph, hard


@dataclass(frozen=True)
class CorpusConfig:
    vocab_size: int = 5
    feature_dim: int = 16
    stretch: int = 4  # mean frames per token; durations are stretch -1..+1
    noise: float = 0.2
    num_utterances: int = 200
    min_tokens: int = 2
    max_tokens: int = 5
    sustain_scale: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.feature_dim < self.vocab_size + 1:
            raise ValueError("feature_dim must be >= vocab_size + 1")
        if self.stretch < 2:
            raise ValueError("stretch must be >= 2")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.num_utterances < 1:
            raise ValueError("num_utterances must be >= 1")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise ValueError("need 1 <= min_tokens <= max_tokens")
        if not 0 < self.sustain_scale <= 1:
            raise ValueError("sustain_scale must lie in (0, 1]")


@dataclass
class Utterance:
    features: np.ndarray  # (T, D)
    labels: tuple[int, ...]


@dataclass
class SyntheticCorpus:
    config: CorpusConfig
    utterances: list[Utterance]

    @property
    def gamma_max(self) -> float:
        tokens = sum(len(u.labels) for u in self.utterances)
        frames = sum(len(u.features) for u in self.utterances)
        return 1.0 - tokens / frames


def token_means(config: CorpusConfig) -> np.ndarray:
    """Fixed orthogonal class means, one unit vector per vocabulary symbol."""
    return np.eye(config.feature_dim)[: config.vocab_size]


def generate_corpus(config: CorpusConfig) -> SyntheticCorpus:
    """Sample a deterministic corpus from the config's seed.

    Each token emits ``stretch``-ish frames of its class mean (onset at full
    scale, sustains attenuated) plus gaussian noise. Adjacent tokens are
    always distinct, so a greedy decode of a well-trained model can be exact.
    """
    rng = np.random.default_rng(config.seed)
    means = token_means(config)
    vocab = config.vocab_size
    utterances = []
    for _ in range(config.num_utterances):
        count = int(rng.integers(config.min_tokens, config.max_tokens + 1))
        labels: list[int] = []
        for u in range(count):
            if u == 0:
                tok = int(rng.integers(1, vocab + 1))
            else:
                tok = int(rng.integers(1, vocab))
                if tok >= labels[-1]:
                    tok += 1
            labels.append(tok)
        durations = rng.integers(config.stretch - 1, config.stretch + 2, size=count)
        blocks = []
        for tok, dur in zip(labels, durations):
            scales = np.full(int(dur), config.sustain_scale)
            scales[0] = 1.0
            noise = config.noise * rng.standard_normal((int(dur), config.feature_dim))
            blocks.append(scales[:, None] * means[tok - 1] + noise)
        utterances.append(Utterance(np.concatenate(blocks, axis=0), tuple(labels)))
    return SyntheticCorpus(config=config, utterances=utterances)


@dataclass
class ToyModel:
    weights: np.ndarray  # (D, V+1)
    bias: np.ndarray  # (V+1,)

    def logits(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights + self.bias

    def grid(self, features: np.ndarray) -> np.ndarray:
        return log_softmax(self.logits(features))


def min_alignment_length(labels: Sequence[int]) -> int:
    """Shortest feasible alignment: one frame per token plus one mandatory
    blank between identical adjacent tokens."""
    dups = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + dups


def _engine_variant(variant: TopologyVariant, t_max: int) -> TopologyVariant:
    # A run can never exceed the frame budget, so capping the hard bound at
    # t_max leaves every reachable path (and the total) unchanged.
    if variant.kind == "hard" and variant.max_run > t_max:
        return hard(t_max)
    return variant


class _GraphBatch:
    """Dense, batch-vectorized forward-backward over fixed training graphs.

    Grids must be padded to a shared frame count with certain-blank rows
    (blank log-prob 0, everything else -inf); each padded row extends every
    surviving path uniquely and at zero cost, so the totals match the
    per-utterance lattice values exactly.
    """

    def __init__(self, graphs: list[Fst], num_classes: int):
        batch = len(graphs)
        num_states = max(g.num_states for g in graphs)
        in_arcs: list[list[list[tuple[int, int, float]]]] = []
        out_arcs: list[list[list[tuple[int, int, float]]]] = []
        fin = np.full((batch, num_states), -np.inf)
        for n, g in enumerate(graphs):
            if g.is_empty or g.start != 0:
                raise ValueError("graph batch expects trimmed graphs starting at state 0")
            ins = [[] for _ in range(num_states)]
            outs = [[] for _ in range(num_states)]
            for arc in g.arcs():
                if arc.ilabel == TERMINAL:
                    fin[n, arc.src] = np.logaddexp(fin[n, arc.src], arc.weight)
                else:
                    ins[arc.dst].append((arc.src, arc.ilabel, arc.weight))
                    outs[arc.src].append((arc.dst, arc.ilabel, arc.weight))
            in_arcs.append(ins)
            out_arcs.append(outs)

        j_in = max(max(len(lst) for lst in ins) for ins in in_arcs)
        j_out = max(max(len(lst) for lst in lst_n) for lst_n in out_arcs)
        self.batch, self.num_states, self.num_classes = batch, num_states, num_classes
        self.fin = fin
        self.in_src = np.zeros((batch, num_states, j_in), dtype=np.intp)
        self.in_sym = np.zeros((batch, num_states, j_in), dtype=np.intp)
        self.in_w = np.full((batch, num_states, j_in), -np.inf)
        self.out_dst = np.zeros((batch, num_states, j_out), dtype=np.intp)
        self.out_sym = np.zeros((batch, num_states, j_out), dtype=np.intp)
        self.out_w = np.full((batch, num_states, j_out), -np.inf)
        self.onehot = np.zeros((batch, num_states * j_in, num_classes))
        for n in range(batch):
            for s in range(num_states):
                for j, (src, sym, w) in enumerate(in_arcs[n][s]):
                    self.in_src[n, s, j] = src
                    self.in_sym[n, s, j] = sym
                    self.in_w[n, s, j] = w
                    self.onehot[n, s * j_in + j, sym] = 1.0
                for j, (dst, sym, w) in enumerate(out_arcs[n][s]):
                    self.out_dst[n, s, j] = dst
                    self.out_sym[n, s, j] = sym
                    self.out_w[n, s, j] = w

    def total_and_occupancy(self, grids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Log-total per utterance and per-frame symbol occupancy."""
        batch, frames, _ = grids.shape
        states = self.num_states
        nn = np.arange(batch)[:, None, None]
        alpha = np.full((batch, frames + 1, states), -np.inf)
        alpha[:, 0, 0] = 0.0
        for t in range(frames):
            g_t = grids[:, t, :]
            vals = alpha[:, t, :][nn, self.in_src] + self.in_w + g_t[nn, self.in_sym]
            alpha[:, t + 1, :] = np.logaddexp.reduce(vals, axis=2)
        total = np.logaddexp.reduce(alpha[:, frames, :] + self.fin, axis=1)

        beta = np.full((batch, frames + 1, states), -np.inf)
        beta[:, frames, :] = self.fin
        for t in range(frames - 1, -1, -1):
            g_t = grids[:, t, :]
            vals = beta[:, t + 1, :][nn, self.out_dst] + self.out_w + g_t[nn, self.out_sym]
            beta[:, t, :] = np.logaddexp.reduce(vals, axis=2)

        flat = states * self.in_src.shape[2]
        src_f = self.in_src.reshape(batch, 1, flat)
        sym_f = self.in_sym.reshape(batch, 1, flat)
        w_f = self.in_w.reshape(batch, 1, flat)
        t_idx = np.arange(frames)[None, :, None]
        a_gather = alpha[nn, t_idx, src_f]
        g_gather = grids[nn, t_idx, sym_f]
        b_gather = np.broadcast_to(
            beta[:, 1:, :, None], (batch, frames, states, self.in_src.shape[2])
        ).reshape(batch, frames, flat)
        log_post = a_gather + w_f + g_gather + b_gather - total[:, None, None]
        occupancy = np.matmul(np.exp(log_post), self.onehot)
        return total, occupancy


def train(
    corpus: SyntheticCorpus,
    variant: TopologyVariant = STANDARD,
    steps: int = 2000,
    step_size: float = 0.5,
    skip_beta: float | None = None,
    warmup_fraction: float = 0.1,
) -> tuple[ToyModel, list[float]]:
    """Plain gradient descent on the mean CTC loss through a linear model.

    With ``skip_beta`` set, frames whose current blank probability exceeds
    the threshold are excluded from the loss once warmup is over; an
    utterance whose retained frames could no longer fit its labels keeps all
    of them for that step. Training is deterministic: zero init, full batch,
    fixed summation order.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    utts = corpus.utterances
    batch = len(utts)
    vocab = corpus.config.vocab_size
    classes = vocab + 1
    dim = corpus.config.feature_dim
    t_counts = np.array([len(u.features) for u in utts])
    t_max = int(t_counts.max())
    min_lens = np.array([min_alignment_length(u.labels) for u in utts])
    for n, u in enumerate(utts):
        if t_counts[n] < min_lens[n]:
            raise InfeasibleAlignmentError(int(t_counts[n]), len(u.labels), variant)

    graphs = [
        build_training_graph(u.labels, vocab, _engine_variant(variant, t_max))
        for u in utts
    ]
    engine = _GraphBatch(graphs, classes)

    feats = np.zeros((batch, t_max, dim))
    real = np.zeros((batch, t_max), dtype=bool)
    for n, u in enumerate(utts):
        feats[n, : t_counts[n]] = u.features
        real[n, : t_counts[n]] = True
    pad_row = np.full(classes, -np.inf)
    pad_row[0] = 0.0

    weights = np.zeros((dim, classes))
    bias = np.zeros(classes)
    warmup_steps = int(round(warmup_fraction * steps))
    nn = np.arange(batch)[:, None]
    identity_order = np.broadcast_to(np.arange(t_max), (batch, t_max))
    losses: list[float] = []

    for step in range(steps):
        logits = feats @ weights + bias
        shifted = logits - logits.max(axis=2, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=2, keepdims=True))
        probs = np.exp(logp)

        if skip_beta is not None and step >= warmup_steps:
            keep = real & ~(probs[:, :, 0] > skip_beta)
            kept = keep.sum(axis=1)
            infeasible = kept < min_lens
            if infeasible.any():
                keep[infeasible] = real[infeasible]
                kept = keep.sum(axis=1)
            order = np.argsort(~keep, axis=1, kind="stable")
        else:
            order = identity_order
            kept = t_counts

        grids = np.where(real[:, :, None], logp, pad_row)
        eff = grids[nn, order]
        live = np.arange(t_max)[None, :] < kept[:, None]
        eff = np.where(live[:, :, None], eff, pad_row)

        total, occupancy = engine.total_and_occupancy(eff)
        loss = float(np.mean(-total))
        if not np.isfinite(loss):
            raise TrainingDivergedError(step)
        losses.append(loss)

        grad_eff = np.where(live[:, :, None], probs[nn, order] - occupancy, 0.0)
        grad_logits = np.empty_like(grad_eff)
        grad_logits[nn, order] = grad_eff
        # Divergence surfaces as non-finite parameters, raised below; keep the
        # overflow itself quiet.
        with np.errstate(over="ignore", invalid="ignore"):
            weights = weights - step_size * (
                np.einsum("ntd,ntc->dc", feats, grad_logits) / batch
            )
            bias = bias - step_size * (grad_logits.sum(axis=(0, 1)) / batch)
        if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
            raise TrainingDivergedError(step)

    return ToyModel(weights=weights, bias=bias), losses


@dataclass
class ExperimentReport:
    name: str
    final_loss: float
    sweep: list[SweepPoint]
    token_error_rate: float
    gamma_max: float

    def ratio_at(self, beta: float) -> float:
        for point in self.sweep:
            if abs(point.beta - beta) < 1e-12:
                return point.ratio
        raise KeyError(f"threshold {beta} not in sweep")


def edit_distance(hyp: Sequence[int], ref: Sequence[int]) -> int:
    """Levenshtein distance between token sequences."""
    prev = list(range(len(ref) + 1))
    for i, h in enumerate(hyp, start=1):
        cur = [i] + [0] * len(ref)
        for j, r in enumerate(ref, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (h != r))
        prev = cur
    return prev[len(ref)]


def evaluate(
    model: ToyModel,
    corpus: SyntheticCorpus,
    betas: Sequence[float] = SWEEP_BETAS,
    name: str = "",
    final_loss: float = float("nan"),
) -> ExperimentReport:
    """Blank-ratio sweep, greedy-decode token error rate, and gamma_max."""
    prob_sets = []
    counts = []
    edits = 0
    ref_len = 0
    for u in corpus.utterances:
        grid = model.grid(u.features)
        prob_sets.append(np.exp(grid[:, 0]))
        counts.append(len(u.labels))
        edits += edit_distance(greedy_decode(grid), u.labels)
        ref_len += len(u.labels)
    return ExperimentReport(
        name=name,
        final_loss=final_loss,
        sweep=sweep_thresholds(prob_sets, counts, betas),
        token_error_rate=edits / ref_len,
        gamma_max=corpus.gamma_max,
    )


@dataclass(frozen=True)
class RunSpec:
    """One training configuration in a comparison: topology + optional
    training-time frame skipping."""

    variant: TopologyVariant
    skip_beta: float | None = None

    @property
    def name(self) -> str:
        if self.skip_beta is None:
            return str(self.variant)
        return f"{self.variant}+skip({self.skip_beta:g})"


DEFAULT_RUNS = (
    RunSpec(STANDARD, skip_beta=0.85),
    RunSpec(TopologyVariant("soft", penalty=0.04)),
    RunSpec(TopologyVariant("soft", penalty=5.0)),
    RunSpec(TopologyVariant("hard", max_run=2)),
    RunSpec(TopologyVariant("hard", max_run=1)),
)


def compare_variants(
    train_corpus: SyntheticCorpus,
    eval_corpus: SyntheticCorpus,
    runs: Sequence[RunSpec] = DEFAULT_RUNS,
    steps: int = 2000,
    step_size: float = 0.5,
    warmup_fraction: float = 0.1,
    betas: Sequence[float] = SWEEP_BETAS,
) -> list[tuple[ExperimentReport, list[float]]]:
    """Train every run spec on the same data from the same (zero) init and
    evaluate each; returns (report, loss curve) pairs in input order."""
    if len(runs) < 2:
        raise ValueError("need at least two run specs to compare")
    results = []
    for spec in runs:
        model, losses = train(
            train_corpus,
            spec.variant,
            steps=steps,
            step_size=step_size,
            skip_beta=spec.skip_beta,
            warmup_fraction=warmup_fraction,
        )
        report = evaluate(
            model, eval_corpus, betas=betas, name=spec.name, final_loss=losses[-1]
        )
        results.append((report, losses))
    return results
