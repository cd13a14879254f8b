"""CTC negative log-likelihood and analytic gradients under any topology.

The main path builds the training graph, intersects it with the dense score
grid, and reads the loss off the lattice total. Two independent
implementations cross-check it: the classic alpha recursion over the 2U+1
expanded label sequence (standard topology only) and a brute-force sum over
enumerated alignments (all variants, small instances).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleAlignmentError
from .fsa import TERMINAL
from .lattice import arc_posteriors, forward_scores, intersect_dense
from .topology import (
    STANDARD,
    TopologyVariant,
    build_training_graph,
    collapse_ctc,
    enumerate_alignments,
)


@dataclass
class LossResult:
    """Loss plus its analytic derivatives.

    ``occupancy[t][k]`` is the posterior probability that a valid alignment
    emits symbol k at frame t; rows sum to 1. ``grad_logits`` is the gradient
    of the loss w.r.t. pre-softmax logits (softmax minus occupancy), valid
    when the grid came from :func:`log_softmax`; rows sum to 0.
    """

    loss: float
    grad_logits: np.ndarray
    occupancy: np.ndarray


def log_softmax(logits) -> np.ndarray:
    """Row-wise log-softmax, shifted by the row max so +-700 inputs are safe."""
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 2:
        raise ValueError(f"logits must be 2-D, got shape {logits.shape}")
    if not np.isfinite(logits).all():
        raise ValueError("logits must be finite")
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def ctc_loss(
    labels: Sequence[int], grid, variant: TopologyVariant = STANDARD
) -> LossResult:
    """Exact CTC loss via the lattice, with occupancy and logit gradients.

    Raises :class:`InfeasibleAlignmentError` when no alignment of the labels
    fits in the grid's frames (e.g. too few frames), mirroring practical CTC
    implementations that expect callers to filter such utterances.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2:
        raise ValueError(f"grid must be 2-D, got shape {grid.shape}")
    num_frames, num_cols = grid.shape
    vocab_size = num_cols - 1
    graph = build_training_graph(labels, vocab_size, variant)
    lat = intersect_dense(graph, grid)
    if lat.is_empty:
        raise InfeasibleAlignmentError(num_frames, len(labels), variant)
    fwd = forward_scores(lat, "log")
    total = fwd[lat.fst.final]
    post = arc_posteriors(lat)
    occupancy = np.zeros_like(grid)
    for arc_id in range(lat.fst.num_arcs):
        t = lat.frame_of_arc[arc_id]
        if t != TERMINAL:
            occupancy[t, lat.symbol_of_arc[arc_id]] += post[arc_id]
    grad_logits = np.exp(grid) - occupancy
    return LossResult(loss=-total, grad_logits=grad_logits, occupancy=occupancy)


def ctc_loss_alpha(labels: Sequence[int], grid) -> float:
    """Standard-topology CTC loss via the classic forward recursion.

    Works over the blank-interleaved state sequence of length 2U+1; kept as
    an independent cross-check of the lattice implementation.
    """
    grid = np.asarray(grid, dtype=float)
    num_frames = grid.shape[0]
    ext = [0]
    for tok in labels:
        ext.extend((tok, 0))
    m = len(ext)
    neg_inf = float("-inf")
    alpha = np.full(m, neg_inf)
    alpha[0] = grid[0, 0]
    if m > 1:
        alpha[1] = grid[0, ext[1]]
    for t in range(1, num_frames):
        prev = alpha
        alpha = np.full(m, neg_inf)
        for s in range(m):
            acc = prev[s]
            if s >= 1:
                acc = np.logaddexp(acc, prev[s - 1])
            if s >= 2 and ext[s] != 0 and ext[s] != ext[s - 2]:
                acc = np.logaddexp(acc, prev[s - 2])
            alpha[s] = acc + grid[t, ext[s]]
    total = alpha[m - 1]
    if m > 1:
        total = np.logaddexp(total, alpha[m - 2])
    if not np.isfinite(total):
        raise InfeasibleAlignmentError(num_frames, len(labels), STANDARD)
    return float(-total)


def _soft_penalty(alignment: Sequence[int], penalty: float) -> float:
    # One penalty per non-blank self-loop traversal: run length minus one.
    total = 0.0
    prev = None
    for k in alignment:
        if k != 0 and k == prev:
            total += penalty
        prev = k
    return total


def brute_force_loss(
    labels: Sequence[int], grid, variant: TopologyVariant = STANDARD
) -> float:
    """Loss by direct summation over enumerated alignments (test oracle).

    Inherits the enumeration guard (frames <= 12, <= 4 distinct symbols).
    """
    grid = np.asarray(grid, dtype=float)
    num_frames = grid.shape[0]
    alignments = enumerate_alignments(labels, num_frames, variant)
    if not alignments:
        raise InfeasibleAlignmentError(num_frames, len(labels), variant)
    scores = []
    for pi in alignments:
        score = sum(grid[t, k] for t, k in enumerate(pi))
        if variant.kind == "soft":
            score -= _soft_penalty(pi, variant.penalty)
        scores.append(score)
    shift = max(scores)
    return float(-(shift + np.log(sum(np.exp(s - shift) for s in scores))))


def grad_check(
    labels: Sequence[int],
    logits,
    variant: TopologyVariant = STANDARD,
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    logits = np.asarray(logits, dtype=float)
    analytic = ctc_loss(labels, log_softmax(logits), variant).grad_logits
    worst = 0.0
    for t in range(logits.shape[0]):
        for k in range(logits.shape[1]):
            bumped = logits.copy()
            bumped[t, k] += epsilon
            hi = ctc_loss(labels, log_softmax(bumped), variant).loss
            bumped[t, k] -= 2 * epsilon
            lo = ctc_loss(labels, log_softmax(bumped), variant).loss
            numeric = (hi - lo) / (2 * epsilon)
            err = abs(analytic[t, k] - numeric) / (abs(numeric) + 1e-8)
            worst = max(worst, err)
    return worst


def greedy_decode(grid) -> list[int]:
    """Per-frame argmax followed by CTC collapse."""
    grid = np.asarray(grid, dtype=float)
    return collapse_ctc(int(k) for k in grid.argmax(axis=1))


def format_matrix(matrix) -> str:
    """Matrix text format: a ``T C`` header line, then T rows of C values."""
    matrix = np.asarray(matrix, dtype=float)
    rows, cols = matrix.shape
    lines = [f"{rows} {cols}"]
    for row in matrix:
        lines.append(" ".join(f"{v:.12g}" for v in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    """Parse the matrix text format produced by :func:`format_matrix`."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty matrix file")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"malformed matrix header: {lines[0]!r}")
    rows, cols = int(header[0]), int(header[1])
    if len(lines) - 1 != rows:
        raise ValueError(f"expected {rows} matrix rows, found {len(lines) - 1}")
    out = np.empty((rows, cols), dtype=float)
    for i, line in enumerate(lines[1:]):
        values = line.split()
        if len(values) != cols:
            raise ValueError(f"row {i} has {len(values)} values, expected {cols}")
        out[i] = [float(v) for v in values]
    return out
