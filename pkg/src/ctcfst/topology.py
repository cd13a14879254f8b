"""CTC topology graphs with blank regularization.

Three topology variants are supported:

* ``standard`` -- the usual blank/label graph: blank self-loops plus
  label self-loops that emit nothing, so any number of consecutive repeats
  collapses to one token.
* ``soft(penalty)`` -- structurally identical, but every non-blank self-loop
  carries weight ``-penalty``, so alignments pay for each repeated frame.
  Blank self-loops stay free.
* ``hard(max_run)`` -- each label emission is unrolled ``max_run`` states
  deep, so at most ``max_run`` consecutive identical non-blank symbols are
  accepted (counting the first one); longer runs are pruned structurally.

Composing a topology with the linear graph of a transcript yields the
training graph whose paths, at a fixed frame count, are exactly the valid
alignments of that transcript.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .fsa import BLANK, EPSILON, TERMINAL, Fst, compose, connect

MAX_ENUM_FRAMES = 12
MAX_ENUM_SYMBOLS = 4


@dataclass(frozen=True)
class TopologyVariant:
    """Which topology to build: kind plus its regularization parameter."""

    kind: str
    penalty: float = 0.0
    max_run: int = 0

    def __post_init__(self):
        if self.kind not in ("standard", "soft", "hard"):
            raise ValueError(f"unknown topology kind {self.kind!r}")
        if self.kind == "soft" and self.penalty < 0:
            raise ValueError("soft penalty must be >= 0")
        if self.kind == "hard" and self.max_run < 1:
            raise ValueError("hard repeat bound must be >= 1")

    def __str__(self) -> str:
        if self.kind == "soft":
            return f"soft({self.penalty:g})"
        if self.kind == "hard":
            return f"hard({self.max_run})"
        return "standard"


STANDARD = TopologyVariant("standard")


def soft(penalty: float) -> TopologyVariant:
    return TopologyVariant("soft", penalty=penalty)


def hard(max_run: int) -> TopologyVariant:
    return TopologyVariant("hard", max_run=max_run)


def _validate_labels(labels: Sequence[int], vocab_size: int | None) -> None:
    for tok in labels:
        if tok < 1 or (vocab_size is not None and tok > vocab_size):
            hi = vocab_size if vocab_size is not None else "?"
            raise ValueError(f"label {tok} outside vocabulary range 1..{hi}")


def build_topology(vocab_size: int, variant: TopologyVariant = STANDARD) -> Fst:
    """Build the topology transducer over blank + ``vocab_size`` symbols.

    Input labels are {0 = blank, 1..V}; output labels are {0 = epsilon,
    1..V}. Arcs entering the final state carry the -1 sentinel.
    """
    if vocab_size < 1:
        raise ValueError("vocab_size must be >= 1")
    fst = Fst()
    if variant.kind in ("standard", "soft"):
        loop_weight = -variant.penalty if variant.kind == "soft" else 0.0
        hub = fst.add_state()  # blank hub, also the start state
        token = [fst.add_state() for _ in range(vocab_size)]
        final = fst.add_state()
        fst.start, fst.final = hub, final
        fst.add_arc(hub, hub, BLANK, EPSILON)
        for k in range(1, vocab_size + 1):
            fst.add_arc(hub, token[k - 1], k, k)
        fst.add_arc(hub, final, TERMINAL, EPSILON)
        for k in range(1, vocab_size + 1):
            s = token[k - 1]
            fst.add_arc(s, s, k, EPSILON, loop_weight)  # the non-blank self-loop
            fst.add_arc(s, hub, BLANK, EPSILON)
            for j in range(1, vocab_size + 1):
                if j != k:
                    fst.add_arc(s, token[j - 1], j, j)
            fst.add_arc(s, final, TERMINAL, EPSILON)
        return fst

    # Hard restriction: unroll each emission max_run states deep.
    depth = variant.max_run
    hub = fst.add_state()
    run = [[fst.add_state() for _ in range(depth)] for _ in range(vocab_size)]
    final = fst.add_state()
    fst.start, fst.final = hub, final
    fst.add_arc(hub, hub, BLANK, EPSILON)
    for k in range(1, vocab_size + 1):
        fst.add_arc(hub, run[k - 1][0], k, k)
    fst.add_arc(hub, final, TERMINAL, EPSILON)
    for k in range(1, vocab_size + 1):
        for c in range(depth):
            s = run[k - 1][c]
            if c + 1 < depth:
                fst.add_arc(s, run[k - 1][c + 1], k, EPSILON)
            fst.add_arc(s, hub, BLANK, EPSILON)
            for j in range(1, vocab_size + 1):
                if j != k:
                    fst.add_arc(s, run[j - 1][0], j, j)
            fst.add_arc(s, final, TERMINAL, EPSILON)
    return fst


def build_linear_graph(labels: Sequence[int], vocab_size: int | None = None) -> Fst:
    """Linear acceptor of a token sequence: a U+1-state chain plus the final
    sentinel arc. All weights are 0; the empty sequence accepts epsilon."""
    _validate_labels(labels, vocab_size)
    fst = Fst()
    chain = [fst.add_state() for _ in range(len(labels) + 1)]
    final = fst.add_state()
    fst.start, fst.final = chain[0], final
    for i, tok in enumerate(labels):
        fst.add_arc(chain[i], chain[i + 1], tok, tok)
    fst.add_arc(chain[-1], final, TERMINAL, EPSILON)
    return fst


def build_training_graph(
    labels: Sequence[int], vocab_size: int, variant: TopologyVariant = STANDARD
) -> Fst:
    """Training graph for one utterance: topology composed with the label
    chain, trimmed. Identical adjacent labels force a mandatory blank in
    between."""
    topo = build_topology(vocab_size, variant)
    linear = build_linear_graph(labels, vocab_size)
    return connect(compose(topo, linear))


def collapse_ctc(alignment: Iterable[int]) -> list[int]:
    """CTC collapse: merge adjacent duplicates, then delete blanks."""
    return [k for k, _ in itertools.groupby(alignment) if k != BLANK]


def collapse_transducer(alignment: Iterable[int]) -> list[int]:
    """Transducer collapse: delete blanks only, duplicates survive."""
    return [k for k in alignment if k != BLANK]


def _max_nonblank_run(alignment: Sequence[int]) -> int:
    longest = 0
    for k, group in itertools.groupby(alignment):
        if k != BLANK:
            longest = max(longest, sum(1 for _ in group))
    return longest


def enumerate_alignments(
    labels: Sequence[int], frames: int, variant: TopologyVariant = STANDARD
) -> set[tuple[int, ...]]:
    """Brute-force the alignment set: every length-``frames`` string over
    blank plus the transcript's symbols that collapses to the transcript,
    filtered by the hard run-length rule when applicable.

    Guarded to ``frames`` <= 12 and <= 4 distinct symbols; this is the
    test oracle, not a production path.
    """
    _validate_labels(labels, None)
    symbols = sorted(set(labels))
    if frames > MAX_ENUM_FRAMES or len(symbols) > MAX_ENUM_SYMBOLS:
        raise ValueError(
            f"enumeration guard: need frames <= {MAX_ENUM_FRAMES} and "
            f"<= {MAX_ENUM_SYMBOLS} distinct symbols"
        )
    alphabet = [BLANK] + symbols
    target = list(labels)
    out: set[tuple[int, ...]] = set()
    for candidate in itertools.product(alphabet, repeat=frames):
        if collapse_ctc(candidate) != target:
            continue
        if variant.kind == "hard" and _max_nonblank_run(candidate) > variant.max_run:
            continue
        out.add(candidate)
    return out
