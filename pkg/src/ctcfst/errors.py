"""Exceptions shared across the package."""

from __future__ import annotations


class CtcFstError(Exception):
    """Base class for domain errors (as opposed to usage errors)."""


class NoPathError(CtcFstError):
    """Raised when an operation needs at least one start-to-final path."""


class InfeasibleAlignmentError(CtcFstError):
    """No valid alignment exists for the given label/frame combination.

    Typically the frame count is shorter than the minimum alignment length
    (label count plus one mandatory blank per adjacent duplicate pair).
    """

    def __init__(self, num_frames: int, num_labels: int, variant: object):
        self.num_frames = num_frames
        self.num_labels = num_labels
        self.variant = variant
        super().__init__(
            f"no valid alignment: {num_labels} labels do not fit in "
            f"{num_frames} frames under {variant}"
        )


class TrainingDivergedError(CtcFstError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"training diverged at step {step}")
