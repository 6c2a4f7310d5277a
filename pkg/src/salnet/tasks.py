"""Training tasks: sequential 3-bit parity with a long lag, noisy 8-bit parity."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import Rng

PARITY_TARGET = 0.8


def parity_target(bits) -> float:
    """+0.8 for an odd number of 1-bits, -0.8 otherwise."""
    return PARITY_TARGET if int(np.sum(bits)) % 2 == 1 else -PARITY_TARGET


@dataclass(frozen=True)
class SequencePattern:
    bits: tuple[int, ...]
    schedule: tuple[tuple[int, int, float], ...]  # (step, channel, value)
    target: float
    t_max: int = 300

    def inputs(self, n_channels: int = 3) -> np.ndarray:
        """Dense ``(t_max + 1, n_channels)`` input sequence; zero off-schedule."""
        x = np.zeros((self.t_max + 1, n_channels))
        for step, channel, value in self.schedule:
            x[step, channel] = value
        return x


@dataclass(frozen=True)
class StaticPattern:
    bits: tuple[int, ...]
    inputs: np.ndarray
    target: float


def parity3_patterns(interval: int = 100, t_max: int = 300, amplitude: float = 1.0) -> list[SequencePattern]:
    """All eight 3-bit words, one input channel per bit.

    Bit ``k`` arrives on channel ``k`` at step ``k * interval`` as a single
    pulse of ``+amplitude`` (bit 1) or ``-amplitude`` (bit 0).
    """
    patterns = []
    for bits in itertools.product((0, 1), repeat=3):
        schedule = tuple(
            (k * interval, k, amplitude if b else -amplitude) for k, b in enumerate(bits)
        )
        patterns.append(SequencePattern(bits, schedule, parity_target(bits), t_max))
    return patterns


def parity8_words() -> np.ndarray:
    """The 256 8-bit words as a ``(256, 8)`` 0/1 array, enumeration order."""
    return np.array(list(itertools.product((0, 1), repeat=8)), dtype=np.int64)


def parity8_clean_inputs() -> tuple[np.ndarray, np.ndarray]:
    """Noiseless ``(256, 8)`` inputs in {-1, +1} and the matching targets."""
    words = parity8_words()
    targets = np.where(words.sum(axis=1) % 2 == 1, PARITY_TARGET, -PARITY_TARGET)
    return 2.0 * words - 1.0, targets


def parity8_pattern(bits, rng: Rng | None = None, noise_range: float = 0.2) -> StaticPattern:
    bits = tuple(int(b) for b in bits)
    if len(bits) != 8:
        raise ValueError("an 8-bit word is required")
    x = 2.0 * np.asarray(bits, dtype=np.float64) - 1.0
    if rng is not None and noise_range > 0:
        x = x + rng.uniform(-noise_range, noise_range, 8)
    return StaticPattern(bits, x, parity_target(bits))


def noisy_inputs(clean: np.ndarray, rng: Rng, noise_range: float = 0.2) -> np.ndarray:
    """Fresh per-element uniform noise for one epoch of presentations."""
    if noise_range <= 0:
        return clean.copy()
    return clean + rng.uniform(-noise_range, noise_range, clean.shape)


def random_probe_inputs(rng: Rng, count: int = 1000, dim: int = 8) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, (count, dim))


def export_patterns_csv(path, patterns) -> None:
    """Write sequence or static patterns as CSV, one row per pattern."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if patterns and isinstance(patterns[0], SequencePattern):
            w.writerow(["bits", "schedule", "target"])
            for p in patterns:
                sched = ";".join(f"{s}:{c}:{v!r}" for s, c, v in p.schedule)
                w.writerow(["".join(map(str, p.bits)), sched, repr(p.target)])
        else:
            w.writerow(["bits"] + [f"x{i}" for i in range(8)] + ["target"])
            for p in patterns:
                w.writerow(["".join(map(str, p.bits))] + [repr(float(v)) for v in p.inputs] + [repr(p.target)])
