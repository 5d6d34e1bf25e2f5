"""Multi-pass streaming execution with pass counting and a memory meter.

An algorithm sees the constraints of an instance in stream order, once per
pass, and reports the size of its own state after every pass.  The runner
never looks inside that state; the memory figure is advisory.

Randomness is counter based.  ``keyed_rng(seed, *key)`` gives an independent
Philox stream for any integer key, so per-pass and per-object streams can be
derived without sharing generator state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Generator, Iterable

import numpy as np

from .csp import Instance
from .errors import CspError, PassCapExceeded

DEFAULT_PASS_CAP = 10_000

Constraint = tuple[tuple[int, ...], int]
PassHandler = Callable[[Constraint], None]


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, key)])))


def int_bits(value: int) -> int:
    return max(1, int(value).bit_length())


class StreamingAlgorithm:
    """Base class.  Subclasses override the hooks they need."""

    declared_space_bits: int | None = None  # None means unbounded

    def init(self, seed: int, num_vars: int) -> None:
        self.seed = seed
        self.num_vars = num_vars

    def begin_pass(self, pass_index: int) -> None:
        pass

    def process(self, constraint: Constraint) -> None:
        pass

    def end_pass(self) -> bool:
        """Return True when no further pass is needed."""
        return True

    def output(self) -> Any:
        return None

    def state_bits(self) -> int:
        return 0


class ProgramAlgorithm(StreamingAlgorithm):
    """Adapter for algorithms written as generators.

    The generator receives a :class:`PassContext` and yields one handler per
    pass; each handler is fed the whole stream before the generator resumes.
    Its return value is the output.
    """

    def __init__(self, program: Callable[["PassContext"], Generator[PassHandler, None, Any]]):
        self.program = program

    def init(self, seed: int, num_vars: int) -> None:
        super().init(seed, num_vars)
        self.ctx = PassContext(seed, num_vars)
        self._gen = self.program(self.ctx)
        self._result = None
        self._done = False
        self._handler = self._advance()

    def _advance(self):
        try:
            return next(self._gen)
        except StopIteration as stop:
            self._done = True
            self._result = stop.value
            return None

    def begin_pass(self, pass_index: int) -> None:
        self.ctx.pass_index = pass_index
        if self._handler is None:
            raise CspError("program requested no pass")

    def process(self, constraint: Constraint) -> None:
        self._handler(constraint)

    def end_pass(self) -> bool:
        self._handler = self._advance()
        return self._done

    def output(self) -> Any:
        return self._result

    def state_bits(self) -> int:
        return self.ctx.bits


@dataclass
class PassContext:
    seed: int
    num_vars: int
    pass_index: int = 0
    bits: int = 0  # self-reported working-state size

    def rng(self, *key: int) -> np.random.Generator:
        return keyed_rng(self.seed, *key)


@dataclass(frozen=True)
class StreamRun:
    passes_used: int
    peak_tracked_bits: int
    output: Any
    seed: int
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = self.output
        if isinstance(out, Fraction):
            out = str(out)
        return {"passes": self.passes_used, "bits": self.peak_tracked_bits, "output": out, "seed": self.seed, **self.extra}

    def summary(self) -> str:
        out = self.output
        return f"passes={self.passes_used} bits={self.peak_tracked_bits} output={out}"


def run_multipass(
    alg: StreamingAlgorithm, instance: Instance, seed: int, pass_cap: int = DEFAULT_PASS_CAP
) -> StreamRun:
    if instance.m == 0:
        raise CspError("cannot stream an empty instance")
    alg.init(seed, instance.num_vars)
    passes, peak = 0, alg.state_bits()
    while True:
        if passes >= pass_cap:
            raise PassCapExceeded(f"algorithm exceeded the cap of {pass_cap} passes")
        alg.begin_pass(passes)
        passes += 1
        for c in instance.constraints:
            alg.process(c)
        done = alg.end_pass()
        peak = max(peak, alg.state_bits())
        if done:
            break
    return StreamRun(passes, peak, alg.output(), seed)


# ---------------------------------------------------------------------------
# small reference algorithms


class CountingAlgorithm(StreamingAlgorithm):
    """One pass; outputs m."""

    def init(self, seed, num_vars):
        super().init(seed, num_vars)
        self.count = 0

    def process(self, constraint):
        self.count += 1

    def output(self):
        return self.count

    def state_bits(self):
        return int_bits(self.count)


class QuarterDicut(StreamingAlgorithm):
    """Counts arcs and reports m/4, the value a uniform assignment achieves on DICUT."""

    def init(self, seed, num_vars):
        super().init(seed, num_vars)
        self.count = 0

    def process(self, constraint):
        self.count += 1

    def output(self):
        return Fraction(self.count, 4)

    def state_bits(self):
        return int_bits(self.count)


class RecordingAlgorithm(StreamingAlgorithm):
    """Records what it observes in each of ``passes`` passes."""

    def __init__(self, passes: int = 2):
        self.passes = passes

    def init(self, seed, num_vars):
        super().init(seed, num_vars)
        self.seen: list[list[Constraint]] = []

    def begin_pass(self, pass_index):
        self.seen.append([])

    def process(self, constraint):
        self.seen[-1].append(constraint)

    def end_pass(self):
        return len(self.seen) >= self.passes

    def output(self):
        return tuple(tuple(p) for p in self.seen)

    def state_bits(self):
        return sum(len(p) for p in self.seen)


def runs_equal(a: StreamRun, b: StreamRun) -> bool:
    return json.dumps(a.to_json(), default=str) == json.dumps(b.to_json(), default=str)


def iter_seeds(seed: int, count: int) -> Iterable[int]:
    return (seed + i for i in range(count))
