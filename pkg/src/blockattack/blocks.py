"""Block hierarchy over the noise canvas and the hierarchical attack loop."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import AttackSucceeded, BudgetExhausted, ConfigurationError, DomainError
from .setfn import SearchTrace, lazy_greedy_delete, lazy_greedy_insert


@dataclass(frozen=True)
class ImageSpec:
    """Image geometry. Images are float arrays of shape (height, width, channels)."""

    height: int
    width: int
    channels: int = 1
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if min(self.height, self.width, self.channels) < 1:
            raise ConfigurationError("image dimensions must be >= 1")
        if not self.lo < self.hi:
            raise ConfigurationError("value range needs lo < hi")

    @property
    def shape(self):
        return (self.height, self.width, self.channels)

    @property
    def size(self):
        return self.height * self.width * self.channels


@dataclass(frozen=True)
class NoiseCanvas:
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigurationError("canvas dimensions must be >= 1")


class Block(NamedTuple):
    channel: int
    row0: int
    col0: int
    size: int


@dataclass(frozen=True)
class BlockGrid:
    """Per-channel tiling of the canvas into k x k blocks.

    Block ids run over (channel, row, col) in C order. ``working`` holds the
    ids assigned +epsilon; every other block gets -epsilon.
    """

    canvas: NoiseCanvas
    channels: int
    k: int
    working: frozenset = frozenset()

    @property
    def rows(self):
        return self.canvas.height // self.k

    @property
    def cols(self):
        return self.canvas.width // self.k

    def __len__(self):
        return self.rows * self.cols * self.channels

    @property
    def blocks(self):
        k = self.k
        return [Block(c, r * k, q * k, k)
                for c in range(self.channels)
                for r in range(self.rows)
                for q in range(self.cols)]

    def block_id(self, channel, row, col):
        """Id of the block at block-space coordinates (row, col)."""
        return (channel * self.rows + row) * self.cols + col

    def with_working(self, working):
        return BlockGrid(self.canvas, self.channels, self.k, frozenset(working))

    def sign_field(self, working=None):
        """Canvas-resolution array (channels, H, W) of +1/-1."""
        working = self.working if working is None else working
        signs = -np.ones(len(self))
        if working:
            signs[np.fromiter(working, dtype=np.intp)] = 1.0
        signs = signs.reshape(self.channels, self.rows, self.cols)
        return np.repeat(np.repeat(signs, self.k, axis=1), self.k, axis=2)


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 0.05
    initial_k: int = 4
    batch_size: int = 64
    max_queries: int = 10000
    max_rounds: int = 100
    clip: bool = True
    best_side: bool = False
    canvas: Optional[NoiseCanvas] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        k = self.initial_k
        if k < 1 or k & (k - 1):
            raise ConfigurationError("initial_k must be a power of two")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.max_queries < 0 or self.max_rounds < 1:
            raise ConfigurationError("max_queries must be >= 0 and max_rounds >= 1")


@dataclass
class AttackResult:
    success: bool
    queries: int
    working: frozenset
    k: int
    x_adv: np.ndarray
    value: Optional[float]
    trajectory: list = field(default_factory=list)
    rounds: int = 0
    set_evals: int = 0
    stop_reason: str = ""


def default_canvas(spec: ImageSpec, initial_k: int) -> NoiseCanvas:
    """Image dims when both divide by ``initial_k``; otherwise, per axis, the
    smallest ``initial_k * 2**m`` that is at least half the image side."""
    if spec.height % initial_k == 0 and spec.width % initial_k == 0:
        return NoiseCanvas(spec.height, spec.width)

    def side(n):
        s = initial_k
        while s < n / 2:
            s *= 2
        return s

    return NoiseCanvas(side(spec.height), side(spec.width))


def build_ground_set(spec: ImageSpec, canvas: NoiseCanvas, k: int) -> BlockGrid:
    if k < 1 or canvas.height % k or canvas.width % k:
        raise ConfigurationError(f"block size {k} does not divide canvas {canvas.height}x{canvas.width}")
    return BlockGrid(canvas, spec.channels, k)


def split_blocks(grid: BlockGrid) -> BlockGrid:
    """Replace each block by its four quadrants; children inherit membership."""
    if grid.k < 2:
        raise DomainError("cannot split blocks of size 1")
    child = BlockGrid(grid.canvas, grid.channels, grid.k // 2)
    working = set()
    per_channel = grid.rows * grid.cols
    for b in grid.working:
        c, rem = divmod(b, per_channel)
        r, q = divmod(rem, grid.cols)
        for dr in (0, 1):
            for dq in (0, 1):
                working.add(child.block_id(c, 2 * r + dr, 2 * q + dq))
    return child.with_working(working)


def nearest_indices(src_len: int, dst_len: int) -> np.ndarray:
    """Nearest-neighbour source index for each destination index."""
    return (np.arange(dst_len) * src_len) // dst_len


def assemble_perturbation(x, grid: BlockGrid, S=None, epsilon: float = 1.0,
                          clip: bool = True, spec: Optional[ImageSpec] = None) -> np.ndarray:
    """x + epsilon on blocks in S, x - epsilon elsewhere, resized to the image
    by nearest neighbour and optionally clamped to the value range."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[2] != grid.channels:
        raise DomainError(f"image shape {x.shape} does not match {grid.channels} channels")
    field_ = grid.sign_field(grid.working if S is None else S)
    h, w = x.shape[:2]
    rows = nearest_indices(grid.canvas.height, h)
    cols = nearest_indices(grid.canvas.width, w)
    noise = field_[:, rows][:, :, cols].transpose(1, 2, 0)
    x_adv = x + epsilon * noise
    if clip:
        lo, hi = (spec.lo, spec.hi) if spec is not None else (0.0, 1.0)
        x_adv = np.clip(x_adv, lo, hi)
    return x_adv


def partition_minibatches(V, batch_size: int):
    """Contiguous slices of the ground set, in order."""
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    V = list(V)
    return [V[i:i + batch_size] for i in range(0, len(V), batch_size)]


def hierarchical_attack(oracle, x, cfg: AttackConfig, spec: Optional[ImageSpec] = None) -> AttackResult:
    """Coarse-to-fine lazy local search over +/-epsilon block perturbations.

    Each round sweeps the mini-batches in ground-set order, running lazy
    insertion restricted to the batch and then lazy deletion restricted to
    the batch members of the working set; blocks are then split while k > 1.
    Stops on success, budget exhaustion, a round at k = 1 that changes
    nothing, or ``cfg.max_rounds``.
    """
    x = np.asarray(x, dtype=float)
    if spec is None:
        spec = ImageSpec(*x.shape)
    canvas = cfg.canvas or default_canvas(spec, cfg.initial_k)
    grid = build_ground_set(spec, canvas, cfg.initial_k)
    trace = SearchTrace(working=frozenset())
    set_evals = 0
    rounds = 0
    stop = ""

    def result(success, working, value, reason):
        final = grid.with_working(working)
        return AttackResult(
            success=success,
            queries=oracle.ledger.count,
            working=frozenset(working),
            k=final.k,
            x_adv=assemble_perturbation(x, final, None, cfg.epsilon, cfg.clip, spec),
            value=value,
            trajectory=list(oracle.ledger.trajectory),
            rounds=rounds,
            set_evals=set_evals + F.eval_count,
            stop_reason=reason,
        )

    F = oracle.as_set_function(x, grid, cfg.epsilon, cfg.clip, spec=spec, stop_on_success=True)
    if oracle.ledger.remaining <= 0:
        return result(False, frozenset(), None, "budget")
    try:
        trace.value = F(frozenset())
        while True:
            changed = False
            for batch in partition_minibatches(range(len(grid)), cfg.batch_size):
                before = trace.working
                S = lazy_greedy_insert(F, trace.working, batch, value=trace.value, trace=trace)
                lazy_greedy_delete(F, S, candidates=S.intersection(batch), value=trace.value, trace=trace)
                changed |= trace.working != before
            if cfg.best_side:
                comp = frozenset(range(len(grid))) - trace.working
                comp_value = F(comp)
                if comp_value > trace.value:
                    trace.working, trace.value = comp, comp_value
                    changed = True
            rounds += 1
            if grid.k > 1:
                set_evals += F.eval_count
                grid = split_blocks(grid.with_working(trace.working))
                trace.working = grid.working
                F = oracle.as_set_function(x, grid, cfg.epsilon, cfg.clip, spec=spec, stop_on_success=True)
            elif not changed:
                stop = "converged"
                break
            if rounds >= cfg.max_rounds:
                stop = "max_rounds"
                break
    except AttackSucceeded as hit:
        return result(True, hit.working, hit.value, "success")
    except BudgetExhausted:
        return result(False, trace.working, trace.value, "budget")
    return result(oracle.ledger.success, trace.working, trace.value, stop)
