"""Move blocking over a shrinking horizon.

At step ``k`` the remaining horizon ``H = k_f - k`` is split into ``N(k)``
intervals; the input is held constant inside each interval so only ``N(k)``
free values are optimized.

``shrinking`` policy
    ``N(k) = ceil(H / L)``. Every interval has exactly ``L`` moves except the
    first, which holds between 1 and ``L``. Interval boundaries are anchored
    at the terminal step, so the first interval shrinks by one move per step
    and disappears when it is used up.
``constant`` policy
    ``N(k) = min(N(0), H)``. Later intervals keep length ``L`` and the
    earliest ones are shortened first; once ``H <= N(0)`` every move is free.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

__all__ = [
    "BlockingPolicy",
    "BlockedSequence",
    "BlockingError",
    "block_index",
    "block_lengths",
    "eq_block_index_absolute",
    "expand",
    "num_blocks",
    "warm_start_tail",
]

VARIANTS = ("shrinking", "constant")


class BlockingError(ValueError):
    pass


@dataclass(frozen=True)
class BlockingPolicy:
    L: int
    variant: str = "shrinking"

    def __post_init__(self):
        if not isinstance(self.L, int) or self.L < 1:
            raise BlockingError(f"L must be a positive integer, got {self.L!r}")
        if self.variant not in VARIANTS:
            raise BlockingError(f"unknown blocking variant {self.variant!r}")

    def validate(self, k_f: int) -> None:
        if self.L > k_f:
            raise BlockingError(f"L={self.L} exceeds k_f={k_f}")


def _check_k(k: int, k_f: int) -> None:
    if not 0 <= k <= k_f - 1:
        raise BlockingError(f"time step k={k} outside [0, {k_f - 1}]")


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def num_blocks(k: int, k_f: int, policy: BlockingPolicy) -> int:
    """Number of free input values at step ``k``."""
    _check_k(k, k_f)
    horizon = k_f - k
    if policy.variant == "shrinking":
        return _ceil_div(horizon, policy.L)
    return min(_ceil_div(k_f, policy.L), horizon)


def block_lengths(k: int, k_f: int, policy: BlockingPolicy) -> tuple[int, ...]:
    """Lengths of the intervals covering ``j = 0 .. k_f-k-1``, first to last."""
    n = num_blocks(k, k_f, policy)
    horizon = k_f - k
    L = policy.L
    if policy.variant == "shrinking":
        return (horizon - (n - 1) * L,) + (L,) * (n - 1)
    # Fill from the back with full intervals, leaving at least one move for
    # each earlier interval.
    out = []
    remaining = horizon
    for before in range(n - 1, -1, -1):
        length = min(L, remaining - before)
        out.append(length)
        remaining -= length
    return tuple(reversed(out))


def block_index(j: int, k: int, k_f: int, policy: BlockingPolicy) -> int:
    """1-based interval number holding prediction offset ``j`` at step ``k``."""
    _check_k(k, k_f)
    if not 0 <= j <= k_f - k - 1:
        raise BlockingError(f"prediction offset j={j} outside [0, {k_f - k - 1}]")
    if policy.variant == "shrinking":
        first = k_f - k - (num_blocks(k, k_f, policy) - 1) * policy.L
        return 1 if j < first else 2 + (j - first) // policy.L
    acc = 0
    for i, length in enumerate(block_lengths(k, k_f, policy), start=1):
        acc += length
        if j < acc:
            return i
    raise AssertionError("unreachable")


def eq_block_index_absolute(j: int, k: int, L: int) -> int:
    """Interval number with boundaries at absolute multiples of ``L``.

    Agrees with :func:`block_index` for the shrinking policy whenever ``L``
    divides ``k_f``.
    """
    return (j + k - (k // L) * L) // L + 1


@dataclass(frozen=True)
class BlockedSequence:
    """Free input values built for time step ``k_origin``.

    ``values`` holds one action per interval: a float, or
    :data:`sbpc.dynamics.CRUISE`.
    """

    values: tuple[Any, ...]
    k_origin: int
    policy: BlockingPolicy
    k_f: int

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        n = num_blocks(self.k_origin, self.k_f, self.policy)
        if len(self.values) != n:
            raise BlockingError(
                f"expected {n} free values at k={self.k_origin}, got {len(self.values)}"
            )

    @property
    def N(self) -> int:
        return len(self.values)


def expand(seq: BlockedSequence, k: int | None = None) -> list:
    """Full predicted input list ``u(0|k) .. u(k_f-k-1|k)``."""
    if k is not None and k != seq.k_origin:
        raise BlockingError(f"sequence built for k={seq.k_origin}, expanded at k={k}")
    return expand_values(seq.values, block_lengths(seq.k_origin, seq.k_f, seq.policy))


def expand_values(values: Sequence[Any], lengths: Sequence[int]) -> list:
    out: list = []
    for v, n in zip(values, lengths):
        out.extend([v] * n)
    return out


def warm_start_tail(prev: BlockedSequence, k_next: int | None = None) -> BlockedSequence:
    """Candidate for step ``k+1`` that reproduces the remainder of ``prev``.

    For the shrinking policy this is ``prev`` itself when the interval count is
    unchanged and ``prev`` without its first value otherwise. For the constant
    policy the new partition refines the shifted old one, so each new interval
    takes the value the old plan had at its first move.
    """
    k = prev.k_origin
    if k_next is None:
        k_next = k + 1
    if k_next != k + 1:
        raise BlockingError(f"tail of a k={k} sequence is built for k={k + 1}, not {k_next}")
    _check_k(k_next, prev.k_f)
    n_now = len(prev.values)
    n_next = num_blocks(k_next, prev.k_f, prev.policy)
    if prev.policy.variant == "shrinking":
        values = prev.values if n_next == n_now else prev.values[1:]
        return BlockedSequence(values, k_next, prev.policy, prev.k_f)
    shifted = expand(prev)[1:]
    values = []
    start = 0
    for length in block_lengths(k_next, prev.k_f, prev.policy):
        values.append(shifted[start])
        start += length
    return BlockedSequence(tuple(values), k_next, prev.policy, prev.k_f)
