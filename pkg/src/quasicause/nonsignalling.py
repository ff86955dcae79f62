"""Multipartite channels and the non-signalling decision procedure.

A channel is split into wings, one (input, output) wire pair per party. For
every nonempty proper labelled subset K of wings we discard the K outputs and
compare against a candidate marginal channel obtained by feeding reference
states into the K inputs; the channel is non-signalling iff every subset's
residual is within tolerance. If an exact factorization exists the candidate
construction recovers it, because plugging any normalized state into a
discarded leg leaves the remaining factor unchanged.

Wing labels are 1-based throughout this module's public surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .errors import OutOfRange, TypeMismatch
from .procs import (
    LinearProcess,
    compose_par,
    compose_seq,
    effective_tol,
    identity,
    max_abs_diff,
    number,
    permutation,
)
from .theories import Theory
from .wires import Signature, SystemType


@dataclass(frozen=True)
class MultipartiteChannel:
    """A theory-valid, discard-preserving process with one wire per wing."""

    wings: Tuple[Tuple[SystemType, SystemType], ...]
    body: LinearProcess
    theory: Theory

    def __post_init__(self):
        in_sig = Signature(tuple(w_in for w_in, _ in self.wings))
        out_sig = Signature(tuple(w_out for _, w_out in self.wings))
        if (
            self.body.inputs.wires != in_sig.wires
            or self.body.outputs.wires != out_sig.wires
        ):
            raise TypeMismatch("body signature does not match the wing list")
        if not self.theory.valid(self.body):
            raise TypeMismatch("body is not a valid channel of the theory")

    @property
    def m(self) -> int:
        return len(self.wings)

    def input_types(self) -> Tuple[SystemType, ...]:
        return tuple(w for w, _ in self.wings)

    def output_types(self) -> Tuple[SystemType, ...]:
        return tuple(w for _, w in self.wings)


@dataclass(frozen=True)
class SubsetCheck:
    subset: Tuple[int, ...]
    residual: object
    marginal: LinearProcess


@dataclass(frozen=True)
class NSReport:
    checks: Tuple[SubsetCheck, ...]
    tolerance: object
    verdict: bool = field(init=False)

    def __post_init__(self):
        worst = max((c.residual for c in self.checks), default=0)
        object.__setattr__(self, "verdict", bool(worst <= self.tolerance))

    @property
    def max_residual(self):
        return max((c.residual for c in self.checks), default=0)


def bipartition_perm(m: int, subset: Sequence[int]) -> Tuple[int, ...]:
    """Wire order taking (1..m) to (k_1..k_n, then the complement ascending).

    ``subset`` is an ordered collection of 1-based wing labels.
    """
    subset = tuple(subset)
    if len(set(subset)) != len(subset):
        raise OutOfRange("subset labels must be distinct")
    for k in subset:
        if not 1 <= k <= m:
            raise OutOfRange(f"wing label {k} outside 1..{m}")
    complement = tuple(i for i in range(1, m + 1) if i not in subset)
    return subset + complement


def discard_outputs(
    channel: MultipartiteChannel, subset: Sequence[int]
) -> LinearProcess:
    """Contract the output wires of the K wings with the theory discards.

    Remaining outputs keep their original relative order (the complement
    order of the bipartitioning convention).
    """
    subset = _checked_subset(channel.m, subset, allow_full=True)
    if not subset:
        raise OutOfRange("subset of outputs to discard must be nonempty")
    eat = number(1)
    for label, (_, w_out) in enumerate(channel.wings, start=1):
        if label in subset:
            piece = channel.theory.discard(w_out)
        else:
            piece = identity(Signature((w_out,)))
        eat = compose_par(eat, piece)
    return compose_seq(channel.body, eat)


def plug_reference_inputs(
    channel: MultipartiteChannel, marginal: LinearProcess, subset: Sequence[int]
) -> LinearProcess:
    """Feed theory reference states into the K inputs of a marginal."""
    feed = number(1)
    for label, (w_in, _) in enumerate(channel.wings, start=1):
        if label in subset:
            piece = channel.theory.reference_state(w_in)
        else:
            piece = identity(Signature((w_in,)))
        feed = compose_par(feed, piece)
    return compose_seq(feed, marginal)


def check_nonsignalling(
    channel: MultipartiteChannel, tol: Optional[object] = None
) -> NSReport:
    """Decide the non-signalling property over all 2^m - 2 labelled subsets."""
    tolerance = effective_tol(channel.body.arithmetic, tol)
    checks: List[SubsetCheck] = []
    for subset in proper_subsets(channel.m):
        discarded = discard_outputs(channel, subset)
        candidate = plug_reference_inputs(channel, discarded, subset)
        rebuilt = _discard_k_inputs_then(channel, candidate, subset)
        residual = max_abs_diff(discarded, rebuilt)
        checks.append(SubsetCheck(subset, residual, candidate))
    return NSReport(tuple(checks), tolerance)


def _discard_k_inputs_then(
    channel: MultipartiteChannel, candidate: LinearProcess, subset: Sequence[int]
) -> LinearProcess:
    # (discards on K inputs) tensored with identities, then the candidate
    front = number(1)
    for label, (w_in, _) in enumerate(channel.wings, start=1):
        if label in subset:
            front = compose_par(front, channel.theory.discard(w_in))
        else:
            front = compose_par(front, identity(Signature((w_in,))))
    return compose_seq(front, candidate)


def proper_subsets(m: int) -> List[Tuple[int, ...]]:
    """All nonempty proper subsets of {1..m}, ascending order inside each."""
    out = []
    for mask in range(1, 2 ** m - 1):
        out.append(tuple(i + 1 for i in range(m) if mask >> i & 1))
    return sorted(out, key=lambda s: (len(s), s))


def _checked_subset(m: int, subset: Sequence[int], allow_full=False) -> Tuple[int, ...]:
    subset = tuple(sorted(set(subset)))
    for k in subset:
        if not 1 <= k <= m:
            raise OutOfRange(f"wing label {k} outside 1..{m}")
    if not allow_full and len(subset) == m:
        raise OutOfRange("subset must be proper")
    return subset


def assemble_common_cause(
    shared_state: LinearProcess,
    locals_: Sequence[LinearProcess],
    theory: Theory,
) -> MultipartiteChannel:
    """Wire local channels over a shared state (the common-cause shape).

    ``shared_state`` is a state on the ancilla wires (one per wing, in wing
    order); ``locals_[i]`` maps (wing input, ancilla_i) to the wing output.
    """
    m = len(locals_)
    if len(shared_state.outputs) != m:
        raise TypeMismatch("need one ancilla wire per wing")
    wings = []
    for i, t in enumerate(locals_):
        if len(t.inputs) != 2 or len(t.outputs) != 1:
            raise TypeMismatch("local channels must map (input, ancilla) -> output")
        if t.inputs[1] != shared_state.outputs[i]:
            raise TypeMismatch(f"ancilla type mismatch on wing {i + 1}")
        wings.append((t.inputs[0], t.outputs[0]))

    in_sig = Signature(tuple(w for w, _ in wings))
    body = compose_par(identity(in_sig), shared_state)
    # interleave (1..m, a_1..a_m) -> (1, a_1, 2, a_2, ...)
    order = []
    for i in range(m):
        order.extend([i, m + i])
    body = compose_seq(body, permutation(body.outputs, order))
    locals_stack = number(1)
    for t in locals_:
        locals_stack = compose_par(locals_stack, t)
    body = compose_seq(body, locals_stack)
    return MultipartiteChannel(tuple(wings), body, theory)
