"""Affine decomposition of non-signalling channels over product local frames,
and the packaged common-cause realization built from it.

The decomposition works wing by wing. Each wing gets a *local channel frame*:
a finite family of valid discard-preserving channels whose affine hull is the
whole discard-preserving subspace for that (input, output) pair. Tensoring
the per-wing frame pseudo-inverses gives the minimum-norm solution of

    channel = sum_k c_k  (x)_i  Phi_i^{j_i(k)},        sum_k c_k = 1,

exactly (rational mode) or in binary64. The coefficient sum is automatic:
every frame member is discard-preserving, so applying the output discard and
any normalized probe state to both sides forces sum c = 1 for *any* solution.

The realization packages the mixture as a correlated quasi-state ``xi`` on
fresh branded ancilla wires plus one controlled channel ``eta_i`` per wing:
``xi`` places coefficient c_k on the k-th diagonal point of the ancilla
product, and ``eta_i`` applies the k-th frame member when its ancilla reads
k. Recomposing ``(x)_i eta_i`` over ``xi`` reproduces the channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import count
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from . import exact
from .errors import (
    FrameDeficient,
    NotNonSignalling,
    ResidualTooLarge,
    SignatureMismatch,
)
from .nonsignalling import MultipartiteChannel, NSReport, check_nonsignalling
from .procs import (
    RATIONAL,
    LinearProcess,
    compose_seq,
    effective_tol,
    max_abs_diff,
    scale,
)
from .theories import Theory, discard_effect, hybrid_valid
from .wires import CLASSICAL, Signature, SystemType, extension, sig

PRUNE = 1e-12

MIN_NORM = "min-norm"
MIN_NEGATIVITY = "min-negativity"


@dataclass(frozen=True)
class WingFrame:
    """Spanning family of valid local channels for one wing.

    ``retained`` indexes a leftmost-first maximal linearly independent
    subfamily; the solver works over retained members only, which makes the
    affine solution unique, while coefficients keep full-family indexing.
    """

    in_type: SystemType
    out_type: SystemType
    members: Tuple[LinearProcess, ...]
    retained: Tuple[int, ...] = ()

    def __post_init__(self):
        if not self.retained:
            f = self.matrix(as_float=not self.exact)
            if self.exact:
                kept = exact.independent_columns(f)
            else:
                kept = _independent_columns_float(f)
            object.__setattr__(self, "retained", tuple(kept))

    def __len__(self):
        return len(self.members)

    @property
    def exact(self) -> bool:
        return all(m.arithmetic == RATIONAL for m in self.members)

    def matrix(self, as_float: bool = False) -> np.ndarray:
        cols = [m.matrix.reshape(-1) for m in self.members]
        out = np.stack(cols, axis=1)
        return out.astype(float) if as_float else out

    def retained_matrix(self, as_float: bool = False) -> np.ndarray:
        return self.matrix(as_float)[:, list(self.retained)]


def _independent_columns_float(f: np.ndarray, tol: float = 1e-9) -> Tuple[int, ...]:
    kept: List[int] = []
    for j in range(f.shape[1]):
        trial = f[:, kept + [j]]
        if np.linalg.matrix_rank(trial, tol=tol) == len(kept) + 1:
            kept.append(j)
    return tuple(kept)


@dataclass(frozen=True)
class QuasiMixture:
    """Affine coefficients over tuples of per-wing frame indices."""

    terms: Tuple[Tuple[object, Tuple[int, ...]], ...]
    residual: object
    mode: str

    @property
    def coefficient_sum(self):
        return sum(c for c, _ in self.terms)

    def min_coefficient(self):
        return min(c for c, _ in self.terms)


@dataclass(frozen=True)
class TypeBrand:
    """Bookkeeping for one fresh ancilla type: who owns it and its carrier."""

    ext_type: SystemType
    channel_id: str
    wing: int
    carrier: int


@dataclass(frozen=True)
class CommonCauseRealization:
    channel_id: str
    ancilla_types: Tuple[SystemType, ...]
    xi: LinearProcess
    etas: Tuple[LinearProcess, ...]
    brands: Tuple[TypeBrand, ...]
    frame: Tuple[WingFrame, ...]
    coefficients: Tuple[object, ...]
    term_indices: Tuple[Tuple[int, ...], ...]

    @property
    def carrier_dim(self) -> int:
        return len(self.coefficients)


def deterministic_frame(in_type: SystemType, out_type: SystemType) -> Tuple[LinearProcess, ...]:
    """All functions input point -> output point, as 0/1 channels."""
    n, p = in_type.vdim, out_type.vdim
    members = []
    for code in range(p ** n):
        digits = []
        rem = code
        for _ in range(n):
            digits.append(rem % p)
            rem //= p
        digits.reverse()  # leftmost input point most significant
        m = np.zeros((p, n), dtype=object)
        for x, o in enumerate(digits):
            m[o, x] = 1
        members.append(LinearProcess(sig(in_type), sig(out_type), m))
    return tuple(members)


def measure_prepare_frame(
    theory: Theory, in_type: SystemType, out_type: SystemType
) -> Tuple[LinearProcess, ...]:
    """Two-outcome measure-and-prepare family over the theory frames."""
    ref = theory.reference_state(out_type)
    u = theory.discard(in_type)
    base = compose_outer(ref, u)
    members = [base]
    for e in theory.effect_frame(in_type):
        for s in theory.state_frame(out_type):
            if max_abs_diff(s, ref) <= effective_tol(s.arithmetic):
                continue
            hit = compose_outer(s, e)
            miss_weight = subtract_rows(u, e)
            miss = compose_outer(ref, miss_weight)
            members.append(add_processes(hit, miss))
    return tuple(members)


def compose_outer(s: LinearProcess, e: LinearProcess) -> LinearProcess:
    """rho -> e(rho) * s as a single wing channel."""
    fm, em = s.matrix, e.matrix
    if fm.dtype == object and em.dtype != object:
        fm = fm.astype(float)
    if em.dtype == object and fm.dtype != object:
        em = em.astype(float)
    return LinearProcess(e.inputs, s.outputs, fm @ em)


def subtract_rows(u: LinearProcess, e: LinearProcess) -> LinearProcess:
    um, em = u.matrix, e.matrix
    if um.dtype != em.dtype:
        um, em = um.astype(float), em.astype(float)
    return LinearProcess(u.inputs, u.outputs, um - em)


def add_processes(f: LinearProcess, g: LinearProcess) -> LinearProcess:
    fm, gm = f.matrix, g.matrix
    if fm.dtype != gm.dtype:
        fm, gm = fm.astype(float), gm.astype(float)
    return LinearProcess(f.inputs, f.outputs, fm + gm)


def local_channel_frame(
    theory: Theory, in_type: SystemType, out_type: SystemType
) -> WingFrame:
    """Pick the smaller of the deterministic or measure-prepare families for
    classical pairs, the measure-prepare family otherwise; verify the affine
    hull has the full discard-preserving dimension."""
    if in_type.kind == CLASSICAL and out_type.kind == CLASSICAL:
        det_size = out_type.vdim ** in_type.vdim
        mp_size = 1 + in_type.vdim * out_type.vdim
        if det_size <= mp_size:
            members = deterministic_frame(in_type, out_type)
        else:
            members = measure_prepare_frame(theory, in_type, out_type)
    else:
        members = measure_prepare_frame(theory, in_type, out_type)
    frame = WingFrame(in_type, out_type, members)
    _validate_frame(frame)
    return frame


def _validate_frame(frame: WingFrame):
    want = frame.out_type.vdim * frame.in_type.vdim - frame.in_type.vdim
    f = frame.matrix(as_float=not frame.exact)
    diffs = f[:, 1:] - f[:, [0]]
    if frame.exact:
        got = exact.rank(diffs)
    else:
        got = int(np.linalg.matrix_rank(diffs, tol=1e-9))
    if got != want:
        raise FrameDeficient(
            f"frame for {frame.in_type.id}->{frame.out_type.id} spans affine "
            f"dimension {got}, need {want}"
        )


def default_frames(channel: MultipartiteChannel) -> Tuple[WingFrame, ...]:
    return tuple(
        local_channel_frame(channel.theory, w_in, w_out)
        for w_in, w_out in channel.wings
    )


def _wing_major_tensor(channel: MultipartiteChannel) -> np.ndarray:
    """Reshape the body so axis i runs over wing i's (out, in) pairs."""
    out_dims = tuple(w.vdim for _, w in channel.wings)
    in_dims = tuple(w.vdim for w, _ in channel.wings)
    m = channel.m
    t = channel.body.matrix.reshape(out_dims + in_dims)
    order = []
    for i in range(m):
        order.extend([i, m + i])
    t = np.transpose(t, order)
    return t.reshape(tuple(o * i for o, i in zip(out_dims, in_dims)))


def _unreorganize(tensor: np.ndarray, channel: MultipartiteChannel) -> np.ndarray:
    out_dims = tuple(w.vdim for _, w in channel.wings)
    in_dims = tuple(w.vdim for w, _ in channel.wings)
    m = channel.m
    interleaved = []
    for o, i in zip(out_dims, in_dims):
        interleaved.extend([o, i])
    t = tensor.reshape(tuple(interleaved))
    order = [2 * i for i in range(m)] + [2 * i + 1 for i in range(m)]
    t = np.transpose(t, order)
    total_out = math.prod(out_dims)
    total_in = math.prod(in_dims)
    return t.reshape(total_out, total_in)


def _mode_product(tensor: np.ndarray, matrix: np.ndarray, axis: int) -> np.ndarray:
    moved = np.tensordot(matrix, tensor, axes=([1], [axis]))
    return np.moveaxis(moved, 0, axis)


def decompose_quasimixture(
    channel: MultipartiteChannel,
    mode: str = MIN_NORM,
    frames: Optional[Sequence[WingFrame]] = None,
    tol: Optional[object] = None,
    ns_report: Optional[NSReport] = None,
) -> QuasiMixture:
    """Solve for affine coefficients over the product local frame.

    min-norm: the minimum-norm least-squares solution (deterministic, exact
    in rational mode). min-negativity: linear program minimizing sum |c_k|
    subject to reconstruction, solved in binary64.
    """
    if ns_report is None:
        ns_report = check_nonsignalling(channel, tol)
    if not ns_report.verdict:
        raise NotNonSignalling(
            f"max subset residual {ns_report.max_residual} exceeds tolerance"
        )
    if frames is None:
        frames = default_frames(channel)
    frames = tuple(frames)
    exact_mode = channel.body.arithmetic == RATIONAL and all(
        f.exact for f in frames
    )

    if mode == MIN_NORM:
        coeffs = _min_norm_coefficients(channel, frames, exact_mode)
    elif mode == MIN_NEGATIVITY:
        coeffs = _min_negativity_coefficients(channel, frames)
        exact_mode = False
    else:
        raise ValueError(f"unknown mode {mode!r}")
    tolerance = effective_tol(RATIONAL if exact_mode else "float64", tol)

    terms = _pruned_terms(coeffs, tuple(len(f) for f in frames), exact_mode)
    residual = reconstruction_residual(channel, frames, terms)
    if residual > tolerance:
        raise ResidualTooLarge(
            f"reconstruction residual {residual} with a full-rank frame"
        )
    return QuasiMixture(terms, residual, mode)


def _min_norm_coefficients(channel, frames, exact_mode) -> np.ndarray:
    """Unique affine solution over the retained (independent) sub-frames,
    scattered back into full-frame indexing."""
    tensor = _wing_major_tensor(channel)
    if not exact_mode:
        tensor = tensor.astype(float)
    for axis, frame in enumerate(frames):
        f = frame.retained_matrix(as_float=not exact_mode)
        dual = exact.pinv(f) if exact_mode else np.linalg.pinv(f)
        tensor = _mode_product(tensor, dual, axis)
    full_sizes = tuple(len(f) for f in frames)
    full = np.zeros(math.prod(full_sizes), dtype=object if exact_mode else float)
    for combo in np.ndindex(tensor.shape):
        digits = [frames[i].retained[j] for i, j in enumerate(combo)]
        index = 0
        for digit, size in zip(digits, full_sizes):
            index = index * size + digit
        full[index] = tensor[combo]
    return full


def _min_negativity_coefficients(channel, frames) -> np.ndarray:
    a = np.array([[1.0]])
    for frame in frames:
        a = np.kron(a, frame.matrix(as_float=True))
    b = _wing_major_tensor(channel).astype(float).reshape(-1)
    n = a.shape[1]
    a_eq = np.block([[a, -a], [np.ones((1, n)), -np.ones((1, n))]])
    b_eq = np.concatenate([b, [1.0]])
    cost = np.ones(2 * n)
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise ResidualTooLarge(f"negativity LP failed: {res.message}")
    coeffs = res.x[:n] - res.x[n:]
    # polish: least-squares refit on the LP support tightens the equality
    # constraints to machine precision without changing the support
    support = np.abs(coeffs) > 1e-10
    if support.any():
        sol, *_ = np.linalg.lstsq(a[:, support], b, rcond=None)
        polished = np.zeros(n)
        polished[support] = sol
        if np.abs(a @ polished - b).max() <= np.abs(a @ coeffs - b).max() + 1e-12:
            coeffs = polished
    return coeffs


def _pruned_terms(coeffs, frame_sizes, exact_mode):
    terms: List[Tuple[object, Tuple[int, ...]]] = []
    dropped = 0
    for k, c in enumerate(coeffs):
        if exact_mode:
            if c == 0:
                continue
        elif abs(c) <= PRUNE:
            dropped += c
            continue
        indices = []
        rem = k
        for size in reversed(frame_sizes):
            indices.append(rem % size)
            rem //= size
        indices.reverse()
        terms.append((c if exact_mode else float(c), tuple(indices)))
    if not exact_mode and terms and dropped:
        # keep the affine sum at exactly one; the touched coefficient moves
        # by at most the pruned mass
        big = max(range(len(terms)), key=lambda i: abs(terms[i][0]))
        c, idx = terms[big]
        terms[big] = (c + dropped, idx)
    return tuple(terms)


def reconstruction_residual(
    channel: MultipartiteChannel,
    frames: Sequence[WingFrame],
    terms: Sequence[Tuple[object, Tuple[int, ...]]],
) -> object:
    """Max-abs difference between sum_k c_k (x)_i member and the body."""
    exact_mode = channel.body.arithmetic == RATIONAL and all(
        f.exact for f in frames
    )
    shape = channel.body.matrix.shape
    if exact_mode:
        total = np.zeros(shape, dtype=object)
    else:
        total = np.zeros(shape)
    for c, indices in terms:
        prod = np.array([[1]], dtype=object) if exact_mode else np.array([[1.0]])
        for frame, j in zip(frames, indices):
            member = frame.members[j].matrix
            if not exact_mode:
                member = member.astype(float)
            prod = np.kron(prod, member)
        total = total + c * prod
    body = channel.body.matrix if exact_mode else channel.body.matrix.astype(float)
    return abs(total - body).max()


def negativity(qm: QuasiMixture):
    """Total negative mass; zero iff the mixture is a proper convex mixture."""
    return sum(max(-c, 0) for c, _ in qm.terms)


_fresh = count(1)


def build_realization(
    channel: MultipartiteChannel,
    qm: QuasiMixture,
    frames: Optional[Sequence[WingFrame]] = None,
    channel_id: Optional[str] = None,
) -> CommonCauseRealization:
    """Package a quasi-mixture as (xi, eta_1..eta_m) on branded ancillas."""
    if frames is None:
        frames = default_frames(channel)
    frames = tuple(frames)
    if channel_id is None:
        channel_id = f"ch{next(_fresh)}"
    k_terms = len(qm.terms)
    if k_terms == 0:
        raise ResidualTooLarge("empty quasi-mixture")
    exact_mode = all(not isinstance(c, float) for c, _ in qm.terms)

    ancillas = tuple(
        extension(channel_id, i + 1, k_terms) for i in range(channel.m)
    )
    brands = tuple(
        TypeBrand(a, channel_id, i + 1, k_terms) for i, a in enumerate(ancillas)
    )

    xi_len = k_terms ** channel.m
    xi_vec = np.zeros((xi_len, 1), dtype=object if exact_mode else float)
    stride = 0
    for power in range(channel.m):
        stride = stride * k_terms + 1
    for k, (c, _) in enumerate(qm.terms):
        xi_vec[k * stride, 0] = c
    xi = LinearProcess(Signature(()), Signature(ancillas), xi_vec)

    etas = []
    for i, ((w_in, w_out), frame) in enumerate(zip(channel.wings, frames)):
        v_out, v_in = w_out.vdim, w_in.vdim
        mat = np.zeros((v_out, v_in * k_terms), dtype=object if exact_mode else float)
        for k, (_, indices) in enumerate(qm.terms):
            member = frame.members[indices[i]].matrix
            if not exact_mode:
                member = member.astype(float)
            for o in range(v_out):
                for x in range(v_in):
                    mat[o, x * k_terms + k] = member[o, x]
        eta = LinearProcess(sig(w_in, ancillas[i]), sig(w_out), mat)
        if not hybrid_valid(eta):
            raise ResidualTooLarge(f"eta for wing {i + 1} fails instrument validity")
        _assert_discard_preserving(eta)
        etas.append(eta)

    total = sum(c for c, _ in qm.terms)
    if exact_mode:
        assert total == 1
    else:
        assert abs(total - 1) <= 1e-9
    return CommonCauseRealization(
        channel_id=channel_id,
        ancilla_types=ancillas,
        xi=xi,
        etas=tuple(etas),
        brands=brands,
        frame=frames,
        coefficients=tuple(c for c, _ in qm.terms),
        term_indices=tuple(idx for _, idx in qm.terms),
    )


def _assert_discard_preserving(eta: LinearProcess):
    u_out = discard_effect(eta.outputs, exact=eta.arithmetic == RATIONAL)
    u_in = discard_effect(eta.inputs, exact=eta.arithmetic == RATIONAL)
    lhs = compose_seq(eta, u_out)
    gap = max_abs_diff(lhs, u_in)
    if gap > effective_tol(eta.arithmetic):
        raise ResidualTooLarge(f"eta is not discard-preserving (gap {gap})")


def verify_realization(
    channel: MultipartiteChannel,
    realization: CommonCauseRealization,
    tol: Optional[object] = None,
) -> object:
    """Recontract the realization network and return the max-abs residual.

    This contraction path is independent of build_realization: it works from
    the xi vector and eta matrices alone, staging one tensordot per wing so
    the ancilla product never meets a dense Kronecker blow-up.
    """
    m = channel.m
    if len(realization.etas) != m or len(realization.ancilla_types) != m:
        raise SignatureMismatch("realization wing count differs from channel")
    for i, eta in enumerate(realization.etas):
        w_in, w_out = channel.wings[i]
        if eta.inputs.wires != (w_in, realization.ancilla_types[i]):
            raise SignatureMismatch(f"eta {i + 1} input signature mismatch")
        if eta.outputs.wires != (w_out,):
            raise SignatureMismatch(f"eta {i + 1} output signature mismatch")
    if realization.xi.outputs.wires != realization.ancilla_types:
        raise SignatureMismatch("xi is not a state on the ancilla product")

    k = realization.ancilla_types[0].vdim
    exact_mode = (
        realization.xi.arithmetic == RATIONAL
        and all(e.arithmetic == RATIONAL for e in realization.etas)
        and channel.body.arithmetic == RATIONAL
    )

    def cast(a):
        return a if exact_mode else a.astype(float)

    tensor = cast(realization.xi.matrix[:, 0]).reshape((k,) * m)
    for i, eta in enumerate(realization.etas):
        v_in = channel.wings[i][0].vdim
        v_out = channel.wings[i][1].vdim
        eta_t = cast(eta.matrix).reshape(v_out, v_in, k)
        # the next ancilla axis sits after the 2i (out, in) axes added so far
        tensor = np.tensordot(eta_t, tensor, axes=([2], [2 * i]))
    # axes now run (o_m, x_m, o_{m-1}, x_{m-1}, ..., o_1, x_1)
    order = []
    for i in range(m):
        order.append(2 * (m - 1 - i))
    for i in range(m):
        order.append(2 * (m - 1 - i) + 1)
    tensor = np.transpose(tensor, order)
    out_total = math.prod(w.vdim for _, w in channel.wings)
    in_total = math.prod(w.vdim for w, _ in channel.wings)
    rebuilt = tensor.reshape(out_total, in_total)
    body = cast(channel.body.matrix)
    residual = abs(rebuilt - body).max()
    return residual
