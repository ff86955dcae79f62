"""Quasi-mixture decomposition, realization packaging, and verification."""

from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from quasicause import QUANT, STOCH, classical, process, quantum, sig, state
from quasicause.boxes import pr_box, product_channel, swap_channel
from quasicause.decompose import (
    MIN_NEGATIVITY,
    MIN_NORM,
    build_realization,
    decompose_quasimixture,
    default_frames,
    deterministic_frame,
    local_channel_frame,
    negativity,
    verify_realization,
)
from quasicause.errors import NotNonSignalling, SignatureMismatch
from quasicause.nonsignalling import (
    MultipartiteChannel,
    assemble_common_cause,
    check_nonsignalling,
)
from quasicause.procs import LinearProcess, compose_seq, max_abs_diff
from quasicause.theories import discard_effect, hybrid_valid
from tests.helpers import (
    random_cptp_transfer,
    random_density_coords,
    random_stochastic_rational,
)

F = Fraction
BIT = classical(2)
QUBIT = quantum(2)


def local_polytope_contains(channel, tol=1e-9):
    """Independent LP oracle: is the bipartite binary channel a convex
    mixture of products of deterministic single-wing channels?"""
    frames = [deterministic_frame(w_in, w_out) for w_in, w_out in channel.wings]
    cols = []
    for m1 in frames[0]:
        for m2 in frames[1]:
            cols.append(np.kron(
                m1.matrix.astype(float), m2.matrix.astype(float)
            ).reshape(-1))
    a_eq = np.stack(cols, axis=1)
    b_eq = channel.body.matrix.astype(float).reshape(-1)
    n = a_eq.shape[1]
    a_eq = np.vstack([a_eq, np.ones((1, n))])
    b_eq = np.concatenate([b_eq, [1.0]])
    res = linprog(np.zeros(n), A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    return res.success


def test_local_frame_classical_bits_is_deterministic():
    frame = local_channel_frame(STOCH, BIT, BIT)
    assert len(frame) == 4
    trit = classical(3)
    frame33 = local_channel_frame(STOCH, trit, trit)
    assert len(frame33) == 1 + 9  # measure-prepare wins over 27 functions


def test_local_frame_qubit_size_and_validity():
    frame = local_channel_frame(QUANT, QUBIT, QUBIT)
    assert len(frame) == 13
    u_in = discard_effect(sig(QUBIT), exact=False)
    u_out = discard_effect(sig(QUBIT), exact=False)
    for member in frame.members:
        assert QUANT.valid(member)
        gap = max_abs_diff(compose_seq(member, u_out), u_in)
        assert gap <= 1e-9


def test_frame_members_are_channels_classical():
    frame = local_channel_frame(STOCH, classical(3), BIT)
    for member in frame.members:
        assert STOCH.valid(member)


def test_product_channel_single_term():
    lam1 = deterministic_frame(BIT, BIT)[1]  # identity function
    lam2 = deterministic_frame(BIT, BIT)[2]  # negation
    chan = product_channel(STOCH, [lam1, lam2])
    qm = decompose_quasimixture(chan)
    assert qm.coefficient_sum == 1
    assert qm.residual == 0
    nonzero = [t for t in qm.terms if t[0] != 0]
    assert len(nonzero) == 1
    assert nonzero[0][0] == 1
    assert nonzero[0][1] == (1, 2)


def test_pr_box_minnorm_is_exact_and_negative():
    qm = decompose_quasimixture(pr_box())
    assert qm.mode == MIN_NORM
    assert qm.residual == 0
    assert qm.coefficient_sum == 1
    assert qm.min_coefficient() < 0
    assert all(isinstance(c, (int, F)) for c, _ in qm.terms)


def test_pr_box_outside_local_polytope():
    assert not local_polytope_contains(pr_box())
    # a classical common-cause channel is inside
    rng = np.random.default_rng(3)
    anc = classical(2)
    shared = state(list(random_stochastic_rational(rng, 4, 1)[:, 0]), sig(anc, anc))
    locals_ = [
        process(random_stochastic_rational(rng, 2, 4), sig(BIT, anc), sig(BIT))
        for _ in range(2)
    ]
    chan = assemble_common_cause(shared, locals_, STOCH)
    assert local_polytope_contains(chan)


def test_min_negativity_zero_inside_polytope():
    rng = np.random.default_rng(5)
    anc = classical(2)
    shared = state(list(random_stochastic_rational(rng, 4, 1)[:, 0]), sig(anc, anc))
    locals_ = [
        process(random_stochastic_rational(rng, 2, 4), sig(BIT, anc), sig(BIT))
        for _ in range(2)
    ]
    chan = assemble_common_cause(shared, locals_, STOCH)
    qm = decompose_quasimixture(chan, mode=MIN_NEGATIVITY)
    assert negativity(qm) <= 1e-7
    assert local_polytope_contains(chan)


def test_min_negativity_positive_for_pr():
    qm = decompose_quasimixture(pr_box(), mode=MIN_NEGATIVITY)
    assert negativity(qm) > 0.1
    assert abs(qm.coefficient_sum - 1) <= 1e-9
    # invariant under term reordering
    reordered = sorted(qm.terms, key=lambda t: t[1])
    assert sum(max(-c, 0) for c, _ in reordered) == negativity(qm)


def test_decompose_rejects_signalling():
    with pytest.raises(NotNonSignalling):
        decompose_quasimixture(swap_channel())


def test_pr_realization_exact_roundtrip():
    chan = pr_box()
    qm = decompose_quasimixture(chan)
    real = build_realization(chan, qm)
    assert real.carrier_dim == len(qm.terms)
    residual = verify_realization(chan, real)
    assert residual == 0
    # xi is a quasi-distribution: some diagonal weight is negative
    xi_entries = list(real.xi.matrix[:, 0])
    assert min(xi_entries) < 0
    assert sum(xi_entries) == 1
    # every eta is a valid instrument and discard preserving by construction
    for eta in real.etas:
        assert hybrid_valid(eta)


def test_realization_ancillas_are_branded():
    chan = pr_box()
    real = build_realization(chan, decompose_quasimixture(chan))
    for i, anc in enumerate(real.ancilla_types, start=1):
        assert anc.kind == "extension"
        assert anc.brand == (real.channel_id, i)
        assert anc.vdim == real.carrier_dim
    # brands never collide with base ids
    assert all(b.ext_type.id not in ("I", "C2", "Q2") for b in real.brands)


def test_tampered_xi_fails_verification():
    chan = pr_box()
    real = build_realization(chan, decompose_quasimixture(chan))
    xi_vec = np.array(real.xi.matrix, dtype=object)
    xi_vec[0, 0] = xi_vec[0, 0] + F(1, 1000)
    tampered = real.__class__(
        channel_id=real.channel_id,
        ancilla_types=real.ancilla_types,
        xi=LinearProcess(real.xi.inputs, real.xi.outputs, xi_vec),
        etas=real.etas,
        brands=real.brands,
        frame=real.frame,
        coefficients=real.coefficients,
        term_indices=real.term_indices,
    )
    residual = verify_realization(chan, tampered)
    assert residual >= F(1, 10000)


def test_verify_signature_mismatch():
    chan = pr_box()
    real = build_realization(chan, decompose_quasimixture(chan))
    trit = classical(3)
    ident = process(np.eye(3, dtype=int), sig(trit), sig(trit))
    other = product_channel(STOCH, [ident, ident])
    with pytest.raises(SignatureMismatch):
        verify_realization(other, real)


def test_classical_cc_roundtrip_exact():
    rng = np.random.default_rng(11)
    for dims in [(2, 2), (3, 2), (3, 3)]:
        anc = classical(2)
        shared = state(list(random_stochastic_rational(rng, 4, 1)[:, 0]),
                       sig(anc, anc))
        locals_ = [
            process(
                random_stochastic_rational(rng, d, d * 2),
                sig(classical(d), anc), sig(classical(d)),
            )
            for d in dims
        ]
        chan = assemble_common_cause(shared, locals_, STOCH)
        qm = decompose_quasimixture(chan)
        assert qm.residual == 0 and qm.coefficient_sum == 1
        real = build_realization(chan, qm)
        assert verify_realization(chan, real) == 0


def test_qubit_cc_roundtrip_float():
    rng = np.random.default_rng(13)
    for _ in range(3):
        shared = state(random_density_coords(rng, (2, 2)), sig(QUBIT, QUBIT),
                       exact=False)
        locals_ = [
            process(random_cptp_transfer(rng, (2, 2), (2,)),
                    sig(QUBIT, QUBIT), sig(QUBIT))
            for _ in range(2)
        ]
        chan = assemble_common_cause(shared, locals_, QUANT)
        qm = decompose_quasimixture(chan)
        assert abs(qm.coefficient_sum - 1) <= 1e-9
        assert qm.residual <= 1e-9
        real = build_realization(chan, qm)
        assert verify_realization(chan, real) <= 1e-9
        rebuilt = check_nonsignalling(chan)
        assert rebuilt.verdict


def test_tripartite_binary_roundtrip_exact():
    rng = np.random.default_rng(17)
    anc = classical(2)
    shared = state(list(random_stochastic_rational(rng, 8, 1)[:, 0]),
                   sig(anc, anc, anc))
    locals_ = [
        process(random_stochastic_rational(rng, 2, 4), sig(BIT, anc), sig(BIT))
        for _ in range(3)
    ]
    chan = assemble_common_cause(shared, locals_, STOCH)
    qm = decompose_quasimixture(chan)
    real = build_realization(chan, qm)
    assert verify_realization(chan, real) == 0
