"""Diagram terms: typing, evaluation, and an independent contraction oracle."""

from fractions import Fraction

import numpy as np
import pytest

from quasicause import (
    Leaf,
    Mix,
    Par,
    Seq,
    classical,
    eval_diagram,
    infer_signature,
    process,
    sig,
    state,
)
from quasicause.errors import TypeMismatch, UnboundGenerator

F = Fraction
BIT = classical(2)


def bindings():
    return {
        "f": process([[F(1, 2), F(1, 3)], [F(1, 2), F(2, 3)]], sig(BIT), sig(BIT)),
        "g": process([[1, 1], [0, 0]], sig(BIT), sig(BIT)),
        "s": state([F(1, 2), F(1, 2)], BIT),
    }


def test_leaf_is_bound_process():
    b = bindings()
    assert eval_diagram(Leaf("f"), b) is b["f"]
    with pytest.raises(UnboundGenerator):
        eval_diagram(Leaf("nope"), b)


def test_seq_matches_compose():
    b = bindings()
    got = eval_diagram(Seq(Leaf("s"), Leaf("f")), b)
    assert list(got.matrix[:, 0]) == [F(5, 12), F(7, 12)]


def test_three_node_term_matches_hand_contraction():
    b = bindings()
    term = Seq(Seq(Leaf("s"), Leaf("f")), Leaf("g"))
    got = eval_diagram(term, b)
    # independent oracle: contract with einsum over float copies
    fm = b["f"].matrix.astype(float)
    gm = b["g"].matrix.astype(float)
    sv = b["s"].matrix.astype(float)[:, 0]
    want = np.einsum("ij,jk,k->i", gm, fm, sv)
    assert np.abs(got.matrix.astype(float)[:, 0] - want).max() < 1e-15


def test_infer_signature_and_type_errors():
    b = bindings()
    term = Par(Leaf("f"), Leaf("g"))
    ins, outs = infer_signature(term, b)
    assert ins.dims == (2, 2) and outs.dims == (2, 2)
    with pytest.raises(TypeMismatch):
        infer_signature(Seq(Leaf("f"), Leaf("s")), b)
    with pytest.raises(TypeMismatch):
        infer_signature(Mix(F(1, 2), Leaf("f"), Leaf("s")), b)


def test_mix_evaluates():
    b = bindings()
    got = eval_diagram(Mix(F(1, 2), Leaf("f"), Leaf("g")), b)
    assert got.matrix[0, 0] == F(3, 4)
