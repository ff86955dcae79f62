"""Concrete base theories embedded in real linear maps.

``STOCH`` is classical probability: wires are outcome spaces, channels are
column-stochastic matrices. ``QUANT`` adds quantum wires in trace-orthonormal
Hermitian coordinates (transfer matrices are real), with instrument-style
validity for classical/quantum hybrids.

Basis convention (``gellmann-v1``), fixed bit-exactly for certificates: for
Hilbert dimension d the ordered basis is

    B_0 = I/sqrt(d),
    then (E_jk + E_kj)/sqrt(2)              for j < k in lexicographic order,
    then i(E_kj - E_jk)/sqrt(2)             for j < k in lexicographic order,
    then diag(1,..,1,-l,0,..,0)/sqrt(l(l+1)) for l = 1..d-1 (l leading ones).

All elements are Hermitian with tr(B_a B_b) = delta_ab. Composite wires use
tensor-product elements ordered mixed-radix, leftmost wire most significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product as iproduct
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import UnknownType, WrongKind
from .procs import (
    FLOAT64,
    LinearProcess,
    effect,
    effective_tol,
    state,
)
from .wires import CLASSICAL, EXTENSION, QUANTUM, Signature, SystemType

BASIS_CONVENTION = "gellmann-v1"


@lru_cache(maxsize=None)
def hermitian_basis(d: int) -> Tuple[np.ndarray, ...]:
    """Ordered trace-orthonormal Hermitian basis for Hilbert dimension d."""
    if d < 1:
        raise ValueError("Hilbert dimension must be >= 1")
    mats: List[np.ndarray] = [np.eye(d, dtype=complex) / math.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1 / math.sqrt(2)
            mats.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j / math.sqrt(2)
            m[k, j] = 1j / math.sqrt(2)
            mats.append(m)
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        for i in range(l):
            m[i, i] = 1
        m[l, l] = -l
        mats.append(m / math.sqrt(l * (l + 1)))
    for mat in mats:
        mat.flags.writeable = False
    return tuple(mats)


@lru_cache(maxsize=None)
def vec_basis_matrix(dims: Tuple[int, ...]) -> np.ndarray:
    """Columns are C-order flattenings of the composite Hermitian basis.

    Column a (mixed-radix over per-wire basis indices, leftmost wire most
    significant) holds vec of the tensor product of per-wire elements.
    """
    total = math.prod(dims) if dims else 1
    n = total * total
    cols = []
    for combo in iproduct(*[range(d * d) for d in dims]):
        m = np.array([[1.0 + 0j]])
        for d, a in zip(dims, combo):
            m = np.kron(m, hermitian_basis(d)[a])
        cols.append(m.reshape(n))
    u = np.array(cols, dtype=complex).T if cols else np.eye(1, dtype=complex)
    u.flags.writeable = False
    return u


def coords_to_density(coords: np.ndarray, d: int) -> np.ndarray:
    """Hermitian-coordinate vector -> d x d matrix."""
    basis = hermitian_basis(d)
    return sum(float(c) * b for c, b in zip(coords, basis))


def density_to_coords(rho: np.ndarray) -> np.ndarray:
    """d x d Hermitian matrix -> real coordinate vector of length d^2."""
    d = rho.shape[0]
    coords = np.array(
        [np.trace(b.conj().T @ rho) for b in hermitian_basis(d)]
    )
    if np.abs(coords.imag).max(initial=0.0) > 1e-10:
        raise ValueError("matrix is not Hermitian enough for real coordinates")
    return coords.real


def transfer_from_kraus(
    kraus: Sequence[np.ndarray], d_in: int, d_out: int
) -> np.ndarray:
    """Real transfer matrix of sum_k K rho K^dagger in the fixed bases."""
    basis_in = hermitian_basis(d_in)
    basis_out = hermitian_basis(d_out)
    t = np.zeros((d_out * d_out, d_in * d_in))
    for b, bin_el in enumerate(basis_in):
        image = sum(k @ bin_el @ k.conj().T for k in kraus)
        for a, bout_el in enumerate(basis_out):
            val = np.trace(bout_el.conj().T @ image)
            t[a, b] = val.real
    return t


def choi_of_transfer(
    transfer: np.ndarray, in_dims: Tuple[int, ...], out_dims: Tuple[int, ...]
) -> np.ndarray:
    """Choi matrix sum_kl E_kl (x) Phi(E_kl) reconstructed from a transfer matrix."""
    d_in = math.prod(in_dims) if in_dims else 1
    d_out = math.prod(out_dims) if out_dims else 1
    u_in = vec_basis_matrix(tuple(in_dims))
    u_out = vec_basis_matrix(tuple(out_dims))
    superop = u_out @ transfer.astype(complex) @ u_in.conj().T
    choi = (
        superop.reshape(d_out, d_out, d_in, d_in)
        .transpose(2, 0, 3, 1)
        .reshape(d_in * d_out, d_in * d_out)
    )
    return 0.5 * (choi + choi.conj().T)


def min_choi_eigenvalue(
    transfer: np.ndarray, in_dims: Tuple[int, ...], out_dims: Tuple[int, ...]
) -> float:
    choi = choi_of_transfer(transfer, tuple(in_dims), tuple(out_dims))
    return float(np.linalg.eigvalsh(choi).min())


def _wire_kinds(p: LinearProcess) -> set:
    return {w.kind for w in tuple(p.inputs) + tuple(p.outputs)}


def discard_row(t: SystemType, exact: bool = True) -> LinearProcess:
    """The unique deterministic effect for one wire.

    Classical (and extension carriers): all-ones row. Quantum: the trace
    functional, sqrt(d) on the B_0 coordinate.
    """
    if t.kind == QUANTUM:
        row = np.zeros(t.vdim)
        row[0] = math.sqrt(t.hilbert_dim)
        return effect(row, t, exact=False)
    return effect([1] * t.vdim, t, exact=exact)


def discard_effect(signature: Signature, exact: bool = True) -> LinearProcess:
    """Discard of a composite: parallel composition of per-wire discards."""
    from .procs import compose_par, number

    out = number(1)
    for w in signature:
        out = compose_par(out, discard_row(w, exact=exact))
    return out


def stoch_valid(p: LinearProcess, tol: Optional[float] = None) -> bool:
    """Column-stochastic test: entries in [0,1], columns summing to one."""
    if _wire_kinds(p) - {CLASSICAL}:
        raise WrongKind("stochastic validity applies to all-classical wires")
    eps = effective_tol(p.arithmetic, tol)
    m = p.matrix
    if m.size and (m.min() < -eps or m.max() > 1 + eps):
        return False
    col_sums = m.sum(axis=0)
    return all(abs(s - 1) <= eps for s in col_sums)


def quant_valid(p: LinearProcess, tol: Optional[float] = None) -> bool:
    """Channel test for all-quantum wires: trace preserving and completely
    positive (Choi minimum eigenvalue >= -tol)."""
    kinds = _wire_kinds(p)
    if kinds - {QUANTUM}:
        raise WrongKind("quantum validity applies to all-quantum wires")
    eps = tol if tol is not None else 1e-9
    m = p.matrix.astype(float)
    u_out = discard_effect(p.outputs, exact=False).matrix[0]
    u_in = discard_effect(p.inputs, exact=False).matrix[0]
    if np.abs(u_out @ m - u_in).max(initial=0.0) > eps:
        return False
    in_dims = tuple(w.hilbert_dim for w in p.inputs)
    out_dims = tuple(w.hilbert_dim for w in p.outputs)
    return min_choi_eigenvalue(m, in_dims, out_dims) >= -eps


def hybrid_valid(p: LinearProcess, tol: Optional[float] = None) -> bool:
    """Instrument test for mixed classical/quantum wires.

    For every classical-input basis point x the slice must decompose over
    classical-output points a into completely positive blocks whose sum is
    trace preserving. Extension carriers count as classical here (they hold
    point-distribution coordinates by construction). With no quantum wires
    this reduces to column-stochasticity.
    """
    eps = tol if tol is not None else 1e-9
    in_wires, out_wires = tuple(p.inputs), tuple(p.outputs)
    m = p.matrix.astype(float)
    tensor = m.reshape(p.outputs.dims + p.inputs.dims)

    cin = [i for i, w in enumerate(in_wires) if w.kind != QUANTUM]
    qin = [i for i, w in enumerate(in_wires) if w.kind == QUANTUM]
    cout = [i for i, w in enumerate(out_wires) if w.kind != QUANTUM]
    qout = [i for i, w in enumerate(out_wires) if w.kind == QUANTUM]
    n_out = len(out_wires)

    qin_dims = tuple(in_wires[i].hilbert_dim for i in qin)
    qout_dims = tuple(out_wires[i].hilbert_dim for i in qout)
    qin_v = math.prod(w.vdim for w in (in_wires[i] for i in qin)) if qin else 1
    qout_v = math.prod(w.vdim for w in (out_wires[i] for i in qout)) if qout else 1
    u_qin = discard_effect(
        Signature(tuple(in_wires[i] for i in qin)), exact=False
    ).matrix[0]
    u_qout = discard_effect(
        Signature(tuple(out_wires[i] for i in qout)), exact=False
    ).matrix[0]

    for x in iproduct(*[range(in_wires[i].vdim) for i in cin]):
        index = [slice(None)] * (n_out + len(in_wires))
        for axis, value in zip(cin, x):
            index[n_out + axis] = value
        sliced = tensor[tuple(index)]
        total = np.zeros((qout_v, qin_v))
        for a in iproduct(*[range(out_wires[i].vdim) for i in cout]):
            sub = [slice(None)] * sliced.ndim
            for pos, value in zip(cout, a):
                sub[pos] = value
            block = sliced[tuple(sub)].reshape(qout_v, qin_v)
            if min_choi_eigenvalue(block, qin_dims, qout_dims) < -eps:
                return False
            total += block
        if np.abs(u_qout @ total - u_qin).max(initial=0.0) > eps:
            return False
    return True


@dataclass(frozen=True)
class Theory:
    """A base theory: validity, discard, reference states and frames.

    Frames span the full coordinate space of each wire (local tomography),
    so spanning-state and spanning-effect families both have rank vdim.
    """

    name: str
    quantum_allowed: bool

    def contains(self, t: SystemType) -> bool:
        if t.kind == CLASSICAL:
            return True
        return t.kind == QUANTUM and self.quantum_allowed

    def _require(self, t: SystemType):
        if not self.contains(t):
            raise UnknownType(f"{self.name} does not serve wire {t!r}")

    def valid(self, p: LinearProcess, tol: Optional[float] = None) -> bool:
        kinds = _wire_kinds(p)
        if EXTENSION in kinds:
            raise WrongKind("extension wires are outside the base theory")
        if QUANTUM in kinds and not self.quantum_allowed:
            raise WrongKind(f"{self.name} has no quantum wires")
        if kinds <= {CLASSICAL}:
            return stoch_valid(p, tol)
        if kinds <= {QUANTUM}:
            return quant_valid(p, tol)
        return hybrid_valid(p, tol)

    def discard(self, t: SystemType) -> LinearProcess:
        self._require(t)
        return discard_row(t, exact=not self.quantum_allowed or t.kind == CLASSICAL)

    def reference_state(self, t: SystemType) -> LinearProcess:
        """Uniform distribution / maximally mixed state."""
        self._require(t)
        if t.kind == CLASSICAL:
            return state([Fraction(1, t.vdim)] * t.vdim, t)
        coords = np.zeros(t.vdim)
        coords[0] = 1 / math.sqrt(t.hilbert_dim)
        return state(coords, t, exact=False)

    def state_frame(self, t: SystemType) -> List[LinearProcess]:
        self._require(t)
        if t.kind == CLASSICAL:
            return [
                state([1 if i == j else 0 for i in range(t.vdim)], t)
                for j in range(t.vdim)
            ]
        d = t.hilbert_dim
        basis = hermitian_basis(d)
        frame = [self.reference_state(t)]
        for a, b in enumerate(basis[1:], start=1):
            opnorm = float(np.abs(np.linalg.eigvalsh(b)).max())
            coords = np.zeros(t.vdim)
            coords[0] = 1 / math.sqrt(d)
            coords[a] = 1 / (d * opnorm)
            frame.append(state(coords, t, exact=False))
        return frame

    def effect_frame(self, t: SystemType) -> List[LinearProcess]:
        self._require(t)
        if t.kind == CLASSICAL:
            return [
                effect([1 if i == j else 0 for i in range(t.vdim)], t)
                for j in range(t.vdim)
            ]
        d = t.hilbert_dim
        basis = hermitian_basis(d)
        frame = [self.discard(t)]
        for a, b in enumerate(basis[1:], start=1):
            opnorm = float(np.abs(np.linalg.eigvalsh(b)).max())
            row = np.zeros(t.vdim)
            row[0] = math.sqrt(d) / 2
            row[a] = 1 / (2 * opnorm)
            frame.append(effect(row, t, exact=False))
        return frame


STOCH = Theory("Stoch", quantum_allowed=False)
QUANT = Theory("Quant", quantum_allowed=True)


def embed_stochastic(m: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """Transfer matrix of the decohere-measure-prepare embedding of a
    column-stochastic matrix into quantum wires."""
    kraus = []
    for o in range(d_out):
        for i in range(d_in):
            k = np.zeros((d_out, d_in), dtype=complex)
            k[o, i] = math.sqrt(float(m[o, i]))
            kraus.append(k)
    return transfer_from_kraus(kraus, d_in, d_out)
