"""Shared random generators and independent oracles used across the suite.

Everything here is deliberately simple and separate from the library code
paths it is used to check.
"""

import math
from fractions import Fraction
from itertools import product

import numpy as np

from quasicause.theories import hermitian_basis, vec_basis_matrix

F = Fraction


def _dims(d):
    return (d,) if isinstance(d, int) else tuple(d)


def random_isometry(rng, d_from, d_to):
    g = rng.normal(size=(d_to, d_from)) + 1j * rng.normal(size=(d_to, d_from))
    q, _ = np.linalg.qr(g)
    return q[:, :d_from]


def kraus_to_transfer(kraus, in_dims, out_dims):
    """Transfer matrix in the composite tensor Hermitian bases.

    Uses the C-order vec identity vec(K rho K^dag) = (K (x) conj(K)) vec(rho)
    and the basis-change columns from vec_basis_matrix; this is a different
    code path from the library's single-wire transfer builder.
    """
    in_dims, out_dims = _dims(in_dims), _dims(out_dims)
    superop = sum(np.kron(k, k.conj()) for k in kraus)
    u_in = vec_basis_matrix(in_dims)
    u_out = vec_basis_matrix(out_dims)
    t = u_out.conj().T @ superop @ u_in
    assert np.abs(t.imag).max(initial=0.0) < 1e-10
    return t.real


def random_cptp_transfer(rng, in_dims, out_dims, env=2):
    """Transfer matrix of a random Stinespring channel between composites."""
    in_dims, out_dims = _dims(in_dims), _dims(out_dims)
    d_in = math.prod(in_dims)
    d_out = math.prod(out_dims)
    v = random_isometry(rng, d_in, d_out * env)
    kraus = []
    for e in range(env):
        k = np.zeros((d_out, d_in), dtype=complex)
        for o in range(d_out):
            k[o, :] = v[o * env + e, :]
        kraus.append(k)
    return kraus_to_transfer(kraus, in_dims, out_dims)


def random_density_coords(rng, dims):
    """Composite-basis Hermitian coordinates of a Ginibre-random state."""
    dims = _dims(dims)
    d = math.prod(dims)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    coords = vec_basis_matrix(dims).conj().T @ rho.reshape(d * d)
    assert np.abs(coords.imag).max() < 1e-10
    return coords.real


def random_stochastic_float(rng, n_out, n_in):
    m = rng.random((n_out, n_in))
    return m / m.sum(axis=0)


def random_stochastic_rational(rng, n_out, n_in, grain=60):
    """Column-stochastic matrix with small exact rational entries."""
    cols = []
    for _ in range(n_in):
        weights = [int(rng.integers(0, grain + 1)) for _ in range(n_out)]
        if sum(weights) == 0:
            weights[0] = 1
        total = sum(weights)
        cols.append([F(w, total) for w in weights])
    m = np.empty((n_out, n_in), dtype=object)
    for j, col in enumerate(cols):
        for i, x in enumerate(col):
            m[i, j] = x
    return m


def random_distribution_rational(rng, n, grain=60):
    return random_stochastic_rational(rng, n, 1, grain)[:, 0]


def classical_conditionals(matrix, out_dims, in_dims):
    """Channel matrix -> dict (outputs tuple, inputs tuple) -> probability."""
    table = {}
    for x in product(*[range(d) for d in in_dims]):
        col = 0
        for d, digit in zip(in_dims, x):
            col = col * d + digit
        for a in product(*[range(d) for d in out_dims]):
            row = 0
            for d, digit in zip(out_dims, a):
                row = row * d + digit
            table[(a, x)] = matrix[row, col]
    return table
