"""Qudit state representations and the generalized Gell-Mann basis.

Density matrices and pure amplitudes are plain complex numpy arrays; batched
inputs with arbitrary leading dimensions are accepted wherever it is cheap to
do so. Bloch vectors are real arrays of length ``N**2 - 1`` whose components
are ordered by :attr:`GellMannBasis.labels`:

* symmetric pairs ``(m, n)`` with ``m < n`` in row-major order,
* antisymmetric pairs ``(m, n)`` with ``m > n`` in row-major order,
* diagonal matrices ``n = 0 .. N-2``.

For ``N = 2`` this reproduces the Pauli ordering ``(x, y, z)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import InvalidDimensionError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GellMannBasis:
    """The ``N**2 - 1`` traceless Hermitian basis matrices of dimension ``N``.

    Attributes
    ----------
    dim : int
        Hilbert-space dimension ``N``.
    matrices : numpy.ndarray
        Read-only array of shape ``(N**2 - 1, N, N)``.
    labels : tuple
        ``("sym", m, n)``, ``("asym", m, n)`` or ``("diag", n)`` per index.
    index_map : dict
        Inverse of ``labels``.
    """

    dim: int
    matrices: np.ndarray = field(repr=False)
    labels: tuple
    index_map: dict = field(repr=False)

    def __len__(self):
        return len(self.labels)

    def pair_index(self, m, n):
        """Linear index of the off-diagonal matrix labelled ``(m, n)``.

        ``m < n`` selects the symmetric matrix, ``m > n`` the antisymmetric
        one, following the sign convention ``L_mn = -i(|n><m| - |m><n|)``.
        """
        if m == n:
            raise ValueError("pair_index needs m != n; use diag_index")
        kind = "sym" if m < n else "asym"
        return self.index_map[(kind, m, n)]

    def diag_index(self, n):
        return self.index_map[("diag", n)]

    def pairs(self):
        """Yield ``(m, n, i_mn, i_nm)`` for every ``m < n``.

        ``i_mn`` indexes the symmetric coordinate ``q_mn`` and ``i_nm`` the
        antisymmetric partner ``q_nm``.
        """
        for m in range(self.dim):
            for n in range(m + 1, self.dim):
                yield m, n, self.index_map[("sym", m, n)], self.index_map[("asym", n, m)]

    def to_json(self):
        """Stable serialization of the labelling, for file headers and manifests."""
        return json.dumps([list(lab) for lab in self.labels], separators=(",", ":"))


@lru_cache(maxsize=None)
def gell_mann_basis(N):
    """Build the generalized Gell-Mann basis for an ``N``-level system.

    Parameters
    ----------
    N : int
        Dimension, at least 2.

    Returns
    -------
    GellMannBasis
        Matrices normalized so that ``Tr(L_i L_j) = 2 delta_ij``.
    """
    if int(N) != N or N < 2:
        raise InvalidDimensionError(f"Gell-Mann basis needs N >= 2, got {N}")
    N = int(N)
    mats = []
    labels = []
    for m in range(N):
        for n in range(m + 1, N):
            g = np.zeros((N, N), dtype=complex)
            g[m, n] = g[n, m] = 1.0
            mats.append(g)
            labels.append(("sym", m, n))
    for m in range(N):
        for n in range(m):
            # -i(|n><m| - |m><n|): element [n, m] is -i, element [m, n] is +i
            g = np.zeros((N, N), dtype=complex)
            g[n, m] = -1j
            g[m, n] = 1j
            mats.append(g)
            labels.append(("asym", m, n))
    for n in range(N - 1):
        d = np.zeros(N)
        d[: n + 1] = 1.0
        d[n + 1] = -(n + 1)
        mats.append(np.diag(np.sqrt(2.0 / ((n + 1) * (n + 2))) * d).astype(complex))
        labels.append(("diag", n))
    arr = np.array(mats)
    arr.setflags(write=False)
    labels = tuple(labels)
    return GellMannBasis(N, arr, labels, {lab: i for i, lab in enumerate(labels)})


def _basis_for(dim, basis):
    if basis is None:
        return gell_mann_basis(dim)
    if basis.dim != dim:
        raise InvalidDimensionError(f"basis has dimension {basis.dim}, state has {dim}")
    return basis


def density_to_bloch(rho, basis=None, tol=1e-12):
    """Generalized Bloch coordinates ``q_i = Tr(rho L_i)``.

    Accepts a single ``(N, N)`` matrix or a stack ``(..., N, N)``. Raises
    ``ValueError`` if any coordinate has an imaginary part above ``tol``,
    which only happens for non-Hermitian input.
    """
    rho = np.asarray(rho)
    if rho.ndim < 2 or rho.shape[-1] != rho.shape[-2]:
        raise InvalidDimensionError(f"expected square matrices, got shape {rho.shape}")
    basis = _basis_for(rho.shape[-1], basis)
    N = basis.dim
    idx, vals, _, _ = _sparse_maps(N)
    # Tr(L_k rho) = sum_ij L_k[i, j] rho[j, i]
    flat = np.swapaxes(rho, -1, -2).reshape(rho.shape[:-2] + (N * N,))
    q = seqsum(flat[..., idx] * vals)
    resid = np.max(np.abs(q.imag)) if q.size else 0.0
    if resid > tol:
        raise ValueError(f"Bloch coordinates have imaginary residue {resid:.3g}; input not Hermitian")
    return np.ascontiguousarray(q.real)


def bloch_to_density(q, basis=None):
    """Density matrix ``I/N + q.L/2`` from Bloch coordinates.

    Positivity is not enforced; use :func:`validate_state` to check it.
    """
    q = np.asarray(q, dtype=float)
    K = q.shape[-1]
    N = int(round(np.sqrt(K + 1)))
    if N * N - 1 != K:
        raise InvalidDimensionError(f"{K} Bloch coordinates do not match any dimension")
    basis = _basis_for(N, basis)
    _, _, src, w = _sparse_maps(N)
    flat = 0.5 * seqsum(q[..., src] * w)
    return flat.reshape(q.shape[:-1] + (N, N)) + np.eye(N) / N


@lru_cache(maxsize=None)
def _sparse_maps(N):
    # Padded gather tables for the basis contractions. Elementwise gathers keep
    # every batch member's arithmetic independent of the batch size, which
    # BLAS-backed contractions do not guarantee.
    mats = gell_mann_basis(N).matrices.reshape(N * N - 1, N * N)
    P = max(int(np.max(np.count_nonzero(mats, axis=1))), 1)
    idx = np.zeros((N * N - 1, P), dtype=np.intp)
    vals = np.zeros((N * N - 1, P), dtype=complex)
    for k, row in enumerate(mats):
        nz = np.flatnonzero(row)
        idx[k, : len(nz)] = nz
        vals[k, : len(nz)] = row[nz]
    cols = mats.T
    R = max(int(np.max(np.count_nonzero(cols, axis=1))), 1)
    src = np.zeros((N * N, R), dtype=np.intp)
    w = np.zeros((N * N, R), dtype=complex)
    for e, col in enumerate(cols):
        nz = np.flatnonzero(col)
        src[e, : len(nz)] = nz
        w[e, : len(nz)] = col[nz]
    for a in (idx, vals, src, w):
        a.setflags(write=False)
    return idx, vals, src, w


def seqsum(x, axis=-1):
    """Sum along ``axis`` by sequential accumulation.

    Unlike ``np.sum`` the summation order never depends on the shape of the
    other axes, so a batch member gets bit-identical results alone or stacked.
    """
    x = np.moveaxis(np.asarray(x), axis, 0)
    acc = x[0].copy()
    for part in x[1:]:
        acc += part
    return acc


def btrace(rho):
    """Trace over the last two axes, with batch-independent rounding."""
    return seqsum(np.diagonal(np.asarray(rho), axis1=-2, axis2=-1))


def bnorm(c):
    """Euclidean norm over the last axis, with batch-independent rounding."""
    return np.sqrt(seqsum(np.abs(np.asarray(c)) ** 2))


def rowdot(x, A):
    """``x @ A.T`` over the last axis, with batch-independent rounding."""
    return seqsum(np.asarray(x)[..., None, :] * A)


@lru_cache(maxsize=None)
def _population_map(N):
    # populations = 1/N + M @ q_diag; only the diagonal coordinates contribute
    basis = gell_mann_basis(N)
    idx = [basis.diag_index(n) for n in range(N - 1)]
    M = 0.5 * np.real(np.diagonal(basis.matrices[idx], axis1=1, axis2=2)).T
    M.setflags(write=False)
    return np.array(idx), M


def bloch_populations(q):
    """Populations ``rho_kk`` of the state with Bloch vector ``q``."""
    q = np.asarray(q, dtype=float)
    N = int(round(np.sqrt(q.shape[-1] + 1)))
    idx, M = _population_map(N)
    return 1.0 / N + rowdot(q[..., idx], M)


class StateDiagnostics(NamedTuple):
    hermiticity: float
    trace: float
    min_eigenvalue: float

    def ok(self, herm_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, pos_tol=POSITIVITY_TOL):
        return (self.hermiticity <= herm_tol and self.trace <= trace_tol
                and self.min_eigenvalue >= -pos_tol)


def validate_state(rho):
    """Defects of ``rho`` against the density-matrix invariants.

    Returns the largest ``|rho_mn - conj(rho_nm)|``, ``|Tr rho - 1|`` and the
    smallest eigenvalue of the Hermitian part. For stacked input the worst value
    over the stack is reported. The caller decides pass or fail.
    """
    rho = np.asarray(rho)
    if rho.ndim < 2 or rho.shape[-1] != rho.shape[-2]:
        raise InvalidDimensionError(f"expected square matrices, got shape {rho.shape}")
    herm = np.abs(rho - np.conj(np.swapaxes(rho, -1, -2)))
    tr = np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1.0)
    sym = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    eig = np.linalg.eigvalsh(sym)
    return StateDiagnostics(float(np.max(herm)), float(np.max(tr)), float(np.min(eig)))


def purity(rho):
    """``Tr rho**2``; equals 1 for pure states and ``1/N`` for the maximally mixed state."""
    rho = np.asarray(rho)
    return np.real(np.einsum("...ij,...ji->...", rho, rho))


def normalize(c):
    """Unit-norm copy of pure-state amplitudes (last axis)."""
    c = np.asarray(c, dtype=complex)
    return c / bnorm(c)[..., None]


def pure_density(c):
    """``|c><c| / <c|c>`` for (possibly unnormalized) amplitudes."""
    c = normalize(c)
    return c[..., :, None] * np.conj(c[..., None, :])


def dominant_amplitudes(rho, tol=1e-9):
    """Amplitudes of a pure density matrix; raises if ``rho`` is mixed beyond ``tol``."""
    rho = np.asarray(rho, dtype=complex)
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    if abs(w[-1] - 1.0) > tol:
        raise ValueError(f"state is not pure (largest eigenvalue {w[-1]:.12g})")
    c = v[:, -1]
    k = int(np.argmax(np.abs(c)))
    return c * np.exp(-1j * np.angle(c[k]))


def clamp_state(rho, floor=-POSITIVITY_TOL):
    """Project eigenvalues below ``floor`` to zero and renormalize the trace.

    Opt-in only; the steppers never call this unless asked to.
    """
    rho = np.asarray(rho, dtype=complex)
    sym = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    w, v = np.linalg.eigh(sym)
    if np.all(w >= floor):
        return rho
    w = np.where(w < floor, 0.0, w)
    out = np.einsum("...ik,...k,...jk->...ij", v, w, np.conj(v))
    return out / btrace(out)[..., None, None]


def random_density(N, rng, rank=None):
    """Random density matrix from a Ginibre draw of the given rank (full by default)."""
    rank = N if rank is None else rank
    G = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_amplitudes(N, rng):
    c = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    return c / np.linalg.norm(c)
