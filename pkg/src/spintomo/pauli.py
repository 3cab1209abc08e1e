"""Pauli-string operator algebra for few-spin systems.

Conventions
-----------
Single-spin matrices act on the basis (|1>, |0>), i.e. the first basis
vector is the spin-up state and sigma_z = diag(1, -1) gives sigma_z|1> = +|1>.
A Pauli string on n spins is the tensor product of single-spin operators
drawn from {I, sigma_x, sigma_y, sigma_z}, with spin 1 in the leftmost
(most significant) slot.  The canonical enumeration is base-4 big-endian,

    index = sum_i axis_i * 4**(n - i),    axis in {0:I, 1:X, 2:Y, 3:Z},

so for n=1 the order is I, X, Y, Z and for n=2 it runs II, IX, IY, IZ,
XI, XX, ...  Strings are orthogonal under the trace inner product,
tr(S_i S_j) = 2**n delta_ij, hence any Hermitian H has the unique real
expansion H = sum_i c_i S_i with c_i = Re tr(S_i H) / 2**n.

The module also provides a real encoding of Hermitian matrices used as the
network output layout: scanning rows a = 0..D-1, emit H_aa, then for each
b > a the pair (Re H_ab, Im H_ab).  For one spin this gives exactly the
four independent elements (H_00, Re H_01, Im H_01, H_11).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import ContractError, InputError, SizeError

MAX_SPINS = 5
HERMITICITY_TOL = 1e-8

PAULI_LABELS = "IXYZ"

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

SIGMA = np.stack([PAULI_I, PAULI_X, PAULI_Y, PAULI_Z])
SIGMA.flags.writeable = False


def check_n(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_SPINS:
        raise SizeError(f"spin count must be an integer in 1..{MAX_SPINS}, got {n!r}")
    return int(n)


def basis_size(n: int) -> int:
    """Number of Pauli strings on n spins, 4**n."""
    return 4 ** check_n(n)


def dim(n: int) -> int:
    """Hilbert-space dimension, 2**n."""
    return 2 ** check_n(n)


def n_from_dim(d: int) -> int:
    n = int(d).bit_length() - 1
    if d < 2 or 2**n != d or n > MAX_SPINS:
        raise SizeError(f"dimension {d} is not 2**n for n in 1..{MAX_SPINS}")
    return n


@lru_cache(maxsize=MAX_SPINS)
def axes_table(n: int) -> np.ndarray:
    """(4**n, n) array of per-spin axes for every basis index, read-only."""
    check_n(n)
    table = np.stack(np.unravel_index(np.arange(4**n), (4,) * n), axis=1)
    table = table.astype(np.uint8)
    table.flags.writeable = False
    return table


@lru_cache(maxsize=MAX_SPINS)
def weights(n: int) -> np.ndarray:
    """(4**n,) number of non-identity slots per basis index, read-only."""
    w = (axes_table(n) != 0).sum(axis=1)
    w.flags.writeable = False
    return w


@lru_cache(maxsize=MAX_SPINS)
def basis_matrices(n: int) -> np.ndarray:
    """All Pauli strings as one (4**n, 2**n, 2**n) array in canonical order."""
    check_n(n)
    mats = SIGMA
    for _ in range(n - 1):
        p, d = mats.shape[0], mats.shape[1]
        mats = np.einsum("aij,bkl->abikjl", mats, SIGMA).reshape(4 * p, 2 * d, 2 * d)
    mats = np.ascontiguousarray(mats)
    mats.flags.writeable = False
    return mats


@dataclass(frozen=True)
class PauliString:
    """One tensor-product string, identified by its per-spin axes."""

    axes: tuple[int, ...]

    def __post_init__(self):
        check_n(len(self.axes))
        if any(a not in (0, 1, 2, 3) for a in self.axes):
            raise InputError(f"axes must be in 0..3, got {self.axes}")
        object.__setattr__(self, "axes", tuple(int(a) for a in self.axes))

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def weight(self) -> int:
        return sum(a != 0 for a in self.axes)

    @property
    def support(self) -> tuple[int, ...]:
        """1-based spins the string acts on non-trivially."""
        return tuple(i + 1 for i, a in enumerate(self.axes) if a != 0)

    @property
    def label(self) -> str:
        return "".join(PAULI_LABELS[a] for a in self.axes)

    @property
    def index(self) -> int:
        i = 0
        for a in self.axes:
            i = 4 * i + a
        return i

    def matrix(self) -> np.ndarray:
        return basis_matrices(self.n)[self.index]

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls((0,) * check_n(n))

    @classmethod
    def single(cls, n: int, spin: int, axis: int) -> "PauliString":
        """String with one non-identity slot at 1-based `spin`."""
        check_n(n)
        if not 1 <= spin <= n:
            raise InputError(f"spin must be in 1..{n}, got {spin}")
        axes = [0] * n
        axes[spin - 1] = axis
        return cls(tuple(axes))

    @classmethod
    def from_index(cls, index: int, n: int) -> "PauliString":
        if not 0 <= index < basis_size(n):
            raise InputError(f"index {index} out of range for n={n}")
        return cls(tuple(int(a) for a in axes_table(n)[index]))

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        try:
            axes = tuple(PAULI_LABELS.index(ch) for ch in label.upper())
        except ValueError:
            raise InputError(f"label may only contain I,X,Y,Z: {label!r}") from None
        return cls(axes)

    def __str__(self) -> str:
        return self.label


@lru_cache(maxsize=MAX_SPINS)
def pauli_basis(n: int) -> tuple[PauliString, ...]:
    """All 4**n strings in canonical order."""
    return tuple(PauliString(tuple(int(a) for a in row)) for row in axes_table(n))


def labels(n: int) -> tuple[str, ...]:
    return tuple(s.label for s in pauli_basis(n))


def _as_operator(h: np.ndarray) -> tuple[np.ndarray, int]:
    h = np.asarray(h, dtype=complex)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise SizeError(f"expected square matrices, got shape {h.shape}")
    return h, n_from_dim(h.shape[-1])


def check_hermitian(h: np.ndarray, tol: float = HERMITICITY_TOL) -> None:
    gap = np.abs(h - np.conj(np.swapaxes(h, -1, -2))).max()
    if gap > tol:
        raise ContractError(f"matrix is not Hermitian: max |H - H^dag| = {gap:.3e}")


def decompose(h: np.ndarray) -> np.ndarray:
    """Pauli coefficients of a Hermitian matrix (or stack of them).

    Parameters
    ----------
    h : (..., 2**n, 2**n) complex, Hermitian to within 1e-8.

    Returns
    -------
    (..., 4**n) real array, c_i = Re tr(S_i h) / 2**n.
    """
    h, n = _as_operator(h)
    check_hermitian(h)
    mats = basis_matrices(n)
    return np.einsum("pde,...ed->...p", mats, h).real / (2**n)


def reconstruct(coeffs: np.ndarray, n: int | None = None) -> np.ndarray:
    """Hermitian matrix from real Pauli coefficients, H = sum_i c_i S_i."""
    coeffs = np.asarray(coeffs)
    if np.iscomplexobj(coeffs):
        raise ContractError("Pauli coefficients must be real")
    p = coeffs.shape[-1]
    if n is None:
        n = round(np.log(max(p, 1)) / np.log(4))
    if basis_size(n) != p:
        raise SizeError(f"coefficient length {p} is not 4**n for n in 1..{MAX_SPINS}")
    return np.einsum("...p,pde->...de", coeffs.astype(float), basis_matrices(n))


# --- real encoding of Hermitian matrices (network output layout) ---


@lru_cache(maxsize=MAX_SPINS + 2)
def _encoding_layout(d: int):
    """Index arrays mapping matrix entries to encoding slots and back."""
    diag_slot = np.empty(d, dtype=np.intp)
    rows, cols, re_slot, im_slot = [], [], [], []
    slot = 0
    for a in range(d):
        diag_slot[a] = slot
        slot += 1
        for b in range(a + 1, d):
            rows.append(a)
            cols.append(b)
            re_slot.append(slot)
            im_slot.append(slot + 1)
            slot += 2
    assert slot == d * d
    to_arr = lambda x: np.asarray(x, dtype=np.intp)
    return diag_slot, to_arr(rows), to_arr(cols), to_arr(re_slot), to_arr(im_slot)


def encode(h: np.ndarray) -> np.ndarray:
    """Pack a Hermitian matrix (or stack) into 4**n reals.

    Layout per matrix: for each row a, the diagonal H_aa, then
    (Re H_ab, Im H_ab) for every b > a.
    """
    h, _ = _as_operator(h)
    check_hermitian(h)
    d = h.shape[-1]
    diag, rows, cols, re_s, im_s = _encoding_layout(d)
    v = np.empty(h.shape[:-2] + (d * d,), dtype=float)
    v[..., diag] = h[..., np.arange(d), np.arange(d)].real
    upper = h[..., rows, cols]
    v[..., re_s] = upper.real
    v[..., im_s] = upper.imag
    return v


def decode(v: np.ndarray, d: int | None = None) -> np.ndarray:
    """Inverse of :func:`encode`; output is exactly Hermitian."""
    v = np.asarray(v, dtype=float)
    if d is None:
        d = round(np.sqrt(v.shape[-1]))
    if d * d != v.shape[-1]:
        raise SizeError(f"encoding length {v.shape[-1]} is not a square")
    n_from_dim(d)
    diag, rows, cols, re_s, im_s = _encoding_layout(d)
    h = np.zeros(v.shape[:-1] + (d, d), dtype=complex)
    h[..., np.arange(d), np.arange(d)] = v[..., diag]
    upper = v[..., re_s] + 1j * v[..., im_s]
    h[..., rows, cols] = upper
    h[..., cols, rows] = np.conj(upper)
    return h


def identity_encoding_slots(d: int) -> np.ndarray:
    """Slots of the encoding touched by the identity direction (diagonal)."""
    return _encoding_layout(d)[0].copy()


def strings_supported_on(n: int, spins: Iterable[int]) -> np.ndarray:
    """Basis indices of all weight>=1 strings acting only within `spins`."""
    spins = sorted(set(spins))
    if any(not 1 <= s <= n for s in spins):
        raise InputError(f"spins must be within 1..{n}, got {spins}")
    table = axes_table(n)
    outside = [i for i in range(n) if i + 1 not in spins]
    mask = np.ones(4**n, dtype=bool)
    if outside:
        mask = (table[:, outside] == 0).all(axis=1)
    mask[0] = False
    return np.flatnonzero(mask)
