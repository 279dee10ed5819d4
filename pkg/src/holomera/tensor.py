"""Dense complex tensors with labeled legs, and the decompositions built on them.

Most of the package passes plain ``numpy`` arrays around; :class:`Tensor` is the
labeled wrapper used where leg bookkeeping matters (tests, small contractions).
The matrix-level helpers (:func:`polar`, :func:`truncated_svd`,
:func:`haar_unitary`) are what the hot paths call.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

ATOL = 1e-12


@dataclass(frozen=True)
class Tensor:
    """A dense complex array whose legs carry unique labels."""

    data: np.ndarray
    labels: tuple

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex, order="C")
        labels = tuple(self.labels)
        if data.ndim != len(labels):
            raise ValueError(f"{data.ndim} legs but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate leg labels {labels}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def axis(self, label: Hashable) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown leg label {label!r}") from None

    def dim(self, label: Hashable) -> int:
        return self.data.shape[self.axis(label)]

    def relabel(self, mapping: dict) -> "Tensor":
        return Tensor(self.data, tuple(mapping.get(l, l) for l in self.labels))

    def transpose(self, labels: Sequence[Hashable]) -> "Tensor":
        return Tensor(self.data.transpose([self.axis(l) for l in labels]), tuple(labels))

    def conj(self) -> "Tensor":
        return Tensor(self.data.conj(), self.labels)

    def matrix(self, row_labels: Sequence[Hashable]) -> np.ndarray:
        """View as a matrix with ``row_labels`` grouped as rows, the rest as columns."""
        rows = list(row_labels)
        cols = [l for l in self.labels if l not in rows]
        t = self.transpose(rows + cols).data
        nr = int(np.prod([self.dim(l) for l in rows], dtype=int))
        return t.reshape(nr, -1)


def contract(a: Tensor, b: Tensor, pairs: Iterable[tuple[Hashable, Hashable]]) -> Tensor:
    """Sum over paired legs; the result keeps a's free legs then b's, in order."""
    pairs = list(pairs)
    ax_a = [a.axis(p) for p, _ in pairs]
    ax_b = [b.axis(q) for _, q in pairs]
    for i, j, (p, q) in zip(ax_a, ax_b, pairs):
        if a.shape[i] != b.shape[j]:
            raise ValueError(f"dimension mismatch on ({p!r}, {q!r}): {a.shape[i]} != {b.shape[j]}")
    free_a = [l for k, l in enumerate(a.labels) if k not in ax_a]
    free_b = [l for k, l in enumerate(b.labels) if k not in ax_b]
    if set(free_a) & set(free_b):
        raise ValueError(f"free legs collide: {set(free_a) & set(free_b)}")
    data = np.tensordot(a.data, b.data, axes=(ax_a, ax_b))
    return Tensor(data, tuple(free_a) + tuple(free_b))


@dataclass(frozen=True)
class SvdFactorization:
    left: Tensor
    singular_values: np.ndarray
    right: Tensor
    truncation_error: float


def truncated_svd(m: np.ndarray, max_rank: int | None = None, cutoff: float = 0.0):
    """SVD keeping at most ``max_rank`` values above ``cutoff`` * largest.

    Returns ``(u, s, vh, discarded_weight)``. At least one value is always kept.
    """
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        import scipy.linalg

        u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    keep = len(s)
    if max_rank is not None:
        keep = min(keep, max_rank)
    if cutoff > 0 and s.size and s[0] > 0:
        keep = min(keep, max(1, int(np.count_nonzero(s > cutoff * s[0]))))
    keep = max(keep, 1)
    discarded = float(np.sum(s[keep:] ** 2))
    return u[:, :keep], s[:keep], vh[:keep], discarded


def svd_split(
    t: Tensor,
    left_legs: Sequence[Hashable],
    max_rank: int | None = None,
    cutoff: float = 0.0,
    bond: tuple[Hashable, Hashable] = ("bond_l", "bond_r"),
) -> SvdFactorization:
    """Split ``t`` into left isometry, singular values and right isometry.

    The new bond appears as the last leg of ``left`` and the first leg of
    ``right``, labeled ``bond[0]`` and ``bond[1]``.
    """
    left_legs = list(left_legs)
    if not left_legs or len(left_legs) >= len(t.labels):
        raise ValueError("left_legs must be a proper, nonempty subset of the legs")
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    right_legs = [l for l in t.labels if l not in left_legs]
    u, s, vh, err = truncated_svd(t.matrix(left_legs), max_rank, cutoff)
    lshape = [t.dim(l) for l in left_legs] + [len(s)]
    rshape = [len(s)] + [t.dim(l) for l in right_legs]
    left = Tensor(u.reshape(lshape), tuple(left_legs) + (bond[0],))
    right = Tensor(vh.reshape(rshape), (bond[1],) + tuple(right_legs))
    return SvdFactorization(left, s, right, err)


def polar(m: np.ndarray) -> np.ndarray:
    """Isometric polar factor W of a tall matrix, maximizing Re tr(W^dagger m).

    Zero singular values are completed from the SVD basis in column order,
    which keeps the result deterministic for rank-deficient input.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {m.shape}")
    u, _, vh = np.linalg.svd(m, full_matrices=False)
    return u @ vh


def polar_isometry(m: Tensor | np.ndarray, row_labels: Sequence[Hashable] | None = None):
    """Polar isometry of a tensor viewed as a matrix (rows >= cols)."""
    if isinstance(m, Tensor):
        rows = list(row_labels) if row_labels is not None else list(m.labels[:-1])
        cols = [l for l in m.labels if l not in rows]
        w = polar(m.matrix(rows))
        shape = [m.dim(l) for l in rows] + [m.dim(l) for l in cols]
        return Tensor(w.reshape(shape), tuple(rows) + tuple(cols))
    return polar(m)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix with phase fix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_unitary(dim: int, seed: int | np.random.Generator | None = None) -> Tensor:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    return Tensor(haar_unitary(dim, rng), ("out", "in"))


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return haar_unitary(rows, rng)[:, :cols]


def is_isometry(w: np.ndarray, atol: float = 1e-10) -> bool:
    w = np.asarray(w)
    return np.allclose(w.conj().T @ w, np.eye(w.shape[1]), atol=atol)


def complete_isometry(w: np.ndarray) -> np.ndarray:
    """Extend a tall isometry to a square unitary with its leading columns fixed.

    The complement is Gram-Schmidt applied to standard basis vectors in index
    order, so the completion is deterministic.
    """
    w = np.asarray(w, dtype=complex)
    n, k = w.shape
    cols = [w[:, j] for j in range(k)]
    for e in np.eye(n, dtype=complex):
        if len(cols) == n:
            break
        v = e.copy()
        for _ in range(2):
            for c in cols:
                v -= c * np.vdot(c, v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            cols.append(v / nv)
    return np.stack(cols, axis=1)
