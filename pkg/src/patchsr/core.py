"""Domain types shared by all modules: images, patches, dictionaries, configuration.

All types are immutable value objects; arrays are copied on construction and
marked read-only, so instances can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, ParameterError


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Image:
    """A 2-D grid of real intensities (nominal range [0, 1] after normalization)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=float, order="C", copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError(
                f"image must be a nonempty 2-D array, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ParameterError("image contains non-finite entries")
        object.__setattr__(self, "data", _readonly(arr))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Column-atom matrix: each of the n_d columns is one vectorized square patch.

    The patch side is sqrt(n_p), so n_p must be a perfect square.  Atom columns
    are expected to have unit Euclidean norm; the generator and the file loader
    enforce this (see :mod:`patchsr.dictionary`), while the type itself only
    requires finite entries so that scaled test operators can be built.
    """

    atoms: np.ndarray

    def __post_init__(self):
        arr = np.array(self.atoms, dtype=float, order="C", copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError(
                f"dictionary must be a nonempty 2-D matrix, got shape {arr.shape}"
            )
        n_p, n_d = arr.shape
        side = math.isqrt(n_p)
        if side * side != n_p:
            raise ParameterError(f"patch dimension n_p={n_p} is not a perfect square")
        if n_d < n_p:
            raise ParameterError(
                f"dictionary needs at least n_p={n_p} atoms for completeness, got n_d={n_d}"
            )
        if not np.all(np.isfinite(arr)):
            raise ParameterError("dictionary contains non-finite entries")
        object.__setattr__(self, "atoms", _readonly(arr))

    @property
    def n_p(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_d(self) -> int:
        return self.atoms.shape[1]

    @property
    def patch_side(self) -> int:
        return math.isqrt(self.n_p)


class PenaltyKind(Enum):
    """Supported sparsity penalties."""

    CAUCHY = "cauchy"
    MCP = "mcp"
    L1 = "l1"


@dataclass(frozen=True)
class Penalty:
    """A parametric sparsity penalty: a kind plus its spread parameter gamma.

    gamma is required (and must be positive) for the Cauchy and MCP penalties;
    the l1 norm has no shape parameter and ignores it.
    """

    kind: PenaltyKind
    gamma: float | None = None

    def __post_init__(self):
        if self.kind is PenaltyKind.L1:
            object.__setattr__(self, "gamma", None)
            return
        if self.gamma is None or not math.isfinite(self.gamma) or self.gamma <= 0:
            raise ParameterError(
                f"{self.kind.value} penalty requires gamma > 0, got {self.gamma}"
            )
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the per-patch forward-backward loop.

    mu is the gradient step size; leave it None to use the maximal provably
    convergent step 1/L, where L is the squared spectral norm of the composite
    forward operator.  An explicit mu is validated against L at solve time.
    """

    lam: float
    tau: float = 1.01
    mu: float | None = None
    tol: float = 1e-5
    max_iters: int = 300

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam <= 0:
            raise ParameterError(f"lam must be positive, got {self.lam}")
        if not math.isfinite(self.tau) or self.tau <= 1.0:
            raise ParameterError(f"tau must exceed 1, got {self.tau}")
        if self.mu is not None and (not math.isfinite(self.mu) or self.mu <= 0):
            raise ParameterError(f"mu must be positive when given, got {self.mu}")
        if not math.isfinite(self.tol) or self.tol <= 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be at least 1, got {self.max_iters}")


@dataclass(frozen=True, eq=False)
class PatchGrid:
    """Anchors of overlapping patches plus the per-pixel overlap counts."""

    image_rows: int
    image_cols: int
    patch_size: int
    stride: int
    positions: tuple[tuple[int, int], ...]
    overlap_count: np.ndarray


def _axis_anchors(length: int, patch_size: int, stride: int) -> list[int]:
    anchors = list(range(0, length - patch_size + 1, stride))
    last = length - patch_size
    if anchors[-1] != last:
        anchors.append(last)  # clamp the trailing anchor instead of padding
    return anchors


def build_patch_grid(rows: int, cols: int, patch_size: int, stride: int) -> PatchGrid:
    """Enumerate patch anchors covering the whole image.

    Anchors are laid out at multiples of ``stride``; a final anchor per axis is
    clamped to ``dim - patch_size`` so the last row/column band is always
    covered without inventing pixel values.
    """
    if patch_size < 1 or stride < 1:
        raise ParameterError(
            f"patch_size and stride must be positive, got {patch_size}, {stride}"
        )
    if patch_size > min(rows, cols):
        raise DimensionError(
            f"patch size {patch_size} exceeds image dimensions {rows}x{cols}"
        )
    row_anchors = _axis_anchors(rows, patch_size, stride)
    col_anchors = _axis_anchors(cols, patch_size, stride)
    positions = tuple((r, c) for r in row_anchors for c in col_anchors)
    count = np.zeros((rows, cols), dtype=np.int64)
    for r, c in positions:
        count[r : r + patch_size, c : c + patch_size] += 1
    return PatchGrid(
        image_rows=rows,
        image_cols=cols,
        patch_size=patch_size,
        stride=stride,
        positions=positions,
        overlap_count=_readonly(count),
    )


def normalize_image(img: Image) -> Image:
    """Linearly rescale intensities to [0, 1]; a constant image maps to zeros."""
    lo = float(img.data.min())
    hi = float(img.data.max())
    if hi == lo:
        return Image(np.zeros_like(img.data))
    return Image((img.data - lo) / (hi - lo))


def vectorize_patch(patch: np.ndarray) -> np.ndarray:
    """Flatten a patch column-major (the fixed convention shared by all modules)."""
    return np.asarray(patch, dtype=float).reshape(-1, order="F")


def devectorize_patch(vec: np.ndarray, side: int) -> np.ndarray:
    """Inverse of :func:`vectorize_patch` for a square patch of given side."""
    v = np.asarray(vec, dtype=float)
    if v.size != side * side:
        raise DimensionError(f"vector of length {v.size} is not a {side}x{side} patch")
    return v.reshape((side, side), order="F")
