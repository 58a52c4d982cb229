"""Linear forward-model operators on patches: blur, downsampling, synthesis.

The composite map a -> S_q(H(D a)) takes a coefficient vector through
dictionary synthesis, point-spread-function blur and block-average decimation.
Each stage has an exact adjoint so gradient steps of the quadratic data term
can be evaluated matrix-free; a materialized matrix of the composition is also
available (and cached) since patches are small.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Dictionary, devectorize_patch, vectorize_patch
from .errors import DimensionError, FormatError, ParameterError

__all__ = [
    "Psf",
    "PatchOperator",
    "gaussian_psf",
    "load_psf",
    "save_psf",
    "blur_patch",
    "blur_adjoint",
    "downsample",
    "upsample_adjoint",
    "apply_forward",
    "apply_adjoint",
    "lipschitz_constant",
]


@dataclass(frozen=True, eq=False)
class Psf:
    """A normalized point spread function kernel with odd side length."""

    kernel: np.ndarray

    def __post_init__(self):
        arr = np.array(self.kernel, dtype=float, order="C", copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"PSF kernel must be square, got shape {arr.shape}")
        if arr.shape[0] % 2 == 0:
            raise ParameterError(f"PSF side must be odd, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ParameterError("PSF entries must be finite and nonnegative")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise ParameterError(f"PSF must sum to 1, got {arr.sum()!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "kernel", arr)

    @property
    def size(self) -> int:
        return self.kernel.shape[0]


def gaussian_psf(size: int, sigma: float) -> Psf:
    """Sampled isotropic Gaussian kernel, normalized to sum 1."""
    if size < 1 or size % 2 == 0:
        raise ParameterError(f"PSF size must be odd and positive, got {size}")
    if not math.isfinite(sigma) or sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    half = size // 2
    d = np.arange(-half, half + 1, dtype=float)
    w = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * sigma * sigma))
    return Psf(w / w.sum())


def save_psf(psf: Psf, path) -> None:
    lines = [f"PSF {psf.size}"]
    for row in psf.kernel:
        lines.append(" ".join(repr(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_psf(path) -> Psf:
    """Read a kernel from the plain-text PSF format ("PSF <size>" + rows).

    Entries are renormalized to sum 1 to tolerate truncated decimal dumps.
    """
    text = Path(path).read_text()
    tokens = text.split()
    if len(tokens) < 2 or tokens[0] != "PSF":
        raise FormatError(f"{path}: expected header 'PSF <size>'")
    try:
        size = int(tokens[1])
    except ValueError:
        raise FormatError(f"{path}: PSF size {tokens[1]!r} is not an integer") from None
    values = tokens[2:]
    if len(values) != size * size:
        raise FormatError(
            f"{path}: expected {size * size} PSF entries, found {len(values)}"
        )
    try:
        arr = np.array([float(v) for v in values], dtype=float).reshape(size, size)
    except ValueError:
        raise FormatError(f"{path}: PSF contains a non-numeric entry") from None
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise FormatError(f"{path}: PSF entries must be finite and nonnegative")
    total = arr.sum()
    if total <= 0:
        raise FormatError(f"{path}: PSF sums to {total}, cannot normalize")
    return Psf(arr / total)


def _correlate_reflect(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    half = kernel.shape[0] // 2
    if half == 0:
        return arr * kernel[0, 0]
    padded = np.pad(arr, half, mode="symmetric")
    windows = sliding_window_view(padded, kernel.shape)
    return np.einsum("ijkl,kl->ij", windows, kernel)


def blur_patch(psf: Psf, patch: np.ndarray) -> np.ndarray:
    """2-D correlation with the PSF under symmetric (reflective) boundary extension.

    Reflection is used because patches are tiny; zero padding would create dark
    rims that dominate the data term.
    """
    return _correlate_reflect(np.asarray(patch, dtype=float), psf.kernel)


def _convolve_full(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    pad = kernel.shape[0] - 1
    padded = np.pad(arr, pad)
    windows = sliding_window_view(padded, kernel.shape)
    return np.einsum("ijkl,kl->ij", windows, kernel[::-1, ::-1])


def blur_adjoint(psf: Psf, patch: np.ndarray) -> np.ndarray:
    """Exact adjoint of :func:`blur_patch` under the reflective boundary rule.

    The blur is (symmetric pad) followed by (valid correlation); its transpose
    is therefore (full convolution) followed by folding each padded border cell
    back onto the interior pixel it mirrored.
    """
    arr = np.asarray(patch, dtype=float)
    half = psf.size // 2
    if half == 0:
        return arr * psf.kernel[0, 0]
    full = _convolve_full(arr, psf.kernel)
    ridx = np.pad(np.arange(arr.shape[0]), half, mode="symmetric")
    cidx = np.pad(np.arange(arr.shape[1]), half, mode="symmetric")
    out = np.zeros_like(arr)
    np.add.at(out, (ridx[:, None], cidx[None, :]), full)
    return out


def downsample(q: int, patch: np.ndarray) -> np.ndarray:
    """Decimate by a factor q: each output pixel is the mean of its q x q block."""
    if q < 1:
        raise ParameterError(f"downsampling factor must be positive, got {q}")
    arr = np.asarray(patch, dtype=float)
    rows, cols = arr.shape
    if rows % q or cols % q:
        raise DimensionError(f"shape {arr.shape} is not divisible by q={q}")
    return arr.reshape(rows // q, q, cols // q, q).mean(axis=(1, 3))


def upsample_adjoint(q: int, patch: np.ndarray) -> np.ndarray:
    """Exact adjoint of :func:`downsample`: replicate into q x q blocks, scale by 1/q^2."""
    if q < 1:
        raise ParameterError(f"downsampling factor must be positive, got {q}")
    arr = np.asarray(patch, dtype=float)
    return np.repeat(np.repeat(arr, q, axis=0), q, axis=1) / (q * q)


@dataclass(frozen=True, eq=False)
class PatchOperator:
    """The composite forward model S_q * H * D acting on coefficient vectors."""

    dictionary: Dictionary
    psf: Psf
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ParameterError(f"magnification factor must be positive, got {self.q}")
        if self.dictionary.patch_side % self.q:
            raise DimensionError(
                f"patch side {self.dictionary.patch_side} is not divisible by q={self.q}"
            )

    @property
    def hr_side(self) -> int:
        return self.dictionary.patch_side

    @property
    def lr_side(self) -> int:
        return self.hr_side // self.q

    @property
    def n_lr(self) -> int:
        return self.lr_side * self.lr_side

    @cached_property
    def matrix(self) -> np.ndarray:
        """Materialized (n_p/q^2) x n_d matrix of the composition.

        Atoms are blurred and decimated in one batch; agrees with
        :func:`apply_forward` up to rounding.
        """
        hr, lr, n_d = self.hr_side, self.lr_side, self.dictionary.n_d
        stack = self.dictionary.atoms.reshape((hr, hr, n_d), order="F")
        half = self.psf.size // 2
        if half == 0:
            blurred = stack * self.psf.kernel[0, 0]
        else:
            padded = np.pad(stack, ((half, half), (half, half), (0, 0)), mode="symmetric")
            windows = sliding_window_view(padded, self.psf.kernel.shape, axis=(0, 1))
            blurred = np.einsum("ijnkl,kl->ijn", windows, self.psf.kernel)
        low = blurred.reshape(lr, self.q, lr, self.q, n_d).mean(axis=(1, 3))
        mat = low.reshape((lr * lr, n_d), order="F")
        mat.setflags(write=False)
        return mat

    @cached_property
    def lipschitz(self) -> float:
        """Cached ||A^T A|| estimate used for step-size selection."""
        return _power_iteration(
            lambda v: self.matrix.T @ (self.matrix @ v),
            self.dictionary.n_d,
            tol=1e-14,
            max_iters=20000,
        )


def apply_forward(op: PatchOperator, a: np.ndarray) -> np.ndarray:
    """Synthesize D a, blur, decimate; returns the vectorized LR patch."""
    a = np.asarray(a, dtype=float)
    if a.shape != (op.dictionary.n_d,):
        raise DimensionError(
            f"coefficient vector must have length {op.dictionary.n_d}, got shape {a.shape}"
        )
    hr = devectorize_patch(op.dictionary.atoms @ a, op.hr_side)
    return vectorize_patch(downsample(op.q, blur_patch(op.psf, hr)))


def apply_adjoint(op: PatchOperator, r: np.ndarray) -> np.ndarray:
    """Adjoint composition D^T H^T S_q^T applied to a vectorized LR residual."""
    r = np.asarray(r, dtype=float)
    if r.shape != (op.n_lr,):
        raise DimensionError(
            f"residual vector must have length {op.n_lr}, got shape {r.shape}"
        )
    hr = blur_adjoint(op.psf, upsample_adjoint(op.q, devectorize_patch(r, op.lr_side)))
    return op.dictionary.atoms.T @ vectorize_patch(hr)


def _power_iteration(step, n: int, tol: float, max_iters: int) -> float:
    # Deterministic start so the derived step size is reproducible across runs.
    v = np.full(n, 1.0 / math.sqrt(n))
    lam = 0.0
    prev = 0.0
    for _ in range(max_iters):
        w = step(v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            warnings.warn(
                "operator is numerically zero; its Lipschitz constant is 0 and "
                "no valid step size exists",
                RuntimeWarning,
                stacklevel=3,
            )
            return 0.0
        v = w / lam
        if abs(lam - prev) <= tol * lam:
            return lam
        prev = lam
    return lam


def lipschitz_constant(op: PatchOperator, tol: float, max_iters: int) -> float:
    """Largest eigenvalue of A^T A by power iteration on the matrix-free maps.

    Returns 0 (with a warning) for a zero operator; callers must then reject
    any step-size selection.
    """
    if not math.isfinite(tol) or tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise ParameterError(f"max_iters must be at least 1, got {max_iters}")
    return _power_iteration(
        lambda v: apply_adjoint(op, apply_forward(op, v)),
        op.dictionary.n_d,
        tol=tol,
        max_iters=max_iters,
    )
