"""Dictionary generation, I/O and validation.

The generator produces a deterministic overcomplete 2-D DCT dictionary; the
file formats allow plugging in externally learned dictionaries instead.

On-disk formats:

* ``DICT1`` (binary): one header line ``DICT1 <n_p> <n_d>`` terminated by a
  newline, then n_p * n_d little-endian IEEE-754 float64 values, column-major.
* ``DICTT`` (text): same header with magic ``DICTT``, then whitespace-separated
  decimals, column-major; intended for debugging.
"""

from __future__ import annotations

import math
import warnings
from pathlib import Path

import numpy as np

from .core import Dictionary
from .errors import FormatError, ParameterError

__all__ = [
    "UNIT_NORM_TOL",
    "normalize_atoms",
    "overcomplete_dct",
    "save_dictionary",
    "load_dictionary",
]

# Columns whose norm deviates from 1 by more than this are renormalized on load.
UNIT_NORM_TOL = 1e-6


def normalize_atoms(atoms: np.ndarray) -> np.ndarray:
    """Rescale every column to unit Euclidean norm."""
    arr = np.array(atoms, dtype=float)
    norms = np.linalg.norm(arr, axis=0)
    if np.any(norms == 0):
        raise ParameterError(f"atom column {int(np.argmin(norms))} is zero")
    return arr / norms


def overcomplete_dct(n_p: int, n_d: int) -> Dictionary:
    """Deterministic overcomplete 2-D DCT dictionary with n_p rows and n_d atoms.

    Requires n_p = s^2 and n_d = m^2 with m >= s.  A 1-D oversampled cosine
    table of shape s x m is built, its Kronecker product with itself forms the
    2-D atoms, every column except the constant one is mean-removed, and all
    columns are normalized.  For n_d == n_p this reduces to the orthonormal
    2-D DCT basis.
    """
    s = math.isqrt(n_p)
    if s * s != n_p or s < 2:
        raise ParameterError(f"n_p={n_p} must be a perfect square >= 4")
    m = math.isqrt(n_d)
    if m * m != n_d or m < s:
        lo = max(s, math.isqrt(max(n_d, 0)))
        below, above = lo * lo, (lo + 1) * (lo + 1)
        nearest = below if abs(n_d - below) <= abs(above - n_d) else above
        raise ParameterError(
            f"n_d={n_d} must be m^2 for some integer m >= sqrt(n_p)={s}; "
            f"nearest valid value is {nearest}"
        )
    i = np.arange(s, dtype=float)[:, None]
    k = np.arange(m, dtype=float)[None, :]
    table = np.cos(np.pi * (2.0 * i + 1.0) * k / (2.0 * m))
    atoms = np.kron(table, table)
    atoms[:, 1:] -= atoms[:, 1:].mean(axis=0)
    return Dictionary(normalize_atoms(atoms))


def save_dictionary(d: Dictionary, path, text: bool = False) -> None:
    """Write a dictionary in the DICT1 binary format (or DICTT text with text=True)."""
    path = Path(path)
    if text:
        lines = [f"DICTT {d.n_p} {d.n_d}"]
        for col in d.atoms.T:
            lines.append(" ".join(repr(v) for v in col))
        path.write_text("\n".join(lines) + "\n")
        return
    payload = d.atoms.reshape(-1, order="F").astype("<f8").tobytes()
    path.write_bytes(f"DICT1 {d.n_p} {d.n_d}\n".encode("ascii") + payload)


def _parse_header(first_line: bytes, path) -> tuple[str, int, int]:
    parts = first_line.decode("ascii", errors="replace").split()
    if len(parts) != 3 or parts[0] not in ("DICT1", "DICTT"):
        raise FormatError(f"{path}: malformed header {first_line!r}, "
                          "expected 'DICT1 <n_p> <n_d>' or 'DICTT <n_p> <n_d>'")
    try:
        n_p, n_d = int(parts[1]), int(parts[2])
    except ValueError:
        raise FormatError(f"{path}: header dimensions {parts[1:]!r} are not integers") from None
    if n_p < 1 or n_d < 1:
        raise FormatError(f"{path}: header dimensions must be positive, got {n_p}, {n_d}")
    return parts[0], n_p, n_d


def load_dictionary(path) -> Dictionary:
    """Read a DICT1 or DICTT dictionary file, validating shape and finiteness.

    Columns whose norm strays from 1 by more than UNIT_NORM_TOL are rescaled
    with a warning, so externally learned dictionaries stay usable while a
    save/load round trip of an already normalized dictionary is bit exact.
    """
    path = Path(path)
    buf = path.read_bytes()
    newline = buf.find(b"\n")
    if newline < 0:
        raise FormatError(f"{path}: missing header line")
    magic, n_p, n_d = _parse_header(buf[:newline], path)
    body = buf[newline + 1 :]

    if magic == "DICT1":
        expected = n_p * n_d * 8
        if len(body) != expected:
            raise FormatError(
                f"{path}: payload holds {len(body)} bytes, expected {expected} "
                f"for a {n_p}x{n_d} dictionary"
            )
        flat = np.frombuffer(body, dtype="<f8").astype(float)
    else:
        tokens = body.split()
        if len(tokens) != n_p * n_d:
            raise FormatError(
                f"{path}: payload holds {len(tokens)} values, expected {n_p * n_d}"
            )
        try:
            flat = np.array([float(t) for t in tokens], dtype=float)
        except ValueError:
            raise FormatError(f"{path}: payload contains a non-numeric value") from None

    atoms = flat.reshape((n_p, n_d), order="F")
    bad = ~np.isfinite(atoms)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise FormatError(f"{path}: non-finite entry at (row={r}, col={c})")

    norms = np.linalg.norm(atoms, axis=0)
    off = np.abs(norms - 1.0) > UNIT_NORM_TOL
    if off.any():
        if np.any(norms[off] == 0):
            raise FormatError(f"{path}: atom column {int(np.argmax(norms == 0))} is zero")
        warnings.warn(
            f"{path}: {int(off.sum())} atom column(s) deviate from unit norm by more "
            f"than {UNIT_NORM_TOL}; renormalizing",
            RuntimeWarning,
            stacklevel=2,
        )
        atoms = atoms.copy()
        atoms[:, off] /= norms[off]
    return Dictionary(atoms)
