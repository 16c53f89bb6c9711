"""One-dimensional multiresolution projection and detail operators.

The level-k projector maps a grid function f to

    sum_nu  c_nu phi(2^k . - nu),     c_nu = 2^k integral f(x) phi*(2^k x - nu) dx,

with the shift window computed exactly from support arithmetic, never by
scanning coefficients.  Coefficients follow the 2^k scaling of the analysis
integral (not the L2-normalized 2^(k/2) convention).

Everything is quadrature on the function's own grid: integrals use the cell
rule with generator values at cell midpoints, exact for piecewise-constant
generators.  The row kernels at the bottom operate on stacks of 1-D slices
so the d-dimensional module can reuse them wholesale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from . import refinable
from .errors import LevelOverflow, ResolutionExhausted
from .gridfn import GridFunction

LEVEL_HEADROOM = 4


@dataclass(frozen=True)
class LevelCoefficients:
    """Sparse coefficient window c_nu at one level; keys are shifts nu.

    The window [shift_first, shift_first + len - 1] is exactly the set of
    shifts whose dual support meets the source box; entries outside are
    identically zero and therefore absent.
    """

    level: int
    shift_first: int
    values: np.ndarray
    filter_id: str

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.complex128)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def shifts(self):
        return self.shift_first + np.arange(len(self.values))

    def as_dict(self):
        return {int(n): complex(v) for n, v in zip(self.shifts(), self.values)}

    def to_csv(self, path):
        """Rows (level, shift, re, im)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["level", "shift", "re", "im"])
            for n, v in zip(self.shifts(), self.values):
                w.writerow([self.level, int(n), repr(float(v.real)),
                            repr(float(v.imag))])


def _check_level(level, depth):
    if level < 0:
        raise ValueError(f"level must be nonnegative, got {level}")
    if level > depth - LEVEL_HEADROOM:
        raise LevelOverflow(
            f"level {level} above cap {depth - LEVEL_HEADROOM} at depth {depth}")


def _table(bank, which, gap, cache):
    cache = cache if cache is not None else refinable.DEFAULT_CACHE
    return cache.get(bank, which, gap + 1)


def _shift_window(origin_units, size, gap, dual_support):
    """Integer shift window with measure-positive overlap, exact arithmetic."""
    m = 1 << gap
    lo, hi = origin_units, origin_units + size
    a, b = dual_support
    nu_min = (lo - b * m) // m + 1
    nu_max = (hi - a * m - 1) // m
    return nu_min, nu_max


def analyze_rows(rows, origin, depth, level, bank, cache=None):
    """Coefficient rows for a stack of 1-D slices sharing one box.

    rows has shape (nslices, n); returns (coeff rows, first shift).
    """
    gap = depth - level
    dual = bank.dual
    table = _table(bank, "dual", gap, cache)
    t = table.midpoint_samples(gap)
    m = 1 << gap
    nu_min, nu_max = _shift_window(origin, rows.shape[1], gap, dual.support)
    count = nu_max - nu_min + 1
    first_col = (nu_min + dual.n_first) * m - origin
    width = t.size
    pad_l = max(0, -first_col)
    pad_r = max(0, first_col + (count - 1) * m + width - rows.shape[1])
    if pad_l or pad_r:
        padded = np.zeros((rows.shape[0], rows.shape[1] + pad_l + pad_r),
                          dtype=np.complex128)
        padded[:, pad_l:pad_l + rows.shape[1]] = rows
    else:
        padded = rows
    start = first_col + pad_l
    s0, s1 = padded.strides
    view = as_strided(padded[:, start:], shape=(rows.shape[0], count, width),
                      strides=(s0, m * s1, s1))
    coeffs = view @ t.astype(np.complex128)
    coeffs /= m
    return coeffs, nu_min


def synthesize_rows(coeffs, shift_first, level, bank, depth, cache=None):
    """Pointwise sums sum_nu c_nu phi(2^level x - nu) on a depth-J grid.

    Returns (rows, origin in grid units); the box is the union of the
    shifted, scaled supports.
    """
    gap = depth - level
    if gap < LEVEL_HEADROOM:
        raise ResolutionExhausted(
            f"depth {depth} leaves gap {gap} < {LEVEL_HEADROOM} at level {level}")
    primal = bank.primal
    table = _table(bank, "primal", gap, cache)
    u = table.midpoint_samples(gap).astype(np.complex128)
    m = 1 << gap
    count = coeffs.shape[1]
    width = u.size
    origin = (shift_first + primal.n_first) * m
    out = np.zeros((coeffs.shape[0], (count - 1) * m + width), dtype=np.complex128)
    for j in range(count):
        out[:, j * m:j * m + width] += coeffs[:, j:j + 1] * u
    return out, origin


def project_rows(rows, origin, depth, level, bank, cache=None):
    coeffs, nu_min = analyze_rows(rows, origin, depth, level, bank, cache)
    return synthesize_rows(coeffs, nu_min, level, bank, depth, cache)


def _require_1d(f):
    if f.dim != 1:
        raise ValueError(f"expected a 1-D grid function, got dimension {f.dim}")


def analyze(f, level, bank, cache=None):
    """Level-k analysis coefficients of a 1-D grid function."""
    _require_1d(f)
    _check_level(level, f.depth)
    refinable.ensure_accepted(bank)
    coeffs, nu_min = analyze_rows(f.data[None, :], f.origin[0], f.depth,
                                  level, bank, cache)
    return LevelCoefficients(level=level, shift_first=nu_min,
                             values=coeffs[0], filter_id=bank.bank_id)


def synthesize(coeffs, bank, depth, cache=None):
    """Grid function sum_nu c_nu phi(2^level . - nu) at the given depth."""
    if bank.bank_id != coeffs.filter_id:
        raise ValueError(
            f"coefficients for {coeffs.filter_id!r}, bank is {bank.bank_id!r}")
    rows, origin = synthesize_rows(coeffs.values[None, :], coeffs.shift_first,
                                   coeffs.level, bank, depth, cache)
    return GridFunction(rows[0], depth, (origin,),
                        meta=f"synthesize[{bank.bank_id},k={coeffs.level}]")


def project(f, level, bank, cache=None):
    """Projection onto the span of the level-k shifts (analysis + synthesis)."""
    _require_1d(f)
    _check_level(level, f.depth)
    refinable.ensure_accepted(bank)
    rows, origin = project_rows(f.data[None, :], f.origin[0], f.depth,
                                level, bank, cache)
    return GridFunction(rows[0], f.depth, (origin,),
                        meta=f"project[{bank.bank_id},k={level}]")


def detail(f, level, bank, cache=None):
    """Difference of consecutive projections; level 0 is the projection itself."""
    if level == 0:
        return project(f, 0, bank, cache)
    return project(f, level, bank, cache) - project(f, level - 1, bank, cache)
