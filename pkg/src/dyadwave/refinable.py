"""Compactly supported refinable (scaling) functions given by filter masks.

A bank carries a primal mask and a dual mask, each normalized so the
coefficients sum to sqrt(2) and satisfying the two-scale relation

    phi(x) = sqrt(2) * sum_n h[n] phi(2x - n),   supp phi = [n0, n1].

Values on dyadic grids are obtained exactly (up to rounding) by solving the
integer-point eigenproblem of the refinement relation and subdividing; no
interpolation is involved.  Inner products between tabulated functions use
the cell rule on midpoint samples, which is exact for piecewise-constant
generators and second-order accurate otherwise.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BankRejected, DepthOverflow, NonSimpleEigenvalue, ParseError

log = logging.getLogger("dyadwave.refinable")

SQRT2 = float(np.sqrt(2.0))

MASK_SUM_TOL = 1e-12
EIGEN_SIMPLE_TOL = 1e-10
ACCEPTANCE_RESIDUAL = 1e-6
MAX_TABLE_DEPTH = 24

SMOOTHNESS_CLASSES = ("pcw_const", "c0", "c1")

TABLE_MAGIC = b"HWTB1"


@dataclass(frozen=True)
class Mask:
    """Finite real refinement mask with integer support [n_first, n_last]."""

    coeffs: tuple
    n_first: int

    @property
    def n_last(self):
        return self.n_first + len(self.coeffs) - 1

    @property
    def support(self):
        return (self.n_first, self.n_last)

    @property
    def support_length(self):
        return len(self.coeffs) - 1

    def array(self):
        return np.asarray(self.coeffs, dtype=float)


@dataclass(frozen=True)
class FilterBank:
    """Primal/dual mask pair with a declared smoothness class for the dual."""

    bank_id: str
    primal: Mask
    dual: Mask
    smoothness: str

    def __post_init__(self):
        if not self.bank_id:
            raise ValueError("bank id must be nonempty")
        if self.smoothness not in SMOOTHNESS_CLASSES:
            raise ValueError(f"unknown smoothness class {self.smoothness!r}")
        for name, mask in (("primal", self.primal), ("dual", self.dual)):
            if len(mask.coeffs) == 0:
                raise ValueError(f"{name} mask of {self.bank_id} is empty")
            s = float(np.sum(mask.array()))
            if abs(s - SQRT2) > MASK_SUM_TOL:
                raise ValueError(
                    f"{name} mask of {self.bank_id} sums to {s!r}, not sqrt(2)")

    @property
    def dual_is_c1(self):
        """Whether the dual generator is continuously differentiable."""
        return self.smoothness == "c1"

    def mask(self, which):
        if which == "primal":
            return self.primal
        if which == "dual":
            return self.dual
        raise ValueError(f"which must be 'primal' or 'dual', got {which!r}")


@dataclass(frozen=True)
class DyadicTable:
    """Values of a refinable function on its support at step 2**-depth.

    ``values[i]`` is the function at ``n_first + i * 2**-depth``; the last
    entry sits at the right support endpoint.  ``derivative_values`` is
    present only for banks declared continuously differentiable.
    """

    filter_id: str
    which: str
    depth: int
    n_first: int
    values: np.ndarray
    derivative_values: np.ndarray | None
    checksum: str

    @property
    def step(self):
        return 2.0 ** (-self.depth)

    @property
    def n_last(self):
        return self.n_first + (len(self.values) - 1) * 2 ** (-self.depth)

    def grid(self):
        return self.n_first + np.arange(len(self.values)) * self.step

    def midpoint_samples(self, gap):
        """Values at n_first + (m + 1/2) * 2**-gap over the support.

        Requires depth >= gap + 1; the midpoints of the step-2**-gap cells
        are the odd dyadic points one level finer.
        """
        if gap + 1 > self.depth:
            raise ValueError(f"table depth {self.depth} too shallow for gap {gap}")
        stride = 2 ** (self.depth - gap)
        return self.values[stride // 2::stride]


def _payload_checksum(values, derivative_values):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(values).tobytes())
    if derivative_values is not None:
        h.update(np.ascontiguousarray(derivative_values).tobytes())
    return h.hexdigest()


def mask_digest(bank):
    """Short content digest of both masks; keys the table cache."""
    h = hashlib.sha256()
    for mask in (bank.primal, bank.dual):
        h.update(struct.pack("<i", mask.n_first))
        h.update(mask.array().tobytes())
    return h.hexdigest()[:12]


def _refinement_matrix(mask, factor=1.0):
    """M[k, l] = factor * sqrt(2) * h[2k - l] over integer support points."""
    n = mask.support_length + 1
    h = mask.array()
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            idx = 2 * (i + mask.n_first) - (j + mask.n_first) - mask.n_first
            if 0 <= idx < n:
                m[i, j] = factor * SQRT2 * h[idx]
    return m


def _eigenvector_at(matrix, target, what):
    w, v = np.linalg.eig(matrix)
    hits = np.nonzero(np.abs(w - target) <= EIGEN_SIMPLE_TOL)[0]
    if len(hits) != 1:
        raise NonSimpleEigenvalue(
            f"{what}: eigenvalue {target} has multiplicity {len(hits)} "
            f"within {EIGEN_SIMPLE_TOL}")
    vec = v[:, hits[0]]
    if np.max(np.abs(vec.imag)) > 1e-12 * np.max(np.abs(vec)):
        raise NonSimpleEigenvalue(f"{what}: eigenvector is not real")
    return vec.real


def integer_values(bank, which):
    """Function values at the integer support points, as a map n -> phi(n).

    Solves the eigenvalue-1 problem of the integer refinement matrix and
    normalizes to sum 1.  Piecewise-constant generators take the left-closed
    convention (value 1 at the left support endpoint) since their integer
    eigenproblem is degenerate by construction.
    """
    mask = bank.mask(which)
    vec = _integer_vector(bank, which)
    return {mask.n_first + i: float(v) for i, v in enumerate(vec)}


def _integer_vector(bank, which):
    mask = bank.mask(which)
    n = mask.support_length + 1
    if n == 2 and abs(mask.coeffs[0] - mask.coeffs[1]) <= MASK_SUM_TOL:
        # unit-interval indicator: its integer eigenproblem is degenerate by
        # construction, resolved by the left-closed convention
        vec = np.zeros(n)
        vec[0] = 1.0
        return vec
    m = _refinement_matrix(mask)
    vec = _eigenvector_at(m, 1.0, f"{bank.bank_id}/{which}")
    total = vec.sum()
    if abs(total) < 1e-8 * np.abs(vec).max():
        raise NonSimpleEigenvalue(
            f"{bank.bank_id}/{which}: eigenvector sums to ~0; "
            "generator has no pointwise normalization")
    return vec / total


def _derivative_integer_vector(bank, which):
    # phi'(k) is the eigenvalue-1 vector of 2*sqrt(2)*h[2k-l]; the slope
    # normalization sum_k k*phi'(k) = -1 follows from reproducing linears.
    mask = bank.mask(which)
    m = _refinement_matrix(mask, factor=2.0)
    vec = _eigenvector_at(m, 1.0, f"{bank.bank_id}/{which} derivative")
    ks = mask.n_first + np.arange(len(vec))
    slope = float(np.dot(ks, vec))
    if abs(slope) < 1e-10 * np.abs(vec).max():
        raise NonSimpleEigenvalue(
            f"{bank.bank_id}/{which}: derivative normalization degenerate")
    return vec / (-slope)


def _subdivide(mask, start, levels, factor_per_level=1.0):
    """Run the two-scale subdivision from integer values down `levels` times."""
    v = start
    m = mask.support_length
    h = mask.array()
    for lev in range(levels):
        size = v.size
        out = np.empty(2 * size - 1)
        out[0::2] = v
        acc = np.zeros(size - 1)
        jj = np.arange(1, 2 * size - 1, 2)
        base = mask.n_first * (1 << lev)
        for n in range(m + 1):
            src = base + jj - (n + mask.n_first) * (1 << lev)
            ok = (src >= 0) & (src < size)
            if ok.any():
                acc[ok] += factor_per_level * SQRT2 * h[n] * v[src[ok]]
        out[1::2] = acc
        v = out
    return v


def cascade(bank, which, depth):
    """Tabulate the generator (and derivative when declared C1) at depth L.

    Exact at dyadic rationals: each level halves the step using the
    refinement relation, seeded by the integer-point eigenvector.
    """
    if not 1 <= depth <= MAX_TABLE_DEPTH:
        raise DepthOverflow(f"depth {depth} outside [1, {MAX_TABLE_DEPTH}]")
    mask = bank.mask(which)
    values = _subdivide(mask, _integer_vector(bank, which), depth)
    deriv = None
    if bank.dual_is_c1:
        deriv = _subdivide(mask, _derivative_integer_vector(bank, which),
                           depth, factor_per_level=2.0)
    values.setflags(write=False)
    if deriv is not None:
        deriv.setflags(write=False)
    return DyadicTable(
        filter_id=bank.bank_id, which=which, depth=depth, n_first=mask.n_first,
        values=values, derivative_values=deriv,
        checksum=_payload_checksum(values, deriv))


def refinement_residual(table, bank):
    """max_x |phi(x) - sqrt(2) sum_n h[n] phi(2x - n)| on the table's grid.

    2x lands on the coarser sub-lattice of the same table, so the check is
    self-contained.
    """
    mask = bank.mask(table.which)
    v = table.values
    size = v.size
    # x = n_first + i*2^-L; contributions phi(2x - n) with argument outside
    # the support vanish, so out-of-range source indices are simply skipped.
    i = np.arange(size)
    approx = np.zeros(size)
    base = mask.n_first * (1 << table.depth)
    for n in range(mask.support_length + 1):
        src = base + 2 * i - (n + mask.n_first) * (1 << table.depth)
        ok = (src >= 0) & (src < size)
        approx[ok] += SQRT2 * mask.array()[n] * v[src[ok]]
    return float(np.abs(v - approx).max())


def partition_of_unity_residual(table):
    """max_x |sum_nu phi(x - nu) - 1| over the table's grid points."""
    step = 1 << table.depth
    worst = 0.0
    for r in range(step):
        worst = max(worst, abs(float(table.values[r::step].sum()) - 1.0))
    return worst


def _pair_products(table_a, table_b, gap):
    """Cell-rule integrals b[m] = integral a(x) b(x - m) dx for all overlaps m.

    Midpoint rule at cell width 2**-gap, which needs tables one level
    finer; exact for piecewise-constant generators, second-order otherwise.
    """
    va = table_a.midpoint_samples(gap)
    vb = table_b.midpoint_samples(gap)
    m_grid = 1 << gap
    cell = 2.0 ** (-gap)
    la, lb = va.size, vb.size
    offset = table_a.n_first - table_b.n_first
    shifts = range(offset - lb // m_grid, offset + la // m_grid + 1)
    out = {}
    for m in shifts:
        rel = (table_a.n_first - table_b.n_first - m) * m_grid
        lo = max(0, -rel)
        hi = min(la, lb - rel)
        out[m] = float(np.dot(va[lo:hi], vb[lo + rel:hi + rel]) * cell) if hi > lo else 0.0
    return out


def shift_gram(bank, which, shifts=32, depth=12):
    """Gram matrix G[nu, mu] = integral phi(x - nu) phi(x - mu) dx.

    Banded symmetric window of the bi-infinite Gram; its eigenvalues
    estimate the Riesz bounds of the integer shift system.
    """
    table = cascade(bank, which, depth + 1)
    b = _pair_products(table, table, depth)
    g = np.zeros((shifts, shifts))
    for i in range(shifts):
        for j in range(shifts):
            g[i, j] = b.get(i - j, 0.0)
    return g


def biorthogonality_residual(bank, depth=12):
    """max_{nu,mu} |integral phi(x-nu) phi*(x-mu) dx - delta_{nu,mu}|."""
    ta = cascade(bank, "primal", depth + 1)
    tb = cascade(bank, "dual", depth + 1)
    b = _pair_products(ta, tb, depth)
    return max(abs(v - (1.0 if m == 0 else 0.0)) for m, v in b.items())


_ACCEPTANCE_MEMO = {}


def is_accepted(bank, depth=12):
    """Acceptance gate for projector use: biorthogonality residual <= 1e-6."""
    key = (bank.bank_id, mask_digest(bank), depth)
    if key not in _ACCEPTANCE_MEMO:
        _ACCEPTANCE_MEMO[key] = biorthogonality_residual(bank, depth)
    return _ACCEPTANCE_MEMO[key] <= ACCEPTANCE_RESIDUAL


def ensure_accepted(bank):
    if not is_accepted(bank):
        raise BankRejected(
            f"bank {bank.bank_id} rejected: biorthogonality residual "
            f"{_ACCEPTANCE_MEMO[(bank.bank_id, mask_digest(bank), 12)]:.3e} > "
            f"{ACCEPTANCE_RESIDUAL}")


# ---------------------------------------------------------------------------
# registry files


def _parse_float_list(text):
    return tuple(float(tok) for tok in text.split())


def parse_bank_file(path):
    """Parse one structured-text bank file into a FilterBank."""
    path = Path(path)
    fields = {}
    lines = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ParseError(path, lineno, f"expected 'key: value', got {line!r}")
        key, _, value = line.partition(":")
        key = key.strip()
        if key in fields:
            raise ParseError(path, lineno, f"duplicate key {key!r}")
        fields[key] = value.strip()
        lines[key] = lineno
    required = ("id", "smoothness", "primal-support", "dual-support",
                "primal", "dual")
    for key in required:
        if key not in fields:
            raise ParseError(path, 0, f"missing key {key!r}")

    def support(key):
        toks = fields[key].split()
        if len(toks) != 2:
            raise ParseError(path, lines[key], f"{key} needs two endpoints")
        try:
            a, b = float(toks[0]), float(toks[1])
        except ValueError as exc:
            raise ParseError(path, lines[key], str(exc)) from None
        if a != int(a) or b != int(b):
            raise ParseError(path, lines[key], f"{key} endpoints must be integers")
        return int(a), int(b)

    def coeffs(key):
        try:
            return _parse_float_list(fields[key])
        except ValueError as exc:
            raise ParseError(path, lines[key], str(exc)) from None

    psup, dsup = support("primal-support"), support("dual-support")
    pc, dc = coeffs("primal"), coeffs("dual")
    for name, sup, cs in (("primal", psup, pc), ("dual", dsup, dc)):
        if sup[1] - sup[0] != len(cs) - 1:
            raise ParseError(
                path, lines[name],
                f"{name} support length {sup[1] - sup[0]} inconsistent with "
                f"{len(cs)} coefficients")
    smooth = fields["smoothness"]
    if smooth not in SMOOTHNESS_CLASSES:
        raise ParseError(path, lines["smoothness"],
                         f"unknown smoothness class {smooth!r}")
    try:
        return FilterBank(
            bank_id=fields["id"],
            primal=Mask(pc, psup[0]),
            dual=Mask(dc, dsup[0]),
            smoothness=smooth)
    except ValueError as exc:
        raise ParseError(path, 0, str(exc)) from None


def packaged_registry_dir():
    return Path(__file__).resolve().parent / "registry"


def load_registry(directory=None):
    """Load every *.txt bank file in a directory, keyed by bank id."""
    directory = Path(directory) if directory is not None else packaged_registry_dir()
    banks = {}
    for path in sorted(directory.glob("*.txt")):
        bank = parse_bank_file(path)
        if bank.bank_id in banks:
            raise ParseError(path, 0, f"duplicate bank id {bank.bank_id!r}")
        banks[bank.bank_id] = bank
    return banks


def get_bank(bank_id, directory=None):
    banks = load_registry(directory)
    if bank_id not in banks:
        raise KeyError(f"no bank {bank_id!r} in registry "
                       f"({', '.join(sorted(banks))})")
    return banks[bank_id]


# ---------------------------------------------------------------------------
# binary table cache


def save_table(table, path):
    """Write a table as magic/header/payload/sha256 trailer."""
    path = Path(path)
    ident = table.filter_id.encode("utf-8")
    header = TABLE_MAGIC + struct.pack(
        "<BiqlBH", 1 if table.which == "dual" else 0, table.depth,
        len(table.values), table.n_first,
        0 if table.derivative_values is None else 1, len(ident))
    body = header + ident + table.values.tobytes()
    if table.derivative_values is not None:
        body += table.derivative_values.tobytes()
    digest = hashlib.sha256(body).digest()
    path.write_bytes(body + digest)


def load_table(path):
    """Read a table file; returns None when missing, corrupt, or stale."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError:
        return None
    if len(raw) < len(TABLE_MAGIC) + 32 or not raw.startswith(TABLE_MAGIC):
        return None
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        return None
    off = len(TABLE_MAGIC)
    try:
        which_b, depth, nvals, n_first, has_d, idlen = struct.unpack_from(
            "<BiqlBH", body, off)
        off += struct.calcsize("<BiqlBH")
        ident = body[off:off + idlen].decode("utf-8")
        off += idlen
        values = np.frombuffer(body, dtype=np.float64, count=nvals, offset=off)
        off += nvals * 8
        deriv = None
        if has_d:
            deriv = np.frombuffer(body, dtype=np.float64, count=nvals, offset=off)
    except (struct.error, ValueError, UnicodeDecodeError):
        return None
    values = values.copy()
    values.setflags(write=False)
    if deriv is not None:
        deriv = deriv.copy()
        deriv.setflags(write=False)
    return DyadicTable(
        filter_id=ident, which="dual" if which_b else "primal", depth=depth,
        n_first=n_first, values=values, derivative_values=deriv,
        checksum=_payload_checksum(values, deriv))


class TableCache:
    """Memoized dyadic tables, optionally persisted to a directory.

    Disk entries are keyed by (bank id, which, depth, mask digest); a stale
    or corrupt file is rebuilt silently with a log line.
    """

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory is not None else None
        self._memo = {}

    def _path(self, bank, which, depth):
        name = f"{bank.bank_id}-{which}-L{depth}-{mask_digest(bank)}.hwtb"
        return self.directory / name

    def get(self, bank, which, depth):
        key = (bank.bank_id, mask_digest(bank), which, depth)
        table = self._memo.get(key)
        if table is not None:
            return table
        if self.directory is not None:
            table = load_table(self._path(bank, which, depth))
            if table is not None and (table.depth != depth
                                      or table.filter_id != bank.bank_id):
                table = None
            if table is None:
                log.info("table cache miss/stale: rebuilding %s/%s depth %d",
                         bank.bank_id, which, depth)
        if table is None:
            table = cascade(bank, which, depth)
            if self.directory is not None:
                self.directory.mkdir(parents=True, exist_ok=True)
                save_table(table, self._path(bank, which, depth))
        self._memo[key] = table
        return table


DEFAULT_CACHE = TableCache()
