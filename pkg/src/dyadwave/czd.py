"""Dyadic Calderon-Zygmund decomposition of 1-D grid functions.

The stopping-time construction starts from the smallest dyadic root
[-2^m, 2^m) that contains the support with average |f| at most alpha,
bisects, and selects the maximal dyadic intervals whose average exceeds
alpha.  Halving at most doubles an average, so every selected cube Q has

    alpha < (1/|Q|) integral_Q |f| <= 2 alpha,

the complement W of the closed set F satisfies |W| <= ||f||_1 / alpha, and
the good/bad split g = f on F, g = average on each Q, h_Q = (f - avg) chi_Q
has mean-zero bad parts.  All sums are exact cell sums on the grid, so the
inequalities hold with the dyadic constants, not just asymptotically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AlphaTooSmall, DegenerateF
from .gridfn import GridFunction, l1_norm, lp_norm

MAX_ROOT_EXPONENT = 40


@dataclass(frozen=True)
class Cube:
    """Dyadic interval [index * 2**-scale, (index+1) * 2**-scale)."""

    scale: int
    index: int

    @property
    def width(self):
        return 2.0 ** (-self.scale)

    def bounds(self):
        return self.index * self.width, (self.index + 1) * self.width

    def grid_range(self, depth):
        span = 1 << (depth - self.scale) if depth >= self.scale else None
        if span is None:
            raise ValueError("cube finer than the grid")
        return self.index * span, (self.index + 1) * span

    def parent(self):
        return Cube(self.scale - 1, self.index >> 1)


@dataclass(frozen=True)
class CZDecomposition:
    alpha: float
    cubes: tuple           # of Cube
    averages: tuple        # signed f-average over each cube
    abs_averages: tuple    # average of |f| over each cube
    good: GridFunction
    bad_parts: tuple       # one GridFunction per cube, supported in it
    root_exponent: int

    @property
    def mes_w(self):
        return float(sum(c.width for c in self.cubes))


def _real_data(f):
    if f.dim != 1:
        raise ValueError(f"decomposition is one-dimensional, got d={f.dim}")
    if f.data.size and np.abs(f.data.imag).max() > 1e-12 * max(
            1.0, np.abs(f.data.real).max()):
        raise ValueError("decomposition requires a real-valued function")
    return f.data.real


def cz_decompose(f, alpha):
    """Split f at level alpha into good and mean-zero bad parts."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    data = _real_data(f)
    depth = f.depth
    origin = f.origin[0]
    size = data.size
    cell = 2.0 ** (-depth)
    total_abs = float(np.abs(data).sum()) * cell
    if total_abs == 0.0:
        raise ValueError("decomposition needs nonzero L1 mass")

    prefix_abs = np.concatenate([[0.0], np.cumsum(np.abs(data))]) * cell
    prefix = np.concatenate([[0.0], np.cumsum(data)]) * cell

    def integral(lo, hi, table):
        ia = min(max(lo - origin, 0), size)
        ib = min(max(hi - origin, 0), size)
        if ib <= ia:
            return 0.0
        return float(table[ib] - table[ia])

    # root [-2^m, 2^m): must cover the support and carry average <= alpha
    m = 0
    scale = 1 << depth
    while (-(1 << m)) * scale > origin or (origin + size) > (1 << m) * scale:
        m += 1
        if m > MAX_ROOT_EXPONENT:
            raise AlphaTooSmall("support too wide for any admissible root")
    while total_abs / (2.0 ** (m + 1)) > alpha:
        m += 1
        if m > MAX_ROOT_EXPONENT:
            raise AlphaTooSmall(
                f"root average stays above alpha={alpha} up to exponent "
                f"{MAX_ROOT_EXPONENT}")

    cubes = []
    averages = []
    abs_averages = []
    # the two halves of the root are the dyadic intervals [-2^m, 0) and
    # [0, 2^m); their stopping-time parent is the root, average <= alpha
    stack = [Cube(-m, -1), Cube(-m, 0)]
    while stack:
        cube = stack.pop()
        lo, hi = cube.grid_range(depth)
        mass = integral(lo, hi, prefix_abs)
        if mass == 0.0:
            continue
        avg = mass / cube.width
        if avg > alpha:
            cubes.append(cube)
            averages.append(integral(lo, hi, prefix) / cube.width)
            abs_averages.append(avg)
        elif cube.scale < depth:
            stack.append(Cube(cube.scale + 1, 2 * cube.index))
            stack.append(Cube(cube.scale + 1, 2 * cube.index + 1))
        # a single cell with average <= alpha belongs to F

    order = sorted(range(len(cubes)), key=lambda i: cubes[i].bounds()[0])
    cubes = [cubes[i] for i in order]
    averages = [averages[i] for i in order]
    abs_averages = [abs_averages[i] for i in order]

    # good part lives on the union of the f-box and every selected cube
    g_lo, g_hi = origin, origin + size
    for cube in cubes:
        lo, hi = cube.grid_range(depth)
        g_lo, g_hi = min(g_lo, lo), max(g_hi, hi)
    g_data = np.zeros(g_hi - g_lo, dtype=np.complex128)
    g_data[origin - g_lo:origin - g_lo + size] = data
    bad_parts = []
    for cube, avg in zip(cubes, averages):
        lo, hi = cube.grid_range(depth)
        h_data = g_data[lo - g_lo:hi - g_lo] - avg
        bad_parts.append(GridFunction(h_data, depth, (lo,),
                                      meta=f"bad[{cube.scale},{cube.index}]"))
        g_data[lo - g_lo:hi - g_lo] = avg
    good = GridFunction(g_data, depth, (g_lo,), meta="good")
    return CZDecomposition(
        alpha=float(alpha), cubes=tuple(cubes), averages=tuple(averages),
        abs_averages=tuple(abs_averages), good=good,
        bad_parts=tuple(bad_parts), root_exponent=m)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    bound: float | None = None
    note: str = ""


def _components(dec, depth):
    """Maximal runs of adjacent selected cubes, in grid units."""
    ranges = sorted(c.grid_range(depth) for c in dec.cubes)
    merged = []
    for lo, hi in ranges:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def distance_to_f(dec, depth):
    """rho(., F) at the cell midpoints of W, component by component."""
    comps = _components(dec, depth)
    cell = 2.0 ** (-depth)
    out = {}
    for lo, hi in comps:
        mids = (np.arange(lo, hi) + 0.5) * cell
        out[(lo, hi)] = np.minimum(mids - lo * cell, hi * cell - mids)
    return out


def verify_cz(dec, f):
    """Recompute every structural property of a decomposition of f.

    Returns a list of named checks with measured constants; the distance
    comparability constants are reported, never asserted.
    """
    data = _real_data(f)
    depth = f.depth
    origin = f.origin[0]
    cell = 2.0 ** (-depth)
    alpha = dec.alpha
    norm1 = l1_norm(f)
    checks = []
    # dyadic constants hold exactly in real arithmetic; grid verification
    # allows last-bit rounding of the interval sums
    eps = 1e-12

    # reconstruction f = g + sum h_r, cellwise
    recon = dec.good
    for part in dec.bad_parts:
        recon = recon + part
    diff = recon - f
    checks.append(Check("reconstruction", float(np.abs(diff.data).max()) <= 1e-12,
                        float(np.abs(diff.data).max()), 1e-12))

    # |f| <= alpha on F (cells outside every cube)
    w_mask = np.zeros(data.size, dtype=bool)
    for cube in dec.cubes:
        lo, hi = cube.grid_range(depth)
        ia, ib = max(lo - origin, 0), min(hi - origin, data.size)
        if ib > ia:
            w_mask[ia:ib] = True
    f_vals = np.abs(data[~w_mask])
    worst_f = float(f_vals.max()) if f_vals.size else 0.0
    checks.append(Check("good_bound_on_f", worst_f <= alpha * (1 + eps),
                        worst_f, alpha))

    mes_w = dec.mes_w
    checks.append(Check("mes_w", mes_w <= norm1 / alpha * (1 + eps), mes_w,
                        norm1 / alpha))

    ranges = sorted(c.grid_range(depth) for c in dec.cubes)
    disjoint = all(a[1] <= b[0] for a, b in zip(ranges, ranges[1:]))
    checks.append(Check("disjoint", disjoint, 0.0 if disjoint else 1.0, 0.0))

    prefix_abs = np.concatenate([[0.0], np.cumsum(np.abs(data))]) * cell
    prefix = np.concatenate([[0.0], np.cumsum(data)]) * cell

    def integral(lo, hi, table):
        ia = min(max(lo - origin, 0), data.size)
        ib = min(max(hi - origin, 0), data.size)
        return float(table[ib] - table[ia]) if ib > ia else 0.0

    avg_lo, avg_hi, parent_ok = np.inf, 0.0, True
    for cube in dec.cubes:
        lo, hi = cube.grid_range(depth)
        avg = integral(lo, hi, prefix_abs) / cube.width
        avg_lo, avg_hi = min(avg_lo, avg), max(avg_hi, avg)
        par = cube.parent()
        plo, phi = par.grid_range(depth)
        if integral(plo, phi, prefix_abs) / par.width > alpha * (1 + eps):
            parent_ok = False
    if dec.cubes:
        checks.append(Check("cube_avg_above", avg_lo > alpha * (1 - eps),
                            avg_lo, alpha, note="strict lower bound"))
        checks.append(Check("cube_avg_doubling",
                            avg_hi <= 2 * alpha * (1 + eps), avg_hi,
                            2 * alpha))
    checks.append(Check("parent_maximality", parent_ok,
                        0.0 if parent_ok else 1.0, 0.0))

    # |g| <= 2 alpha and the L2 bound on g
    sup_g = float(np.abs(dec.good.data).max()) if dec.good.data.size else 0.0
    checks.append(Check("good_sup", sup_g <= 2 * alpha * (1 + eps), sup_g,
                        2 * alpha))
    g2 = lp_norm(dec.good, 2) ** 2
    checks.append(Check("good_l2", g2 <= 2 * alpha * norm1 * (1 + eps), g2,
                        2 * alpha * norm1))

    # bad parts: support, zero mean, L1 bound
    mean_worst = 0.0
    l1_ok = True
    l1_worst_ratio = 0.0
    for cube, part in zip(dec.cubes, dec.bad_parts):
        mean_worst = max(mean_worst,
                         abs(float(np.sum(part.data.real)) * cell))
        mass = float(np.abs(part.data).sum()) * cell
        ratio = mass / (alpha * cube.width)
        l1_worst_ratio = max(l1_worst_ratio, ratio)
        l1_ok = l1_ok and mass <= 4 * alpha * cube.width * (1 + eps)
    checks.append(Check("bad_mean_zero", mean_worst <= 1e-12 * max(norm1, 1.0),
                        mean_worst, 1e-12 * max(norm1, 1.0)))
    checks.append(Check("bad_l1", l1_ok, l1_worst_ratio, 4.0,
                        note="ratio to alpha * |Q|"))

    # distance comparability: measured, report-only
    if dec.cubes:
        rho = distance_to_f(dec, depth)
        ratios = []
        for cube in dec.cubes:
            lo, hi = cube.grid_range(depth)
            for (clo, chi), dists in rho.items():
                if clo <= lo and hi <= chi:
                    inf_rho = float(dists[lo - clo:hi - clo].min())
                    ratios.append(inf_rho / cube.width)
                    break
        checks.append(Check("distance_ratio_min", True, min(ratios),
                            note="measured c3, not asserted"))
        checks.append(Check("distance_ratio_max", True, max(ratios),
                            note="measured c4, not asserted"))
    return checks


def marcinkiewicz_integral(dec, f, radius):
    """Truncated integral over F of integral_W rho(u) |x-u|^-2 du.

    rho vanishes on F so the inner integral only sees W; both integrals are
    cell sums at the grid depth with |x - u| <= radius enforced.  The
    truncation window must dominate the support (radius >= 8 * diameter).
    """
    depth = f.depth
    cell = 2.0 ** (-depth)
    scale = 1 << depth
    diam = f.shape[0] * cell
    if radius < 8 * diam:
        raise ValueError(
            f"radius {radius} below 8 * support diameter {diam}")
    rho = distance_to_f(dec, depth)
    if not rho:
        return 0.0, 0.0, 0.0
    u_pos = []
    u_rho = []
    for (lo, hi), dists in rho.items():
        u_pos.append((np.arange(lo, hi) + 0.5) * cell)
        u_rho.append(dists)
    u_pos = np.concatenate(u_pos)
    u_rho = np.concatenate(u_rho)

    w_cells = set()
    for cube in dec.cubes:
        lo, hi = cube.grid_range(depth)
        w_cells.update(range(lo, hi))
    x_lo = int(np.floor(-radius * scale))
    x_hi = int(np.ceil(radius * scale))
    x_idx = np.array([i for i in range(x_lo, x_hi) if i not in w_cells])
    if x_idx.size == 0:
        raise DegenerateF("no F cells inside the truncation window")
    x_pos = (x_idx + 0.5) * cell

    total = 0.0
    block = max(1, (1 << 21) // max(1, u_pos.size))
    for start in range(0, x_pos.size, block):
        xs = x_pos[start:start + block]
        diff = np.abs(xs[:, None] - u_pos[None, :])
        kernel = np.where(diff <= radius, diff, np.inf) ** -2.0
        total += float((kernel @ u_rho).sum()) * cell * cell
    mes_w = dec.mes_w
    return total, mes_w, (total / mes_w if mes_w else 0.0)


def weak_type_measure(transform, f, alphas):
    """Level-set statistics of |Tf| by grid cell counting.

    Rows are (alpha, mes, alpha*mes/||f||_1, alpha*sqrt(mes)/||f||_2),
    ordered by alpha; mes is nonincreasing in alpha by construction.
    """
    tf = transform(f)
    mag = np.abs(tf.data)
    vol = tf.cell_volume
    n1 = l1_norm(f)
    n2 = lp_norm(f, 2)
    rows = []
    for alpha in sorted(float(a) for a in alphas):
        mes = float((mag > alpha).sum()) * vol
        rows.append({
            "alpha": alpha,
            "mes": mes,
            "l1_stat": alpha * mes / n1 if n1 else 0.0,
            "l2_stat": float(alpha * np.sqrt(mes) / n2) if n2 else 0.0,
        })
    return rows


# ---------------------------------------------------------------------------
# reports


def write_cubes_csv(dec, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["scale", "index", "average"])
        for cube, avg in zip(dec.cubes, dec.averages):
            w.writerow([cube.scale, cube.index, repr(float(avg))])


def format_report(dec, checks):
    lines = [f"alpha = {dec.alpha}",
             f"cubes = {len(dec.cubes)}",
             f"mes_w = {dec.mes_w!r}",
             f"root_exponent = {dec.root_exponent}"]
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        bound = "-" if c.bound is None else repr(c.bound)
        note = f" ({c.note})" if c.note else ""
        lines.append(f"{c.name}: {status} measured={c.measured!r} "
                     f"bound={bound}{note}")
    return "\n".join(lines) + "\n"
