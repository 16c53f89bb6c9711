#!/usr/bin/env python3
"""Regenerate the shipped filter-bank registry files.

Daubechies masks come from the classical spectral factorization of the
halfband polynomial: roots of P(y) = sum_{k<N} C(N-1+k,k) y^k are mapped to
z-plane root pairs and the minimum-phase factor is kept.  Root estimates are
polished with a few Newton steps so the printed decimals are accurate to the
last float64 digit.

Usage: python tools/make_registry.py [outdir]
"""

import sys
from math import comb
from pathlib import Path

import numpy as np

SQRT2 = np.sqrt(2.0)


def daubechies_mask(order):
    """Orthonormal Daubechies lowpass mask with 2*order taps, sum sqrt(2)."""
    pc = [comb(order - 1 + k, k) for k in range(order)]
    # P(y(u)) with u = z + 1/z and y = (2 - u)/4, a degree order-1 polynomial in u
    y = np.polynomial.Polynomial([0.5, -0.25])
    pu = np.polynomial.Polynomial([0.0])
    for k, c in enumerate(pc):
        pu = pu + c * y**k
    uroots = pu.roots()
    for _ in range(4):  # Newton polish in complex double
        uroots = uroots - pu(uroots) / pu.deriv()(uroots)
    poly = np.polynomial.Polynomial([1.0])
    for u in uroots:
        disc = np.sqrt(u * u - 4.0 + 0j)
        z1, z2 = (u + disc) / 2.0, (u - disc) / 2.0
        z = z1 if abs(z1) < 1.0 else z2
        poly = poly * np.polynomial.Polynomial([-z, 1.0]) / (1.0 - z)
    for _ in range(order):
        poly = poly * np.polynomial.Polynomial([0.5, 0.5])
    h = np.real(poly.coef)[::-1]  # canonical ordering: h[0] = largest-index tap first
    return h / h.sum() * SQRT2


def check_orthonormal(h, tol=1e-13):
    assert abs(h.sum() - SQRT2) < tol, h.sum() - SQRT2
    n = len(h)
    for m in range(1, n // 2):
        dot = sum(h[i] * h[i + 2 * m] for i in range(n - 2 * m))
        assert abs(dot) < tol, (m, dot)
    assert abs(np.dot(h, h) - 1.0) < tol


def fmt(values):
    return " ".join(f"{v:.17g}" for v in values)


def bank_text(bank_id, primal, psup, dual, dsup, smooth, note):
    lines = [
        f"# {note}",
        f"id: {bank_id}",
        f"smoothness: {smooth}",
        f"primal-support: {psup[0]} {psup[1]}",
        f"dual-support: {dsup[0]} {dsup[1]}",
        f"primal: {fmt(primal)}",
        f"dual: {fmt(dual)}",
        "",
    ]
    return "\n".join(lines)


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    haar = np.array([1.0, 1.0]) / SQRT2
    banks = {
        "haar.txt": bank_text(
            "haar", haar, (0, 1), haar, (0, 1), "pcw_const",
            "Haar: indicator of the unit interval, self-dual."),
    }
    smooth_by_order = {2: "c0", 3: "c1", 4: "c1"}
    for order in (2, 3, 4):
        h = daubechies_mask(order)
        check_orthonormal(h)
        sup = (0, 2 * order - 1)
        banks[f"db{order}.txt"] = bank_text(
            f"db{order}", h, sup, h, sup, smooth_by_order[order],
            f"Daubechies order {order}, orthonormal (dual = primal).")

    # Linear-spline biorthogonal pair: hat primal, 9-tap dual with four
    # dual vanishing moments.  (The 5-tap dual of the 5/3 pair is not
    # pointwise evaluable: its cascade diverges, so it cannot live in a
    # value-table registry.)
    hat = SQRT2 * np.array([0.25, 0.5, 0.25])
    dual24 = SQRT2 * np.array(
        [3 / 128, -3 / 64, -1 / 8, 19 / 64, 45 / 64, 19 / 64, -1 / 8, -3 / 64, 3 / 128])
    assert abs(hat.sum() - SQRT2) < 1e-15 and abs(dual24.sum() - SQRT2) < 1e-15
    # exact biorthogonality of the mask pair: sum_n hp[n] hd[n + 2m] = delta_m
    for m in range(-3, 4):
        acc = 0.0
        for i, hp in enumerate(hat):
            j = i - 1 - (-4) + 2 * m  # align supports [-1,1] and [-4,4]
            if 0 <= j < len(dual24):
                acc += hp * dual24[j]
        assert abs(acc - (1.0 if m == 0 else 0.0)) < 1e-15, (m, acc)
    banks["spline24.txt"] = bank_text(
        "spline24", hat, (-1, 1), dual24, (-4, 4), "c0",
        "Linear B-spline primal with 9-tap biorthogonal dual.")

    for name, text in banks.items():
        (outdir / name).write_text(text)
        print("wrote", outdir / name)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         Path(__file__).resolve().parents[1] / "src" / "dyadwave" / "registry")
