#!/usr/bin/env python3
"""Regenerates the frozen reference values in tests/oracles/.

Every value here is computed without touching the C++ library: closed forms are
evaluated with sympy, linear algebra uses dense numpy routines.

    python3 tools/oracles.py [--out tests/oracles]
"""

import argparse
import json
import math
import pathlib

import numpy as np
import sympy as sp


def bohm_gaussian():
    q, s, hbar, kin = sp.symbols("q s hbar G", positive=True)
    rho = sp.exp(-q**2 / (2 * s**2)) / sp.sqrt(2 * sp.pi * s**2)
    amp = sp.sqrt(rho)
    Q = sp.simplify(-hbar**2 / amp * sp.diff(kin * sp.diff(amp, q), q))
    subs = {s: 1, hbar: 1, kin: sp.Rational(1, 2)}
    qs = [-2.0, -1.0, -0.5, 0.0, 0.25, 1.0, 1.5, 2.0]
    return {
        "s": 1.0,
        "hbar": 1.0,
        "kinetic": 0.5,
        "expression": str(Q),
        "q": qs,
        "Q": [float(Q.subs(subs).subs(q, v)) for v in qs],
    }


def lattice_potential(phi, spacing, mass):
    n = len(phi)
    total = 0.0
    for i in range(n):
        total += 0.5 * spacing * mass**2 * phi[i] ** 2
    if n == 1:
        return total
    edges = [(i, (i + 1) % n) for i in range(n)]
    for i, j in edges:
        total += 0.5 * spacing * ((phi[j] - phi[i]) / spacing) ** 2
    return total


def lattice_dispersion():
    out = []
    spacing, mass = 1.0, 1.0
    for n in (1, 2, 3):
        hess = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                ei = np.eye(n)[i]
                ej = np.eye(n)[j]
                # exact for a quadratic form
                hess[i, j] = (
                    lattice_potential(ei + ej, spacing, mass)
                    - lattice_potential(ei, spacing, mass)
                    - lattice_potential(ej, spacing, mass)
                )
        # H = p^2 / (2 spacing) + phi^T hess phi / 2
        omega = np.sqrt(np.linalg.eigvalsh(hess) / spacing)
        out.append({"sites": n, "spacing": spacing, "mass": mass, "omega": omega.tolist(),
                    "E0": float(0.5 * omega.sum())})
    return out


def gibbs_three_node():
    E = np.array([0.0, 1.0, 4.0])
    hbar = 2.0
    p = np.exp(-2.0 * E / hbar)
    p /= p.sum()
    return {"energy": E.tolist(), "hbar": hbar, "p": p.tolist()}


PAIRS = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]


def gravity_covariance(h, dt, hbar, grav, lapse):
    h = np.asarray(h, dtype=float)
    hi = np.linalg.inv(h)
    upper = 0.5 * (np.einsum("ik,jl->ijkl", hi, hi) + np.einsum("il,jk->ijkl", hi, hi)
                   - 2.0 * np.einsum("ij,kl->ijkl", hi, hi))
    c = math.sqrt(np.linalg.det(h)) / (16.0 * math.pi * grav * lapse * hbar * dt)
    units = []
    for i, j in PAIRS:
        e = np.zeros((3, 3))
        e[i, j] = e[j, i] = 1.0
        units.append(e)
    M = np.array([[c * np.einsum("ij,ijkl,kl->", a, upper, b) for b in units] for a in units])
    trace = np.array([np.sum(hi * e) for e in units])
    # null space of the trace constraint via SVD
    _, _, vt = np.linalg.svd(trace.reshape(1, 6))
    P = vt[1:].T
    cov = P @ np.linalg.inv(P.T @ M @ P) @ P.T
    return {"h": h.tolist(), "dt": dt, "hbar": hbar, "grav": grav, "lapse": lapse,
            "component_order": ["w11", "w22", "w33", "w12", "w13", "w23"], "covariance": cov.tolist()}


def wdw_kplus1():
    amin, amax, n = 0.5, 3.0, 200
    V0 = G = hbar = 1.0
    k = 1
    a = np.linspace(amin, amax, n)
    h = a[1] - a[0]
    c = -2.0 * math.pi * G / (3.0 * V0 * a)
    U = -3.0 * V0 * a * k / (8.0 * math.pi * G)
    A = np.zeros((n, n))
    b = np.zeros(n)
    left, right = 1.0, 2.0
    A[0, 0] = 1.0
    b[0] = left
    A[-1, -1] = 1.0
    b[-1] = right
    for i in range(1, n - 1):
        cp = 0.5 * (c[i] + c[i + 1])
        cm = 0.5 * (c[i] + c[i - 1])
        A[i, i + 1] = -hbar**2 * cp / h**2
        A[i, i - 1] = -hbar**2 * cm / h**2
        A[i, i] = hbar**2 * (cp + cm) / h**2 + U[i]
    psi = np.linalg.solve(A, b)
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    psi /= math.sqrt(np.sum(w * a**3 * psi**2))
    return {"curvature": k, "fiducial_volume": V0, "grav": G, "hbar": hbar, "a_min": amin, "a_max": amax,
            "points": n, "left": left, "right": right, "psi": psi.tolist()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "tests" / "oracles"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    h_random = [[1.3, 0.2, -0.1], [0.2, 0.9, 0.15], [-0.1, 0.15, 1.1]]
    files = {
        "bohm_gaussian.json": bohm_gaussian(),
        "lattice_dispersion.json": lattice_dispersion(),
        "gibbs_three_node.json": gibbs_three_node(),
        "gravity_covariance.json": [gravity_covariance(np.eye(3), 1e-3, 1.0, 1.0, 1.0),
                                    gravity_covariance(h_random, 1e-3, 1.0, 1.0, 1.0)],
        "wdw_kplus1.json": wdw_kplus1(),
    }
    for name, data in files.items():
        (out / name).write_text(json.dumps(data, indent=2) + "\n")
        print("wrote", out / name)


if __name__ == "__main__":
    main()
