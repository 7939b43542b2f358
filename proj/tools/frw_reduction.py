#!/usr/bin/env python3
"""Symbolic minisuperspace reduction for h_ij = a^2 delta_ij over a comoving volume V0.

Writes the coefficient table consumed by build_frw_space / build_coupled_space.
Usage: frw_reduction.py [output-header]
"""
import sys
import sympy as sp

a, V0, G, N = sp.symbols("a V0 G N", positive=True)
p, adot = sp.symbols("p adot", real=True)
k = sp.Symbol("k")
chi, th, ph = sp.symbols("chi theta phi")
dims = range(3)


def dewitt_lower(h):
    return lambda i, j, m, n: sp.Rational(1, 2) * (h[i, m] * h[j, n] + h[i, n] * h[j, m] - h[i, j] * h[m, n])


def dewitt_upper(hinv):
    return lambda i, j, m, n: sp.Rational(1, 2) * (hinv[i, m] * hinv[j, n] + hinv[i, n] * hinv[j, m] - 2 * hinv[i, j] * hinv[m, n])


def ricci_scalar(g, xs):
    gi = g.inv()
    gam = [[[sum(gi[r, s] * (sp.diff(g[s, m], xs[n]) + sp.diff(g[s, n], xs[m]) - sp.diff(g[m, n], xs[s]))
                 for s in dims) / 2 for n in dims] for m in dims] for r in dims]
    ric = sp.zeros(3)
    for m in dims:
        for n in dims:
            ric[m, n] = sum(sp.diff(gam[r][m][n], xs[r]) - sp.diff(gam[r][m][r], xs[n])
                            + sum(gam[r][r][s] * gam[s][m][n] - gam[r][n][s] * gam[s][m][r] for s in dims)
                            for r in dims)
    return sp.simplify(sum(gi[m, n] * ric[m, n] for m in dims for n in dims))


h = a**2 * sp.eye(3)
hinv = h.inv()
sqrth = sp.sqrt(h.det())
Gl = dewitt_lower(h)
Gu = dewitt_upper(hinv)

# Hamiltonian route: pi^ij = q delta^ij, p_a = V0 pi^ij dh_ij/da
q = sp.Symbol("q")
pa_of_q = V0 * sum(q * sp.diff(h[i, i], a) for i in dims)
q_of_p = sp.solve(sp.Eq(pa_of_q, p), q)[0]
kin_density = 16 * sp.pi * G / sqrth * sum(Gl(i, j, m, n) * (q if i == j else 0) * (q if m == n else 0)
                                           for i in dims for j in dims for m in dims for n in dims)
kin_H = sp.simplify(V0 * kin_density.subs(q, q_of_p))
kinetic_aa = sp.simplify(kin_H / p**2)

# Lagrangian route: K_ij = hdot_ij / 2N, L = V0 N sqrt(h) K_ij G^ijkl K_kl / 16 pi G
K = sp.diff(h, a) * adot / (2 * N)
L = V0 * N * sqrth / (16 * sp.pi * G) * sum(K[i, j] * Gu(i, j, m, n) * K[m, n]
                                             for i in dims for j in dims for m in dims for n in dims)
pa = sp.diff(L, adot)
adot_of_p = sp.solve(sp.Eq(pa, p), adot)[0]
H_lag = sp.simplify((pa * adot - L).subs(adot, adot_of_p) / N)
assert sp.simplify(H_lag - kin_H) == 0, (H_lag, kin_H)

# intrinsic curvature of the comoving slices, a^2 (dchi^2 + S_k^2 dOmega^2)
ricci = {}
for kk, S in ((1, sp.sin(chi)), (0, chi), (-1, sp.sinh(chi))):
    g = a**2 * sp.diag(1, S**2, S**2 * sp.sin(th)**2)
    ricci[kk] = ricci_scalar(g, (chi, th, ph))
    assert sp.simplify(ricci[kk] - 6 * kk / a**2) == 0, (kk, ricci[kk])
R3 = 6 * k / a**2
potential = sp.simplify(-V0 * sqrth * R3 / (16 * sp.pi * G))

# homogeneous massless scalar, P = V0 p_phi
P = sp.Symbol("P")
kinetic_phi = sp.simplify(V0 * (P / V0)**2 / (2 * sqrth) / P**2)
measure = sp.simplify(sqrth)


def term(expr):
    e = sp.powsimp(sp.expand(expr))
    c, rest = e.as_coeff_Mul()
    pows = rest.as_powers_dict()
    num = sp.N(c * (sp.pi ** pows.get(sp.pi, 0)), 17)
    return (num, int(pows.get(G, 0)), int(pows.get(V0, 0)), int(pows.get(a, 0)), int(pows.get(k, 0)), e)


rows = [("kinetic_aa", kinetic_aa), ("potential", potential), ("kinetic_phi", kinetic_phi),
        ("measure", measure), ("ricci", R3)]
out = []
out.append("// generated by tools/frw_reduction.py; do not edit")
out.append("#pragma once")
out.append("")
out.append("namespace entroq::frw_table {")
out.append("")
out.append("// value = coeff * G^grav * V0^volume * a^scale * k^curv")
out.append("struct Term {")
out.append("  double coeff;")
out.append("  int grav, volume, scale, curv;")
out.append("};")
out.append("")
for name, expr in rows:
    num, pg, pv, pa_, pk, e = term(expr)
    out.append(f"// {name} = {sp.sstr(e)}")
    out.append(f"inline constexpr Term {name}{{{sp.sstr(num)}, {pg}, {pv}, {pa_}, {pk}}};")
out.append("")
out.append("}  // namespace entroq::frw_table")
text = "\n".join(out) + "\n"

if len(sys.argv) > 2 and sys.argv[1] == "--check":
    with open(sys.argv[2]) as f:
        if f.read() != text:
            sys.exit("frw table is stale: regenerate with tools/frw_reduction.py " + sys.argv[2])
elif len(sys.argv) > 1:
    with open(sys.argv[1], "w") as f:
        f.write(text)
else:
    sys.stdout.write(text)
