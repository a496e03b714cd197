#!/usr/bin/env python3
"""Generate golden FCIDUMP files and reference energies for the test suite.

Self-contained restricted Hartree-Fock over STO-3G, followed by MP2 and a
full-CI solve via explicit second-quantized operator application. Everything
is computed from scratch (McMurchie-Davidson integrals, scipy eigensolvers)
so the frozen constants are independent of the Rust implementation they
validate.

Usage: python3 tools/gen_reference.py <output-dir>
"""

import itertools
import json
import math
import os
import sys

import numpy as np
from scipy.linalg import eigh
from scipy.special import hyp1f1

ANGSTROM_TO_BOHR = 1.0 / 0.52917721092

# STO-3G exponents and contraction coefficients (EMSL basis set exchange).
STO3G = {
    "H": [("S", [(3.425250914, 0.1543289673),
                 (0.6239137298, 0.5353281423),
                 (0.1688554040, 0.4446345422)])],
    "Li": [("S", [(16.11957475, 0.1543289673),
                  (2.936200663, 0.5353281423),
                  (0.7946504870, 0.4446345422)]),
           ("SP", [(0.6362897469, -0.09996722919, 0.1559162750),
                   (0.1478600533, 0.3995128261, 0.6076837186),
                   (0.04808867840, 0.7001154689, 0.3919573931)])],
    "O": [("S", [(130.7093200, 0.1543289673),
                 (23.80886050, 0.5353281423),
                 (6.443608313, 0.4446345422)]),
          ("SP", [(5.033151319, -0.09996722919, 0.1559162750),
                  (1.169596125, 0.3995128261, 0.6076837186),
                  (0.3803889600, 0.7001154689, 0.3919573931)])],
}

CHARGES = {"H": 1, "Li": 3, "O": 8}


class Primitive:
    __slots__ = ("exp", "coef", "lmn", "center", "norm")

    def __init__(self, exp, coef, lmn, center):
        self.exp = exp
        self.coef = coef
        self.lmn = lmn
        self.center = np.asarray(center, dtype=float)
        l, m, n = lmn
        # primitive normalization
        self.norm = math.sqrt(
            (2 ** (2 * (l + m + n) + 1.5) * exp ** (l + m + n + 1.5))
            / (dfact(2 * l - 1) * dfact(2 * m - 1) * dfact(2 * n - 1) * math.pi ** 1.5)
        )


def dfact(n):
    if n <= 0:
        return 1
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def build_basis(atoms):
    """atoms: list of (symbol, xyz_bohr). Returns list of contracted functions,
    each a list of Primitive sharing one angular momentum."""
    shells = []
    for sym, xyz in atoms:
        for kind, prims in STO3G[sym]:
            if kind == "S":
                shells.append([Primitive(e, c, (0, 0, 0), xyz) for e, c in prims])
            elif kind == "SP":
                shells.append([Primitive(e, cs, (0, 0, 0), xyz) for e, cs, cp in prims])
                for lmn in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]:
                    shells.append([Primitive(e, cp, lmn, xyz) for e, cs, cp in prims])
    # contract normalization
    for shell in shells:
        s = 0.0
        for pa in shell:
            for pb in shell:
                s += pa.coef * pb.coef * pa.norm * pb.norm * overlap_prim(pa, pb)
        scale = 1.0 / math.sqrt(s)
        for p in shell:
            p.coef *= scale
    return shells


def hermite_e(i, j, t, qx, a, b):
    p = a + b
    q = a * b / p
    if t < 0 or t > i + j:
        return 0.0
    if i == j == t == 0:
        return math.exp(-q * qx * qx)
    if j == 0:
        return (
            hermite_e(i - 1, j, t - 1, qx, a, b) / (2 * p)
            - q * qx / a * hermite_e(i - 1, j, t, qx, a, b)
            + (t + 1) * hermite_e(i - 1, j, t + 1, qx, a, b)
        )
    return (
        hermite_e(i, j - 1, t - 1, qx, a, b) / (2 * p)
        + q * qx / b * hermite_e(i, j - 1, t, qx, a, b)
        + (t + 1) * hermite_e(i, j - 1, t + 1, qx, a, b)
    )


def overlap_prim(pa, pb):
    a, b = pa.exp, pb.exp
    out = 1.0
    for d in range(3):
        out *= hermite_e(pa.lmn[d], pb.lmn[d], 0, pa.center[d] - pb.center[d], a, b)
    return out * (math.pi / (a + b)) ** 1.5


def kinetic_prim(pa, pb):
    a, b = pa.exp, pb.exp
    l2, m2, n2 = pb.lmn

    def ov(lmnb):
        q = Primitive(pb.exp, 1.0, lmnb, pb.center)
        return overlap_prim(pa, q)

    term0 = b * (2 * (l2 + m2 + n2) + 3) * ov((l2, m2, n2))
    term1 = -2 * b * b * (ov((l2 + 2, m2, n2)) + ov((l2, m2 + 2, n2)) + ov((l2, m2, n2 + 2)))
    term2 = -0.5 * (
        l2 * (l2 - 1) * ov((l2 - 2, m2, n2))
        + m2 * (m2 - 1) * ov((l2, m2 - 2, n2))
        + n2 * (n2 - 1) * ov((l2, m2, n2 - 2))
    )
    return term0 + term1 + term2


def boys(n, x):
    return hyp1f1(n + 0.5, n + 1.5, -x) / (2.0 * n + 1.0)


def hermite_coulomb(t, u, v, n, p, pcx, pcy, pcz, rpc2):
    if t == u == v == 0:
        return (-2.0 * p) ** n * boys(n, p * rpc2)
    if t == u == 0:
        out = 0.0
        if v > 1:
            out += (v - 1) * hermite_coulomb(t, u, v - 2, n + 1, p, pcx, pcy, pcz, rpc2)
        out += pcz * hermite_coulomb(t, u, v - 1, n + 1, p, pcx, pcy, pcz, rpc2)
        return out
    if t == 0:
        out = 0.0
        if u > 1:
            out += (u - 1) * hermite_coulomb(t, u - 2, v, n + 1, p, pcx, pcy, pcz, rpc2)
        out += pcy * hermite_coulomb(t, u - 1, v, n + 1, p, pcx, pcy, pcz, rpc2)
        return out
    out = 0.0
    if t > 1:
        out += (t - 1) * hermite_coulomb(t - 2, u, v, n + 1, p, pcx, pcy, pcz, rpc2)
    out += pcx * hermite_coulomb(t - 1, u, v, n + 1, p, pcx, pcy, pcz, rpc2)
    return out


def nuclear_prim(pa, pb, nucleus):
    a, b = pa.exp, pb.exp
    p = a + b
    pcenter = (a * pa.center + b * pb.center) / p
    pc = pcenter - np.asarray(nucleus)
    rpc2 = float(np.dot(pc, pc))
    ab = pa.center - pb.center
    out = 0.0
    for t in range(pa.lmn[0] + pb.lmn[0] + 1):
        et = hermite_e(pa.lmn[0], pb.lmn[0], t, ab[0], a, b)
        for u in range(pa.lmn[1] + pb.lmn[1] + 1):
            eu = hermite_e(pa.lmn[1], pb.lmn[1], u, ab[1], a, b)
            for v in range(pa.lmn[2] + pb.lmn[2] + 1):
                ev = hermite_e(pa.lmn[2], pb.lmn[2], v, ab[2], a, b)
                out += et * eu * ev * hermite_coulomb(t, u, v, 0, p, pc[0], pc[1], pc[2], rpc2)
    return out * 2.0 * math.pi / p


def eri_prim(pa, pb, pc, pd):
    a, b, c, d = pa.exp, pb.exp, pc.exp, pd.exp
    p = a + b
    q = c + d
    alpha = p * q / (p + q)
    pcen = (a * pa.center + b * pb.center) / p
    qcen = (c * pc.center + d * pd.center) / q
    pq = pcen - qcen
    rpq2 = float(np.dot(pq, pq))
    ab = pa.center - pb.center
    cd = pc.center - pd.center

    out = 0.0
    for t in range(pa.lmn[0] + pb.lmn[0] + 1):
        e1t = hermite_e(pa.lmn[0], pb.lmn[0], t, ab[0], a, b)
        for u in range(pa.lmn[1] + pb.lmn[1] + 1):
            e1u = hermite_e(pa.lmn[1], pb.lmn[1], u, ab[1], a, b)
            for v in range(pa.lmn[2] + pb.lmn[2] + 1):
                e1v = hermite_e(pa.lmn[2], pb.lmn[2], v, ab[2], a, b)
                for tau in range(pc.lmn[0] + pd.lmn[0] + 1):
                    e2t = hermite_e(pc.lmn[0], pd.lmn[0], tau, cd[0], c, d)
                    for nu in range(pc.lmn[1] + pd.lmn[1] + 1):
                        e2u = hermite_e(pc.lmn[1], pd.lmn[1], nu, cd[1], c, d)
                        for phi in range(pc.lmn[2] + pd.lmn[2] + 1):
                            e2v = hermite_e(pc.lmn[2], pd.lmn[2], phi, cd[2], c, d)
                            sign = (-1.0) ** (tau + nu + phi)
                            out += (
                                e1t * e1u * e1v * e2t * e2u * e2v * sign
                                * hermite_coulomb(t + tau, u + nu, v + phi, 0, alpha,
                                                  pq[0], pq[1], pq[2], rpq2)
                            )
    out *= 2.0 * math.pi ** 2.5 / (p * q * math.sqrt(p + q))
    return out


def contracted(fn, *shells):
    out = 0.0
    for prims in itertools.product(*shells):
        coef = 1.0
        for pr in prims:
            coef *= pr.coef * pr.norm
        out += coef * fn(*prims)
    return out


def ao_integrals(atoms):
    shells = build_basis(atoms)
    n = len(shells)
    s = np.zeros((n, n))
    t = np.zeros((n, n))
    vne = np.zeros((n, n))
    nuclei = [(CHARGES[sym], xyz) for sym, xyz in atoms]
    for i in range(n):
        for j in range(i + 1):
            s[i, j] = s[j, i] = contracted(overlap_prim, shells[i], shells[j])
            t[i, j] = t[j, i] = contracted(kinetic_prim, shells[i], shells[j])
            v = 0.0
            for z, xyz in nuclei:
                v -= z * contracted(lambda a, b: nuclear_prim(a, b, xyz), shells[i], shells[j])
            vne[i, j] = vne[j, i] = v
    eri = np.zeros((n, n, n, n))
    # unique (ij|kl) with 8-fold symmetry
    pairs = [(i, j) for i in range(n) for j in range(i + 1)]
    for pi, (i, j) in enumerate(pairs):
        for k, l in pairs[: pi + 1]:
            val = contracted(eri_prim, shells[i], shells[j], shells[k], shells[l])
            for a, b in ((i, j), (j, i)):
                for c, d in ((k, l), (l, k)):
                    eri[a, b, c, d] = val
                    eri[c, d, a, b] = val
    e_nuc = 0.0
    for (za, ra), (zb, rb) in itertools.combinations(nuclei, 2):
        e_nuc += za * zb / np.linalg.norm(np.asarray(ra) - np.asarray(rb))
    return s, t + vne, eri, e_nuc


def rhf(s, hcore, eri, n_occ, e_nuc, max_iter=200):
    n = s.shape[0]
    x = np.linalg.inv(np.linalg.cholesky(s)).T  # S^-1/2 via cholesky
    f = hcore.copy()
    dm = np.zeros((n, n))
    e_old = 0.0
    for it in range(max_iter):
        e_orb, c_prime = eigh(x.T @ f @ x)
        c = x @ c_prime
        cocc = c[:, :n_occ]
        dm_new = 2.0 * cocc @ cocc.T
        dm = 0.5 * (dm + dm_new) if it > 0 and it < 8 else dm_new
        j = np.einsum("pqrs,rs->pq", eri, dm)
        k = np.einsum("prqs,rs->pq", eri, dm)
        f = hcore + j - 0.5 * k
        e_elec = 0.5 * np.sum(dm * (hcore + f))
        if abs(e_elec - e_old) < 1e-13 and it > 3:
            break
        e_old = e_elec
    e_orb, c_prime = eigh(x.T @ f @ x)
    c = x @ c_prime
    return e_elec + e_nuc, c, e_orb


def mo_transform(eri, c):
    return np.einsum("pqrs,pi,qj,rk,sl->ijkl", eri, c, c, c, c, optimize=True)


def mp2_energy(eri_mo, eps, n_occ):
    n = eri_mo.shape[0]
    e2 = 0.0
    for i in range(n_occ):
        for j in range(n_occ):
            for a in range(n_occ, n):
                for b in range(n_occ, n):
                    iajb = eri_mo[i, a, j, b]
                    ibja = eri_mo[i, b, j, a]
                    e2 += iajb * (2.0 * iajb - ibja) / (eps[i] + eps[j] - eps[a] - eps[b])
    return e2


def freeze_core(h_mo, eri_mo, e_nuc, n_frozen):
    """Fold n_frozen doubly occupied orbitals into an effective core."""
    n = h_mo.shape[0]
    act = list(range(n_frozen, n))
    e_core = e_nuc
    for c in range(n_frozen):
        e_core += 2.0 * h_mo[c, c]
        for c2 in range(n_frozen):
            e_core += 2.0 * eri_mo[c, c, c2, c2] - eri_mo[c, c2, c, c2]
    h_eff = np.zeros((len(act), len(act)))
    for pi, p in enumerate(act):
        for qi, q in enumerate(act):
            val = h_mo[p, q]
            for c in range(n_frozen):
                val += 2.0 * eri_mo[p, q, c, c] - eri_mo[p, c, c, q]
            h_eff[pi, qi] = val
    eri_act = eri_mo[np.ix_(act, act, act, act)]
    return h_eff, eri_act, e_core


# ---------------------------------------------------------------------------
# FCI by second-quantized operator application over occupation bitstrings.
# Spin orbitals: 0..n-1 alpha (spatial p), n..2n-1 beta (spatial p - n).
# ---------------------------------------------------------------------------

def apply_annihilate(mask, p):
    if not (mask >> p) & 1:
        return None
    sign = (-1) ** bin(mask & ((1 << p) - 1)).count("1")
    return mask & ~(1 << p), sign


def apply_create(mask, p):
    if (mask >> p) & 1:
        return None
    sign = (-1) ** bin(mask & ((1 << p) - 1)).count("1")
    return mask | (1 << p), sign


def fci_ground_state(h_mo, eri_mo, e_core, n_spatial, n_alpha, n_beta):
    n = n_spatial
    m = 2 * n
    alphas = [sum(1 << i for i in occ) for occ in itertools.combinations(range(n), n_alpha)]
    betas = [sum(1 << i for i in occ) for occ in itertools.combinations(range(n), n_beta)]
    dets = []
    for am in sorted(alphas):
        for bm in sorted(betas):
            dets.append(am | (bm << n))
    index = {d: k for k, d in enumerate(dets)}
    dim = len(dets)
    ham = np.zeros((dim, dim))

    def spatial(P):
        return P if P < n else P - n

    def same_spin(P, Q):
        return (P < n) == (Q < n)

    for col, det in enumerate(dets):
        # one-electron
        for P in range(m):
            for Q in range(m):
                if not same_spin(P, Q):
                    continue
                hval = h_mo[spatial(P), spatial(Q)]
                if hval == 0.0:
                    continue
                r1 = apply_annihilate(det, Q)
                if r1 is None:
                    continue
                m1, s1 = r1
                r2 = apply_create(m1, P)
                if r2 is None:
                    continue
                m2, s2 = r2
                ham[index[m2], col] += s1 * s2 * hval
        # two-electron: 1/2 sum <PQ|RS> aP+ aQ+ aS aR, <PQ|RS> = (pr|qs) spin-matched
        for P in range(m):
            for R in range(m):
                if not same_spin(P, R):
                    continue
                for Q in range(m):
                    for S in range(m):
                        if not same_spin(Q, S):
                            continue
                        vval = eri_mo[spatial(P), spatial(R), spatial(Q), spatial(S)]
                        if vval == 0.0:
                            continue
                        r1 = apply_annihilate(det, R)
                        if r1 is None:
                            continue
                        m1, s1 = r1
                        r2 = apply_annihilate(m1, S)
                        if r2 is None:
                            continue
                        m2, s2 = r2
                        r3 = apply_create(m2, Q)
                        if r3 is None:
                            continue
                        m3, s3 = r3
                        r4 = apply_create(m3, P)
                        if r4 is None:
                            continue
                        m4, s4 = r4
                        ham[index[m4], col] += 0.5 * s1 * s2 * s3 * s4 * vval
    evals = np.linalg.eigvalsh(ham)
    return evals[0] + e_core, dim


def write_fcidump(path, h_mo, eri_mo, e_core, n_elec, ms2=0):
    n = h_mo.shape[0]
    lines = []
    lines.append(f"&FCI NORB={n},NELEC={n_elec},MS2={ms2},")
    lines.append(" ORBSYM=" + ",".join(["1"] * n) + ",")
    lines.append(" ISYM=1,")
    lines.append("&END")
    pairs = [(p, q) for p in range(n) for q in range(p + 1)]
    for pi, (p, q) in enumerate(pairs):
        for r, s in pairs[: pi + 1]:
            val = eri_mo[p, q, r, s]
            if abs(val) > 1e-16:
                lines.append(f"{val:.17E} {p + 1} {q + 1} {r + 1} {s + 1}")
    for p in range(n):
        for q in range(p + 1):
            val = h_mo[p, q]
            if abs(val) > 1e-16:
                lines.append(f"{val:.17E} {p + 1} {q + 1} 0 0")
    lines.append(f"{e_core:.17E} 0 0 0 0")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def run_system(name, atoms_ang, n_elec, n_frozen, out_dir):
    atoms = [(sym, np.asarray(xyz) * ANGSTROM_TO_BOHR) for sym, xyz in atoms_ang]
    s, hcore, eri, e_nuc = ao_integrals(atoms)
    n_occ = n_elec // 2
    e_hf, c, eps = rhf(s, hcore, eri, n_occ, e_nuc)
    h_mo = c.T @ hcore @ c
    eri_mo = mo_transform(eri, c)

    if n_frozen:
        h_act, eri_act, e_core = freeze_core(h_mo, eri_mo, e_nuc, n_frozen)
        eps_act = eps[n_frozen:]
        n_act_elec = n_elec - 2 * n_frozen
    else:
        h_act, eri_act, e_core = h_mo, eri_mo, e_nuc
        eps_act = eps
        n_act_elec = n_elec

    n_act = h_act.shape[0]
    n_act_occ = n_act_elec // 2
    e_mp2 = mp2_energy(eri_act, np.concatenate([eps_act[:n_act_occ], eps_act[n_act_occ:]]),
                       n_act_occ)
    e_fci, dim = fci_ground_state(h_act, eri_act, e_core, n_act, n_act_occ, n_act_occ)

    fname = f"{name}.fcidump"
    write_fcidump(os.path.join(out_dir, fname), h_act, eri_act, e_core, n_act_elec)
    print(f"{name}: norb={n_act} nelec={n_act_elec} dQ={dim} "
          f"E_HF={e_hf:.10f} E_MP2corr={e_mp2:.10f} E_FCI={e_fci:.10f}")
    return {
        "fcidump": fname,
        "n_orbitals": n_act,
        "n_electrons": n_act_elec,
        "e_core": float(e_core),
        "e_hf": float(e_hf),
        "e_mp2_corr": float(e_mp2),
        "e_fci": float(e_fci),
        "orbital_energies": [float(x) for x in eps_act],
        "d_q": dim,
    }


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "."
    os.makedirs(out_dir, exist_ok=True)
    results = {}

    results["h2"] = run_system("h2", [("H", (0, 0, 0)), ("H", (0, 0, 0.7414))], 2, 0, out_dir)

    chain_r = 0.9
    results["h4_r"] = run_system(
        "h4_r", [("H", (0, 0, i * chain_r)) for i in range(4)], 4, 0, out_dir)
    results["h4_2r"] = run_system(
        "h4_2r", [("H", (0, 0, i * 2 * chain_r)) for i in range(4)], 4, 0, out_dir)

    results["lih"] = run_system("lih", [("Li", (0, 0, 0)), ("H", (0, 0, 1.5949))], 4, 0, out_dir)

    # experimental water geometry, O-H 0.958 A, angle 104.4776 deg
    ang = math.radians(104.4776)
    oh = 0.958
    h2o = [("O", (0.0, 0.0, 0.0)),
           ("H", (0.0, 0.0, oh)),
           ("H", (0.0, oh * math.sin(ang), oh * math.cos(ang)))]
    results["h2o"] = run_system("h2o", h2o, 10, 0, out_dir)
    results["h2o_fc"] = run_system("h2o_fc", h2o, 10, 1, out_dir)

    with open(os.path.join(out_dir, "reference.json"), "w") as fh:
        json.dump(results, fh, indent=2)
    print("wrote", os.path.join(out_dir, "reference.json"))


if __name__ == "__main__":
    main()
