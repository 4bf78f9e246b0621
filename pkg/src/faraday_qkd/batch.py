"""Vectorized Monte Carlo kernels.

Rounds are simulated in batches of shape (rounds, 2**n) with the same
little-endian register conventions and the same per-round draw order as the
scalar engine in :mod:`protocol`, so a batch run and a loop of
``protocol.run_round`` calls fed the identical uniform streams produce
identical transcripts.  Every stochastic choice consumes exactly one uniform
from the caller-supplied matrix ``u`` (one row per round).

Column contracts (all angles are 2*pi times the raw uniform):

    none        [alpha, beta, uC, uD, uA, uB]
    general     [alpha, beta, uC, uD, uA, uB, uEveBob, uEveAlice]
    intercept   [alpha, beta, uLegC1, uLegC2, uLegD1, uLegD2, uC, uD, uA, uB]
    one-home    [alpha, beta, epsilon, uC, uD, uE', uA, uB, uE]
    pns 3-photon[alpha, beta, uC, uD, uA, uB, uEve]
    pns 4-home  [alpha, beta, uC, uD, uA1, uA2, uB1, uB2, uEve]
"""
from __future__ import annotations

import numpy as np

CHUNK = 2048

_SQRT2 = np.sqrt(2.0)


def _product(factors, b):
    """Batched product state; factors are (2,) fixed kets or (b, 2) arrays,
    given in register order (qubit 0 first, becoming the lowest index bit)."""
    amps = np.ones((b, 1), dtype=np.complex128)
    for f in factors:
        f = np.asarray(f, dtype=np.complex128)
        if f.ndim == 1:
            f = np.broadcast_to(f, (b, 2))
        amps = (f[:, :, None] * amps[:, None, :]).reshape(b, -1)
    return amps


def _eq_kets(theta):
    theta = np.asarray(theta, dtype=np.float64)
    out = np.empty(theta.shape + (2,), dtype=np.complex128)
    out[..., 0] = 1.0 / _SQRT2
    out[..., 1] = np.exp(1j * theta) / _SQRT2
    return out


def _z_kets(bits):
    out = np.zeros(bits.shape + (2,), dtype=np.complex128)
    out[np.arange(bits.size), bits] = 1.0
    return out


def _nq(amps):
    return int(round(np.log2(amps.shape[1])))


def _apply_qfr(amps, q1, q2):
    idx = np.arange(amps.shape[1])
    z1 = 1 - 2 * ((idx >> q1) & 1)
    z2 = 1 - 2 * ((idx >> q2) & 1)
    amps *= np.exp(-0.25j * np.pi * z1 * z2)[None, :]
    return amps


def _split(amps, q):
    dim = amps.shape[1]
    post = 1 << q
    pre = dim >> (q + 1)
    return amps.reshape(amps.shape[0], pre, 2, post)


def _apply_1q(amps, q, u):
    a = _split(amps, q)
    if u.ndim == 2:
        out = np.einsum("ij,bpjq->bpiq", u, a)
    else:
        out = np.einsum("bij,bpjq->bpiq", u, a)
    return out.reshape(amps.shape)


def _apply_2q(amps, q_hi, q_lo, w):
    """Fixed 4x4 unitary; w is indexed with q_hi as the most significant bit."""
    b = amps.shape[0]
    n = _nq(amps)
    a = amps.reshape([b] + [2] * n)
    ax_hi, ax_lo = 1 + (n - 1 - q_hi), 1 + (n - 1 - q_lo)
    a = np.moveaxis(a, [ax_hi, ax_lo], [n - 1, n])
    shape = a.shape
    a = np.einsum("ij,bdj->bdi", w, a.reshape(b, -1, 4)).reshape(shape)
    a = np.moveaxis(a, [n - 1, n], [ax_hi, ax_lo])
    return a.reshape(b, -1)


def _append_ancilla(amps):
    b, d = amps.shape
    out = np.zeros((b, 2 * d), dtype=np.complex128)
    out[:, :d] = amps
    return out


def _basis_rot(theta):
    theta = np.asarray(theta, dtype=np.float64)
    e = np.exp(1j * theta)
    v = np.empty(theta.shape + (2, 2), dtype=np.complex128)
    v[..., 0, 0] = 1.0 / _SQRT2
    v[..., 0, 1] = 1.0 / _SQRT2
    v[..., 1, 0] = e / _SQRT2
    v[..., 1, 1] = -e / _SQRT2
    return v


def _measure_z(amps, q, u):
    a = _split(amps, q)
    p0 = np.einsum("bpiq->bi", np.abs(a) ** 2)[:, 0]
    bits = (u >= p0).astype(np.int64)
    keep0 = (bits == 0)[:, None, None]
    a[:, :, 0, :] *= keep0
    a[:, :, 1, :] *= ~keep0
    p = np.where(bits == 0, p0, 1.0 - p0)
    amps = a.reshape(amps.shape[0], -1) / np.sqrt(p)[:, None]
    return bits, amps


def _measure_equator(amps, q, theta, u):
    v = _basis_rot(theta)
    vd = np.conj(np.swapaxes(v, -1, -2))
    amps = _apply_1q(amps, q, vd)
    bits, amps = _measure_z(amps, q, u)
    amps = _apply_1q(amps, q, v)
    return bits, amps


def _conditional_x(amps, q, mask):
    a = _split(amps, q)
    flipped = a[:, :, ::-1, :]
    return np.where(mask[:, None, None, None], flipped, a).reshape(amps.shape)


def _contract_lowest(amps, kets):
    """Remove qubit 0 by projecting onto per-round kets (b, 2)."""
    view = amps.reshape(amps.shape[0], -1, 2)
    return np.einsum("bdi,bi->bd", view, kets.conj())


def _attack_unitary(basis_angle, c):
    v = np.array([[1, 1], [np.exp(1j * basis_angle), -np.exp(1j * basis_angle)]]) / _SQRT2
    th = 2.0 * np.arccos(np.clip(c, 0.0, 1.0))
    ry = np.array([[np.cos(th / 2), -np.sin(th / 2)], [np.sin(th / 2), np.cos(th / 2)]])
    ctrl = np.eye(4, dtype=np.complex128)
    ctrl[2:, 2:] = ry
    vi = np.kron(v, np.eye(2))
    return vi @ ctrl @ vi.conj().T


def _chunks(total):
    for lo in range(0, total, CHUNK):
        yield lo, min(lo + CHUNK, total)


def protocol_rounds(u, attack=None):
    """Run baseline/general/intercept protocol rounds; one row of ``u`` each."""
    kind = attack["kind"] if attack else "none"
    b_total = u.shape[0]
    cols = {k: np.empty(b_total, dtype=np.int64)
            for k in ("bit_c", "bit_d", "bit_a", "bit_b",
                      "eve_guess_alice", "eve_guess_bob")}
    cols["alpha"] = 2.0 * np.pi * u[:, 0]
    cols["beta"] = 2.0 * np.pi * u[:, 1]
    if kind == "general":
        w_first = _attack_unitary(attack["gamma"], attack["cx"])
        w_return = _attack_unitary(attack["gamma"] + np.pi / 2, attack["cy"])
        m_up = np.asarray(attack["povm_up"], dtype=np.complex128)

    for lo, hi in _chunks(b_total):
        uc = u[lo:hi]
        alpha, beta = cols["alpha"][lo:hi], cols["beta"][lo:hi]
        amps = _product([_eq_kets(0.0), _eq_kets(0.0), _eq_kets(alpha), _eq_kets(beta)], hi - lo)
        if kind == "intercept":
            g = attack["gamma"]
            amps = _apply_qfr(amps, 0, 2)
            _, amps = _measure_equator(amps, 2, g, uc[:, 2])
            amps = _apply_qfr(amps, 1, 2)
            _, amps = _measure_equator(amps, 2, g + np.pi / 2, uc[:, 3])
            amps = _apply_qfr(amps, 1, 3)
            _, amps = _measure_equator(amps, 3, g, uc[:, 4])
            amps = _apply_qfr(amps, 0, 3)
            _, amps = _measure_equator(amps, 3, g + np.pi / 2, uc[:, 5])
            mcols = uc[:, 6:10]
        elif kind == "general":
            amps = _apply_qfr(amps, 0, 2)
            amps = _apply_2q(_append_ancilla(amps), 2, 4, w_first)      # E
            amps = _apply_qfr(amps, 1, 2)
            amps = _apply_2q(_append_ancilla(amps), 2, 5, w_return)     # F
            amps = _apply_qfr(amps, 1, 3)
            amps = _apply_2q(_append_ancilla(amps), 3, 6, w_first)      # E'
            amps = _apply_qfr(amps, 0, 3)
            amps = _apply_2q(_append_ancilla(amps), 3, 7, w_return)     # F'
            mcols = uc[:, 2:6]
        else:
            amps = _apply_qfr(amps, 0, 2)
            amps = _apply_qfr(amps, 1, 2)
            amps = _apply_qfr(amps, 1, 3)
            amps = _apply_qfr(amps, 0, 3)
            mcols = uc[:, 2:6]

        bit_c, amps = _measure_equator(amps, 2, alpha, mcols[:, 0])
        bit_d, amps = _measure_equator(amps, 3, beta, mcols[:, 1])
        amps = _conditional_x(amps, 1, bit_d == 0)        # Bob's step 9 (K=1 <=> bit 0)
        bit_a, amps = _measure_z(amps, 0, mcols[:, 2])
        bit_b, amps = _measure_z(amps, 1, mcols[:, 3])

        guess_a = np.full(hi - lo, -1, dtype=np.int64)
        guess_b = np.full(hi - lo, -1, dtype=np.int64)
        if kind == "general":
            # strip the collapsed A, B, C, D (ascending, so always qubit 0)
            for kets in (_z_kets(bit_a), _z_kets(bit_b),
                         _eq_kets(alpha + np.pi * bit_c),
                         _eq_kets(beta + np.pi * bit_d)):
                amps = _contract_lowest(amps, kets)
            amps /= np.linalg.norm(amps, axis=1, keepdims=True)
            m = amps.reshape(hi - lo, 4, 4)               # axes: (E'F', EF)
            rows = np.argmax(np.sum(np.abs(m) ** 2, axis=2), axis=1)
            v_ef = m[np.arange(hi - lo), rows, :]
            lcol = np.argmax(np.sum(np.abs(m) ** 2, axis=1), axis=1)
            v_pp = m[np.arange(hi - lo), :, lcol]
            for v, ucol, out in ((v_ef, uc[:, 6], guess_b), (v_pp, uc[:, 7], guess_a)):
                nrm = np.einsum("bi,bi->b", v.conj(), v).real
                p_up = np.clip(np.einsum("bi,ij,bj->b", v.conj(), m_up, v).real / nrm, 0.0, 1.0)
                out[:] = (ucol >= p_up).astype(np.int64)

        for name, arr in (("bit_c", bit_c), ("bit_d", bit_d), ("bit_a", bit_a),
                          ("bit_b", bit_b), ("eve_guess_alice", guess_a),
                          ("eve_guess_bob", guess_b)):
            cols[name][lo:hi] = arr

    cols["out_c"] = 1 - 2 * cols["bit_c"]
    cols["out_d"] = 1 - 2 * cols["bit_d"]
    cols["out_a"] = 1 - 2 * cols["bit_a"]
    cols["out_b"] = 1 - 2 * cols["bit_b"]
    cols["k_alice_odd"] = 1 - cols["bit_c"]
    cols["k_bob_odd"] = 1 - cols["bit_d"]
    cols["k_alice_even"] = cols["bit_a"]
    cols["k_bob_even"] = cols["bit_b"]
    return cols


def one_home_rounds(u):
    """Single-home impersonation; registers A=0 B=1 E=2 C=3 D=4 E'=5."""
    b_total = u.shape[0]
    out = {}
    alpha = 2.0 * np.pi * u[:, 0]
    beta = 2.0 * np.pi * u[:, 1]
    eps = 2.0 * np.pi * u[:, 2]
    names = ("bit_c", "bit_d", "bit_ep", "bit_a_z", "bit_b_z", "bit_e_z")
    for k in names:
        out[k] = np.empty(b_total, dtype=np.int64)
    for lo, hi in _chunks(b_total):
        uc = u[lo:hi]
        a, bb, ee = alpha[lo:hi], beta[lo:hi], eps[lo:hi]
        amps = _product([_eq_kets(0.0)] * 3 + [_eq_kets(a), _eq_kets(bb), _eq_kets(ee)], hi - lo)
        for c, t in ((0, 3), (2, 3), (1, 4), (2, 4), (2, 5), (0, 5)):
            amps = _apply_qfr(amps, c, t)
        bit_c, amps = _measure_equator(amps, 3, a, uc[:, 3])
        bit_d, amps = _measure_equator(amps, 4, bb, uc[:, 4])
        bit_ep, amps = _measure_equator(amps, 5, ee, uc[:, 5])
        amps = _conditional_x(amps, 1, bit_d == 0)      # Bob's step 9
        bit_a, amps = _measure_z(amps, 0, uc[:, 6])
        bit_b, amps = _measure_z(amps, 1, uc[:, 7])
        bit_e, amps = _measure_z(amps, 2, uc[:, 8])
        for k, arr in zip(names, (bit_c, bit_d, bit_ep, bit_a, bit_b, bit_e)):
            out[k][lo:hi] = arr
    out["alpha"], out["beta"], out["epsilon"] = alpha, beta, eps
    out["k_alice_odd"] = 1 - out["bit_c"]
    out["k_bob_odd"] = 1 - out["bit_d"]
    out["k_eve_odd"] = 1 - out["bit_ep"]
    out["k_alice_even"] = out["bit_a_z"]
    out["k_bob_even"] = out["bit_b_z"]
    out["out_c"] = 1 - 2 * out["bit_c"]
    out["out_d"] = 1 - 2 * out["bit_d"]
    out["out_a"] = 1 - 2 * out["bit_a_z"]
    out["out_b"] = 1 - 2 * out["bit_b_z"]
    return out


def _pns_gates(variant):
    if variant == "three-photon":
        return [(0, 2), (0, 4), (0, 5), (1, 2), (1, 5),
                (1, 3), (1, 6), (1, 7), (0, 3), (0, 7)], 2, 3
    return [(0, 4), (1, 4), (0, 6), (1, 6), (0, 7), (1, 7),
            (2, 4), (3, 4), (2, 7), (3, 7),
            (2, 5), (3, 5), (2, 8), (3, 8), (2, 9), (3, 9),
            (0, 5), (1, 5), (0, 9), (1, 9)], 4, 5


def pns_rounds(variant, u, blind=False):
    """Photon-splitting rounds; Eve measures her four stolen photons with the
    per-round Helstrom measurement between the two key-conditional states."""
    gates, q_c, q_d = _pns_gates(variant)
    n_homes = q_c  # home qubits occupy 0..q_c-1
    b_total = u.shape[0]
    cols = {k: np.empty(b_total, dtype=np.int64)
            for k in ("bit_c", "bit_d", "eve_guess")}
    cols["trace_dist"] = np.empty(b_total, dtype=np.float64)
    home_bits = np.empty((b_total, n_homes), dtype=np.int64)
    alpha = 2.0 * np.pi * u[:, 0]
    beta = 2.0 * np.pi * u[:, 1]

    for lo, hi in _chunks(b_total):
        b = hi - lo
        uc = u[lo:hi]
        a, bb = alpha[lo:hi], beta[lo:hi]
        if variant == "three-photon":
            factors = ([_eq_kets(0.0)] * 2 + [_eq_kets(a), _eq_kets(bb)]
                       + [_eq_kets(a), _eq_kets(a), _eq_kets(bb), _eq_kets(bb)])
        else:
            factors = ([_eq_kets(0.0)] * 4 + [_eq_kets(a), _eq_kets(bb)]
                       + [_eq_kets(a), _eq_kets(a), _eq_kets(bb), _eq_kets(bb)])
        amps = _product(factors, b)
        for c, t in gates:
            amps = _apply_qfr(amps, c, t)

        # conditional states of Eve's photons given the shared odd key bit:
        # rotate C and D into their measurement frames and slice the sectors
        va, vb = _basis_rot(a), _basis_rot(bb)
        rot = _apply_1q(amps.copy(), q_c, np.conj(np.swapaxes(va, -1, -2)))
        rot = _apply_1q(rot, q_d, np.conj(np.swapaxes(vb, -1, -2)))
        dim_h = 1 << n_homes
        view = rot.reshape(b, 16, 2, 2, dim_h)            # (eve, D, C, homes)
        rho = []
        for bit in (0, 1):                                 # bit 0 <=> key 1
            blk = view[:, :, bit, bit, :]
            r = np.einsum("beh,bfh->bef", blk, blk.conj())
            tr = np.einsum("bee->b", r).real
            rho.append(r / tr[:, None, None])
        delta = rho[0] - rho[1]                            # rho_{K=1} - rho_{K=0}
        vals, vecs = np.linalg.eigh(delta)
        cols["trace_dist"][lo:hi] = 0.5 * np.sum(np.abs(vals), axis=1)

        bit_c, amps = _measure_equator(amps, q_c, a, uc[:, 2])
        bit_d, amps = _measure_equator(amps, q_d, bb, uc[:, 3])
        if variant == "three-photon":
            amps = _conditional_x(amps, 1, bit_d == 0)     # Bob's step 9
        for h in range(n_homes):
            hb, amps = _measure_z(amps, 0, uc[:, 4 + h])   # qubit 0 shifts down each contraction
            home_bits[lo:hi, h] = hb
            amps = _contract_lowest(amps, _z_kets(hb))
        amps = _contract_lowest(amps, _eq_kets(a + np.pi * bit_c))
        amps = _contract_lowest(amps, _eq_kets(bb + np.pi * bit_d))
        amps /= np.linalg.norm(amps, axis=1, keepdims=True)

        if blind:
            p1 = np.full(b, 0.5)
        else:
            proj = np.einsum("bjk,bj->bk", vecs.conj(), amps)
            p1 = np.clip(np.sum((vals > 1e-9) * np.abs(proj) ** 2, axis=1), 0.0, 1.0)
        cols["eve_guess"][lo:hi] = (uc[:, 4 + n_homes] < p1).astype(np.int64)
        cols["bit_c"][lo:hi] = bit_c
        cols["bit_d"][lo:hi] = bit_d

    cols["alpha"], cols["beta"] = alpha, beta
    cols["k_alice_odd"] = 1 - cols["bit_c"]
    cols["k_bob_odd"] = 1 - cols["bit_d"]
    cols["out_c"] = 1 - 2 * cols["bit_c"]
    cols["out_d"] = 1 - 2 * cols["bit_d"]
    if variant == "three-photon":
        cols["out_a"] = 1 - 2 * home_bits[:, 0]
        cols["out_b"] = 1 - 2 * home_bits[:, 1]
        cols["k_alice_even"] = home_bits[:, 0]
        cols["k_bob_even"] = home_bits[:, 1]
    else:
        cols["out_a"] = 1 - 2 * home_bits[:, 0]
        cols["out_b"] = 1 - 2 * home_bits[:, 2]
        cols["k_alice_even"] = np.full(b_total, -1, dtype=np.int64)
        cols["k_bob_even"] = np.full(b_total, -1, dtype=np.int64)
    return cols
