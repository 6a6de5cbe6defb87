"""Monte-Carlo harness checking drawn variates against the closed-form moment
table.  Shared by the module tests (small N) and the acceptance suite (2e6)."""

import itertools

import numpy as np

from weaksde.variates import SeededRng, draw_elliptic, draw_hypo, moment_oracle
from weaksde.variates import _MOMENTS


def _xi_k0(b, k):
    # derived entries xi_{k,0} = xi_{0,k} = B_k * delta / 2
    return 0.5 * b.B[..., k - 1] * b.delta


def _B(b, k):
    return b.B[..., k - 1]


def _xi(b, k1, k2):
    return b.xi[..., k1 - 1, k2 - 1]


# kind -> (needs_hypo, sample extractor)
EXTRACTORS = {
    "E[B B]": (False, lambda b, k: _B(b, k[0]) * _B(b, k[1])),
    "E[xi]": (False, lambda b, k: _xi(b, k[0], k[1])),
    "E[xi_k0]": (False, lambda b, k: _xi_k0(b, k[0])),
    "E[xi_0k]": (False, lambda b, k: _xi_k0(b, k[0])),
    "E[xi B]": (False, lambda b, k: _xi(b, k[0], k[1]) * _B(b, k[2])),
    "E[xi_k0 B]": (False, lambda b, k: _xi_k0(b, k[0]) * _B(b, k[1])),
    "E[xi_0k B]": (False, lambda b, k: _xi_k0(b, k[0]) * _B(b, k[1])),
    "E[xi xi]": (False, lambda b, k: _xi(b, k[0], k[1]) * _xi(b, k[2], k[3])),
    "E[xi xi_k0]": (False, lambda b, k: _xi(b, k[0], k[1]) * _xi_k0(b, k[2])),
    "E[xi xi_0k]": (False, lambda b, k: _xi(b, k[0], k[1]) * _xi_k0(b, k[2])),
    "E[xi B B]": (False, lambda b, k: _xi(b, k[0], k[1]) * _B(b, k[2]) * _B(b, k[3])),
    "E[xi_k0 B B]": (False, lambda b, k: _xi_k0(b, k[0]) * _B(b, k[1]) * _B(b, k[2])),
    "E[xi xi B]": (False, lambda b, k: _xi(b, k[0], k[1]) * _xi(b, k[2], k[3]) * _B(b, k[4])),
    "E[xi B B B]": (False, lambda b, k: _xi(b, k[0], k[1]) * _B(b, k[2]) * _B(b, k[3]) * _B(b, k[4])),
    "E[zeta_0k]": (True, lambda b, k: b.zeta_0k[..., k[0] - 1]),
    "E[zeta_k0]": (True, lambda b, k: b.zeta_k0[..., k[0] - 1]),
    "E[B zeta_0k]": (True, lambda b, k: _B(b, k[0]) * b.zeta_0k[..., k[1] - 1]),
    "E[B zeta_k0]": (True, lambda b, k: _B(b, k[0]) * b.zeta_k0[..., k[1] - 1]),
    "E[zeta_0k zeta_0k]": (True, lambda b, k: b.zeta_0k[..., k[0] - 1] * b.zeta_0k[..., k[1] - 1]),
    "E[zeta_k0 zeta_k0]": (True, lambda b, k: b.zeta_k0[..., k[0] - 1] * b.zeta_k0[..., k[1] - 1]),
    "E[zeta_0k zeta_k0]": (True, lambda b, k: b.zeta_0k[..., k[0] - 1] * b.zeta_k0[..., k[1] - 1]),
    "E[eta]": (True, lambda b, k: b.eta[..., k[0], k[1]]),
    "E[eta B]": (True, lambda b, k: b.eta[..., k[0], k[1]] * _B(b, k[2])),
    "E[eta_k0 B]": (True, lambda b, k: b.eta[..., k[0], 0] * _B(b, k[1])),
    "E[eta_0k B]": (True, lambda b, k: b.eta[..., 0, k[0]] * _B(b, k[1])),
    "E[eta_k0 zeta_k0]": (True, lambda b, k: b.eta[..., k[0], 0] * b.zeta_k0[..., k[1] - 1]),
    "E[eta_0k zeta_k0]": (True, lambda b, k: b.eta[..., 0, k[0]] * b.zeta_k0[..., k[1] - 1]),
    "E[eta zeta]": (True, lambda b, k: b.eta[..., k[0], k[1]] * _xi(b, k[2], k[3])),
    "E[eta eta]": (True, lambda b, k: b.eta[..., k[0], k[1]] * b.eta[..., k[2], k[3]]),
}


def _index_tuples(kind, arity, d_R):
    base = list(itertools.product(range(1, d_R + 1), repeat=arity))
    if kind == "E[eta]":
        base += [(0, k) for k in range(1, d_R + 1)]
        base += [(k, 0) for k in range(1, d_R + 1)]
    return base


def _arity(kind):
    return _MOMENTS[kind][0]


def run_mc_suite(N, delta, d_R, seed, chunk=500_000):
    """Accumulate MC estimates of every extractable catalogued moment.

    Returns a list of dict rows with keys kind, indices, mc, oracle, se, z.
    """
    kinds = [(kind, _arity(kind), hyp, fn) for kind, (hyp, fn) in EXTRACTORS.items()]
    stats = {}
    for kind, arity, hyp, fn in kinds:
        for ks in _index_tuples(kind, arity, d_R):
            stats[(kind, ks)] = [0.0, 0.0]  # running sum, sum of squares

    rng_e = SeededRng(seed, stream_id=0)
    rng_h = SeededRng(seed, stream_id=1)
    done = 0
    while done < N:
        n = min(chunk, N - done)
        be = draw_elliptic(rng_e, delta, d_R, shape=(n,))
        bh = draw_hypo(rng_h, delta, d_R, shape=(n,))
        for kind, arity, hyp, fn in kinds:
            b = bh if hyp else be
            for ks in _index_tuples(kind, arity, d_R):
                x = fn(b, ks)
                acc = stats[(kind, ks)]
                acc[0] += float(np.sum(x))
                acc[1] += float(np.dot(x, x))
        done += n

    rows = []
    for (kind, ks), (s1, s2) in stats.items():
        mean = s1 / N
        var = max(s2 / N - mean ** 2, 0.0) * N / (N - 1)
        se = np.sqrt(var / N)
        oracle = moment_oracle(kind, delta, ks)
        z = (mean - oracle) / se if se > 0 else 0.0
        rows.append(dict(kind=kind, indices=ks, mc=mean, oracle=oracle, se=se, z=z))
    return rows
