"""Moment-matched random variates for one-step weak sampling schemes.

The second-order schemes replace intractable iterated Brownian integrals
with cheap surrogates assembled from a handful of independent Gaussians per
step.  This module draws those surrogates, exposes the deterministic map
from raw standard normals to a variate bundle (reused by the non-centred
MCMC parameterization), and transcribes the closed-form moment table the
surrogates are required to match.

Index convention throughout: driving Brownian indices k run over 1..d_R;
index 0 denotes the time integrator, so e.g. ``zeta_k0`` is the surrogate
for the iterated integral of dB_k then dt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "SeededRng",
    "VariateBundle",
    "n_normals_elliptic",
    "n_normals_hypo",
    "elliptic_bundle_from_normals",
    "hypo_bundle_from_normals",
    "draw_elliptic",
    "draw_hypo",
    "moment_oracle",
    "catalogued_moments",
]

_SQRT2 = np.sqrt(2.0)
_SQRT3 = np.sqrt(3.0)


@dataclass
class SeededRng:
    """Counter-based generator keyed by ``(seed, stream_id)``.

    Distinct stream ids give statistically independent streams, and a given
    pair replays the identical sequence regardless of what other streams
    consumed — safe for order-insensitive parallel replicate studies.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def standard_normal(self, shape=()) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def spawn(self, stream_id: int) -> "SeededRng":
        """Fresh independent stream under the same seed."""
        return SeededRng(self.seed, stream_id)


@dataclass
class VariateBundle:
    """One time-step's random inputs for a scheme step.

    ``B[..., k-1]`` holds the Brownian increment B_k.  ``xi`` stores the
    second-level variates for k1,k2 >= 1 (for hypo-elliptic bundles these
    are the zeta_{k1 k2} entries, which share the elliptic construction).
    ``eta`` includes the k=0 row and column; ``eta[..., 0, 0]`` is unused
    and kept at zero.  Hypo-only fields are ``None`` on elliptic bundles.
    """

    delta: float
    B: np.ndarray
    xi: Optional[np.ndarray] = None
    zeta_0k: Optional[np.ndarray] = None
    zeta_k0: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None

    @property
    def d_R(self) -> int:
        return self.B.shape[-1]

    @property
    def is_hypo(self) -> bool:
        return self.eta is not None


def n_normals_elliptic(d_R: int) -> int:
    """Gaussians consumed per elliptic step: Z (d_R) and auxiliary B-tilde (d_R - 1)."""
    return 2 * d_R - 1


def n_normals_hypo(d_R: int) -> int:
    """Gaussians per hypo step: Z, Z-tilde, B-tilde (d_R each), W and the
    second-level B-tilde (d_R - 1 each)."""
    return 3 * d_R + 2 * (d_R - 1)


def _check_delta(delta: float) -> None:
    if not delta > 0:
        raise ValueError(f"step size must be positive, got {delta}")


def elliptic_bundle_from_normals(normals: np.ndarray, delta: float, d_R: int) -> VariateBundle:
    """Deterministic map from raw standard normals to an elliptic bundle.

    :param normals: array with trailing dimension ``n_normals_elliptic(d_R)``,
        laid out as [Z_1..Z_{d_R}, Btil_2..Btil_{d_R}].
    :param delta: step size.
    :param d_R: number of driving Brownian motions.
    """
    _check_delta(delta)
    need = n_normals_elliptic(d_R)
    if normals.shape[-1] != need:
        raise ValueError(f"expected {need} normals for d_R={d_R}, got {normals.shape[-1]}")
    root = np.sqrt(delta)
    B = root * normals[..., :d_R]
    # auxiliary Brownian endpoints, indexed 2..d_R
    Btil = root * normals[..., d_R:]

    xi = np.zeros(B.shape[:-1] + (d_R, d_R))
    for i in range(d_R):
        xi[..., i, i] = 0.5 * (B[..., i] ** 2 - delta)
        for j in range(d_R):
            if i < j:
                xi[..., i, j] = 0.5 * B[..., i] * (B[..., j] + Btil[..., j - 1])
            elif i > j:
                xi[..., i, j] = 0.5 * (B[..., i] * B[..., j] - B[..., j] * Btil[..., i - 1])
    return VariateBundle(delta=float(delta), B=B, xi=xi)


def hypo_bundle_from_normals(normals: np.ndarray, delta: float, d_R: int) -> VariateBundle:
    """Deterministic map from raw standard normals to a hypo-elliptic bundle.

    Layout of the trailing dimension (``n_normals_hypo(d_R)`` entries):
    [Z (d_R), Ztil (d_R), Btil_eta (d_R), W (d_R - 1), Btil_xi (d_R - 1)].
    Z drives B, Ztil refines zeta_{0k}, Btil_eta and W build the second-level
    eta surrogates, and Btil_xi is consumed by the embedded xi construction.
    """
    _check_delta(delta)
    need = n_normals_hypo(d_R)
    if normals.shape[-1] != need:
        raise ValueError(f"expected {need} normals for d_R={d_R}, got {normals.shape[-1]}")
    root = np.sqrt(delta)
    z = normals[..., :d_R]
    ztil = normals[..., d_R:2 * d_R]
    btil = root * normals[..., 2 * d_R:3 * d_R]          # indices 1..d_R
    w = root * normals[..., 3 * d_R:4 * d_R - 1]         # indices 2..d_R

    B = root * z
    zeta_0k = 0.5 * delta ** 1.5 * (z + ztil / _SQRT3)
    zeta_k0 = B * delta - zeta_0k  # integration-by-parts identity, exact per draw

    xi_normals = np.concatenate([z, normals[..., 4 * d_R - 1:]], axis=-1)
    xi = elliptic_bundle_from_normals(xi_normals, delta, d_R).xi

    # eta-tilde: mean-zero, variance delta^2/36, independent of everything above
    etat = np.zeros_like(xi)
    for i in range(d_R):
        etat[..., i, i] = (btil[..., i] ** 2 - delta) / (6.0 * _SQRT2)
        for j in range(d_R):
            if i < j:
                etat[..., i, j] = btil[..., i] * (btil[..., j] + w[..., j - 1]) / (6.0 * _SQRT2)
            elif i > j:
                etat[..., i, j] = (btil[..., i] * btil[..., j] - btil[..., j] * w[..., i - 1]) / (6.0 * _SQRT2)

    eta = np.zeros(B.shape[:-1] + (d_R + 1, d_R + 1))
    eta[..., 1:, 0] = 0.5 * delta * zeta_k0 - delta ** 2 / 12.0 * B
    eta[..., 0, 1:] = delta * zeta_k0 - delta ** 2 / 3.0 * B
    eta[..., 1:, 1:] = delta / 3.0 * xi - delta * etat

    return VariateBundle(delta=float(delta), B=B, xi=xi,
                         zeta_0k=zeta_0k, zeta_k0=zeta_k0, eta=eta)


def draw_elliptic(rng: SeededRng, delta: float, d_R: int, shape=()) -> VariateBundle:
    """Draw an elliptic variate bundle (optionally a leading batch ``shape``)."""
    _check_delta(delta)
    normals = rng.standard_normal(tuple(shape) + (n_normals_elliptic(d_R),))
    return elliptic_bundle_from_normals(normals, delta, d_R)


def draw_hypo(rng: SeededRng, delta: float, d_R: int, shape=()) -> VariateBundle:
    """Draw a hypo-elliptic variate bundle (optionally a leading batch ``shape``)."""
    _check_delta(delta)
    normals = rng.standard_normal(tuple(shape) + (n_normals_hypo(d_R),))
    return hypo_bundle_from_normals(normals, delta, d_R)


# ---------------------------------------------------------------------------
# closed-form moment table
# ---------------------------------------------------------------------------

def _eq(*pairs) -> float:
    return 1.0 if all(a == b for a, b in pairs) else 0.0


def _xi_bb(delta, k1, k2, k3, k4):
    if k1 == k2 == k3 == k4:
        return delta ** 2
    if k1 != k2 and {k1, k2} == {k3, k4}:
        return delta ** 2 / 2.0
    return 0.0


# kind -> (index arity, closed form).  The table collects the moment
# conditions the surrogate variates are constructed to satisfy, together
# with the exact moments of the iterated integrals I_(...) they stand in
# for (the latter double as oracles for scheme-level tests).  All indices
# are Brownian indices >= 1 unless the name embeds a 0.
_MOMENTS = {
    # Brownian increments and first-level xi surrogates
    "E[B B]": (2, lambda d, k: d * _eq((k[0], k[1]))),
    "E[xi]": (2, lambda d, k: 0.0),
    "E[xi_k0]": (1, lambda d, k: 0.0),
    "E[xi_0k]": (1, lambda d, k: 0.0),
    "E[xi B]": (3, lambda d, k: 0.0),
    "E[xi_k0 B]": (2, lambda d, k: d ** 2 / 2.0 * _eq((k[0], k[1]))),
    "E[xi_0k B]": (2, lambda d, k: d ** 2 / 2.0 * _eq((k[0], k[1]))),
    "E[xi xi]": (4, lambda d, k: d ** 2 / 2.0 * _eq((k[0], k[2]), (k[1], k[3]))),
    "E[xi xi_k0]": (3, lambda d, k: 0.0),
    "E[xi xi_0k]": (3, lambda d, k: 0.0),
    "E[xi B B]": (4, lambda d, k: _xi_bb(d, *k)),
    "E[xi_k0 B B]": (3, lambda d, k: 0.0),
    "E[xi xi B]": (5, lambda d, k: 0.0),
    "E[xi B B B]": (5, lambda d, k: 0.0),
    # zeta surrogates (hypo first level)
    "E[zeta_0k]": (1, lambda d, k: 0.0),
    "E[zeta_k0]": (1, lambda d, k: 0.0),
    "E[B zeta_0k]": (2, lambda d, k: d ** 2 / 2.0 * _eq((k[0], k[1]))),
    "E[B zeta_k0]": (2, lambda d, k: d ** 2 / 2.0 * _eq((k[0], k[1]))),
    "E[zeta_0k zeta_0k]": (2, lambda d, k: d ** 3 / 3.0 * _eq((k[0], k[1]))),
    "E[zeta_k0 zeta_k0]": (2, lambda d, k: d ** 3 / 3.0 * _eq((k[0], k[1]))),
    "E[zeta_0k zeta_k0]": (2, lambda d, k: d ** 3 / 6.0 * _eq((k[0], k[1]))),
    # eta surrogates (hypo second level); index 0 allowed in "E[eta]"
    "E[eta]": (2, lambda d, k: 0.0),
    "E[eta B]": (3, lambda d, k: 0.0),
    "E[eta_k0 B]": (2, lambda d, k: d ** 3 / 6.0 * _eq((k[0], k[1]))),
    "E[eta_0k B]": (2, lambda d, k: d ** 3 / 6.0 * _eq((k[0], k[1]))),
    "E[eta_k0 zeta_k0]": (2, lambda d, k: d ** 4 / 8.0 * _eq((k[0], k[1]))),
    "E[eta_0k zeta_k0]": (2, lambda d, k: d ** 4 / 6.0 * _eq((k[0], k[1]))),
    "E[eta zeta]": (4, lambda d, k: d ** 3 / 6.0 * _eq((k[0], k[2]), (k[1], k[3]))),
    "E[eta eta]": (4, lambda d, k: d ** 4 / 12.0 * _eq((k[0], k[2]), (k[1], k[3]))),
    # exact moments of the iterated integrals themselves
    "E[B I_k0]": (2, lambda d, k: d ** 2 / 2.0 * _eq((k[0], k[1]))),
    "E[B I_0k]": (2, lambda d, k: d ** 2 / 2.0 * _eq((k[0], k[1]))),
    "E[I_kk I_kk]": (4, lambda d, k: d ** 2 / 2.0 * _eq((k[0], k[2]), (k[1], k[3]))),
    "E[I_k0 I_kk]": (3, lambda d, k: 0.0),
    "E[I_k0 I_k0]": (2, lambda d, k: d ** 3 / 3.0 * _eq((k[0], k[1]))),
    "E[I_0k I_k0]": (2, lambda d, k: d ** 3 / 6.0 * _eq((k[0], k[1]))),
    "E[B I_k00]": (2, lambda d, k: d ** 3 / 6.0 * _eq((k[0], k[1]))),
    "E[B I_0k0]": (2, lambda d, k: d ** 3 / 6.0 * _eq((k[0], k[1]))),
    "E[B I_kk0]": (3, lambda d, k: 0.0),
    "E[I_k0 I_k00]": (2, lambda d, k: d ** 4 / 8.0 * _eq((k[0], k[1]))),
    "E[I_k0 I_0k0]": (2, lambda d, k: d ** 4 / 6.0 * _eq((k[0], k[1]))),
    "E[I_kk I_kk0]": (4, lambda d, k: d ** 3 / 6.0 * _eq((k[0], k[2]), (k[1], k[3]))),
    "E[I_kk0 I_kk0]": (4, lambda d, k: d ** 4 / 12.0 * _eq((k[0], k[2]), (k[1], k[3]))),
}


def moment_oracle(kind: str, delta: float, indices=()) -> float:
    """Closed-form value of a catalogued cross-moment.

    :param kind: moment identifier, e.g. ``"E[eta_0k zeta_k0]"``; see
        :func:`catalogued_moments` for the full list.
    :param delta: step size the moment is evaluated at.
    :param indices: tuple of Brownian indices (1-based; only ``"E[eta]"``
        admits 0 entries, standing for its time row/column).
    """
    _check_delta(delta)
    try:
        arity, fn = _MOMENTS[kind]
    except KeyError:
        raise ValueError(f"unknown moment identifier {kind!r}") from None
    ks = tuple(int(i) for i in np.atleast_1d(np.asarray(indices, dtype=int)))
    if len(ks) != arity:
        raise ValueError(f"{kind} expects {arity} indices, got {len(ks)}")
    low = 0 if kind == "E[eta]" else 1
    if any(i < low for i in ks):
        raise ValueError(f"indices for {kind} must be >= {low}")
    return float(fn(float(delta), ks))


def catalogued_moments() -> list:
    """All moment identifiers known to :func:`moment_oracle`."""
    return sorted(_MOMENTS)
