"""SDE model abstraction: rough/smooth splitting, parameter partitioning, and
the hat-operator derivative compositions consumed by the schemes and density
expansions.

A model is

    dX_R = V_R0(X, beta) dt + sum_k V_Rk(X, sigma) dB_k      (rough, d_R >= 1)
    dX_S = V_S0(X, gamma) dt                                  (smooth, d_S >= 0)

with theta = (beta, gamma, sigma).  The operators

    hatV0 f = <V0, d_x f> + 1/2 sum_k V_Rk^T (d^2_{x_R} f) V_Rk
    hatVk f = <V_Rk, d_{x_R} f>                                (k >= 1)

act coordinate-wise; the compositions the schemes need are collected in
:class:`DerivedCoefficients`.  All evaluators broadcast over leading batch
dimensions of ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Theta",
    "ModelSpec",
    "DerivativeOracles",
    "SdhsStructure",
    "DerivedCoefficients",
    "ModelEvaluationError",
    "CapabilityError",
    "eval_coefficients",
    "derived_coefficients",
    "builtin_model",
    "builtin_model_names",
]

# central-difference step for first derivatives (per coordinate, scaled by
# max(1, |x_i|)); second derivatives nest two first-order stencils at the
# same step.  Deeper compositions use the wider fourth-order stencils below,
# where naive nesting at this step would drown in roundoff.
FD_H1 = 1e-5
FD_H_INNER = 1e-3
FD_H_OUTER = 1e-2


class ModelEvaluationError(RuntimeError):
    """A model coefficient evaluated to a non-finite value."""


class CapabilityError(RuntimeError):
    """The model lacks derivative capabilities required by the caller."""


@dataclass(frozen=True)
class Theta:
    """Partitioned parameter vector (beta, gamma, sigma) in natural space.

    ``positive_mask`` marks coordinates that are log-reparameterized at the
    optimizer boundary (they must be > 0 here); ``free_mask`` marks the
    coordinates an estimator may move (fixed constants stay frozen).
    """

    values: np.ndarray
    partition: tuple
    positive_mask: np.ndarray = None
    free_mask: np.ndarray = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("theta values must be a 1-d vector")
        if sum(self.partition) != values.size:
            raise ValueError(
                f"partition {self.partition} inconsistent with {values.size} values")
        pos = (np.zeros(values.size, dtype=bool) if self.positive_mask is None
               else np.asarray(self.positive_mask, dtype=bool))
        free = (np.ones(values.size, dtype=bool) if self.free_mask is None
                else np.asarray(self.free_mask, dtype=bool))
        if pos.size != values.size or free.size != values.size:
            raise ValueError("mask length mismatch")
        if np.any(values[pos] <= 0):
            raise ValueError("positive-masked coordinates must be > 0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "positive_mask", pos)
        object.__setattr__(self, "free_mask", free)

    @property
    def beta(self):
        return self.values[:self.partition[0]]

    @property
    def gamma(self):
        d_b, d_g, _ = self.partition
        return self.values[d_b:d_b + d_g]

    @property
    def sigma(self):
        return self.values[self.partition[0] + self.partition[1]:]

    def with_values(self, values) -> "Theta":
        return Theta(np.asarray(values, dtype=float), self.partition,
                     self.positive_mask, self.free_mask)


@dataclass(frozen=True)
class DerivativeOracles:
    """Analytic spatial derivatives of the model coefficients.

    ``jac_drift(x, theta) -> (..., d, d)`` with rows ordered [rough; smooth]
    and columns over the full state; ``hess_drift_rr -> (..., d, d_R, d_R)``
    restricted to rough second derivatives (all the hat operators need).
    ``jac_diffusion -> (..., d_R, d_R, d)`` indexed (row, column k, d/dx_j)
    and ``hess_diffusion_rr -> (..., d_R, d_R, d_R, d_R)``; ``None`` stands
    for identically zero (state-independent diffusion).
    ``second_level_smooth(x, theta)`` returns the three second-level
    compositions (hatVk1_hatVk2_VS0, hatV0_hatVk_VS0, hatVk_hatV0_VS0); when
    absent they fall back to nested finite differences.
    """

    jac_drift: Callable
    hess_drift_rr: Optional[Callable] = None
    jac_diffusion: Optional[Callable] = None
    hess_diffusion_rr: Optional[Callable] = None
    second_level_smooth: Optional[Callable] = None


@dataclass(frozen=True)
class SdhsStructure:
    """Declares closed-form structure for the damping-Hamiltonian fast path.

    Either ``c_beta(x_S, theta) -> (..., d_R, d_R)`` for the strict form
    dX_S = X_R dt with rough drift -(c_beta X_R + g_beta), or an explicit
    ``phi2_coeffs(x, theta) -> (..., d, d)`` coefficient matrix contracting
    against second-order Hermite polynomials.
    """

    c_beta: Optional[Callable] = None
    phi2_coeffs: Optional[Callable] = None


@dataclass(frozen=True)
class ModelSpec:
    name: str
    d_R: int
    d_S: int
    drift_rough: Callable
    diffusion: Callable
    drift_smooth: Optional[Callable] = None
    param_layout: tuple = (0, 0, 0)
    param_names: tuple = ()
    positive_mask: tuple = ()
    theta_default: tuple = ()
    derivative_oracles: Optional[DerivativeOracles] = None
    sdhs: Optional[SdhsStructure] = None
    fixed: dict = field(default_factory=dict)
    fd_fallback: bool = True
    x0_default: tuple = ()

    def __post_init__(self):
        if self.d_R < 1 or self.d_S < 0:
            raise ValueError("need d_R >= 1 and d_S >= 0")
        if self.d_S > 0 and self.drift_smooth is None:
            raise ValueError("hypo-elliptic model needs a smooth drift")

    @property
    def d(self) -> int:
        return self.d_R + self.d_S

    @property
    def is_hypo(self) -> bool:
        return self.d_S > 0

    def theta(self, values, free_mask=None) -> Theta:
        return Theta(np.asarray(values, dtype=float), self.param_layout,
                     np.asarray(self.positive_mask, dtype=bool), free_mask)

    def default_theta(self) -> Theta:
        return self.theta(self.theta_default)

    def default_x0(self) -> np.ndarray:
        if len(self.x0_default) == self.d:
            return np.asarray(self.x0_default, dtype=float)
        return np.zeros(self.d)

    def without_oracles(self) -> "ModelSpec":
        """Copy of the model relying purely on finite differences (testing aid)."""
        return replace(self, derivative_oracles=None)


def _check_finite(arr, what, model):
    if np.all(np.isfinite(arr)):
        return
    bad = np.argwhere(~np.isfinite(arr))
    coord = tuple(bad[0])
    raise ModelEvaluationError(
        f"model {model.name!r}: non-finite {what} at component {coord[-1]}"
        + (f" (batch element {tuple(coord[:-1])})" if len(coord) > 1 else ""))


def eval_coefficients(model: ModelSpec, x, theta: Theta):
    """Evaluate drift (stacked [rough; smooth]) and diffusion at ``x``.

    :param x: state array (..., d).
    :returns: (drift (..., d), diffusion (..., d_R, d_R))
    """
    x = np.asarray(x, dtype=float)
    vr0 = np.asarray(model.drift_rough(x, theta), dtype=float)
    if model.d_S > 0:
        vs0 = np.asarray(model.drift_smooth(x, theta), dtype=float)
        drift = np.concatenate([vr0, vs0], axis=-1)
    else:
        drift = vr0
    diff = np.asarray(model.diffusion(x, theta), dtype=float)
    _check_finite(drift, "drift", model)
    _check_finite(diff, "diffusion", model)
    return drift, diff


# ---------------------------------------------------------------------------
# finite-difference machinery
# ---------------------------------------------------------------------------

def _fd_jac(f, x, rows_hint=None):
    """Central-difference Jacobian of f: (..., d) -> (..., m) as (..., m, d)."""
    d = x.shape[-1]
    cols = []
    for j in range(d):
        h = FD_H1 * np.maximum(1.0, np.abs(x[..., j]))
        xp = x.copy()
        xp[..., j] = xp[..., j] + h
        xm = x.copy()
        xm[..., j] = xm[..., j] - h
        cols.append((f(xp) - f(xm)) / (2.0 * h[..., None]))
    return np.stack(cols, axis=-1)


def _fd_hess_rr(f, x, d_R):
    """Rough-block Hessian of f: (..., d) -> (..., m) as (..., m, d_R, d_R),
    built by nesting two first-order central stencils."""
    slabs = []
    for l in range(d_R):
        h = FD_H1 * np.maximum(1.0, np.abs(x[..., l]))
        xp = x.copy()
        xp[..., l] = xp[..., l] + h
        xm = x.copy()
        xm[..., l] = xm[..., l] - h
        jp = _fd_jac(f, xp)[..., :d_R]
        jm = _fd_jac(f, xm)[..., :d_R]
        slabs.append((jp - jm) / (2.0 * h[..., None, None]))
    return np.stack(slabs, axis=-1)  # (..., m, d_R, d_R)


def _embedded_column(model, theta, k):
    """Direction field x -> (..., d): diffusion column k padded with smooth zeros."""
    def u(x):
        col = np.asarray(model.diffusion(x, theta), dtype=float)[..., :, k]
        if model.d_S:
            pad = np.zeros(col.shape[:-1] + (model.d_S,))
            return np.concatenate([col, pad], axis=-1)
        return col
    return u


def _dir_scale(x, h):
    return h * np.maximum(1.0, np.max(np.abs(x), axis=-1, keepdims=True))


def _dir1(f, u, x, h):
    """Fourth-order directional derivative <u(x), grad f(x)>."""
    uv = u(x)
    nrm = np.linalg.norm(uv, axis=-1, keepdims=True)
    unit = uv / np.where(nrm == 0.0, 1.0, nrm)
    t = _dir_scale(x, h)
    step = t * unit
    val = (-f(x + 2 * step) + 8 * f(x + step) - 8 * f(x - step) + f(x - 2 * step)) / (12.0 * t)
    return val * nrm


def _dir2(f, u, x, h):
    """Fourth-order second directional derivative u^T (grad^2 f) u."""
    uv = u(x)
    nrm = np.linalg.norm(uv, axis=-1, keepdims=True)
    unit = uv / np.where(nrm == 0.0, 1.0, nrm)
    t = _dir_scale(x, h)
    step = t * unit
    val = (-f(x + 2 * step) + 16 * f(x + step) - 30 * f(x)
           + 16 * f(x - step) - f(x - 2 * step)) / (12.0 * t ** 2)
    return val * nrm ** 2


def _hat_k_fn(model, theta, k, f, h):
    """Operator transformer: x -> (hatV_k f)(x).  The direction is refreshed
    at each evaluation point, so nesting transformers composes operators."""
    u = _embedded_column(model, theta, k)
    return lambda x: _dir1(f, u, x, h)


def _hat_0_fn(model, theta, f, h):
    def v0(x):
        drift, _ = eval_coefficients(model, x, theta)
        return drift

    def g(x):
        out = _dir1(f, v0, x, h)
        for k in range(model.d_R):
            out = out + 0.5 * _dir2(f, _embedded_column(model, theta, k), x, h)
        return out
    return g


# ---------------------------------------------------------------------------
# derived coefficients
# ---------------------------------------------------------------------------

class DerivedCoefficients:
    """All hat-operator compositions at one (x, theta), lazily evaluated.

    Shapes (batch prefix ``...`` from x):
      hatV0_VR0 (..., d_R);       hatVk_VR0, hatV0_VRk (..., d_R, d_R) [k, i];
      hatVk1_VRk2 (..., d_R, d_R, d_R) [k1, k2, i];
      hatVk_VS0 (..., d_R, d_S);  hatV0_VS0 (..., d_S);
      hatVk1_hatVk2_VS0 (..., d_R, d_R, d_S);
      hatV0_hatVk_VS0, hatVk_hatV0_VS0 (..., d_R, d_S).
    """

    _FIELDS = ("hatV0_VR0", "hatVk_VR0", "hatV0_VRk", "hatVk1_VRk2",
               "hatVk_VS0", "hatV0_VS0",
               "hatVk1_hatVk2_VS0", "hatV0_hatVk_VS0", "hatVk_hatV0_VS0")

    def __init__(self, model: ModelSpec, x, theta: Theta):
        self.model = model
        self.x = np.asarray(x, dtype=float)
        self.theta = theta
        self._cache = {}
        self.drift, self.diffusion = eval_coefficients(model, self.x, theta)

    # -- raw derivative tensors (analytic if available, else FD) -----------

    def _raw(self, name):
        if name in self._cache:
            return self._cache[name]
        m, x, th = self.model, self.x, self.theta
        or_ = m.derivative_oracles
        val = None
        if or_ is not None:
            fn = getattr(or_, name)
            if fn is not None:
                val = np.asarray(fn(x, th), dtype=float)
            elif name in ("hess_drift_rr",):
                val = np.zeros(x.shape[:-1] + (m.d, m.d_R, m.d_R))
            elif name == "jac_diffusion":
                val = np.zeros(x.shape[:-1] + (m.d_R, m.d_R, m.d))
            elif name == "hess_diffusion_rr":
                val = np.zeros(x.shape[:-1] + (m.d_R, m.d_R, m.d_R, m.d_R))
        if val is None:
            if not m.fd_fallback:
                raise CapabilityError(
                    f"model {m.name!r} provides no {name} oracle and finite-difference "
                    "fallback is disabled")
            drift_fn = lambda y: eval_coefficients(m, y, th)[0]
            diff_fn = lambda y: eval_coefficients(m, y, th)[1].reshape(y.shape[:-1] + (-1,))
            if name == "jac_drift":
                val = _fd_jac(drift_fn, x)
            elif name == "hess_drift_rr":
                val = _fd_hess_rr(drift_fn, x, m.d_R)
            elif name == "jac_diffusion":
                val = _fd_jac(diff_fn, x).reshape(x.shape[:-1] + (m.d_R, m.d_R, m.d))
            elif name == "hess_diffusion_rr":
                val = _fd_hess_rr(diff_fn, x, m.d_R).reshape(
                    x.shape[:-1] + (m.d_R, m.d_R, m.d_R, m.d_R))
            else:  # pragma: no cover
                raise AssertionError(name)
        self._cache[name] = val
        return val

    # -- first-level compositions ------------------------------------------

    @property
    def hatVk_VR0(self):
        if "hatVk_VR0" not in self._cache:
            jr = self._raw("jac_drift")[..., :self.model.d_R, :self.model.d_R]
            self._cache["hatVk_VR0"] = np.einsum("...ja,...ij->...ai", self.diffusion, jr)
        return self._cache["hatVk_VR0"]

    @property
    def hatV0_VR0(self):
        if "hatV0_VR0" not in self._cache:
            j = self._raw("jac_drift")[..., :self.model.d_R, :]
            h = self._raw("hess_drift_rr")[..., :self.model.d_R, :, :]
            out = np.einsum("...j,...ij->...i", self.drift, j)
            out = out + 0.5 * np.einsum("...jm,...ijl,...lm->...i",
                                        self.diffusion, h, self.diffusion)
            self._cache["hatV0_VR0"] = out
        return self._cache["hatV0_VR0"]

    @property
    def hatVk1_VRk2(self):
        if "hatVk1_VRk2" not in self._cache:
            jd = self._raw("jac_diffusion")[..., :self.model.d_R]
            self._cache["hatVk1_VRk2"] = np.einsum("...ja,...ibj->...abi",
                                                   self.diffusion, jd)
        return self._cache["hatVk1_VRk2"]

    @property
    def hatV0_VRk(self):
        if "hatV0_VRk" not in self._cache:
            jd = self._raw("jac_diffusion")
            hd = self._raw("hess_diffusion_rr")
            out = np.einsum("...j,...ikj->...ki", self.drift, jd)
            out = out + 0.5 * np.einsum("...jm,...ikjl,...lm->...ki",
                                        self.diffusion, hd, self.diffusion)
            self._cache["hatV0_VRk"] = out
        return self._cache["hatV0_VRk"]

    @property
    def hatVk_VS0(self):
        if "hatVk_VS0" not in self._cache:
            js = self._raw("jac_drift")[..., self.model.d_R:, :self.model.d_R]
            self._cache["hatVk_VS0"] = np.einsum("...ja,...sj->...as", self.diffusion, js)
        return self._cache["hatVk_VS0"]

    @property
    def hatV0_VS0(self):
        if "hatV0_VS0" not in self._cache:
            j = self._raw("jac_drift")[..., self.model.d_R:, :]
            h = self._raw("hess_drift_rr")[..., self.model.d_R:, :, :]
            out = np.einsum("...j,...sj->...s", self.drift, j)
            out = out + 0.5 * np.einsum("...jm,...sjl,...lm->...s",
                                        self.diffusion, h, self.diffusion)
            self._cache["hatV0_VS0"] = out
        return self._cache["hatV0_VS0"]

    # -- second-level compositions (smooth drift only) ----------------------

    def _second_level(self):
        if "second_level" in self._cache:
            return self._cache["second_level"]
        m, x, th = self.model, self.x, self.theta
        if m.d_S == 0:
            z = np.zeros(x.shape[:-1] + (m.d_R, m.d_R, 0))
            val = (z, z[..., 0, :, :], z[..., 0, :, :])
        elif m.derivative_oracles is not None and m.derivative_oracles.second_level_smooth is not None:
            val = tuple(np.asarray(a, dtype=float)
                        for a in m.derivative_oracles.second_level_smooth(x, th))
        else:
            if not m.fd_fallback:
                raise CapabilityError(
                    f"model {m.name!r} lacks second-derivative capability for the "
                    "hypo-elliptic eta coefficients")
            vs0 = lambda y: np.asarray(m.drift_smooth(y, th), dtype=float)
            inner_k = [_hat_k_fn(m, th, k, vs0, FD_H_INNER) for k in range(m.d_R)]
            inner_0 = _hat_0_fn(m, th, vs0, FD_H_INNER)
            kk = np.stack([
                np.stack([_hat_k_fn(m, th, k1, inner_k[k2], FD_H_OUTER)(x)
                          for k2 in range(m.d_R)], axis=-2)
                for k1 in range(m.d_R)], axis=-3)
            zero_k = np.stack([_hat_0_fn(m, th, inner_k[k], FD_H_OUTER)(x)
                               for k in range(m.d_R)], axis=-2)
            k_zero = np.stack([_hat_k_fn(m, th, k, inner_0, FD_H_OUTER)(x)
                               for k in range(m.d_R)], axis=-2)
            val = (kk, zero_k, k_zero)
        self._cache["second_level"] = val
        return val

    @property
    def hatVk1_hatVk2_VS0(self):
        return self._second_level()[0]

    @property
    def hatV0_hatVk_VS0(self):
        return self._second_level()[1]

    @property
    def hatVk_hatV0_VS0(self):
        return self._second_level()[2]

    def as_dict(self):
        return {name: getattr(self, name) for name in self._FIELDS}


def derived_coefficients(model: ModelSpec, x, theta: Theta) -> DerivedCoefficients:
    """Hat-operator compositions at (x, theta); fields evaluate lazily."""
    return DerivedCoefficients(model, x, theta)


# ---------------------------------------------------------------------------
# builtin models
# ---------------------------------------------------------------------------

def _zeros_like_batch(x, tail):
    return np.zeros(x.shape[:-1] + tail)


def _ou_model(fixed):
    """dX = -rho X dt + sigma dB, the scalar linear test bed."""

    def drift(x, th):
        rho = th.values[0]
        return -rho * x

    def diffusion(x, th):
        sig = th.values[1]
        out = np.empty(x.shape[:-1] + (1, 1))
        out[..., 0, 0] = sig
        return out

    def jac_drift(x, th):
        out = np.empty(x.shape[:-1] + (1, 1))
        out[..., 0, 0] = -th.values[0]
        return out

    return ModelSpec(
        name="ou", d_R=1, d_S=0,
        drift_rough=drift, diffusion=diffusion,
        param_layout=(1, 0, 1), param_names=("rho", "sigma"),
        positive_mask=(False, True), theta_default=(1.0, 1.0),
        derivative_oracles=DerivativeOracles(jac_drift=jac_drift),
        fixed=fixed, x0_default=(1.0,))


def _linear_sdhs_model(fixed):
    """Linear damping-Hamiltonian pair:
    dX_R = -(c X_R + k X_S) dt + sigma dB, dX_S = X_R dt."""

    def drift_rough(x, th):
        c, k = th.values[0], th.values[1]
        return -(c * x[..., :1] + k * x[..., 1:2])

    def drift_smooth(x, th):
        return x[..., :1].copy()

    def diffusion(x, th):
        out = np.empty(x.shape[:-1] + (1, 1))
        out[..., 0, 0] = th.values[2]
        return out

    def jac_drift(x, th):
        c, k = th.values[0], th.values[1]
        out = np.empty(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = -c
        out[..., 0, 1] = -k
        out[..., 1, 0] = 1.0
        out[..., 1, 1] = 0.0
        return out

    def second_level(x, th):
        c, sig = th.values[0], th.values[2]
        kk = _zeros_like_batch(x, (1, 1, 1))
        zero_k = _zeros_like_batch(x, (1, 1))
        k_zero = np.full(x.shape[:-1] + (1, 1), -c * sig)
        return kk, zero_k, k_zero

    def c_beta(xs, th):
        return np.full(xs.shape[:-1] + (1, 1), th.values[0])

    return ModelSpec(
        name="linear_sdhs", d_R=1, d_S=1,
        drift_rough=drift_rough, drift_smooth=drift_smooth, diffusion=diffusion,
        param_layout=(2, 0, 1), param_names=("c", "k", "sigma"),
        positive_mask=(False, False, True), theta_default=(1.0, 1.0, 1.0),
        derivative_oracles=DerivativeOracles(jac_drift=jac_drift,
                                             second_level_smooth=second_level),
        sdhs=SdhsStructure(c_beta=c_beta),
        fixed=fixed, x0_default=(0.0, 0.0))


def _fn_model(fixed):
    """Noise-driven neuronal activation pair (rough recovery-type coordinate
    feeding a cubic smooth coordinate):

    dX_R = (gamma X_S - X_R + alpha) dt + sigma dB
    dX_S = (X_S - X_S^3 - X_R - s) / eps dt
    """
    s = fixed.get("s", 0.01)

    def drift_rough(x, th):
        gam, alp = th.values[0], th.values[1]
        return gam * x[..., 1:2] - x[..., :1] + alp

    def drift_smooth(x, th):
        eps = th.values[2]
        xs = x[..., 1:2]
        return (xs - xs ** 3 - x[..., :1] - s) / eps

    def diffusion(x, th):
        out = np.empty(x.shape[:-1] + (1, 1))
        out[..., 0, 0] = th.values[3]
        return out

    def jac_drift(x, th):
        gam, eps = th.values[0], th.values[2]
        xs = x[..., 1]
        out = np.empty(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = -1.0
        out[..., 0, 1] = gam
        out[..., 1, 0] = -1.0 / eps
        out[..., 1, 1] = (1.0 - 3.0 * xs ** 2) / eps
        return out

    def second_level(x, th):
        eps, sig = th.values[2], th.values[3]
        xs = x[..., 1]
        kk = _zeros_like_batch(x, (1, 1, 1))
        zero_k = _zeros_like_batch(x, (1, 1))
        k_zero = np.empty(x.shape[:-1] + (1, 1))
        k_zero[..., 0, 0] = sig * (1.0 / eps - (1.0 - 3.0 * xs ** 2) / eps ** 2)
        return kk, zero_k, k_zero

    def phi2_coeffs(x, th):
        eps, sig = th.values[2], th.values[3]
        xs = x[..., 1]
        cub = 1.0 - 3.0 * xs ** 2
        C = np.zeros(x.shape[:-1] + (2, 2))
        C[..., 0, 0] = -sig ** 2 / 2.0
        C[..., 0, 1] = sig ** 2 / (2.0 * eps) - sig ** 2 * cub / (6.0 * eps ** 2)
        C[..., 1, 1] = -sig ** 2 / (8.0 * eps ** 2) + sig ** 2 * cub / (8.0 * eps ** 3)
        return C

    return ModelSpec(
        name="fitzhugh_nagumo", d_R=1, d_S=1,
        drift_rough=drift_rough, drift_smooth=drift_smooth, diffusion=diffusion,
        param_layout=(2, 1, 1), param_names=("gamma", "alpha", "eps", "sigma"),
        positive_mask=(False, False, True, True),
        theta_default=(1.5, 0.3, 0.1, 0.6),
        derivative_oracles=DerivativeOracles(jac_drift=jac_drift,
                                             second_level_smooth=second_level),
        sdhs=SdhsStructure(phi2_coeffs=phi2_coeffs),
        fixed=dict(fixed, s=s), x0_default=(0.0, 0.0))


_JR_FIXED = dict(A=3.25, B=22.0, nu_max=5.0, v0=6.0, a=100.0, b=50.0, r=0.56,
                 sigma1=0.01, sigma3=1.0)


def _jr_model(fixed):
    """Three coupled second-order neural populations (6-d, 3 noise channels).

    theta = (C, mu, sigma2); the remaining physiological constants are fixed.
    """
    f = dict(_JR_FIXED, **fixed)
    A, B = f["A"], f["B"]
    nu_max, v0, r = f["nu_max"], f["v0"], f["r"]
    a, b = f["a"], f["b"]
    gam = np.array([a, a, b])

    def sigmoid(z):
        # nu_max / (1 + exp(r (v0 - z))), stable in both tails
        return nu_max * 0.5 * (1.0 + np.tanh(0.5 * r * (z - v0)))

    def dsigmoid(z):
        sz = sigmoid(z)
        return r * sz * (1.0 - sz / nu_max)

    def sigmas(th):
        return np.array([f["sigma1"], th.values[2], f["sigma3"]])

    def g_vec(xs, th):
        C, mu = th.values[0], th.values[1]
        out = np.empty(xs.shape)
        out[..., 0] = A * a * sigmoid(xs[..., 1] - xs[..., 2])
        out[..., 1] = A * a * (mu + 0.8 * C * sigmoid(C * xs[..., 0]))
        out[..., 2] = B * b * 0.25 * C * sigmoid(0.25 * C * xs[..., 0])
        return out

    def drift_rough(x, th):
        xr, xs = x[..., :3], x[..., 3:]
        return -(gam ** 2) * xs - 2.0 * gam * xr + g_vec(xs, th)

    def drift_smooth(x, th):
        return x[..., :3].copy()

    def diffusion(x, th):
        sig = sigmas(th)
        out = np.zeros(x.shape[:-1] + (3, 3))
        for i in range(3):
            out[..., i, i] = sig[i]
        return out

    def g_jac(xs, th):
        C, _ = th.values[0], th.values[1]
        J = np.zeros(xs.shape[:-1] + (3, 3))
        d1 = A * a * dsigmoid(xs[..., 1] - xs[..., 2])
        J[..., 0, 1] = d1
        J[..., 0, 2] = -d1
        J[..., 1, 0] = A * a * 0.8 * C * C * dsigmoid(C * xs[..., 0])
        J[..., 2, 0] = B * b * (0.25 * C) ** 2 * dsigmoid(0.25 * C * xs[..., 0])
        return J

    def jac_drift(x, th):
        xs = x[..., 3:]
        out = np.zeros(x.shape[:-1] + (6, 6))
        for i in range(3):
            out[..., i, i] = -2.0 * gam[i]
            out[..., i, 3 + i] = -gam[i] ** 2
            out[..., 3 + i, i] = 1.0
        out[..., :3, 3:] += g_jac(xs, th)
        return out

    def second_level(x, th):
        sig = sigmas(th)
        kk = _zeros_like_batch(x, (3, 3, 3))
        zero_k = _zeros_like_batch(x, (3, 3))
        k_zero = np.zeros(x.shape[:-1] + (3, 3))
        for k in range(3):
            k_zero[..., k, k] = -2.0 * gam[k] * sig[k]
        return kk, zero_k, k_zero

    def c_beta(xs, th):
        out = np.zeros(xs.shape[:-1] + (3, 3))
        for i in range(3):
            out[..., i, i] = 2.0 * gam[i]
        return out

    return ModelSpec(
        name="jansen_rit", d_R=3, d_S=3,
        drift_rough=drift_rough, drift_smooth=drift_smooth, diffusion=diffusion,
        param_layout=(2, 0, 1), param_names=("C", "mu", "sigma2"),
        positive_mask=(True, True, True), theta_default=(135.0, 220.0, 2000.0),
        derivative_oracles=DerivativeOracles(jac_drift=jac_drift,
                                             second_level_smooth=second_level),
        sdhs=SdhsStructure(c_beta=c_beta),
        fixed=f, x0_default=(0.0,) * 6)


def _sir_log_model(fixed):
    """Epidemic compartment model on log state (log S, log I, log c) with a
    mean-reverting log contact rate; all three coordinates carry noise.

    theta = (alpha, beta, lambda, sigma): contact-rate reversion speed and
    level, recovery rate, contact-rate volatility.
    """
    f = dict({"N": 763.0}, **fixed)
    N = f["N"]

    def _terms(x, th):
        lam = th.values[2]
        u, v, w = x[..., 0], x[..., 1], x[..., 2]
        t1 = -np.exp(w + v) / N
        t2 = -np.exp(w + v - u) / (2.0 * N)
        t3 = np.exp(w + u) / N
        t4 = -np.exp(w + u - v) / (2.0 * N)
        t5 = -0.5 * lam * np.exp(-v)
        return t1, t2, t3, t4, t5

    def drift(x, th):
        alpha, beta, lam = th.values[0], th.values[1], th.values[2]
        t1, t2, t3, t4, t5 = _terms(x, th)
        out = np.empty(x.shape)
        out[..., 0] = t1 + t2
        out[..., 1] = t3 - lam + t4 + t5
        out[..., 2] = alpha * (beta - x[..., 2])
        return out

    def diffusion(x, th):
        lam, sig = th.values[2], th.values[3]
        u, v, w = x[..., 0], x[..., 1], x[..., 2]
        out = np.zeros(x.shape[:-1] + (3, 3))
        out[..., 0, 0] = np.exp(0.5 * (w + v - u)) / np.sqrt(N)
        out[..., 1, 0] = -np.exp(0.5 * (w + u - v)) / np.sqrt(N)
        out[..., 1, 1] = np.sqrt(lam) * np.exp(-0.5 * v)
        out[..., 2, 2] = sig
        return out

    _A1 = np.array([0.0, 1.0, 1.0])
    _A2 = np.array([-1.0, 1.0, 1.0])
    _A3 = np.array([1.0, 0.0, 1.0])
    _A4 = np.array([1.0, -1.0, 1.0])
    _A5 = np.array([0.0, -1.0, 0.0])
    _G1 = np.array([-0.5, 0.5, 0.5])
    _G2 = np.array([0.5, -0.5, 0.5])
    _G3 = np.array([0.0, -0.5, 0.0])

    def jac_drift(x, th):
        alpha = th.values[0]
        t1, t2, t3, t4, t5 = _terms(x, th)
        out = np.zeros(x.shape[:-1] + (3, 3))
        out[..., 0, :] = (t1[..., None] * _A1 + t2[..., None] * _A2)
        out[..., 1, :] = (t3[..., None] * _A3 + t4[..., None] * _A4
                          + t5[..., None] * _A5)
        out[..., 2, 2] = -alpha
        return out

    def hess_drift_rr(x, th):
        t1, t2, t3, t4, t5 = _terms(x, th)
        out = np.zeros(x.shape[:-1] + (3, 3, 3))
        out[..., 0, :, :] = (t1[..., None, None] * np.outer(_A1, _A1)
                             + t2[..., None, None] * np.outer(_A2, _A2))
        out[..., 1, :, :] = (t3[..., None, None] * np.outer(_A3, _A3)
                             + t4[..., None, None] * np.outer(_A4, _A4)
                             + t5[..., None, None] * np.outer(_A5, _A5))
        return out

    def jac_diffusion(x, th):
        V = diffusion(x, th)
        out = np.zeros(x.shape[:-1] + (3, 3, 3))
        out[..., 0, 0, :] = V[..., 0, 0, None] * _G1
        out[..., 1, 0, :] = V[..., 1, 0, None] * _G2
        out[..., 1, 1, :] = V[..., 1, 1, None] * _G3
        return out

    def hess_diffusion_rr(x, th):
        V = diffusion(x, th)
        out = np.zeros(x.shape[:-1] + (3, 3, 3, 3))
        out[..., 0, 0, :, :] = V[..., 0, 0, None, None] * np.outer(_G1, _G1)
        out[..., 1, 0, :, :] = V[..., 1, 0, None, None] * np.outer(_G2, _G2)
        out[..., 1, 1, :, :] = V[..., 1, 1, None, None] * np.outer(_G3, _G3)
        return out

    return ModelSpec(
        name="sir_log", d_R=3, d_S=0,
        drift_rough=drift, diffusion=diffusion,
        param_layout=(3, 0, 1), param_names=("alpha", "beta", "lambda", "sigma"),
        positive_mask=(True, False, True, True),
        theta_default=(1.0, 0.7, 0.5, 0.05),
        derivative_oracles=DerivativeOracles(
            jac_drift=jac_drift, hess_drift_rr=hess_drift_rr,
            jac_diffusion=jac_diffusion, hess_diffusion_rr=hess_diffusion_rr),
        fixed=f,
        x0_default=(np.log(762.0), 0.0, np.log(2.0)))


_BUILTINS = {
    "ou": _ou_model,
    "linear_sdhs": _linear_sdhs_model,
    "fitzhugh_nagumo": _fn_model,
    "jansen_rit": _jr_model,
    "sir_log": _sir_log_model,
}


def builtin_model_names():
    return sorted(_BUILTINS)


def builtin_model(name: str, fixed_params: Optional[dict] = None) -> ModelSpec:
    """Construct a bundled model by name.

    :param name: one of ``ou``, ``linear_sdhs``, ``fitzhugh_nagumo``,
        ``jansen_rit``, ``sir_log``.
    :param fixed_params: overrides for the model's fixed constants.
    """
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; available: {', '.join(builtin_model_names())}")
    return factory(dict(fixed_params or {}))
