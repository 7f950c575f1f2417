"""System models and the registry of example systems.

A :class:`SystemModel` bundles a drift ``f(x, u)``, a diffusion
``sigma(x, u)`` and an output map ``h(x)``.  All three are vectorized over
leading axes: ``x`` has shape ``(..., n)``, the drift returns ``(..., n)``,
the diffusion ``(..., n, q_w)`` and the output ``(..., p)``.  The control
``u`` is always a single ``(m,)`` vector shared by the whole batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ControlSignal",
    "SystemModel",
    "LinearAdditiveSpec",
    "LinearMultiplicativeSpec",
    "SYSTEM_NAMES",
    "build_system",
    "linear_to_model",
]


class ControlSignal:
    """Map from time to an ``m``-vector of controls.

    Use the :meth:`zero`, :meth:`constant` and :meth:`piecewise`
    constructors rather than calling ``__init__`` directly.
    """

    def __init__(self, kind, m, values, times=None):
        self.kind = kind
        self.m = int(m)
        self._values = np.asarray(values, dtype=float).reshape(max(1, np.size(values) // max(self.m, 1)), self.m)
        self._times = None if times is None else np.asarray(times, dtype=float)
        if not np.all(np.isfinite(self._values)):
            raise ValueError("control values must be finite")

    @classmethod
    def zero(cls, m):
        return cls("zero", m, np.zeros((1, m)))

    @classmethod
    def constant(cls, c):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls("constant", c.shape[0], c[None, :])

    @classmethod
    def piecewise(cls, times, values):
        """Piecewise-constant control: ``values[k]`` holds on ``[times[k], times[k+1])``.

        Before ``times[0]`` the first value is used.
        """
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or times.shape[0] != values.shape[0] or times.shape[0] == 0:
            raise ValueError("piecewise control needs one value row per breakpoint")
        if np.any(np.diff(times) <= 0):
            raise ValueError("piecewise control breakpoints must be strictly increasing")
        return cls("piecewise", values.shape[1], values, times)

    @property
    def is_constant(self):
        return self.kind != "piecewise"

    def __call__(self, t):
        if self._times is None:
            return self._values[0]
        k = int(np.searchsorted(self._times, t, side="right")) - 1
        return self._values[max(k, 0)]

    def describe(self):
        """JSON-friendly descriptor, also used in result metadata."""
        if self.kind == "zero":
            return {"zero": self.m}
        if self.kind == "constant":
            return {"constant": self._values[0].tolist()}
        return {"piecewise": {"times": self._times.tolist(), "values": self._values.tolist()}}

    def __repr__(self):
        return f"ControlSignal({self.describe()})"


def _zeros_diffusion(n, q_w):
    def diffusion(x, u):
        return np.zeros(x.shape[:-1] + (n, q_w))

    return diffusion


@dataclass(frozen=True)
class SystemModel:
    """Drift, diffusion and output of a (possibly stochastic) system.

    ``diffusion`` is identically zero for deterministic systems (``q_w`` may
    then be 0).
    """

    name: str
    n: int
    m: int
    p: int
    q_w: int
    drift: Callable
    diffusion: Callable
    output: Callable
    params: dict = field(default_factory=dict)
    default_control: ControlSignal | None = None
    deterministic: bool = False

    def control(self, u=None):
        """Return ``u`` or the model's default control (zero if none)."""
        if u is not None:
            if u.m != self.m:
                raise ValueError(f"{self.name} takes {self.m} controls, got {u.m}")
            return u
        if self.default_control is not None:
            return self.default_control
        return ControlSignal.zero(self.m)


# -- registry -----------------------------------------------------------------


def _stack(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _require(params, key, lo=None, hi=None):
    if key not in params:
        raise ValueError(f"missing parameter {key!r}")
    val = float(params[key])
    if not math.isfinite(val):
        raise ValueError(f"parameter {key!r} must be finite")
    if lo is not None and val < lo:
        raise ValueError(f"parameter {key!r} must be >= {lo}, got {val}")
    if hi is not None and val > hi:
        raise ValueError(f"parameter {key!r} must be <= {hi}, got {val}")
    return val


def _oscillator(params):
    def drift(x, u):
        return _stack(-x[..., 1], x[..., 0])

    return SystemModel(
        "oscillator", 2, 0, 1, 0, drift, _zeros_diffusion(2, 0),
        lambda x: x[..., 1:2], deterministic=True,
    )


def _oscillator_unobs(params):
    def drift(x, u):
        return _stack(-x[..., 1], 0.0 * x[..., 1])

    return SystemModel(
        "oscillator_unobs", 2, 0, 1, 0, drift, _zeros_diffusion(2, 0),
        lambda x: x[..., 1:2], deterministic=True,
    )


def _unicycle_drift(x, u):
    return _stack(
        x[..., 3] * np.cos(x[..., 2]),
        x[..., 3] * np.sin(x[..., 2]),
        u[0] + 0.0 * x[..., 2],
        u[1] + 0.0 * x[..., 3],
    )


def _unicycle_det(params):
    return SystemModel(
        "unicycle_det", 4, 2, 2, 0, _unicycle_drift, _zeros_diffusion(4, 0),
        lambda x: x[..., 0:2],
        default_control=ControlSignal.constant([0.0, 1.0]),
        deterministic=True,
    )


def _unicycle_sde(params):
    q = _require(params, "q", lo=0.0)
    channel = params.get("noise_channel", "speed")
    if channel not in ("speed", "heading"):
        raise ValueError(f"noise_channel must be 'speed' or 'heading', got {channel!r}")
    row = 3 if channel == "speed" else 2
    col = np.zeros((4, 1))
    col[row, 0] = q

    def diffusion(x, u):
        return np.broadcast_to(col, x.shape[:-1] + (4, 1)).copy()

    return SystemModel(
        "unicycle_sde", 4, 2, 2, 1, _unicycle_drift, diffusion,
        lambda x: x[..., 0:2],
        params={"q": q, "noise_channel": channel},
        default_control=ControlSignal.zero(2),
        deterministic=(q == 0.0),
    )


def _noise_affine(params):
    q = _require(params, "q", lo=0.0)

    def drift(x, u):
        return _stack(-x[..., 1], x[..., 0] * u[0])

    def diffusion(x, u):
        out = np.zeros(x.shape[:-1] + (2, 1))
        out[..., 1, 0] = q * x[..., 0]
        return out

    return SystemModel(
        "noise_affine", 2, 1, 1, 1, drift, diffusion, lambda x: x[..., 1:2],
        params={"q": q}, default_control=ControlSignal.constant([0.1]),
        deterministic=(q == 0.0),
    )


def _noise_affine_tradeoff(params):
    q = _require(params, "q", lo=0.0)
    v = _require(params, "v", lo=0.0, hi=1.0)

    def drift(x, u):
        return _stack(-x[..., 1], x[..., 0] * (1.0 - v) * u[0])

    def diffusion(x, u):
        out = np.zeros(x.shape[:-1] + (2, 1))
        out[..., 1, 0] = v * q * x[..., 0]
        return out

    return SystemModel(
        "noise_affine_tradeoff", 2, 1, 1, 1, drift, diffusion, lambda x: x[..., 1:2],
        params={"q": q, "v": v}, default_control=ControlSignal.constant([0.1]),
        deterministic=(q * v == 0.0),
    )


def _sigma_nl(params):
    def drift(x, u):
        return _stack(-x[..., 0] + 0.5 * x[..., 1] ** 2, -x[..., 1])

    return SystemModel(
        "sigma_nl", 2, 0, 1, 0, drift, _zeros_diffusion(2, 0),
        lambda x: x[..., 0:1], deterministic=True,
    )


def _sigma_l(params):
    return SystemModel(
        "sigma_l", 2, 0, 1, 0, lambda x, u: -x, _zeros_diffusion(2, 0),
        lambda x: x[..., 0:1], deterministic=True,
    )


def _sigma_sde(params):
    scale = float(params.get("scale", 1.0))

    def diffusion(x, u):
        out = np.zeros(x.shape[:-1] + (2, 1))
        out[..., 0, 0] = scale * 0.5 * x[..., 1] ** 2
        return out

    return SystemModel(
        "sigma_sde", 2, 0, 1, 1, lambda x, u: -x, diffusion, lambda x: x[..., 0:1],
        params={"scale": scale},
    )


def _matrix_param(params, key, required=True):
    if key not in params:
        if required:
            raise ValueError(f"missing parameter {key!r}")
        return None
    M = np.atleast_2d(np.asarray(params[key], dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError(f"parameter {key!r} has non-finite entries")
    return M


def _ou_linear(params):
    A = _matrix_param(params, "A")
    n = A.shape[0]
    omega = _matrix_param(params, "Omega", required=False)
    spec = LinearAdditiveSpec(
        A=A,
        C=_matrix_param(params, "C"),
        Omega=np.zeros((n, 1)) if omega is None else omega,
        mean0=np.asarray(params.get("mean0", np.zeros(n)), dtype=float),
        cov0=np.asarray(params.get("cov0", np.zeros((n, n))), dtype=float),
    )
    return linear_to_model(spec)


def _bs_linear(params):
    A = _matrix_param(params, "A")
    n = A.shape[0]
    omegas = params.get("Omega_list")
    if omegas is None:
        raise ValueError("missing parameter 'Omega_list'")
    spec = LinearMultiplicativeSpec(
        A=A,
        C=_matrix_param(params, "C"),
        Omega_list=[np.asarray(o, dtype=float) for o in omegas],
        mean0=np.asarray(params.get("mean0", np.zeros(n)), dtype=float),
        second_moment0=np.asarray(params.get("second_moment0", np.zeros((n, n))), dtype=float),
    )
    return linear_to_model(spec)


_REGISTRY = {
    "oscillator": _oscillator,
    "oscillator_unobs": _oscillator_unobs,
    "unicycle_det": _unicycle_det,
    "unicycle_sde": _unicycle_sde,
    "noise_affine": _noise_affine,
    "noise_affine_tradeoff": _noise_affine_tradeoff,
    "sigma_nl": _sigma_nl,
    "sigma_l": _sigma_l,
    "sigma_sde": _sigma_sde,
    "ou_linear": _ou_linear,
    "bs_linear": _bs_linear,
}

SYSTEM_NAMES = tuple(_REGISTRY)


def build_system(name, params=None):
    """Construct a registry system by name.

    Parameters
    ----------
    name : str
        One of :data:`SYSTEM_NAMES`.
    params : dict, optional
        ``q`` (noise scale, >= 0) for the noisy systems, ``v`` in [0, 1]
        for ``noise_affine_tradeoff``, ``noise_channel`` ('speed' or
        'heading') for ``unicycle_sde``, and the matrices of
        :class:`LinearAdditiveSpec` / :class:`LinearMultiplicativeSpec`
        for ``ou_linear`` / ``bs_linear``.
    """
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {', '.join(SYSTEM_NAMES)}") from None
    return factory(dict(params or {}))


# -- linear specs -----------------------------------------------------------------


def _check_psd(M, name):
    if not np.allclose(M, M.T, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError(f"{name} must be symmetric")
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))
    if lam.size and lam[0] < -1e-10 * max(1.0, lam[-1]):
        raise ValueError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class LinearAdditiveSpec:
    """``dX = A X dt + Omega dW``, ``Y = C X`` with initial mean and covariance."""

    A: np.ndarray
    C: np.ndarray
    Omega: np.ndarray
    mean0: np.ndarray
    cov0: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        Om = np.asarray(self.Omega, dtype=float).reshape(n, -1)
        mean0 = np.asarray(self.mean0, dtype=float).reshape(-1)
        cov0 = np.atleast_2d(np.asarray(self.cov0, dtype=float))
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        if mean0.shape != (n,) or cov0.shape != (n, n):
            raise ValueError("mean0 / cov0 dimensions do not match A")
        _check_psd(cov0, "cov0")
        for k, v in dict(A=A, C=C, Omega=Om, mean0=mean0, cov0=cov0).items():
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def second_moment0(self):
        return self.cov0 + np.outer(self.mean0, self.mean0)


@dataclass(frozen=True)
class LinearMultiplicativeSpec:
    """``dX = A X dt + sum_j Omega_j X dw_j``, ``Y = C X``."""

    A: np.ndarray
    C: np.ndarray
    Omega_list: list
    mean0: np.ndarray
    second_moment0: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        oms = [np.atleast_2d(np.asarray(o, dtype=float)) for o in self.Omega_list]
        for o in oms:
            if o.shape != (n, n):
                raise ValueError(f"each Omega_j must be {n}x{n}, got {o.shape}")
        mean0 = np.asarray(self.mean0, dtype=float).reshape(-1)
        M0 = np.atleast_2d(np.asarray(self.second_moment0, dtype=float))
        if mean0.shape != (n,) or M0.shape != (n, n):
            raise ValueError("mean0 / second_moment0 dimensions do not match A")
        _check_psd(M0, "second_moment0")
        _check_psd(M0 - np.outer(mean0, mean0), "second_moment0 - mean0 mean0^T")
        for k, v in dict(A=A, C=C, Omega_list=oms, mean0=mean0, second_moment0=M0).items():
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.A.shape[0]


def linear_to_model(spec):
    """Turn a linear spec into a simulatable :class:`SystemModel`."""
    A, C = spec.A, spec.C
    n, p = A.shape[0], C.shape[0]

    def drift(x, u):
        return x @ A.T

    def output(x):
        return x @ C.T

    if isinstance(spec, LinearAdditiveSpec):
        Om = spec.Omega

        def diffusion(x, u):
            return np.broadcast_to(Om, x.shape[:-1] + Om.shape).copy()

        return SystemModel(
            "ou_linear", n, 0, p, Om.shape[1], drift, diffusion, output,
            params={"spec": spec}, deterministic=not np.any(Om),
        )
    if isinstance(spec, LinearMultiplicativeSpec):
        Oms = np.stack(spec.Omega_list, axis=0) if spec.Omega_list else np.zeros((0, n, n))

        def diffusion(x, u):
            # column j is Omega_j x
            return np.einsum("jab,...b->...aj", Oms, x)

        return SystemModel(
            "bs_linear", n, 0, p, Oms.shape[0], drift, diffusion, output,
            params={"spec": spec}, deterministic=not np.any(Oms),
        )
    raise TypeError(f"expected a linear spec, got {type(spec).__name__}")
