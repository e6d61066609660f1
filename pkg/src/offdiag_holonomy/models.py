"""Tripod model: Hamiltonian, bright/dark frames and closed-form holonomies.

All 4x4 matrices use the basis order ``(e, 0, 1, a)``. Curves built here
order the subspaces as ``(B+, B-, dark)``, i.e. labels 1, 2, 3 in the
holonomy module; :data:`TRIPOD_LABELS` maps the symbolic names.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .subspaces import CurveFamily, Decomposition, DEFAULT_GRID

TRIPOD_LABELS = {"+": 1, "-": 2, "d": 3}
TRIPOD_DIMS = (1, 1, 2)
NODAL_WINDOW = 1e-6


def _sine_series(coeffs):
    """``c_0 s + sum_k c_k sin(k pi s)`` and its derivative."""
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size == 0:
        c = np.zeros(1)
    k = np.arange(1, c.size)

    def f(s):
        return c[0] * s + float(np.sum(c[1:] * np.sin(k * np.pi * s)))

    def df(s):
        return c[0] + float(np.sum(c[1:] * k * np.pi * np.cos(k * np.pi * s)))

    return f, df


@dataclass
class TripodPath:
    """A path ``s -> (theta(s), phi(s))`` starting at the origin.

    The angle functions carry their derivatives so the connection and the
    integral ``Z`` can be evaluated without finite differences.
    """

    theta: Callable[[float], float]
    phi: Callable[[float], float]
    dtheta: Callable[[float], float]
    dphi: Callable[[float], float]
    omega: float = 1.0
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.theta(0.0)) > 1e-14 or abs(self.phi(0.0)) > 1e-14:
            raise ValueError("tripod paths must start at (theta, phi) = (0, 0)")

    @property
    def endpoint(self) -> tuple[float, float]:
        return float(self.theta(1.0)), float(self.phi(1.0))

    @classmethod
    def fourier(cls, theta_coeffs, phi_coeffs, omega: float = 1.0) -> "TripodPath":
        """``theta(s) = c_0 s + sum_k c_k sin(k pi s)``, likewise for ``phi``.

        The leading coefficient is the endpoint value; the sine terms vanish
        at both ends.
        """
        th, dth = _sine_series(theta_coeffs)
        ph, dph = _sine_series(phi_coeffs)
        spec = {"type": "fourier", "theta": [float(x) for x in np.ravel(theta_coeffs)],
                "phi": [float(x) for x in np.ravel(phi_coeffs)], "omega": float(omega)}
        return cls(th, ph, dth, dph, omega, spec)

    @classmethod
    def linear(cls, theta1: float, phi1: float, omega: float = 1.0) -> "TripodPath":
        path = cls.fourier([theta1], [phi1], omega)
        path.spec["type"] = "linear"
        return path

    @classmethod
    def from_spec(cls, spec: dict) -> "TripodPath":
        """Build from ``{type: "fourier"|"linear", theta: coeffs, phi: coeffs, omega}``."""
        allowed = {"type", "theta", "phi", "omega"}
        unknown = set(spec) - allowed
        if unknown:
            raise ValueError(f"unknown path keys: {sorted(unknown)}")
        kind = spec.get("type", "fourier")
        theta = np.atleast_1d(spec.get("theta", [0.0]))
        phi = np.atleast_1d(spec.get("phi", [0.0]))
        omega = float(spec.get("omega", 1.0))
        if kind == "linear":
            if theta.size != 1 or phi.size != 1:
                raise ValueError("linear paths take a single endpoint coefficient per angle")
            return cls.linear(float(theta[0]), float(phi[0]), omega)
        if kind == "fourier":
            return cls.fourier(theta, phi, omega)
        raise ValueError(f"unknown path type {kind!r}")


def random_tripod_path(rng: np.random.Generator, n_modes: int = 3, amplitude: float = 0.4,
                       theta1=None, phi1=None, omega: float = 1.0) -> TripodPath:
    """Random truncated sine-series path with bounded coefficients."""
    t1 = rng.uniform(0.2, np.pi - 0.2) if theta1 is None else theta1
    p1 = rng.uniform(-np.pi, np.pi) if phi1 is None else phi1
    scale = amplitude / np.arange(1, n_modes + 1)
    th = np.concatenate([[t1], rng.uniform(-1, 1, n_modes) * scale])
    ph = np.concatenate([[p1], rng.uniform(-1, 1, n_modes) * scale * 2.0])
    return TripodPath.fourier(th, ph, omega)


def tripod_hamiltonian(p: TripodPath, s: float) -> np.ndarray:
    th, ph = p.theta(s), p.phi(s)
    v = np.array([0.0, np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    e = np.array([1.0, 0.0, 0.0, 0.0])
    return (p.omega * (np.outer(e, v) + np.outer(v, e))).astype(complex)


def _states(th: float, ph: float):
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    r = 1.0 / np.sqrt(2.0)
    bp = r * np.array([1.0, st * cp, st * sp, ct])
    bm = r * np.array([1.0, -st * cp, -st * sp, -ct])
    d1 = np.array([0.0, ct * cp, ct * sp, -st])
    d2 = np.array([0.0, -sp, cp, 0.0])
    return bp, bm, d1, d2


def _state_derivatives(th: float, ph: float, dth: float, dph: float):
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    r = 1.0 / np.sqrt(2.0)
    dv = np.array([0.0,
                   ct * cp * dth - st * sp * dph,
                   ct * sp * dth + st * cp * dph,
                   -st * dth])
    dd1 = np.array([0.0,
                    -st * cp * dth - ct * sp * dph,
                    -st * sp * dth + ct * cp * dph,
                    -ct * dth])
    dd2 = np.array([0.0, -cp * dph, -sp * dph, 0.0])
    return r * dv, -r * dv, dd1, dd2


def tripod_frames(p: TripodPath, s: float) -> Decomposition:
    """Frames ``(B+, B-, (D1, D2))`` at parameter ``s``; real valued."""
    bp, bm, d1, d2 = _states(p.theta(s), p.phi(s))
    return Decomposition([bp[:, None], bm[:, None], np.column_stack([d1, d2])])


def tripod_frame_derivatives(p: TripodPath, s: float) -> list[np.ndarray]:
    dbp, dbm, dd1, dd2 = _state_derivatives(p.theta(s), p.phi(s), p.dtheta(s), p.dphi(s))
    return [dbp[:, None].astype(complex), dbm[:, None].astype(complex),
            np.column_stack([dd1, dd2]).astype(complex)]


def tripod_curve(p: TripodPath, grid=DEFAULT_GRID) -> CurveFamily:
    """Generator-backed curve of the bright and dark subspaces along a path."""
    def frames_fn(s):
        return tripod_frames(p, s).frames

    def derivative_fn(s):
        return tripod_frame_derivatives(p, s)

    def energies_fn(s):
        return (p.omega, -p.omega, 0.0)

    return CurveFamily.from_generator(frames_fn, grid, derivative_fn, energies_fn)


def z_integral(p: TripodPath) -> float:
    """``Z = int_0^1 cos(theta(s)) phi'(s) ds`` by adaptive quadrature."""
    val, err = quad(lambda s: np.cos(p.theta(s)) * p.dphi(s), 0.0, 1.0,
                    epsabs=1e-13, epsrel=1e-13, limit=200)
    if err > 1e-10:
        raise ArithmeticError(f"Z quadrature error estimate {err:.2e} exceeds 1e-10")
    return float(val)


@dataclass
class OracleEntry:
    seq: tuple[str, ...]
    value: np.ndarray | None
    status: str


@dataclass
class TripodOracle:
    """Closed-form holonomies of the tripod along one path."""

    Z: float
    theta1: float
    phi1: float
    entries: dict

    def __getitem__(self, seq) -> OracleEntry:
        return self.entries[tuple(seq)]

    def labels(self, seq: Sequence[str]) -> tuple[int, ...]:
        return tuple(TRIPOD_LABELS[x] for x in seq)


def _dark_outer(Z: float, phi1: float) -> np.ndarray:
    return np.array([[np.cos(Z) * np.cos(phi1), np.sin(Z) * np.cos(phi1)],
                     [np.cos(Z) * np.sin(phi1), np.sin(Z) * np.sin(phi1)]])


def tripod_oracle(p: TripodPath, window: float = NODAL_WINDOW) -> TripodOracle:
    """Closed-form first, second and third order holonomies of the tripod.

    Degeneracies are decided within ``window``: bright first-order phases
    vanish at ``theta_1 = pi``, the bright pair at ``theta_1 = 0``, every
    dark-involving off-diagonal holonomy at ``sin(theta_1) = 0``, and the
    scalar dark family additionally at the path-dependent nodal points
    ``cos(phi_1 - Z) = 0``. The dark first-order holonomy turns partial at
    ``theta_1 = pi/2``.
    """
    theta1, phi1 = p.endpoint
    Z = z_integral(p)
    c1 = np.cos(theta1)
    entries = {}

    def put(seq, value, status):
        entries[seq] = OracleEntry(seq, None if status == "undefined" else value, status)

    for b, other in (("+", "-"), ("-", "+")):
        put((b,), np.array([[1.0]]), "undefined" if 1.0 + c1 <= window else "full")
        put((b, other), np.array([[1.0]]), "undefined" if 1.0 - c1 <= window else "full")

    # dark first-order holonomy: R(phi_1) diag(sign cos theta_1, 1) R(-Z)
    rot_phi = np.array([[np.cos(phi1), -np.sin(phi1)], [np.sin(phi1), np.cos(phi1)]])
    transport = np.array([[np.cos(Z), np.sin(Z)], [-np.sin(Z), np.cos(Z)]])
    if abs(c1) <= window:
        put(("d",), rot_phi @ np.diag([0.0, 1.0]) @ transport, "partial")
    else:
        put(("d",), rot_phi @ np.diag([np.sign(c1), 1.0]) @ transport, "full")

    dark_defined = abs(np.sin(theta1)) > window
    cz = np.cos(phi1 - Z)
    scalar_status = "full" if dark_defined and abs(cz) > window else "undefined"
    sign = np.sign(cz)
    outer = _dark_outer(Z, phi1)
    matrix_status = "partial" if dark_defined else "undefined"
    for b, other in (("+", "-"), ("-", "+")):
        put((b, "d"), np.array([[-sign]]), scalar_status)
        put((b, other, "d"), np.array([[sign]]), scalar_status)
        put((b, "d", other), np.array([[sign]]), scalar_status)
        put(("d", b), -outer, matrix_status)
        put(("d", b, other), outer, matrix_status)
    return TripodOracle(Z, theta1, phi1, entries)


ORACLE_SEQUENCES = (
    ("+",), ("-",), ("d",),
    ("+", "-"), ("-", "+"),
    ("+", "d"), ("-", "d"), ("d", "+"), ("d", "-"),
    ("+", "-", "d"), ("-", "+", "d"), ("+", "d", "-"), ("-", "d", "+"),
    ("d", "+", "-"), ("d", "-", "+"),
)


def nodal_path(theta_coeffs, phi_sines, omega: float = 1.0, branch: int = 0) -> TripodPath:
    """A path whose endpoint sits exactly on a nodal point ``cos(phi_1 - Z) = 0``.

    With ``phi(s) = phi_1 s + sum_k b_k sin(k pi s)``, ``Z`` is affine in
    ``phi_1`` (``Z = a phi_1 + b``), so ``phi_1 - Z = pi/2 + branch*pi`` can be
    solved for ``phi_1`` directly.
    """
    th, _ = _sine_series(theta_coeffs)
    a, _ = quad(lambda s: np.cos(th(s)), 0.0, 1.0, epsabs=1e-14, epsrel=1e-14)
    probe = TripodPath.fourier(theta_coeffs, np.concatenate([[0.0], np.ravel(phi_sines)]), omega)
    b = z_integral(probe)
    if abs(1.0 - a) < 1e-8:
        raise ValueError("theta path has no nodal solution (mean cos(theta) = 1)")
    phi1 = (np.pi / 2 + branch * np.pi + b) / (1.0 - a)
    return TripodPath.fourier(theta_coeffs, np.concatenate([[phi1], np.ravel(phi_sines)]), omega)


def rank_counterexample():
    """Sigma table with rank-deficient diagonal blocks but vanishing strict gammas.

    ``eta = 3``, all ``n_l = 2``; ``sigma^{13} = sigma^{21} = sigma^{32} = 0`` and
    ``sigma^{ll}^dagger = sigma^{12} = sigma^{23} = sigma^{31} = [[0, 0], [1, 0]]``.
    """
    from .holonomy import SigmaTable

    lower = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
    upper = lower.conj().T
    zero = np.zeros((2, 2), dtype=complex)
    return SigmaTable.from_blocks([
        [upper, lower, zero],
        [zero, upper, lower],
        [lower, zero, upper],
    ])
