"""Mach-Zehnder extraction of off-diagonal holonomies.

The particle enters path 0 with internal state ``P_{l_1}(0)/n_{l_1}``. After
the first beam splitter, path 1 receives a block-diagonal unitary ``V`` while
path 0 receives ``U`` alternated with filters onto ``P_{l_2}(0), ...,
P_{l_kappa}(0)`` and a final filter onto ``P_{l_1}(0)``. The second beam
splitter recombines the paths and ``p`` is the weight found in path 0.

States are unnormalized density matrices on ``C^2 (x) C^N``; filters remove
weight without renormalizing.

Beam splitter convention: ``|0> -> (|0> + |1>)/sqrt 2``,
``|1> -> (|0> - |1>)/sqrt 2`` at entry and at recombination.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad, simpson, solve_ivp
from scipy.stats import unitary_group

from .holonomy import (
    HOLONOMY_TOL,
    build_sigma_table,
    gamma_kernel_transport,
    gamma_product,
)
from .numkernel import (
    RankTolerance,
    commutator,
    dagger,
    numerical_rank,
    polar_unitary,
    svd,
    unitarity_defect,
    unitary_completion,
)
from .subspaces import CurveError, CurveFamily, Decomposition, uniform_grid

logger = logging.getLogger(__name__)

BEAM_SPLITTER = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
STRATEGIES = ("adiabatic", "filtering", "nonadiabatic")
CROSS_CHECK_TOL = 1e-10
INTEGRATOR_TOL = 1e-9


class ProtocolError(ValueError):
    """Inconsistent protocol setup or failed internal cross-check."""


class IntegratorError(ArithmeticError):
    """The Schrodinger integrator did not reach its tolerance."""


# two-path states -------------------------------------------------------------


def path_operator(path0, path1) -> np.ndarray:
    """``|0><0| (x) path0 + |1><1| (x) path1``."""
    path0 = np.asarray(path0, dtype=complex)
    path1 = np.asarray(path1, dtype=complex)
    N = path0.shape[0]
    out = np.zeros((2 * N, 2 * N), dtype=complex)
    out[:N, :N] = path0
    out[N:, N:] = path1
    return out


@dataclass
class TwoPathState:
    """Unnormalized density operator of path qubit and internal space."""

    rho: np.ndarray
    N: int

    @classmethod
    def prepare(cls, P: np.ndarray, n: int) -> "TwoPathState":
        N = P.shape[0]
        rho = np.zeros((2 * N, 2 * N), dtype=complex)
        rho[:N, :N] = P / n
        return cls(rho, N)

    def evolve(self, K: np.ndarray) -> "TwoPathState":
        self.rho = K @ self.rho @ dagger(K)
        return self

    def beam_splitter(self) -> "TwoPathState":
        return self.evolve(np.kron(BEAM_SPLITTER, np.eye(self.N)))

    def on_path0(self, A: np.ndarray) -> "TwoPathState":
        return self.evolve(path_operator(A, np.eye(self.N)))

    def on_path1(self, A: np.ndarray) -> "TwoPathState":
        return self.evolve(path_operator(np.eye(self.N), A))

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def path_weight(self, path: int) -> float:
        sl = slice(0, self.N) if path == 0 else slice(self.N, 2 * self.N)
        return float(np.real(np.trace(self.rho[sl, sl])))

    def check(self, atol: float = 1e-10) -> None:
        if np.max(np.abs(self.rho - dagger(self.rho))) > atol:
            raise ProtocolError("two-path state lost hermiticity")
        if np.min(np.linalg.eigvalsh(self.rho)) < -atol:
            raise ProtocolError("two-path state lost positivity")
        if self.trace > 1.0 + atol:
            raise ProtocolError(f"two-path state trace {self.trace} exceeds 1")


# U generation ----------------------------------------------------------------


def dynamical_phases(c: CurveFamily, energies=None) -> np.ndarray:
    """``phi_l = int_0^1 E_l(s) ds``.

    ``energies`` may be ``None`` (use ``c.energies``), an array of shape
    ``(len(c.grid), eta)``, or a sequence of callables ``E_l(s)``.
    """
    if energies is None:
        energies = c.energies
    if energies is None:
        raise ProtocolError("adiabatic strategy needs eigenenergies E_l(s)")
    if callable(energies) or (len(energies) and callable(energies[0])):
        fns = [energies] if callable(energies) else list(energies)
        return np.array([quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
                         for f in fns])
    E = np.asarray(energies, dtype=float)
    if E.shape != (c.grid.size, c.eta):
        raise ProtocolError(f"energy table has shape {E.shape}, expected {(c.grid.size, c.eta)}")
    return simpson(E, x=c.grid, axis=0)


def adiabatic_u(c: CurveFamily, energies=None, method: str = "auto") -> np.ndarray:
    """``U = sum_l exp(i phi_l) Gamma_l`` with ``phi_l = int E_l ds``.

    The sum carries the basis ``{F_l(0)}`` onto ``{F_l(1) T_l}``, so it is
    unitary for any complete decomposition, cyclic or not.
    """
    phases = dynamical_phases(c, energies)
    U = np.zeros((c.N, c.N), dtype=complex)
    for l in range(1, c.eta + 1):
        U += np.exp(1j * phases[l - 1]) * gamma_kernel_transport(c, l, method).operator
    return U


def _resample(c: CurveFamily, M_f: int) -> CurveFamily:
    if M_f < 1:
        raise ProtocolError(f"filtering grid needs M_f >= 1, got {M_f}")
    if c.refinable:
        return c.rebuild_on(uniform_grid(M_f))
    if c.M % M_f == 0 and np.allclose(c.grid, uniform_grid(c.M)):
        stride = c.M // M_f
        return CurveFamily(c.grid[::stride], [F[::stride] for F in c.frames])
    raise ProtocolError(
        f"cannot realize a filtering grid of {M_f} intervals on an explicit curve with {c.M}"
    )


def filtering_u_sequence(c: CurveFamily, seq: Sequence[int], M_f: int):
    """Ordered filter projectors for each leg ``l_1, ..., l_kappa``.

    Returns a list of ``(label, [P(s_0), ..., P(s_{M_f})])``; applied in order
    they approximate ``Gamma_{l_kappa} ... Gamma_{l_1}`` interleaved with the
    inter-leg projections.
    """
    fine = _resample(c, M_f)
    legs = []
    for label in seq:
        if not 1 <= label <= c.eta:
            raise IndexError(f"subspace label {label} out of range 1..{c.eta}")
        legs.append((label, [fine.projector(label - 1, j) for j in range(fine.grid.size)]))
    return legs


def _integrate_unitary(rhs, y0: np.ndarray, grid: np.ndarray, rtol: float, atol: float,
                       n_blocks: int, dense: bool = False):
    """Integrate a stack of unitaries over a grid, re-unitarizing at each node."""
    y = y0.copy()
    shape = y.shape
    worst = 0.0
    pieces = []
    for a, b in zip(grid[:-1], grid[1:]):
        sol = solve_ivp(lambda s, v: rhs(s, v.reshape(shape)).ravel(), (a, b), y.ravel(),
                        method="DOP853", rtol=rtol, atol=atol, dense_output=dense)
        if not sol.success:
            raise IntegratorError(f"integration failed on [{a:.6g}, {b:.6g}]: {sol.message}")
        y = sol.y[:, -1].reshape(shape)
        for k in range(n_blocks):
            worst = max(worst, unitarity_defect(y[k]))
            y[k] = polar_unitary(y[k])
        if dense:
            pieces.append((a, b, sol.sol))
    return y, worst, pieces


def propagator(H_of_s: Callable[[float], np.ndarray], time_scale: float = 1.0, grid=64,
               rtol: float = 1e-11, atol: float = 1e-12, tol: float = INTEGRATOR_TOL) -> np.ndarray:
    """``U(1)`` solving ``i dU/ds = time_scale * H(s) U`` with ``U(0) = 1``."""
    g = uniform_grid(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    N = np.asarray(H_of_s(0.0)).shape[0]

    def rhs(s, y):
        return -1j * time_scale * (np.asarray(H_of_s(s), dtype=complex) @ y[0])[None]

    y, worst, _ = _integrate_unitary(rhs, np.eye(N, dtype=complex)[None], g, rtol, atol, 1)
    if worst > tol:
        raise IntegratorError(f"propagator unitarity drift {worst:.2e} exceeds {tol:.1e}")
    return y[0]


def schrodinger_curve(H_of_s: Callable[[float], np.ndarray], initial: Decomposition,
                      grid=200, rtol: float = 1e-12, atol: float = 1e-13) -> CurveFamily:
    """Curve of subspaces ``W(s) H_l(0)`` carried by ``i dW/ds = H(s) W``.

    Frames are ``W(s) F_l(0)`` with analytic derivatives ``-i H(s) W(s) F_l(0)``.
    """
    N = initial.N
    nodes = uniform_grid(16)

    def rhs(s, y):
        return -1j * (np.asarray(H_of_s(s), dtype=complex) @ y[0])[None]

    _, worst, pieces = _integrate_unitary(rhs, np.eye(N, dtype=complex)[None], nodes,
                                          rtol, atol, 1, dense=True)
    if worst > INTEGRATOR_TOL:
        raise IntegratorError(f"unitarity drift {worst:.2e} while building Schrodinger curve")
    # each dense piece restarts from a re-unitarized node
    starts = np.array([p[0] for p in pieces])

    def W(s):
        k = int(np.clip(np.searchsorted(starts, s, side="right") - 1, 0, len(pieces) - 1))
        return polar_unitary(pieces[k][2](s).reshape(N, N))

    F0 = initial.frames

    def frames_fn(s):
        w = W(s)
        return [w @ F for F in F0]

    def derivative_fn(s):
        w = W(s)
        H = np.asarray(H_of_s(s), dtype=complex)
        return [-1j * H @ w @ F for F in F0]

    c = CurveFamily.from_generator(frames_fn, grid, derivative_fn)
    c.provenance = "schrodinger"
    return c


def modified_hamiltonian(H: np.ndarray, projectors: Sequence[np.ndarray]) -> np.ndarray:
    """``H - sum_l P_l H P_l``: removes the block-diagonal (dynamical) part."""
    return H - sum(P @ H @ P for P in projectors)


def nonadiabatic_u(H_of_s: Callable[[float], np.ndarray], c: CurveFamily,
                   rtol: float = 1e-11, atol: float = 1e-12, tol: float = INTEGRATOR_TOL,
                   consistency_tol: float = 1e-6) -> np.ndarray:
    """Propagator ``Ubar(1)`` of the modified Hamiltonian along the curve.

    The curve's subspaces must be the Schrodinger evolution of the ``s = 0``
    decomposition under ``H(s)``; this is checked at every grid sample. The
    projectors ``P_l(s)`` entering ``H - sum P_l H P_l`` are carried along by
    the unmodified evolution, integrated jointly.

    Raises
    ------
    IntegratorError
        If unitarity drifts beyond ``tol`` or the curve is inconsistent with
        Schrodinger evolution under ``H``.
    """
    N = c.N
    P0 = [c.projector(l, 0) for l in range(c.eta)]

    def rhs(s, y):
        H = np.asarray(H_of_s(s), dtype=complex)
        W = y[0]
        Ps = [W @ P @ dagger(W) for P in P0]
        return np.stack([-1j * H @ W, -1j * modified_hamiltonian(H, Ps) @ y[1]])

    y0 = np.stack([np.eye(N, dtype=complex)] * 2)
    y, worst, _ = _integrate_unitary(rhs, y0, uniform_grid(min(c.M, 32)), rtol, atol, 2)
    if worst > tol:
        raise IntegratorError(f"unitarity drift {worst:.2e} exceeds tolerance {tol:.1e}")
    # the modification must leave subspace motion untouched
    for j in range(0, c.grid.size, max(1, c.M // 8)):
        H = np.asarray(H_of_s(c.grid[j]), dtype=complex)
        Ps = [c.projector(l, j) for l in range(c.eta)]
        Hbar = modified_hamiltonian(H, Ps)
        for P in Ps:
            if np.max(np.abs(commutator(Hbar, P) - commutator(H, P))) > 1e-10 * max(1.0, np.abs(H).max()):
                raise IntegratorError("modified Hamiltonian changes subspace motion")
    W1 = y[0]
    drift = max(np.max(np.abs(W1 @ P0[l] @ dagger(W1) - c.projector(l, -1))) for l in range(c.eta))
    if drift > consistency_tol:
        raise IntegratorError(
            f"curve is not the Schrodinger evolution of its initial decomposition "
            f"(projector mismatch {drift:.2e} at s=1)"
        )
    return y[1]


# protocol --------------------------------------------------------------------


@dataclass
class ProtocolSpec:
    """One interferometric run.

    Attributes
    ----------
    seq : tuple of int
        1-based subspace labels ``(l_1, ..., l_kappa)``.
    strategy : {"adiabatic", "filtering", "nonadiabatic"}
    curve : CurveFamily
    V : ndarray, optional
        Full ``N x N`` unitary on path 1, block diagonal w.r.t. the ``s = 0``
        decomposition. Defaults to the identity.
    energies : optional
        Eigenenergies for the adiabatic strategy (see :func:`dynamical_phases`).
    hamiltonian : callable, optional
        ``H(s)`` for the nonadiabatic strategy.
    filter_grid : int, optional
        Number of filtering intervals per leg for the filtering strategy.
    """

    seq: tuple
    strategy: str
    curve: CurveFamily
    V: np.ndarray | None = None
    energies: object = None
    hamiltonian: Callable | None = None
    filter_grid: int | None = None
    name: str = ""

    def __post_init__(self):
        self.seq = tuple(int(x) for x in self.seq)
        if self.strategy not in STRATEGIES:
            raise ProtocolError(f"unknown strategy {self.strategy!r}; pick one of {STRATEGIES}")
        if not self.seq:
            raise ProtocolError("empty index sequence")
        for x in self.seq:
            if not 1 <= x <= self.curve.eta:
                raise ProtocolError(f"label {x} out of range 1..{self.curve.eta}")
        if self.strategy == "filtering" and self.filter_grid is None:
            raise ProtocolError("filtering strategy needs filter_grid")
        if self.strategy == "nonadiabatic" and self.hamiltonian is None:
            raise ProtocolError("nonadiabatic strategy needs a Hamiltonian path")
        if self.strategy == "adiabatic" and self.energies is None and self.curve.energies is None:
            raise ProtocolError("adiabatic strategy needs eigenenergies")
        if self.V is None:
            self.V = np.eye(self.curve.N, dtype=complex)
        self.V = np.asarray(self.V, dtype=complex)
        check_admissible(self.V, self.curve)

    @property
    def n1(self) -> int:
        return self.curve.dims[self.seq[0] - 1]

    def initial_frame(self, label: int) -> np.ndarray:
        return self.curve.frames[label - 1][0]


def check_admissible(V: np.ndarray, c: CurveFamily, atol: float = 1e-10) -> None:
    if V.shape != (c.N, c.N):
        raise ProtocolError(f"V has shape {V.shape}, expected {(c.N, c.N)}")
    if unitarity_defect(V) > atol:
        raise ProtocolError("V is not unitary")
    for l in range(c.eta):
        if np.max(np.abs(commutator(V, c.projector(l, 0)))) > atol:
            raise ProtocolError(f"V does not commute with P_{l + 1}(0)")


def block_to_operator(block: np.ndarray, spec: ProtocolSpec) -> np.ndarray:
    """Embed an ``n_{l_1} x n_{l_1}`` matrix as ``V`` with identity on other blocks."""
    l1 = spec.seq[0]
    F = spec.initial_frame(l1)
    P = F @ dagger(F)
    return F @ block @ dagger(F) + (np.eye(spec.curve.N) - P)


def detection_probability(gamma: np.ndarray, V_block: np.ndarray, phase: float = 0.0) -> float:
    """``1/4 + Tr(g g^dagger)/(4n) + Re[exp(i phase) Tr(g V^dagger)]/(2n)``."""
    n = gamma.shape[0]
    return float(0.25 + np.real(np.trace(gamma @ dagger(gamma))) / (4 * n)
                 + np.real(np.exp(1j * phase) * np.trace(gamma @ dagger(V_block))) / (2 * n))


@dataclass
class ProtocolResult:
    """Outcome of :func:`run_protocol`.

    ``p`` comes from the density-matrix simulation. ``gamma_realized`` is the
    path-0 map actually applied (restricted to ``H_{l_1}(0)``), ``gamma`` the
    engine value; ``p_formula`` evaluates the closed form with ``gamma`` and
    the dynamical phases.
    """

    p: float
    p_formula: float
    gamma: np.ndarray
    gamma_realized: np.ndarray
    phase: float
    surviving_weight: float
    flags: dict = field(default_factory=dict)

    @property
    def formula_error(self) -> float:
        return abs(self.p - self.p_formula)


def _path0_sequence(spec: ProtocolSpec):
    """The ordered list of path-0 operations for the chosen strategy."""
    c, seq = spec.curve, spec.seq
    P0 = lambda label: c.projector(label - 1, 0)  # noqa: E731
    ops = []
    if spec.strategy == "filtering":
        for _, projectors in filtering_u_sequence(c, seq, spec.filter_grid):
            ops.extend(projectors)
    else:
        U = (adiabatic_u(c, spec.energies) if spec.strategy == "adiabatic"
             else nonadiabatic_u(spec.hamiltonian, c))
        for k in range(1, len(seq)):
            ops.extend([U, P0(seq[k])])
        ops.append(U)
    ops.append(P0(seq[0]))
    return ops


def _sequence_phase(spec: ProtocolSpec) -> float:
    if spec.strategy != "adiabatic":
        return 0.0
    phases = dynamical_phases(spec.curve, spec.energies)
    return float(sum(phases[x - 1] for x in spec.seq))


def realized_map(spec: ProtocolSpec) -> np.ndarray:
    """Product of all path-0 operations, as an ``N x N`` operator."""
    X = np.eye(spec.curve.N, dtype=complex)
    for op in _path0_sequence(spec):
        X = op @ X
    return X


def run_protocol(spec: ProtocolSpec, check: bool = True) -> ProtocolResult:
    """Simulate the interferometer and return the path-0 detection probability.

    The simulated ``p`` is cross-checked against the closed form evaluated on
    the realized path-0 map to :data:`CROSS_CHECK_TOL`. For the adiabatic
    strategy the realized map equals the engine's ``exp(i sum phi) gamma`` up
    to roundoff, so ``p`` also equals ``p_formula``; for filtering and
    nonadiabatic runs the two differ by the discretization error.
    """
    c, seq = spec.curve, spec.seq
    l1 = seq[0]
    F1 = spec.initial_frame(l1)
    n = spec.n1
    ops = _path0_sequence(spec)

    state = TwoPathState.prepare(F1 @ dagger(F1), n)
    state.beam_splitter()
    state.on_path1(spec.V)
    X = np.eye(c.N, dtype=complex)
    for op in ops:
        state.on_path0(op)
        X = op @ X
        if check:
            state.check()
    before = state.trace
    state.beam_splitter()
    p = state.path_weight(0)

    V_block = dagger(F1) @ spec.V @ F1
    gamma_realized = dagger(F1) @ X @ F1
    p_realized = detection_probability(gamma_realized, V_block)
    if abs(p - p_realized) > CROSS_CHECK_TOL:
        raise ProtocolError(
            f"circuit probability {p:.12f} disagrees with the closed form on the realized "
            f"map {p_realized:.12f}"
        )
    phase = _sequence_phase(spec)
    table = build_sigma_table(c)
    gamma = gamma_product(table, seq)
    p_formula = detection_probability(gamma, V_block, phase)
    flags = {"nodal": numerical_rank(gamma, HOLONOMY_TOL) == 0}
    if spec.strategy == "adiabatic":
        U = adiabatic_u(c, spec.energies)
        flags["u_unitarity_defect"] = unitarity_defect(U)
        if abs(p - p_formula) > CROSS_CHECK_TOL:
            raise ProtocolError(
                f"adiabatic circuit p={p:.12f} disagrees with closed form {p_formula:.12f}"
            )
    flags["discarded_weight"] = 1.0 - before
    return ProtocolResult(p, p_formula, gamma, gamma_realized, phase, before, flags)


@dataclass
class ExtractionResult:
    """Optimal path-1 unitary and the maximal detection probability.

    ``V_block`` includes the dynamical phase factor for the adiabatic
    strategy; ``phase`` reports the stripped sum so that
    ``exp(-i phase) V_block`` is the holonomy on the support of gamma.
    """

    V_star: np.ndarray
    V_block: np.ndarray
    p_max: float
    p_at_V_star: float
    phase: float
    rank: int
    flags: dict = field(default_factory=dict)

    @property
    def holonomy_block(self) -> np.ndarray:
        return np.exp(-1j * self.phase) * self.V_block


def _p_from_map(X: np.ndarray, F1: np.ndarray, V: np.ndarray) -> float:
    """``(1/4n) ||(X + V) F1||_F^2``, the path-0 amplitude summed over ``H_{l_1}``."""
    amp = (X + V) @ F1
    return float(np.real(np.vdot(amp, amp))) / (4 * F1.shape[1])


def extract_holonomy(spec: ProtocolSpec, n_trials: int = 1000, seed: int = 0,
                     tol: RankTolerance = HOLONOMY_TOL) -> ExtractionResult:
    """Maximize ``p`` over admissible ``V`` analytically and verify by random search.

    ``V*`` on the ``l_1`` block is the unitary polar factor of the realized
    gamma (which carries the dynamical phase in the adiabatic case), completed
    on the null space of gamma; other blocks get the identity. The sweep
    draws ``n_trials`` random admissible ``V`` (Haar blocks, and local
    perturbations of ``V*``) and records the largest ``p(V) - p(V*)``.
    """
    c = spec.curve
    l1 = spec.seq[0]
    F1 = spec.initial_frame(l1)
    n = spec.n1
    X = realized_map(spec)
    g = dagger(F1) @ X @ F1
    _, s, _ = svd(g)
    rank = numerical_rank(g, tol)
    flags = {"undefined": rank == 0, "nonunique": 0 < rank < n}
    if rank == 0:
        V_block = np.eye(n, dtype=complex)
    else:
        V_block = unitary_completion(g, tol)
    V_star = block_to_operator(V_block, spec)
    p_max = float(0.25 + np.real(np.trace(g @ dagger(g))) / (4 * n) + np.sum(s) / (2 * n))
    p_star = _p_from_map(X, F1, V_star)

    rng = np.random.default_rng(seed)
    worst_gain = -np.inf
    dims = c.dims
    for trial in range(n_trials):
        if trial % 2 == 0:
            blocks = [unitary_group.rvs(d, random_state=rng) if d > 1
                      else np.exp(2j * np.pi * rng.random()) * np.eye(1) for d in dims]
            basis = c.decomposition_at(0).basis()
            V = basis @ _block_diag(blocks) @ dagger(basis)
        else:
            Hn = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            Hn = 0.5 * (Hn + dagger(Hn))
            eps = 10.0 ** rng.uniform(-4, -1)
            w, Q = np.linalg.eigh(Hn)
            kick = Q @ np.diag(np.exp(1j * eps * w)) @ dagger(Q)
            V = block_to_operator(V_block @ kick, spec)
        worst_gain = max(worst_gain, _p_from_map(X, F1, V) - p_star)
    flags["max_random_gain"] = float(worst_gain)
    return ExtractionResult(V_star, V_block, p_max, p_star, _sequence_phase(spec), rank, flags)


def _block_diag(blocks) -> np.ndarray:
    from scipy.linalg import block_diag

    return block_diag(*blocks)


# adiabatic limit -------------------------------------------------------------


def adiabatic_deviation(H_of_s: Callable[[float], np.ndarray], c: CurveFamily,
                        total_time: float, rtol: float = 1e-11) -> float:
    """``|| U_T(1) - sum_l exp(-i T phi_l) Gamma_l ||_2`` for the eigenspace curve ``c``.

    ``U_T`` solves ``i dU/ds = T H(s) U``. Schrodinger evolution attaches
    ``exp(-i T int E_l)`` to each eigenspace, so the energies are fed to
    :func:`adiabatic_u` with the sign and time scale folded in.
    """
    if c.energies is None:
        raise CurveError("adiabatic comparison needs an eigenspace curve with energies")
    steps = max(64, int(4 * total_time))
    U_T = propagator(H_of_s, total_time, grid=steps, rtol=rtol)
    U_ad = adiabatic_u(c, -total_time * c.energies)
    return float(np.linalg.norm(U_T - U_ad, 2))
