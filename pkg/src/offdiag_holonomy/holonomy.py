"""Off-diagonal holonomies of a curve of orthogonal decompositions.

Subspaces are addressed by 1-based labels ``1..eta`` in every function of
this module, so index sequences read exactly like ``(l_1, ..., l_kappa)``.

Conventions
-----------
``Gamma_l`` maps ``H_l(0)`` to ``H_l(1)`` by parallel transport. In frame form
``Gamma_l = F_l(1) T_l F_l(0)^dagger`` with ``T_l`` the path-ordered exponential
of the connection ``A_l = F_l'^dagger F_l`` (later parameter values act on the
left). The overlap blocks are ``sigma^{kl} = F_k(0)^dagger F_l(1) T_l`` and

    gamma^{l_1 ... l_kappa} = sigma^{l_1 l_kappa} sigma^{l_kappa l_{kappa-1}} ... sigma^{l_2 l_1},

i.e. ``sigma^{l_2 l_1}`` acts first. The holonomy is ``Phi[gamma]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .numkernel import (
    KernelError,
    RankTolerance,
    dagger,
    numerical_rank,
    phi_map,
    polar_unitary,
    svd,
    unitarity_defect,
)
from .subspaces import CurveError, CurveFamily, refine

# gamma blocks are contractions (norm <= 1), so an absolute floor is meaningful
HOLONOMY_TOL = RankTolerance(relative_cutoff=1e-10, absolute_cutoff=1e-8)

# largest admissible frame rotation per grid step, in operator norm
ALIGNMENT_BOUND = 0.5

_GL_NODES = (0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0)


class HolonomyError(RuntimeError):
    """Numerical or structural failure inside the holonomy engine."""


def _position(label: int, eta: int) -> int:
    if not isinstance(label, (int, np.integer)) or not 1 <= label <= eta:
        raise IndexError(f"subspace label {label!r} out of range 1..{eta}")
    return int(label) - 1


@dataclass
class GammaKernel:
    """Transport of one subspace from ``s = 0`` to ``s = 1``.

    Attributes
    ----------
    label : int
    operator : ndarray, shape (N, N)
        ``Gamma_l`` acting on the full space.
    transport : ndarray or None, shape (n_l, n_l)
        ``T_l``; ``None`` for the projector-product route.
    initial_frame, final_frame : ndarray, shape (N, n_l)
    method : str
    convergence : float or None
        Norm of the change under one refinement step.
    extrapolated : ndarray or None
        Richardson-extrapolated operator (projector route only).
    """

    label: int
    operator: np.ndarray
    transport: np.ndarray | None
    initial_frame: np.ndarray
    final_frame: np.ndarray
    method: str
    convergence: float | None = None
    extrapolated: np.ndarray | None = None

    def overlap(self, other_initial: np.ndarray) -> np.ndarray:
        """``(F^k_0 | F^l_1)`` for another subspace's initial frame."""
        return dagger(other_initial) @ self.final_frame


def _projector_product(c: CurveFamily, pos: int, stride: int = 1) -> np.ndarray:
    F = c.frames[pos][::stride]
    if (c.grid.size - 1) % stride:
        raise CurveError(f"grid of {c.M} intervals cannot be subsampled by {stride}")
    acc = np.eye(F.shape[2], dtype=complex)
    for j in range(F.shape[0] - 1):
        acc = (dagger(F[j + 1]) @ F[j]) @ acc
    return F[-1] @ acc @ dagger(F[0])


def _richardson(products: list) -> np.ndarray:
    """Extrapolate products on grids of spacing h, h/2, h/4, ... to h -> 0.

    The discrete product has an error expansion in integer powers of h.
    """
    table = list(products)
    order = 1
    while len(table) > 1:
        f = 2.0 ** order
        table = [(f * fine - coarse) / (f - 1.0) for coarse, fine in zip(table[:-1], table[1:])]
        order += 1
    return table[0]


def gamma_kernel_projector(c: CurveFamily, l: int, levels: int = 2) -> GammaKernel:
    """``Gamma_l`` as the ordered product ``P_l(1) P_l(s_{M-1}) ... P_l(0)``.

    The discrete product converges to the limit at first order in the grid
    spacing. For ``levels > 0`` the product is also formed on ``levels``
    successively halved grids (refined when the curve has a generator,
    otherwise by subsampling the existing grid) and combined in a Richardson
    table stored in ``extrapolated``; ``convergence`` is the change under the
    first halving.
    """
    pos = _position(l, c.eta)
    G = _projector_product(c, pos)
    kernel = GammaKernel(l, G, None, c.frames[pos][0], c.frames[pos][-1], "projector")
    if levels <= 0:
        return kernel
    if c.refinable:
        products = [G] + [_projector_product(refine(c, 2 ** k), pos) for k in range(1, levels + 1)]
        kernel.convergence = float(np.linalg.norm(products[1] - G, 2))
    elif c.M % (2 ** levels) == 0:
        products = [_projector_product(c, pos, stride=2 ** k) for k in range(levels, -1, -1)]
        kernel.convergence = float(np.linalg.norm(G - products[-2], 2))
    else:
        return kernel
    kernel.extrapolated = _richardson(products)
    return kernel


def _transport_overlap(c: CurveFamily, pos: int) -> np.ndarray:
    F = c.frames[pos]
    n = F.shape[2]
    T = np.eye(n, dtype=complex)
    for j in range(F.shape[0] - 1):
        O = dagger(F[j + 1]) @ F[j]
        U, s, Vh = np.linalg.svd(O)
        if s[-1] < 1e-3:
            raise CurveError(
                f"subspace {pos + 1} moves too far between samples {j} and {j + 1}; "
                "refine the grid"
            )
        step = U @ Vh
        if np.linalg.norm(step - np.eye(n), 2) > ALIGNMENT_BOUND:
            raise CurveError(
                f"frames of subspace {pos + 1} are not aligned between samples {j} and "
                f"{j + 1}; regenerate the curve with a continuous gauge"
            )
        T = polar_unitary(step @ T)
    return T


def _transport_magnus(c: CurveFamily, pos: int) -> np.ndarray:
    n = c.dims[pos]
    T = np.eye(n, dtype=complex)
    for a, b in zip(c.grid[:-1], c.grid[1:]):
        h = b - a
        A = []
        for node in _GL_NODES:
            s = a + node * h
            F = np.asarray(c.frames_fn(s)[pos], dtype=complex).reshape(c.N, n)
            dF = np.asarray(c.derivative_fn(s)[pos], dtype=complex).reshape(c.N, n)
            A.append(dagger(dF) @ F)
        if max(np.linalg.norm(Ak, 2) for Ak in A) * h > ALIGNMENT_BOUND:
            raise CurveError(
                f"connection of subspace {pos + 1} too large on [{a:.6g}, {b:.6g}]; "
                "refine the grid or regenerate the frames"
            )
        omega = 0.5 * h * (A[0] + A[1]) + (np.sqrt(3.0) / 12.0) * h * h * (A[1] @ A[0] - A[0] @ A[1])
        omega = 0.5 * (omega - dagger(omega))
        T = polar_unitary(expm(omega) @ T)
    return T


def gamma_kernel_transport(c: CurveFamily, l: int, method: str = "auto") -> GammaKernel:
    """``Gamma_l`` from the path-ordered exponential of the connection.

    Parameters
    ----------
    method : {"auto", "magnus", "overlap"}
        ``"magnus"`` integrates the connection with a fourth-order Magnus
        step per grid interval and needs ``derivative_fn``. ``"overlap"``
        uses the unitary polar factor of neighbouring frame overlaps as the
        per-step exponential, which is exactly gauge covariant on sampled
        data. ``"auto"`` picks Magnus whenever derivatives are available.
    """
    pos = _position(l, c.eta)
    if method == "auto":
        method = "magnus" if c.derivative_fn is not None else "overlap"
    if method == "magnus":
        if c.derivative_fn is None or c.frames_fn is None:
            raise CurveError("Magnus transport needs a curve with frame derivatives")
        T = _transport_magnus(c, pos)
    elif method == "overlap":
        T = _transport_overlap(c, pos)
    else:
        raise ValueError(f"unknown transport method {method!r}")
    F0, F1 = c.frames[pos][0], c.frames[pos][-1]
    return GammaKernel(l, F1 @ T @ dagger(F0), T, F0, F1, method)


def sigma(c: CurveFamily, k: int, l: int, method: str = "auto") -> np.ndarray:
    """Block ``sigma^{kl} = (F^k_0 | F^l_1) T_l`` of shape ``(n_k, n_l)``."""
    kernel = gamma_kernel_transport(c, l, method)
    return kernel.overlap(c.frames[_position(k, c.eta)][0]) @ kernel.transport


@dataclass
class SigmaTable:
    """All ``sigma^{kl}`` blocks and their assembly ``S_tot``.

    ``blocks[k-1][l-1]`` is ``sigma^{kl}``.
    """

    dims: tuple[int, ...]
    blocks: list
    S_tot: np.ndarray = field(repr=False)

    @property
    def eta(self) -> int:
        return len(self.dims)

    @property
    def N(self) -> int:
        return sum(self.dims)

    def block(self, k: int, l: int) -> np.ndarray:
        return self.blocks[_position(k, self.eta)][_position(l, self.eta)]

    def unitarity_defect(self) -> float:
        return unitarity_defect(self.S_tot)

    @classmethod
    def from_blocks(cls, blocks) -> "SigmaTable":
        rows = [[np.atleast_2d(np.asarray(b, dtype=complex)) for b in row] for row in blocks]
        eta = len(rows)
        dims = tuple(rows[k][k].shape[0] for k in range(eta))
        for k in range(eta):
            for l in range(eta):
                if rows[k][l].shape != (dims[k], dims[l]):
                    raise HolonomyError(
                        f"block ({k + 1},{l + 1}) has shape {rows[k][l].shape}, "
                        f"expected {(dims[k], dims[l])}"
                    )
        return cls(dims, rows, np.block(rows))

    @classmethod
    def from_matrix(cls, S, dims: Sequence[int]) -> "SigmaTable":
        S = np.asarray(S, dtype=complex)
        edges = np.concatenate([[0], np.cumsum(dims)])
        if S.shape != (edges[-1], edges[-1]):
            raise HolonomyError(f"matrix shape {S.shape} does not match dims {tuple(dims)}")
        blocks = [[S[edges[k]:edges[k + 1], edges[l]:edges[l + 1]] for l in range(len(dims))]
                  for k in range(len(dims))]
        return cls(tuple(int(d) for d in dims), blocks, S)


def build_sigma_table(c: CurveFamily, method: str = "auto",
                      unitarity_tol: float = 1e-6) -> SigmaTable:
    """Compute every ``sigma^{kl}`` of a curve and assemble ``S_tot``.

    Raises
    ------
    HolonomyError
        If ``S_tot`` deviates from unitarity by more than ``unitarity_tol``,
        which signals an under-resolved grid.
    """
    transports = [gamma_kernel_transport(c, l, method) for l in range(1, c.eta + 1)]
    blocks = [[dagger(c.frames[k][0]) @ transports[l].final_frame @ transports[l].transport
               for l in range(c.eta)] for k in range(c.eta)]
    table = SigmaTable(c.dims, blocks, np.block(blocks))
    defect = table.unitarity_defect()
    if defect > unitarity_tol:
        raise HolonomyError(
            f"S_tot is not unitary (defect {defect:.3e} > {unitarity_tol:.1e}); "
            "the grid is probably under-resolved"
        )
    return table


def _check_seq(seq: Sequence[int], eta: int) -> tuple[int, ...]:
    seq = tuple(int(x) for x in seq)
    if len(seq) < 1:
        raise ValueError("index sequence must contain at least one label")
    for x in seq:
        _position(x, eta)
    return seq


def gamma_product(t: SigmaTable, seq: Sequence[int]) -> np.ndarray:
    """``gamma^{l_1 ... l_kappa} = sigma^{l_1 l_kappa} ... sigma^{l_3 l_2} sigma^{l_2 l_1}``.

    For a single label this is ``sigma^{l l}``. The result is ``n_{l_1} x n_{l_1}``.
    """
    seq = _check_seq(seq, t.eta)
    # walk l_1 -> l_2 -> ... -> l_kappa -> l_1, each hop multiplying on the left
    acc = np.eye(t.dims[seq[0] - 1], dtype=complex)
    hops = list(zip(seq, seq[1:] + seq[:1]))
    for src, dst in hops:
        acc = t.block(dst, src) @ acc
    return acc


@dataclass
class HolonomyResult:
    """A gamma matrix together with its polar factor and rank status."""

    seq: tuple[int, ...]
    gamma: np.ndarray
    holonomy: np.ndarray
    rank: int
    singular_values: np.ndarray
    status: str

    @property
    def defined(self) -> bool:
        return self.status != "undefined"

    def to_dict(self) -> dict:
        return {
            "seq": list(self.seq),
            "gamma": complex_to_json(self.gamma),
            "holonomy": complex_to_json(self.holonomy),
            "rank": self.rank,
            "singular_values": [float(x) for x in self.singular_values],
            "status": self.status,
        }


def complex_to_json(A) -> list:
    A = np.asarray(A, dtype=complex)
    return [A.real.tolist(), A.imag.tolist()]


def complex_from_json(pair) -> np.ndarray:
    re, im = pair
    return np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)


def status_of(rank: int, dim: int) -> str:
    if rank == 0:
        return "undefined"
    return "full" if rank == dim else "partial"


def holonomy_of_order(t: SigmaTable, seq: Sequence[int],
                      tol: RankTolerance = HOLONOMY_TOL) -> HolonomyResult:
    """Holonomy ``Phi[gamma^{seq}]`` with rank and defined/partial/undefined status."""
    seq = _check_seq(seq, t.eta)
    g = gamma_product(t, seq)
    _, s, _ = svd(g)
    rank = numerical_rank(g, tol)
    bound = min(t.dims[x - 1] for x in seq)
    if rank > bound:
        raise HolonomyError(
            f"rank {rank} of gamma{seq} exceeds the smallest subspace dimension {bound}"
        )
    W = phi_map(g, tol)
    return HolonomyResult(seq, g, W, rank, s, status_of(rank, t.dims[seq[0] - 1]))


def enumerate_strict_sequences(eta: int, kappa: int) -> list[tuple[int, ...]]:
    """All sequences of ``kappa`` distinct labels from ``1..eta``."""
    if kappa < 2 or kappa > eta:
        raise ValueError(f"need 2 <= kappa <= eta, got kappa={kappa}, eta={eta}")
    return list(itertools.permutations(range(1, eta + 1), kappa))


def is_strictly_off_diagonal(seq: Sequence[int], eta: int) -> bool:
    seq = tuple(seq)
    return 2 <= len(seq) <= eta and len(set(seq)) == len(seq) and all(1 <= x <= eta for x in seq)


def all_sequences(eta: int, length: int):
    return itertools.product(range(1, eta + 1), repeat=length)


@dataclass
class RankBudget:
    """Per-subspace rank bookkeeping and trace identities of a sigma table."""

    rows: list
    traces: list

    @property
    def bounds_hold(self) -> bool:
        return all(r["column_bound_ok"] and r["row_bound_ok"] for r in self.rows)

    @property
    def max_trace_error(self) -> float:
        return max((tr["abs_error"] for tr in self.traces), default=0.0)

    def to_dict(self) -> dict:
        return {"rows": self.rows, "traces": self.traces, "bounds_hold": self.bounds_hold,
                "max_trace_error": self.max_trace_error}


def rank_budget_report(t: SigmaTable, tol: RankTolerance = HOLONOMY_TOL,
                       max_power: int = 4) -> RankBudget:
    """Rank deficiency of each ``sigma^{ll}`` against the off-diagonal rank sums.

    For each label ``l`` with ``R(sigma^{ll}) = n_l - n`` the sums
    ``sum_{k != l} R(sigma^{kl})`` and ``sum_{k != l} R(sigma^{lk})`` must
    both be at least ``n``. Also compares ``Tr(S_tot^nu)`` with the sum of
    ``Tr gamma`` over all length-``nu`` sequences.
    """
    rows = []
    for l in range(1, t.eta + 1):
        n_l = t.dims[l - 1]
        r_ll = numerical_rank(t.block(l, l), tol)
        deficiency = n_l - r_ll
        col = sum(numerical_rank(t.block(k, l), tol) for k in range(1, t.eta + 1) if k != l)
        row = sum(numerical_rank(t.block(l, k), tol) for k in range(1, t.eta + 1) if k != l)
        rows.append({
            "label": l,
            "dim": n_l,
            "diagonal_rank": r_ll,
            "deficiency": deficiency,
            "offdiagonal_column_rank_sum": col,
            "offdiagonal_row_rank_sum": row,
            "column_bound_ok": col >= deficiency,
            "row_bound_ok": row >= deficiency,
        })
    traces = []
    S_pow = np.eye(t.N, dtype=complex)
    for nu in range(1, max_power + 1):
        S_pow = S_pow @ t.S_tot
        lhs = complex(np.trace(S_pow))
        rhs = complex(sum(np.trace(gamma_product(t, seq)) for seq in all_sequences(t.eta, nu)))
        traces.append({"nu": nu, "trace_S_pow": [lhs.real, lhs.imag],
                       "sum_trace_gamma": [rhs.real, rhs.imag], "abs_error": abs(lhs - rhs)})
    return RankBudget(rows, traces)


def nonzero_existence_check(t: SigmaTable, tol: RankTolerance = HOLONOMY_TOL,
                            zero_tol: float = 1e-8) -> tuple[int, ...]:
    """Find a strictly off-diagonal sequence with nonzero gamma when all ``sigma^{ll}`` vanish.

    Raises
    ------
    HolonomyError
        If some diagonal block is not numerically zero (precondition), or if
        the exhaustive search finds nothing, which would contradict the
        unitarity of ``S_tot``.
    """
    scale = np.linalg.norm(t.S_tot, 2)
    for l in range(1, t.eta + 1):
        if np.linalg.norm(t.block(l, l), 2) >= zero_tol * scale:
            raise HolonomyError(
                f"precondition violated: diagonal block sigma^{{{l}{l}}} is nonzero"
            )
    for kappa in range(2, t.eta + 1):
        for seq in enumerate_strict_sequences(t.eta, kappa):
            if numerical_rank(gamma_product(t, seq), tol) > 0:
                return seq
    raise HolonomyError(
        "internal consistency failure: all strictly off-diagonal gamma vanish although "
        f"every diagonal block is zero (S_tot unitarity defect {t.unitarity_defect():.2e})"
    )


def cyclic_rotations(seq: Sequence[int]) -> list[tuple[int, ...]]:
    seq = tuple(seq)
    return [seq[i:] + seq[:i] for i in range(len(seq))]


def find_rank_split_rotation(t: SigmaTable, tol: RankTolerance = HOLONOMY_TOL):
    """Search for a strict sequence whose cyclic rotations have different gamma ranks.

    Returns ``(seq, ranks)`` for the first hit or ``None``.
    """
    for kappa in range(2, t.eta + 1):
        for seq in enumerate_strict_sequences(t.eta, kappa):
            if seq[0] != min(seq):
                continue
            ranks = [numerical_rank(gamma_product(t, r), tol) for r in cyclic_rotations(seq)]
            if len(set(ranks)) > 1:
                return seq, ranks
    return None


__all__ = [
    "ALIGNMENT_BOUND", "GammaKernel", "HOLONOMY_TOL", "HolonomyError", "HolonomyResult",
    "KernelError", "RankBudget", "SigmaTable", "all_sequences", "build_sigma_table",
    "complex_from_json", "complex_to_json", "cyclic_rotations", "enumerate_strict_sequences",
    "find_rank_split_rotation", "gamma_kernel_projector", "gamma_kernel_transport",
    "gamma_product", "holonomy_of_order", "is_strictly_off_diagonal",
    "nonzero_existence_check", "rank_budget_report", "sigma", "status_of",
]
