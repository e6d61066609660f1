"""Smoothly parameterized orthogonal decompositions of a finite Hilbert space.

A decomposition at a single parameter value is a tuple of column-orthonormal
frames ``F_l`` of shape ``(N, n_l)`` that together span the whole space. A
:class:`CurveFamily` samples such decompositions on a grid ``0 = s_0 < ... <
s_M = 1``; subspace positions inside a curve are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .numkernel import dagger, phi_map, polar_unitary, unitarity_defect

FRAME_ATOL = 1e-10
DEFAULT_GRID = 200
CURVE_FORMAT = "offdiag-holonomy/curve-v1"

FramesFn = Callable[[float], Sequence[np.ndarray]]


class CurveError(ValueError):
    """Invalid curve data or a curve operation that cannot be honoured."""


def projector(frame) -> np.ndarray:
    """Orthogonal projector ``F F^dagger`` onto the span of a frame."""
    F = np.asarray(frame, dtype=complex)
    if F.ndim == 1:
        F = F[:, None]
    return F @ dagger(F)


def uniform_grid(M: int = DEFAULT_GRID) -> np.ndarray:
    if M < 1:
        raise CurveError(f"grid needs at least one interval, got M={M}")
    return np.linspace(0.0, 1.0, M + 1)


def _as_grid(grid) -> np.ndarray:
    if np.isscalar(grid):
        return uniform_grid(int(grid))
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise CurveError("grid must be a 1-d array with at least two samples")
    if g[0] != 0.0 or g[-1] != 1.0:
        raise CurveError(f"grid must run from 0 to 1, got [{g[0]}, {g[-1]}]")
    if np.any(np.diff(g) <= 0):
        raise CurveError("grid must be strictly increasing")
    return g


class Decomposition:
    """Orthogonal decomposition ``H = H_1 + ... + H_eta`` given by frames."""

    def __init__(self, frames: Sequence, atol: float = FRAME_ATOL, check: bool = True):
        fs = []
        for F in frames:
            F = np.asarray(F, dtype=complex)
            if F.ndim == 1:
                F = F[:, None]
            fs.append(F)
        if not fs:
            raise CurveError("a decomposition needs at least one subspace")
        self.frames = tuple(fs)
        if check:
            self.validate(atol)

    @property
    def N(self) -> int:
        return self.frames[0].shape[0]

    @property
    def eta(self) -> int:
        return len(self.frames)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(F.shape[1] for F in self.frames)

    def projectors(self) -> list[np.ndarray]:
        return [projector(F) for F in self.frames]

    def basis(self) -> np.ndarray:
        """All frames side by side, an ``N x N`` unitary."""
        return np.hstack(self.frames)

    def validate(self, atol: float = FRAME_ATOL) -> None:
        N = self.N
        if any(F.shape[0] != N for F in self.frames):
            raise CurveError("frames do not share one ambient dimension")
        if sum(self.dims) != N:
            raise CurveError(f"subspace dimensions {self.dims} do not sum to N={N}")
        if not np.all(np.isfinite(self.basis())):
            raise CurveError("frames contain NaN/Inf entries")
        defect = unitarity_defect(self.basis())
        if defect > atol:
            raise CurveError(
                f"frames are not orthonormal / mutually orthogonal (defect {defect:.2e})"
            )


@dataclass(frozen=True)
class GaugeTransform:
    """Per-subspace, per-sample unitaries ``U_l(s_j)``.

    ``blocks[l]`` has shape ``(len(grid), n_l, n_l)``.
    """

    blocks: tuple

    def __post_init__(self):
        for l, B in enumerate(self.blocks):
            B = np.asarray(B)
            if B.ndim != 3 or B.shape[1] != B.shape[2]:
                raise CurveError(f"gauge block {l} must have shape (K, n, n)")
            worst = max(unitarity_defect(U) for U in B)
            if worst > FRAME_ATOL:
                raise CurveError(f"gauge block {l} is not unitary (defect {worst:.2e})")

    @classmethod
    def from_function(cls, fn: Callable[[float], Sequence[np.ndarray]], grid) -> "GaugeTransform":
        g = _as_grid(grid)
        per_sample = [list(fn(s)) for s in g]
        eta = len(per_sample[0])
        return cls(tuple(np.array([np.asarray(u[l], dtype=complex) for u in per_sample])
                         for l in range(eta)))

    @classmethod
    def identity(cls, dims: Sequence[int], n_samples: int) -> "GaugeTransform":
        return cls(tuple(np.broadcast_to(np.eye(n, dtype=complex), (n_samples, n, n)).copy()
                         for n in dims))


class CurveFamily:
    """A sampled curve of decompositions ``s -> {H_l(s)}``.

    Parameters
    ----------
    grid : ndarray, shape (K,)
    frames : sequence of ndarray
        ``frames[l]`` has shape ``(K, N, n_l)``.
    provenance : {"explicit", "generator", "eigen", "schrodinger"}
    frames_fn, derivative_fn : callable, optional
        Continuous generator of the frames and of their ``s``-derivatives.
        Only generator-backed curves can be refined; the derivative enables
        the higher-order transport integrator.
    rebuild : callable, optional
        ``grid -> CurveFamily`` used by :func:`refine`.
    energies : ndarray, shape (K, eta), optional
        Eigenvalues ``E_l(s_j)`` when the curve came from a Hamiltonian.
    """

    def __init__(self, grid, frames, provenance="explicit", frames_fn=None,
                 derivative_fn=None, rebuild=None, energies=None, atol=FRAME_ATOL):
        self.grid = _as_grid(grid)
        self.frames = tuple(np.asarray(F, dtype=complex) for F in frames)
        self.provenance = provenance
        self.frames_fn = frames_fn
        self.derivative_fn = derivative_fn
        self._rebuild = rebuild
        self.energies = None if energies is None else np.asarray(energies, dtype=float)
        K = self.grid.size
        for l, F in enumerate(self.frames):
            if F.ndim != 3 or F.shape[0] != K:
                raise CurveError(f"frames[{l}] must have shape ({K}, N, n_l), got {F.shape}")
        for j in range(K):
            try:
                self.decomposition_at(j).validate(atol)
            except CurveError as exc:
                raise CurveError(f"sample {j} (s={self.grid[j]:.6g}): {exc}") from None
        self.smoothness = self._smoothness_constant()
        for arr in self.frames:
            arr.setflags(write=False)
        self.grid.setflags(write=False)

    # construction helpers -------------------------------------------------

    @classmethod
    def from_samples(cls, grid, samples) -> "CurveFamily":
        """Build from ``samples[j][l]``, the frame of subspace ``l`` at ``grid[j]``."""
        g = _as_grid(grid)
        if len(samples) != g.size:
            raise CurveError(f"got {len(samples)} samples for a grid of {g.size} points")
        eta = len(samples[0])
        frames = [np.array([np.asarray(smp[l], dtype=complex).reshape(len(smp[l]), -1)
                            for smp in samples]) for l in range(eta)]
        return cls(g, frames, provenance="explicit")

    @classmethod
    def from_generator(cls, frames_fn: FramesFn, grid=DEFAULT_GRID,
                       derivative_fn: FramesFn | None = None, energies_fn=None) -> "CurveFamily":
        """Sample a continuous frame generator on a grid."""
        g = _as_grid(grid)
        per_sample = [[np.asarray(F, dtype=complex) for F in frames_fn(s)] for s in g]
        eta = len(per_sample[0])
        frames = [np.array([smp[l] for smp in per_sample]) for l in range(eta)]
        energies = None if energies_fn is None else np.array([energies_fn(s) for s in g])

        def rebuild(new_grid):
            return cls.from_generator(frames_fn, new_grid, derivative_fn, energies_fn)

        return cls(g, frames, provenance="generator", frames_fn=frames_fn,
                   derivative_fn=derivative_fn, rebuild=rebuild, energies=energies)

    # queries ---------------------------------------------------------------

    @property
    def N(self) -> int:
        return self.frames[0].shape[1]

    @property
    def eta(self) -> int:
        return len(self.frames)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(F.shape[2] for F in self.frames)

    @property
    def M(self) -> int:
        return self.grid.size - 1

    @property
    def refinable(self) -> bool:
        return self._rebuild is not None

    def decomposition_at(self, j: int) -> Decomposition:
        return Decomposition([F[j] for F in self.frames], check=False)

    def frame(self, l: int, j: int) -> np.ndarray:
        return self.frames[l][j]

    def projector(self, l: int, j: int) -> np.ndarray:
        return projector(self.frames[l][j])

    def rebuild_on(self, grid) -> "CurveFamily":
        if self._rebuild is None:
            raise CurveError(
                "curve was built from explicit samples and cannot be resampled"
            )
        return self._rebuild(_as_grid(grid))

    def as_samples(self) -> "CurveFamily":
        """Same samples, with generator information dropped."""
        return CurveFamily(self.grid, self.frames, provenance="explicit")

    def is_cyclic(self, atol: float = 1e-10) -> bool:
        return all(np.max(np.abs(self.projector(l, -1) - self.projector(l, 0))) <= atol
                   for l in range(self.eta))

    def _smoothness_constant(self) -> float:
        if self.grid.size < 2:
            return 0.0
        ds = np.diff(self.grid)
        C = 0.0
        for F in self.frames:
            P = F @ np.conj(np.swapaxes(F, 1, 2))
            jumps = np.linalg.norm(P[1:] - P[:-1], ord=2, axis=(1, 2))
            C = max(C, float(np.max(jumps / ds)))
        return C

    def __repr__(self):
        return (f"CurveFamily(N={self.N}, dims={self.dims}, M={self.M}, "
                f"provenance={self.provenance!r})")


def apply_gauge(c: CurveFamily, g: GaugeTransform) -> CurveFamily:
    """Replace every frame ``F_l(s_j)`` by ``F_l(s_j) U_l(s_j)``.

    The result carries explicit samples only; projectors are unchanged.
    """
    if len(g.blocks) != c.eta:
        raise CurveError(f"gauge has {len(g.blocks)} blocks, curve has {c.eta} subspaces")
    frames = []
    for l, (F, U) in enumerate(zip(c.frames, g.blocks)):
        U = np.asarray(U)
        if U.shape != (c.grid.size, F.shape[2], F.shape[2]):
            raise CurveError(
                f"gauge block {l} has shape {U.shape}, expected "
                f"{(c.grid.size, F.shape[2], F.shape[2])}"
            )
        frames.append(F @ U)
    return CurveFamily(c.grid, frames, provenance="explicit")


def refine(c: CurveFamily, factor: int) -> CurveFamily:
    """Resample a generator-backed curve with ``factor`` times as many intervals."""
    if factor < 1:
        raise CurveError(f"refinement factor must be >= 1, got {factor}")
    if not c.refinable:
        raise CurveError("refinement requires a generator-backed curve")
    if factor == 1:
        return c
    fine = [np.linspace(a, b, factor + 1)[:-1] for a, b in zip(c.grid[:-1], c.grid[1:])]
    grid = np.concatenate(fine + [[1.0]])
    return c.rebuild_on(grid)


# eigenspace curves -----------------------------------------------------------


def _clusters(evals: np.ndarray, rel_tol: float, scale: float) -> list[list[int]]:
    """Group ascending eigenvalues whose neighbours lie within ``rel_tol * scale``."""
    groups = [[0]]
    for i in range(1, evals.size):
        if evals[i] - evals[i - 1] <= rel_tol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def eigen_decomposition(H, cluster_tol: float = 1e-8):
    """Eigenspace clusters of a Hermitian matrix, ordered by ascending energy.

    Returns ``(frames, energies, separation)`` where ``separation`` is the
    ratio of the smallest inter-cluster gap to the widest cluster spread.
    """
    H = np.asarray(H, dtype=complex)
    if np.max(np.abs(H - dagger(H))) > 1e-12 * max(1.0, np.max(np.abs(H))):
        raise CurveError("Hamiltonian is not Hermitian")
    evals, evecs = np.linalg.eigh(H)
    scale = max(float(np.max(np.abs(evals))), 1e-300)
    groups = _clusters(evals, cluster_tol, scale)
    frames = [evecs[:, g] for g in groups]
    energies = [float(np.mean(evals[g])) for g in groups]
    width = max(float(evals[g[-1]] - evals[g[0]]) for g in groups)
    if len(groups) > 1:
        gap = min(float(evals[b[0]] - evals[a[-1]]) for a, b in zip(groups[:-1], groups[1:]))
    else:
        gap = np.inf
    separation = np.inf if width == 0.0 else gap / width
    return frames, energies, separation


def from_hamiltonian_path(H_at: Callable[[float], np.ndarray], grid=DEFAULT_GRID,
                          cluster_tol: float = 1e-8) -> CurveFamily:
    """Curve of instantaneous eigenspace clusters of ``H(s)``.

    Clusters are ordered by ascending energy. Frames of neighbouring samples
    are aligned with the polar factor of their overlap, which puts the frames
    in the parallel-transport gauge along the grid.

    Raises
    ------
    CurveError
        If the cluster structure changes along the grid (a level crossing)
        or the clusters are not well separated.
    """
    g = _as_grid(grid)
    frames_per_l = None
    energies = []
    dims0 = None
    prev = None
    for j, s in enumerate(g):
        frames, E, separation = eigen_decomposition(H_at(s), cluster_tol)
        dims = tuple(F.shape[1] for F in frames)
        if dims0 is None:
            dims0 = dims
            frames_per_l = [[] for _ in dims]
        elif dims != dims0:
            raise CurveError(
                f"eigenvalue cluster dimensions change from {dims0} to {dims} "
                f"at sample {j} (s={s:.6g}); level crossing along the path"
            )
        if separation < 10.0:
            raise CurveError(
                f"eigenvalue clusters not well separated at sample {j} (s={s:.6g}): "
                f"gap/width = {separation:.3g}"
            )
        if prev is not None:
            aligned = []
            for F, Fp in zip(frames, prev):
                O = dagger(F) @ Fp
                W = phi_map(O)
                if W.shape[0] and np.linalg.matrix_rank(W) < W.shape[0]:
                    raise CurveError(
                        f"eigenframe overlap is singular between samples {j - 1} and {j}; "
                        "grid too coarse"
                    )
                aligned.append(polar_unitary(F @ W))
            frames = aligned
        for l, F in enumerate(frames):
            frames_per_l[l].append(F)
        energies.append(E)
        prev = frames

    def rebuild(new_grid):
        return from_hamiltonian_path(H_at, new_grid, cluster_tol)

    return CurveFamily(g, [np.array(f) for f in frames_per_l], provenance="eigen",
                       rebuild=rebuild, energies=np.array(energies))


# JSON interchange ------------------------------------------------------------


def curve_to_json(c: CurveFamily) -> dict:
    """Serialize a curve.

    Layout::

        {"format": "offdiag-holonomy/curve-v1", "N": N, "eta": eta,
         "dims": [n_1, ...], "grid": [s_0, ..., s_M],
         "frames": [[[re, im] for each subspace] for each grid sample]}

    where ``re`` and ``im`` are ``N x n_l`` nested lists (row-major).
    """
    return {
        "format": CURVE_FORMAT,
        "N": c.N,
        "eta": c.eta,
        "dims": list(c.dims),
        "grid": [float(s) for s in c.grid],
        "frames": [[[c.frames[l][j].real.tolist(), c.frames[l][j].imag.tolist()]
                    for l in range(c.eta)] for j in range(c.grid.size)],
    }


def curve_from_json(doc: dict) -> CurveFamily:
    if doc.get("format", CURVE_FORMAT) != CURVE_FORMAT:
        raise CurveError(f"unsupported curve format {doc.get('format')!r}")
    for key in ("N", "eta", "dims", "grid", "frames"):
        if key not in doc:
            raise CurveError(f"curve document is missing {key!r}")
    samples = [[np.array(re) + 1j * np.array(im) for re, im in sample] for sample in doc["frames"]]
    c = CurveFamily.from_samples(doc["grid"], samples)
    if c.N != doc["N"] or c.eta != doc["eta"] or list(c.dims) != list(doc["dims"]):
        raise CurveError("curve header (N, eta, dims) disagrees with the frame data")
    return c


def save_curve(c: CurveFamily, path) -> None:
    Path(path).write_text(json.dumps(curve_to_json(c)), encoding="utf-8")


def load_curve(path) -> CurveFamily:
    return curve_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
