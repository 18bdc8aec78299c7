"""Adiabatic potential surfaces of H_int.

Frames hold eigenpairs at one position. A :class:`SurfaceScan` holds frames
over a 1D path or a 2D grid in the phi = 0 half-plane; after
:func:`track_surfaces` column ``k`` of every frame belongs to the same
physical surface ``k`` (surfaces are numbered by energy order at the seed
point), and after :func:`fix_phases_parallel_transport` the eigenvectors
are real with signs propagated from a reference point.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .errors import AmbiguityError, DegeneracyError, DetectionError, EigensolverError
from .model import N_STATES, ModelParams, Position, build_basis, hint

AMBIGUITY_TOL = 1e-3
SIGN_TOL = 1e-3


@dataclass
class AdiabaticFrame:
    """Eigenpairs of H_int at one position, energies ascending.

    ``labels[c]`` is the surface label of column ``c``; for a fresh
    diagonalisation it is simply ``c``. :meth:`labelled` returns the arrays
    reordered so that index ``k`` is surface ``k``.
    """

    position: Position
    energies: NDArray[np.float64]
    vectors: NDArray
    labels: NDArray[np.int64] = field(default_factory=lambda: np.arange(N_STATES))

    @classmethod
    def from_labelled(cls, position: Position, energies: NDArray, vectors: NDArray) -> AdiabaticFrame:
        order = np.argsort(energies, kind="stable")
        return cls(position, energies[order], vectors[:, order], order)

    def labelled(self) -> tuple[NDArray[np.float64], NDArray]:
        inv = np.empty_like(self.labels)
        inv[self.labels] = np.arange(len(self.labels))
        return self.energies[inv], self.vectors[:, inv]

    def column(self, label: int) -> int:
        return int(np.flatnonzero(self.labels == label)[0])

    def energy(self, label: int) -> float:
        return float(self.energies[self.column(label)])

    def vector(self, label: int) -> NDArray:
        return self.vectors[:, self.column(label)]

    def residuals(self, params: ModelParams) -> NDArray[np.float64]:
        H = hint(self.position, params)
        return np.linalg.norm(H @ self.vectors - self.vectors * self.energies, axis=0)


def _cartesian(cyl: NDArray) -> NDArray:
    rho, z, phi = cyl[..., 0], cyl[..., 1], cyl[..., 2]
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)


def _normalise_phases(vectors: NDArray, M: NDArray, phi: NDArray) -> NDArray:
    """Fix the gauge freedom of each eigenvector deterministically.

    The largest component ``k`` of each column is given the phase
    exp(-i M_k phi), i.e. the frame equals the rotation of a real frame whose
    largest components are positive.
    """
    idx = np.argmax(np.abs(vectors), axis=-2)
    big = np.take_along_axis(vectors, idx[..., None, :], axis=-2)
    target = np.exp(-1j * M[idx] * np.asarray(phi)[..., None])
    factor = target * np.conj(big[..., 0, :]) / np.abs(big[..., 0, :])
    return vectors * factor[..., None, :]


def _diagonalise(cyl: NDArray, params: ModelParams) -> tuple[NDArray, NDArray]:
    """Batched eigensolve at cylindrical positions (..., 3)."""
    cart = _cartesian(cyl)
    H = hint(cart, params)
    real = bool(np.all(cyl[..., 2] == 0.0)) or float(np.max(np.abs(H.imag), initial=0.0)) < 1e-14
    try:
        if real:
            # phi = 0 (or pi): H_int is real symmetric
            w, v = np.linalg.eigh(H.real)
            idx = np.argmax(np.abs(v), axis=-2)
            big = np.take_along_axis(v, idx[..., None, :], axis=-2)
            v = v * np.sign(big)
        else:
            w, v = np.linalg.eigh(H)
            v = _normalise_phases(v, build_basis().M, cyl[..., 2])
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(cyl.tolist() if cyl.ndim == 1 else "batch", exc) from exc
    return w, v


def eigensystem_at(pos: Position, params: ModelParams) -> AdiabaticFrame:
    """Full spectral decomposition at one position, energies ascending.

    At phi = 0 the real-symmetric solver is used and the eigenvectors are real.
    """
    cyl = np.array([pos.rho, pos.z, pos.phi])
    try:
        w, v = _diagonalise(cyl, params)
    except EigensolverError as exc:
        raise EigensolverError(pos, exc) from exc
    return AdiabaticFrame(pos, w, v)


def rotate_state(frame: AdiabaticFrame, phi: float) -> AdiabaticFrame:
    """Apply exp(-i J_z phi) to every eigenvector of a phi = 0 frame."""
    if frame.position.phi != 0.0:
        raise ValueError("rotate_state expects a frame at phi = 0")
    phase = np.exp(-1j * build_basis().M * phi)
    return AdiabaticFrame(
        frame.position.at_phi(phi), frame.energies.copy(), phase[:, None] * frame.vectors, frame.labels.copy()
    )


@dataclass
class SurfaceScan:
    """Adiabatic frames over a 1D path or 2D grid of positions.

    ``positions`` has shape ``grid + (3,)`` holding (rho, z, phi).
    ``energies``/``vectors`` have shapes ``grid + (16,)`` and
    ``grid + (16, 16)``; the last axis of ``vectors`` (and of ``energies``)
    indexes columns, which are surface labels once ``tracked`` is set.
    """

    positions: NDArray[np.float64]
    energies: NDArray[np.float64]
    vectors: NDArray
    params: ModelParams
    grid: dict = field(default_factory=dict)
    tracked: bool = False
    seed: tuple[int, ...] | None = None
    reference: tuple[int, ...] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.positions.shape[:-1]

    @property
    def rho(self) -> NDArray[np.float64]:
        return self.positions[..., 0]

    @property
    def z(self) -> NDArray[np.float64]:
        return self.positions[..., 1]

    @property
    def phase_fixed(self) -> bool:
        return self.reference is not None

    def frame(self, index) -> AdiabaticFrame:
        index = _as_index(index)
        rho, z, phi = self.positions[index]
        pos = Position(float(rho), float(z), float(phi))
        return AdiabaticFrame.from_labelled(pos, self.energies[index], self.vectors[index])

    def surface(self, label: int) -> NDArray[np.float64]:
        """Energy of one labelled surface over the whole grid."""
        return self.energies[..., label]

    def ranks(self) -> NDArray[np.int64]:
        """Energy rank of each label at each grid point."""
        return np.argsort(np.argsort(self.energies, axis=-1, kind="stable"), axis=-1, kind="stable")

    def nearest_index(self, rho: float, z: float = 0.0) -> tuple[int, ...]:
        d = (self.positions[..., 0] - rho) ** 2 + (self.positions[..., 1] - z) ** 2
        return tuple(int(i) for i in np.unravel_index(np.argmin(d), self.shape))

    def expectation(self, operator: NDArray) -> NDArray[np.float64]:
        """<psi_k|O|psi_k> for every grid point and label."""
        v = self.vectors
        return np.real(np.einsum("...ik,ij,...jk->...k", v.conj(), operator, v))


def _as_index(index) -> tuple[int, ...]:
    if isinstance(index, (int, np.integer)):
        return (int(index),)
    return tuple(int(i) for i in index)


def _chunks(n: int, parts: int) -> list[slice]:
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def diagonalise_positions(cyl: NDArray, params: ModelParams, threads: int = 1) -> tuple[NDArray, NDArray]:
    """Eigenpairs at an arbitrary array of cylindrical positions, split over threads."""
    shape = cyl.shape[:-1]
    flat = cyl.reshape(-1, 3)
    if threads <= 1 or len(flat) < 256:
        w, v = _diagonalise(flat, params)
    else:
        # rows of one phi-value class only, so each chunk takes the same solver path
        slices = _chunks(len(flat), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: _diagonalise(flat[s], params), slices))
        w = np.concatenate([p[0] for p in parts])
        v = np.concatenate([p[1] for p in parts])
    return w.reshape(shape + (N_STATES,)), v.reshape(shape + (N_STATES, N_STATES))


def scan_positions(cyl: NDArray, params: ModelParams, grid: dict | None = None, threads: int = 1) -> SurfaceScan:
    cyl = np.asarray(cyl, dtype=float)
    if np.any(np.hypot(cyl[..., 0], cyl[..., 1]) == 0):
        raise ValueError("scan contains R = 0")
    w, v = diagonalise_positions(cyl, params, threads)
    return SurfaceScan(cyl, w, v, params, dict(grid or {}))


def radial_scan(
    params: ModelParams,
    rho: tuple[float, float] = (0.7, 6.0),
    n: int = 4000,
    z: float = 0.0,
    threads: int = 1,
) -> SurfaceScan:
    """Untracked scan along rho at fixed z in the phi = 0 half-plane."""
    r = np.linspace(rho[0], rho[1], n)
    cyl = np.stack([r, np.full_like(r, z), np.zeros_like(r)], axis=-1)
    return scan_positions(cyl, params, {"kind": "radial", "rho": list(rho), "n": n, "z": z}, threads)


def plane_scan(
    params: ModelParams,
    rho: NDArray[np.float64],
    z: NDArray[np.float64],
    threads: int = 1,
) -> SurfaceScan:
    """Untracked 2D scan on a (rho, z) grid in the phi = 0 half-plane; axis 0 is rho."""
    rr, zz = np.meshgrid(np.asarray(rho, float), np.asarray(z, float), indexing="ij")
    cyl = np.stack([rr, zz, np.zeros_like(rr)], axis=-1)
    return scan_positions(cyl, params, {"kind": "plane", "rho": [float(rho[0]), float(rho[-1]), len(rho)],
                                        "z": [float(z[0]), float(z[-1]), len(z)]}, threads)


def _traversal(shape: tuple[int, ...], seed: tuple[int, ...]) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """(child, parent) pairs of a spanning tree rooted at ``seed``.

    1D: outward from the seed in both directions. 2D: along the seed's row
    (axis 0), then outward along axis 1 from every point of that row.
    """
    edges = []
    if len(shape) == 1:
        (s,) = seed
        edges += [((i,), (i - 1,)) for i in range(s + 1, shape[0])]
        edges += [((i,), (i + 1,)) for i in range(s - 1, -1, -1)]
        return edges
    if len(shape) != 2:
        raise ValueError("scans must be 1D or 2D")
    s0, s1 = seed
    row = [(i, s1) for i in range(shape[0])]
    edges += [((i, s1), (i - 1, s1)) for i in range(s0 + 1, shape[0])]
    edges += [((i, s1), (i + 1, s1)) for i in range(s0 - 1, -1, -1)]
    for i, _ in row:
        edges += [((i, j), (i, j - 1)) for j in range(s1 + 1, shape[1])]
        edges += [((i, j), (i, j + 1)) for j in range(s1 - 1, -1, -1)]
    return edges


def match_columns(reference: NDArray, candidates: NDArray, where=None) -> NDArray[np.int64]:
    """For each reference column, the candidate column it continues into.

    Assignment maximises the summed |overlap|; raises :class:`AmbiguityError`
    if any reference state has two candidates within ``AMBIGUITY_TOL``.
    """
    O = np.abs(reference.conj().T @ candidates)
    rows, cols = linear_sum_assignment(-O)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    top2 = -np.partition(-O, 1, axis=1)[:, :2]
    bad = np.where(top2[:, 0] - top2[:, 1] < AMBIGUITY_TOL)[0]
    if bad.size:
        raise AmbiguityError(
            f"cannot resolve surface {int(bad[0])} at {where}: overlaps {top2[bad[0]].round(6).tolist()}", where
        )
    return perm


def track_surfaces(scan: SurfaceScan, seed: tuple[int, ...] | int | None = None) -> SurfaceScan:
    """Relabel columns so that each follows one continuous surface.

    Labels are the energy ranks at ``seed`` (default: the first grid point,
    which for the default radial scans is the interior end away from the
    degenerate asymptote). Successive grid points are linked by maximal
    |overlap|, so true crossings keep their identity and energy-order swaps
    are allowed.
    """
    seed = (0,) * len(scan.shape) if seed is None else _as_index(seed)
    energies = scan.energies.copy()
    vectors = scan.vectors.copy()
    for child, parent in _traversal(scan.shape, seed):
        perm = match_columns(vectors[parent], vectors[child], where=tuple(scan.positions[child].round(9)))
        energies[child] = energies[child][perm]
        vectors[child] = vectors[child][:, perm]
    return replace(scan, energies=energies, vectors=vectors, tracked=True, seed=seed, reference=None)


def fix_phases_parallel_transport(scan: SurfaceScan, reference: Position | tuple[int, ...] | int) -> SurfaceScan:
    """Make every eigenvector real with signs parallel-transported from ``reference``.

    At the reference the largest component of each state is positive; along
    the scan tree each state's sign is chosen so that its overlap with the
    same surface at the parent point is positive. Raises
    :class:`DegeneracyError` where that overlap is below ``SIGN_TOL``.
    """
    if not scan.tracked:
        raise ValueError("track_surfaces must run before phase fixing")
    if np.any(scan.positions[..., 2] != 0.0):
        raise ValueError("parallel-transport phase fixing is defined in the phi = 0 half-plane")
    if isinstance(reference, Position):
        idx = scan.nearest_index(reference.rho, reference.z)
        if math.hypot(scan.rho[idx] - reference.rho, scan.z[idx] - reference.z) > 1e-9:
            raise ValueError(f"reference {reference} is not a grid point of the scan")
        reference = idx
    reference = _as_index(reference)
    vectors = scan.vectors
    if np.iscomplexobj(vectors):
        if np.max(np.abs(vectors.imag)) > 1e-10:
            raise ValueError("phi = 0 eigenvectors are expected to be real")
        vectors = vectors.real
    vectors = vectors.copy()
    ref = vectors[reference]
    big = ref[np.argmax(np.abs(ref), axis=0), np.arange(N_STATES)]
    vectors[reference] = ref * np.sign(big)
    for child, parent in _traversal(scan.shape, reference):
        dots = np.einsum("ik,ik->k", vectors[parent], vectors[child])
        small = np.where(np.abs(dots) < SIGN_TOL)[0]
        if small.size:
            raise DegeneracyError(
                f"sign of surface {int(small[0])} ambiguous at {tuple(scan.positions[child].round(9))}",
                gap=None, where=tuple(scan.positions[child]),
            )
        vectors[child] = vectors[child] * np.sign(dots)
    return replace(scan, vectors=vectors, reference=reference)


def discrete_connection(scan: SurfaceScan, axis: int = 0) -> NDArray[np.float64]:
    """Diagonal connection i<psi_k|d psi_k> on the links of a scan along ``axis``.

    Evaluated as -arg<psi_k(i)|psi_k(i+1)>/h (the link variable), in hbar/R0.
    Shape: grid with ``axis`` shortened by one, plus the label axis.
    """
    v = np.moveaxis(scan.vectors, axis, 0)
    coord = np.moveaxis(scan.positions[..., 0 if axis == 0 else 1], axis, 0)
    h = np.diff(coord, axis=0)
    overlap = np.einsum("...ik,...ik->...k", v[:-1].conj(), v[1:])
    out = -np.angle(overlap) / h[..., None]
    return np.moveaxis(out, 0, axis)


def prepare_radial_scan(
    params: ModelParams,
    rho: tuple[float, float] = (0.7, 6.0),
    n: int = 4000,
    threads: int = 1,
) -> tuple[SurfaceScan, WellDescriptor]:
    """Radial x-y scan, tracked from the inner end and phase fixed at the well minimum."""
    scan = track_surfaces(radial_scan(params, rho, n, threads=threads))
    well = find_well_state(scan)
    scan = fix_phases_parallel_transport(scan, scan.nearest_index(well.rho_min))
    return scan, well


@dataclass(frozen=True)
class WellDescriptor:
    """Location and depth of the donut well on one tracked surface.

    ``depth`` is the asymptote minus the minimum. For nearly symmetric Stark
    shifts the well is metastable (its bottom lies above the -1 asymptote,
    held by the barrier of the avoided crossing) and ``depth`` is negative;
    ``barrier - energy_min`` is then the local trap depth.
    """

    surface_label: int
    rho_min: float
    energy_min: float
    depth: float
    asymptote: float
    barrier: float | None = None
    rho_barrier: float | None = None


def _local_minima(curve: NDArray) -> NDArray[np.int64]:
    inner = (curve[1:-1] < curve[:-2]) & (curve[1:-1] <= curve[2:])
    return np.where(inner)[0] + 1


def _parabolic_vertex(x: NDArray, y: NDArray, i: int) -> tuple[float, float]:
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    c = y1 - a * x1**2 - b * x1
    xv = -b / (2 * a)
    return float(xv), float(c - b * b / (4 * a))


def find_well_state(
    scan: SurfaceScan,
    asymptote: float | None = -1.0,
    asymptote_tol: float = 0.05,
    rho_window: tuple[float, float] = (0.7, 2.0),
) -> WellDescriptor:
    """Identify the donut-well surface on a tracked radial scan at z = 0.

    Candidates have an interior local minimum with rho in ``rho_window`` and,
    unless ``asymptote`` is None, end within ``asymptote_tol`` of
    ``asymptote`` at the outer edge of the scan. The candidate with the
    lowest minimum wins.
    """
    if not scan.tracked or len(scan.shape) != 1:
        raise ValueError("find_well_state needs a tracked 1D radial scan")
    rho = scan.rho
    if rho[0] > 0.7 + 1e-9 or rho[-1] < 5.0:
        raise ValueError("radial scan must cover at least [0.7, 5] R0")
    best = None
    for k in range(N_STATES):
        curve = scan.energies[:, k]
        if asymptote is not None and abs(curve[-1] - asymptote) > asymptote_tol:
            continue
        for i in _local_minima(curve):
            if not (rho_window[0] <= rho[i] <= rho_window[1]):
                continue
            if best is None or curve[i] < best[2]:
                best = (k, int(i), float(curve[i]))
    if best is None:
        raise DetectionError(
            f"no surface with a minimum in {rho_window} R0"
            + ("" if asymptote is None else f" and asymptote {asymptote}")
        )
    k, i, _ = best
    curve = scan.energies[:, k]
    rho_min, e_min = _parabolic_vertex(rho, curve, i)
    barrier = rho_barrier = None
    maxima = [j for j in _local_minima(-curve) if j > i]
    if maxima:
        j = maxima[0]
        rho_barrier, neg = _parabolic_vertex(rho, -curve, j)
        barrier = -neg
    asym = float(curve[-1]) if asymptote is None else float(asymptote)
    return WellDescriptor(k, rho_min, e_min, asym - e_min, asym, barrier, rho_barrier)


def frame_at(pos: Position, params: ModelParams, scan: SurfaceScan) -> AdiabaticFrame:
    """Eigenframe at an arbitrary position, labelled and phased like ``scan``.

    The phi = 0 frame at (rho, z) is matched column-by-column to the nearest
    scan point (by |overlap|), signs are aligned with it, and the result is
    rotated to ``pos.phi``.
    """
    if not scan.tracked:
        raise ValueError("frame_at needs a tracked scan")
    base = eigensystem_at(Position(pos.rho, pos.z, 0.0), params)
    ref = scan.vectors[scan.nearest_index(pos.rho, pos.z)]
    perm = match_columns(ref, base.vectors, where=(pos.rho, pos.z))
    v = base.vectors[:, perm]
    e = base.energies[perm]
    if scan.phase_fixed:
        dots = np.einsum("ik,ik->k", ref.real, v)
        v = v * np.sign(dots)
    frame = AdiabaticFrame.from_labelled(Position(pos.rho, pos.z, 0.0), e, v)
    return rotate_state(frame, pos.phi) if pos.phi != 0.0 else frame


def surface_energy(rho: float, label: int, params: ModelParams, scan: SurfaceScan, z: float = 0.0) -> float:
    return frame_at(Position(rho, z), params, scan).energy(label)


def follow_state(params: ModelParams, path: NDArray, start: NDArray) -> tuple[NDArray, NDArray]:
    """Follow one eigenstate along a path of phi = 0 cylindrical positions (n, 3).

    Only the followed state is checked for ambiguity, so the path may enter
    regions where other surfaces are degenerate. Returns (energies, vectors).
    """
    w, v = diagonalise_positions(np.asarray(path, float), params)
    ref = np.asarray(start).real
    energies = np.empty(len(w))
    vectors = np.empty((len(w), N_STATES))
    for i in range(len(w)):
        o = ref @ v[i]
        a = np.abs(o)
        top2 = -np.partition(-a, 1)[:2]
        if top2[0] - top2[1] < AMBIGUITY_TOL:
            raise AmbiguityError(f"followed state ambiguous at {tuple(np.round(path[i], 9))}", tuple(path[i]))
        c = int(np.argmax(a))
        ref = v[i][:, c] * np.sign(o[c])
        energies[i], vectors[i] = w[i][c], ref
    return energies, vectors


def far_field_energy(
    params: ModelParams, scan: SurfaceScan, label: int, R: float = 50.0, n: int = 4000
) -> float:
    """Energy of a tracked x-y plane surface continued outward to radius ``R``."""
    start_rho = float(scan.rho[-1])
    if R <= start_rho:
        return surface_energy(R, label, params, scan)
    r = np.geomspace(start_rho, R, n)
    path = np.stack([r, np.zeros(n), np.zeros(n)], axis=-1)
    e, _ = follow_state(params, path, scan.vectors[-1][:, label])
    return float(e[-1])


def refine_well_minimum(well: WellDescriptor, params: ModelParams, scan: SurfaceScan) -> WellDescriptor:
    """Polish ``rho_min`` with a bounded scalar minimisation of the labelled surface."""
    h = float(np.max(np.diff(scan.rho)))
    res = minimize_scalar(
        lambda r: surface_energy(r, well.surface_label, params, scan),
        bounds=(well.rho_min - 3 * h, well.rho_min + 3 * h),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return replace(well, rho_min=float(res.x), energy_min=float(res.fun), depth=well.asymptote - float(res.fun))


def avoided_crossing_partner(scan: SurfaceScan, label: int, rho: float) -> int:
    """Surface most strongly coupled to ``label`` by radial motion at ``rho``.

    The coupling measure is |<psi_label|dH/drho|psi_k>| / |e_k - e_label|,
    the magnitude of the off-diagonal radial connection.
    """
    from .model import grad_hint

    i = scan.nearest_index(rho)
    e, v = scan.energies[i], scan.vectors[i]
    dH = grad_hint(scan.frame(i).position)[0]
    coupling = np.abs(v[:, label].conj() @ dH @ v)
    gap = np.abs(e - e[label])
    gap[label] = np.inf
    return int(np.argmax(coupling / gap))


def crossing_partner(scan: SurfaceScan, label: int, rho_window: tuple[float, float]) -> tuple[int, float]:
    """A surface that truly crosses ``label`` inside ``rho_window``; returns (label, rho).

    Among crossing surfaces the one whose minimum lies lowest is preferred.
    """
    rho = scan.rho
    mask = (rho >= rho_window[0]) & (rho <= rho_window[1])
    found = []
    for k in range(N_STATES):
        if k == label:
            continue
        d = scan.energies[mask, k] - scan.energies[mask, label]
        flips = np.where(np.sign(d[1:]) != np.sign(d[:-1]))[0]
        if flips.size:
            j = flips[0]
            r = rho[mask][j] - d[j] * (rho[mask][j + 1] - rho[mask][j]) / (d[j + 1] - d[j])
            found.append((float(scan.energies[:, k].min()), k, float(r)))
    if not found:
        raise DetectionError(f"no surface crosses {label} in {rho_window}")
    _, k, r = min(found)
    return k, r


# ---------------------------------------------------------------- 2D maps


@dataclass
class PotentialMap:
    """Well-state energy on a Cartesian grid; ``energy[i, j]`` at (axis0[j], axis1[i])."""

    plane: str
    axis0: NDArray[np.float64]
    axis1: NDArray[np.float64]
    energy: NDArray[np.float64]
    surface_label: int

    def rows(self):
        for i, b in enumerate(self.axis1):
            for j, a in enumerate(self.axis0):
                yield float(a), float(b), float(self.energy[i, j])


def _track_polar(
    params: ModelParams,
    radii: NDArray,
    thetas: NDArray,
    start: NDArray,
    threads: int = 1,
) -> tuple[NDArray, NDArray]:
    """Follow one surface along the polar angle in the x-z plane for many radii.

    ``thetas`` must start at 0 and be monotone; ``start`` holds the theta = 0
    eigenvectors (len(radii), 16). Returns energies (n_theta, n_r) and vectors
    (n_theta, n_r, 16).
    """
    n_r = len(radii)
    energies = np.empty((len(thetas), n_r))
    vecs = np.empty((len(thetas), n_r, N_STATES))
    ref = start.real.copy()
    for t, th in enumerate(thetas):
        cyl = np.stack([radii * math.cos(th), radii * math.sin(th), np.zeros(n_r)], axis=-1)
        w, v = diagonalise_positions(cyl, params, threads)
        O = np.einsum("ri,rik->rk", ref, v)
        A = np.abs(O)
        top2 = -np.partition(-A, 1, axis=1)[:, :2]
        bad = np.where(top2[:, 0] - top2[:, 1] < AMBIGUITY_TOL)[0]
        if bad.size:
            raise AmbiguityError(
                f"well state ambiguous at R={radii[bad[0]]:.6g}, theta={math.degrees(th):.4g} deg",
                (float(radii[bad[0]]), th),
            )
        col = np.argmax(A, axis=1)
        pick = v[np.arange(n_r), :, col]
        pick *= np.sign(O[np.arange(n_r), col])[:, None]
        energies[t] = w[np.arange(n_r), col]
        vecs[t] = pick
        ref = pick
    return energies, vecs


def angular_profile(
    params: ModelParams,
    scan: SurfaceScan,
    label: int,
    R: float,
    max_angle_deg: float = 60.0,
    step_deg: float = 0.05,
) -> tuple[NDArray, NDArray]:
    """Energy of a labelled surface along a circle of radius R in the x-z plane.

    Returns (angles in degrees measured from the x axis, energies).
    """
    start = frame_at(Position(R, 0.0), params, scan).vector(label)
    deg = np.arange(0.0, max_angle_deg + step_deg / 2, step_deg)
    e, _ = _track_polar(params, np.array([R]), np.radians(deg), start[None, :])
    return deg, e[:, 0]


def angular_half_width(
    params: ModelParams,
    scan: SurfaceScan,
    well: WellDescriptor,
    max_angle_deg: float = 60.0,
) -> float:
    """Polar angle (degrees) at which the well energy at R = rho_min reaches the asymptote.

    Beyond this angle about the x axis the well state is no longer bound
    relative to its dissociation limit.
    """
    deg, e = angular_profile(params, scan, well.surface_label, well.rho_min, max_angle_deg)
    above = np.where(e >= well.asymptote)[0]
    if not above.size:
        raise DetectionError(f"well stays below its asymptote up to {max_angle_deg} deg")
    j = above[0]
    return float(deg[j - 1] + (well.asymptote - e[j - 1]) * (deg[j] - deg[j - 1]) / (e[j] - e[j - 1]))


def potential_map(
    plane: Literal["xy", "xz"],
    window: tuple[float, float, float, float],
    params: ModelParams,
    n: int = 400,
    scan: SurfaceScan | None = None,
    well: WellDescriptor | None = None,
    r_min: float = 0.7,
    threads: int = 1,
) -> PotentialMap:
    """Well-state energy over a square Cartesian window (a0, a1, b0, b1).

    Every pixel is diagonalised at its own position. The well state is picked
    by overlap with a continuity-tracked reference: the radial scan rotated to
    the pixel's azimuth (x-y plane) or a polar-angle sweep started from the x
    axis (x-z plane). Pixels with R < ``r_min`` are NaN.

    Off the x-y plane the well surface meets other surfaces at conical
    intersections; following it along polar arcs then leaves a seam in the
    x-z map at large polar angles, well outside the bound region.
    """
    if scan is None or well is None:
        scan, well = prepare_radial_scan(params, threads=threads)
    label = well.surface_label
    a = np.linspace(window[0], window[1], n)
    b = np.linspace(window[2], window[3], n)
    A, B = np.meshgrid(a, b)
    R = np.hypot(A, B)
    inside = R >= r_min
    if R[inside].max() > scan.rho[-1]:
        raise ValueError("map window extends beyond the radial reference scan")
    energy = np.full(A.shape, np.nan)

    if plane == "xy":
        phi = np.arctan2(B, A)[inside]
        rho = R[inside]
        cyl = np.stack([rho, np.zeros_like(rho), phi], axis=-1)
        w, v = diagonalise_positions(cyl, params, threads)
        idx = np.abs(scan.rho[None, :] - rho[:, None]).argmin(axis=1) if rho.size < 20000 else \
            np.clip(np.searchsorted(scan.rho, rho), 0, len(scan.rho) - 1)
        ref = scan.vectors[idx][:, :, label] * np.exp(-1j * build_basis().M[None, :] * phi[:, None])
    elif plane == "xz":
        # polar sweep: radius nodes from the map, angle from -90 to 90 deg about +x
        radii = np.linspace(r_min, float(R[inside].max()), max(200, n))
        start = np.stack([frame_at(Position(float(r), 0.0), params, scan).vector(label) for r in radii])
        step = np.radians(0.5)
        up = np.arange(0.0, math.pi / 2 + step / 2, step)
        _, vu = _track_polar(params, radii, up, start, threads)
        _, vd = _track_polar(params, radii, -up, start, threads)
        x, zc = A[inside], B[inside]
        rho = np.abs(x)
        theta = np.arctan2(zc, rho)
        phi = np.where(x < 0, math.pi, 0.0)
        cyl = np.stack([rho, zc, phi], axis=-1)
        w, v = diagonalise_positions(cyl, params, threads)
        ir = np.clip(np.rint((R[inside] - radii[0]) / (radii[1] - radii[0])).astype(int), 0, len(radii) - 1)
        it = np.clip(np.rint(np.abs(theta) / step).astype(int), 0, len(up) - 1)
        ref = np.where((theta >= 0)[:, None], vu[it, ir], vd[it, ir]).astype(complex)
        ref *= np.exp(-1j * build_basis().M[None, :] * phi[:, None])
    else:
        raise ValueError(f"plane must be 'xy' or 'xz', got {plane!r}")

    O = np.abs(np.einsum("pi,pik->pk", ref.conj(), v))
    col = np.argmax(O, axis=1)
    energy[inside] = w[np.arange(len(col)), col]
    return PotentialMap(plane, a, b, energy, label)


def scan_rows(scan: SurfaceScan, labels=None):
    """(rho, z, phi, label, energy) rows in grid order, labels ascending."""
    labels = range(N_STATES) if labels is None else labels
    flat_pos = scan.positions.reshape(-1, 3)
    flat_e = scan.energies.reshape(-1, N_STATES)
    for p, e in zip(flat_pos, flat_e):
        for k in labels:
            yield float(p[0]), float(p[1]), float(p[2]), int(k), float(e[k])
