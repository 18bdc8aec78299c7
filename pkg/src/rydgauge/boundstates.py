"""Rotational-vibrational levels of the donut well and physical unit scales.

With the ansatz exp(i Mm phi) R(rho) in the x-y plane and u = sqrt(rho) R,
the radial operator (units hbar|delta|, kappa = Omega_L/|delta|) is

    kappa [-u'' - u/(4 rho^2)] + kappa (Mm/rho - A(rho))^2 u + V(rho) u,

where A is the well-state azimuthal connection <J_z>/rho. Expanding the
square gives the centrifugal term, the Zeeman term -2 kappa Mm A/rho and the
diamagnetic term kappa A^2.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import constants
from scipy.linalg import LinAlgError, eigh_tridiagonal

from . import adiabatic as ad
from .errors import EigensolverError, ResolutionError
from .model import ModelParams, grad_hint, jz_matrix

DEFAULT_WINDOW = (0.7, 3.5)
DEFAULT_POINTS = 24000
MIN_ALLOWED_POINTS = 200

# isotope masses in unified atomic mass units
ATOMIC_MASS_U = {
    "Li7": 7.0160034366,
    "Na23": 22.9897692820,
    "K39": 38.9637064864,
    "K40": 39.963998166,
    "Rb85": 84.911789738,
    "Rb87": 86.909180531,
    "Sr88": 87.9056125,
    "Cs133": 132.905451961,
}


@dataclass(frozen=True)
class WellData:
    """Well-state potential and azimuthal connection on a uniform rho grid at z = 0."""

    rho: NDArray[np.float64]
    potential: NDArray[np.float64]
    connection: NDArray[np.float64]
    surface_label: int
    scalar: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        if not (len(self.rho) == len(self.potential) == len(self.connection)):
            raise ValueError("grid, potential and connection must have equal length")
        steps = np.diff(self.rho)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
            raise ValueError("radial grid must be uniform and strictly increasing")

    @property
    def spacing(self) -> float:
        return float(self.rho[1] - self.rho[0])

    def without_gauge(self) -> WellData:
        return WellData(self.rho, self.potential, np.zeros_like(self.connection), self.surface_label, self.scalar)


def well_data(
    params: ModelParams,
    window: tuple[float, float] = DEFAULT_WINDOW,
    n: int = DEFAULT_POINTS,
    reference: ad.SurfaceScan | None = None,
    well: ad.WellDescriptor | None = None,
    include_scalar: bool = False,
    threads: int = 1,
) -> WellData:
    """Sample the well state on ``n`` points of ``window`` in the x-y plane.

    The fine scan is tracked from the inner edge and its labels are matched to
    the reference radial scan used to identify the well.
    """
    if reference is None or well is None:
        reference, well = ad.prepare_radial_scan(params, threads=threads)
    fine = ad.track_surfaces(ad.radial_scan(params, window, n, threads=threads))
    start = ad.frame_at(ad.Position(window[0]), params, reference)
    _, ref_vectors = start.labelled()
    perm = ad.match_columns(fine.vectors[0], ref_vectors, where=window[0])
    label = int(np.flatnonzero(perm == well.surface_label)[0])
    v = fine.vectors[:, :, label]
    jz = np.real(np.einsum("ni,i,ni->n", v.conj(), np.diag(jz_matrix()).real, v))
    scalar = _scalar_diagonal(fine, label, params) if include_scalar else None
    return WellData(fine.rho.copy(), fine.energies[:, label].copy(), jz / fine.rho, label, scalar)


def _scalar_diagonal(scan: ad.SurfaceScan, label: int, params: ModelParams, chunk: int = 1000) -> NDArray:
    """Phi_ww = kappa sum_{p != w} |A_wp|^2 along a tracked radial scan."""
    out = np.empty(scan.shape[0])
    cart = np.stack([scan.rho, np.zeros_like(scan.rho), np.zeros_like(scan.rho)], axis=-1)
    for start in range(0, len(out), chunk):
        s = slice(start, start + chunk)
        G = grad_hint(cart[s])
        v = scan.vectors[s]
        dH = np.einsum("ni,nkij,njp->nkp", v[:, :, label].conj(), G, v)
        gap = scan.energies[s] - scan.energies[s, label][:, None]
        gap[:, label] = np.inf
        out[s] = params.kappa * np.sum(np.abs(dH) ** 2 / gap[:, None, :] ** 2, axis=(1, 2))
    return out


@dataclass(frozen=True)
class RadialProblem:
    """Symmetric tridiagonal radial operator for one motional quantum number."""

    M_mot: int
    rho: NDArray[np.float64]
    potential: NDArray[np.float64]
    connection: NDArray[np.float64]
    kappa: float
    diagonal: NDArray[np.float64]
    offdiagonal: NDArray[np.float64]

    def effective_potential(self) -> NDArray[np.float64]:
        k, r = self.kappa, self.rho
        return self.potential + k * (self.M_mot / r - self.connection) ** 2 - k / (4 * r**2)

    def matrix(self) -> NDArray[np.float64]:
        return np.diag(self.diagonal) + np.diag(self.offdiagonal, 1) + np.diag(self.offdiagonal, -1)


def _harmonic_ground(rho: NDArray, v: NDArray, kappa: float) -> float:
    i = int(np.argmin(v))
    h = rho[1] - rho[0]
    curvature = (v[i + 1] - 2 * v[i] + v[i - 1]) / h**2
    return float(v[i] + math.sqrt(2 * kappa * max(curvature, 0.0)) / 2)


def allowed_points(problem: RadialProblem) -> int:
    """Grid points where the effective potential lies below a harmonic estimate of the ground level."""
    veff = problem.effective_potential()
    return int(np.count_nonzero(veff <= _harmonic_ground(problem.rho, veff, problem.kappa)))


def assemble_radial(M_mot: int, data: WellData, kappa: float, include_scalar: bool = False) -> RadialProblem:
    """Three-point discretisation with hard walls just outside the grid ends."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    rho = data.rho
    potential = data.potential
    if include_scalar:
        if data.scalar is None:
            raise ValueError("well data carries no scalar potential")
        potential = potential + data.scalar
    i = int(np.argmin(potential))
    if i in (0, len(rho) - 1):
        raise ResolutionError("potential minimum lies on the boundary of the radial window")
    h = data.spacing
    diag = (
        2 * kappa / h**2
        - kappa / (4 * rho**2)
        + kappa * (M_mot / rho - data.connection) ** 2
        + potential
    )
    off = np.full(len(rho) - 1, -kappa / h**2)
    problem = RadialProblem(M_mot, rho, potential, data.connection, kappa, diag, off)
    count = allowed_points(problem)
    if count < MIN_ALLOWED_POINTS:
        raise ResolutionError(
            f"only {count} grid points inside the classically allowed region (need {MIN_ALLOWED_POINTS})"
        )
    return problem


@dataclass(frozen=True)
class RadialSpectrum:
    M_mot: int
    levels: NDArray[np.float64]
    wavefunctions: NDArray[np.float64] | None = None

    @property
    def spacing(self) -> float:
        return float(self.levels[1] - self.levels[0])


def vibrational_spectrum(problem: RadialProblem, count: int = 5, wavefunctions: bool = False) -> RadialSpectrum:
    """Lowest ``count`` levels, with normalised u(rho) = sqrt(rho) R(rho) columns on request."""
    try:
        out = eigh_tridiagonal(
            problem.diagonal, problem.offdiagonal,
            eigvals_only=not wavefunctions, select="i", select_range=(0, count - 1),
        )
    except LinAlgError as exc:
        raise EigensolverError(f"radial problem Mm={problem.M_mot}", exc) from exc
    w, v = out if wavefunctions else (out, None)
    if v is not None:
        v = v / math.sqrt(problem.rho[1] - problem.rho[0])
    return RadialSpectrum(problem.M_mot, w, v)


def solve_ladder(data: WellData, kappa: float, M_range=range(-3, 4), count: int = 5,
                 include_scalar: bool = False, threads: int = 1) -> dict[int, RadialSpectrum]:
    """Spectra for each motional quantum number, solved independently."""
    def solve(m: int) -> RadialSpectrum:
        return vibrational_spectrum(assemble_radial(m, data, kappa, include_scalar), count)

    Ms = list(M_range)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spectra = list(pool.map(solve, Ms))
    else:
        spectra = [solve(m) for m in Ms]
    return dict(zip(Ms, spectra))


def zeeman_ladder(data: WellData, kappa: float, M_range=range(-3, 4), threads: int = 1) -> list[tuple[int, float]]:
    """Lowest level of each Mm relative to the Mm = 0 ground level, in units hbar*Omega_L."""
    Ms = sorted(set(M_range) | {0})
    spectra = solve_ladder(data, kappa, Ms, count=1, threads=threads)
    zero = spectra[0].levels[0]
    return [(m, float((spectra[m].levels[0] - zero) / kappa)) for m in M_range]


def ladder_rows(spectra: dict[int, RadialSpectrum], kappa: float):
    """CSV rows (M_mot, level_index, energy_hbar_delta, energy_hbar_OmegaL_rel)."""
    zero = spectra[0].levels[0] if 0 in spectra else min(s.levels[0] for s in spectra.values())
    for m in sorted(spectra):
        for i, e in enumerate(spectra[m].levels):
            yield m, i, float(e), float((e - zero) / kappa)


@dataclass(frozen=True)
class PhysicalScales:
    """SI scales: reduced mass (kg), R0 (m), |delta| (rad/s)."""

    reduced_mass: float
    R0: float
    delta_abs: float

    @property
    def Omega_L(self) -> float:
        """hbar/(2 mu R0^2) in rad/s."""
        return constants.hbar / (2 * self.reduced_mass * self.R0**2)

    @property
    def kappa(self) -> float:
        return self.Omega_L / self.delta_abs

    def to_dict(self) -> dict:
        return {"reduced_mass": self.reduced_mass, "R0": self.R0, "delta_abs": self.delta_abs,
                "Omega_L": self.Omega_L, "Omega_L_over_2pi_Hz": self.Omega_L / (2 * math.pi),
                "kappa": self.kappa}


def _positive(**values: float) -> None:
    for name, v in values.items():
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive, got {v}")


def reduced_mass(species: str) -> float:
    """Reduced mass (kg) of two identical atoms of ``species`` (e.g. 'K39')."""
    try:
        return ATOMIC_MASS_U[species] * constants.atomic_mass / 2
    except KeyError:
        raise ValueError(f"unknown species {species!r}; known: {sorted(ATOMIC_MASS_U)}") from None


def physical_scales(reduced_mass: float, R0: float, delta_abs: float) -> PhysicalScales:
    _positive(reduced_mass=reduced_mass, R0=R0, delta_abs=delta_abs)
    return PhysicalScales(reduced_mass, R0, delta_abs)


def r0_from_coupling(reduced_element_sq_over_4pieps0: float, delta_abs: float) -> float:
    """R0 = (|D|^2/(4 pi eps0 hbar |delta|))^(1/3); inputs in J m^3 and rad/s."""
    _positive(reduced_element_sq_over_4pieps0=reduced_element_sq_over_4pieps0, delta_abs=delta_abs)
    return (reduced_element_sq_over_4pieps0 / (constants.hbar * delta_abs)) ** (1 / 3)
