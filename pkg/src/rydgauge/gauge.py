"""Berry connections, curvature, the artificial magnetic field and the
non-Abelian commutator of the adiabatic frame.

Conventions (dimensionless units, hbar = 1, lengths in R0):

* A_nm = i <psi_n|grad psi_m>. For n != m this equals
  i <psi_n|grad H|psi_m> / (e_m - e_n); the diagonal follows from the
  parallel-transport phase convention, which leaves only
  A_n^(phi) = <psi_n|J_z|psi_n>/rho.
* Curvature of a q-state subspace Q, from the sum over states outside Q:
  F_ab^(kl) = i sum_{p not in Q} (A_ap^k A_pb^l - A_ap^l A_pb^k).
  For q = 1 this is the Berry curvature Omega_n^(kl); B^i = eps_ikl F^(kl)/2.

Cartesian directions are indexed 0, 1, 2 for x, y, z.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .adiabatic import SurfaceScan, eigensystem_at, frame_at
from .errors import ConsistencyError, DegeneracyError, SingularityError
from .model import N_STATES, ModelParams, Position, grad_hint, jz_matrix

GAP_TOL = 1e-8
CONSISTENCY_TOL = 1e-6


@dataclass
class LocalFrame:
    """Label-ordered eigenpairs and gradient matrix elements at one position.

    ``dH[k]`` is <psi_n|d_k H|psi_m> in the eigenbasis.
    """

    position: Position
    energies: NDArray[np.float64]
    vectors: NDArray[np.complex128]
    dH: NDArray[np.complex128]

    @classmethod
    def from_vectors(cls, position: Position, energies: NDArray, vectors: NDArray) -> LocalFrame:
        vectors = np.asarray(vectors, dtype=complex)
        G = grad_hint(position)
        dH = np.einsum("in,kij,jm->knm", vectors.conj(), G, vectors)
        return cls(position, np.asarray(energies, float), vectors, dH)

    def gap(self, n: int, m: int) -> float:
        return float(self.energies[m] - self.energies[n])

    def _check_gaps(self, rows: Iterable[int], cols: Iterable[int]) -> None:
        for n in rows:
            for m in cols:
                if n != m and abs(self.gap(n, m)) < GAP_TOL:
                    raise DegeneracyError(
                        f"states {n} and {m} degenerate at {self.position}", gap=abs(self.gap(n, m)),
                        where=self.position,
                    )

    def offdiag(self, rows: Sequence[int], cols: Sequence[int] | None = None) -> NDArray[np.complex128]:
        """A^(k)_nm for n in ``rows`` and m in ``cols`` with zero diagonal; shape (3, len(rows), len(cols))."""
        rows = list(rows)
        cols = list(range(N_STATES)) if cols is None else list(cols)
        self._check_gaps(rows, cols)
        e = self.energies
        denom = e[cols][None, :] - e[rows][:, None]
        same = np.equal.outer(rows, cols)
        denom = np.where(same, 1.0, denom)
        A = 1j * self.dH[:, rows][:, :, cols] / denom
        A[:, same] = 0.0
        return A

    def diagonal(self, labels: Sequence[int]) -> NDArray[np.float64]:
        """Diagonal Cartesian connection A_n = <J_z>_n/rho e_phi; shape (3, len(labels))."""
        rho, phi = self.position.rho, self.position.phi
        if rho == 0.0:
            raise SingularityError("azimuthal connection is singular on the z axis")
        jz = np.real(np.einsum("in,i,in->n", self.vectors[:, labels].conj(), np.diag(jz_matrix()).real,
                               self.vectors[:, labels]))
        e_phi = np.array([-np.sin(phi), np.cos(phi), 0.0])
        return e_phi[:, None] * (jz / rho)[None, :]

    def connection(self, labels: Sequence[int]) -> NDArray[np.complex128]:
        """Full q x q connection block (3, q, q) in the parallel-transport gauge."""
        labels = list(labels)
        A = self.offdiag(labels, labels)
        d = self.diagonal(labels)
        idx = np.arange(len(labels))
        A[:, idx, idx] = d
        return A

    def curvature(self, labels: Sequence[int], k: int, l: int) -> NDArray[np.complex128]:
        """F^(kl) of the subspace spanned by ``labels`` via the sum over outside states."""
        labels = list(labels)
        outside = [p for p in range(N_STATES) if p not in labels]
        if not outside:
            return np.zeros((len(labels), len(labels)), dtype=complex)
        A_in_out = self.offdiag(labels, outside)
        A_out_in = self.offdiag(outside, labels)
        return 1j * (A_in_out[k] @ A_out_in[l] - A_in_out[l] @ A_out_in[k])


def local_frame(pos: Position, params: ModelParams, scan: SurfaceScan | None = None) -> LocalFrame:
    """Eigenframe at ``pos`` labelled like ``scan`` (or by energy rank if no scan).

    With a phase-fixed scan the vectors follow its parallel-transport
    convention, rotated to ``pos.phi``.
    """
    frame = eigensystem_at(pos, params) if scan is None else frame_at(pos, params, scan)
    e, v = frame.labelled()
    return LocalFrame.from_vectors(pos, e, v)


def connection_offdiag(n: int, m: int, pos: Position, params: ModelParams,
                       scan: SurfaceScan | None = None) -> NDArray[np.complex128]:
    """Cartesian 3-vector A_nm = i<psi_n|grad H|psi_m>/(e_m - e_n), n != m."""
    if n == m:
        raise ValueError("connection_offdiag needs two different states")
    return local_frame(pos, params, scan).offdiag([n], [m])[:, 0, 0]


def connection_diag_phi(n: int, pos: Position, params: ModelParams, scan: SurfaceScan | None = None) -> float:
    """A_n^(phi) = <psi_n|J_z|psi_n>/rho; the rho and z components vanish in this gauge."""
    if pos.rho == 0.0:
        raise SingularityError("azimuthal connection is singular on the z axis")
    frame = local_frame(pos, params, scan)
    v = frame.vectors[:, n]
    return float(np.real(v.conj() @ jz_matrix() @ v)) / pos.rho


def berry_curvature_diag(n: int, k: int, l: int, pos: Position, params: ModelParams,
                         scan: SurfaceScan | None = None) -> float:
    """Omega_n^(kl) from the phase-free sum over all other states."""
    return float(np.real(local_frame(pos, params, scan).curvature([n], k, l)[0, 0]))


def curvature_vector(frame: LocalFrame, labels: Sequence[int]) -> NDArray[np.complex128]:
    """(F^(yz), F^(zx), F^(xy)) of a subspace; shape (3, q, q)."""
    return np.stack([frame.curvature(labels, 1, 2), frame.curvature(labels, 2, 0), frame.curvature(labels, 0, 1)])


def magnetic_field(n: int, pos: Position, params: ModelParams, scan: SurfaceScan | None = None) -> NDArray[np.float64]:
    """Cartesian artificial magnetic field of state ``n``, units hbar/R0^2."""
    return np.real(curvature_vector(local_frame(pos, params, scan), [n])[:, 0, 0])


def to_cylindrical(vec: NDArray, phi: float) -> NDArray:
    """Cartesian components -> (rho, phi, z) components at azimuth ``phi``."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([c * vec[0] + s * vec[1], -s * vec[0] + c * vec[1], vec[2]])


def from_cylindrical(vec: NDArray, phi: float) -> NDArray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([c * vec[0] - s * vec[1], s * vec[0] + c * vec[1], vec[2]])


def magnetic_field_curl(n: int, rho: float, z: float, params: ModelParams, scan: SurfaceScan,
                        h: float = 1e-4) -> NDArray[np.float64]:
    """Cylindrical (B_rho, B_phi, B_z) as the curl of A^(phi) = <J_z>/rho.

    B_rho = -(1/rho) d_z <J_z>, B_z = (1/rho) d_rho <J_z>, B_phi = 0; the
    derivatives are central differences of step ``h``.
    """
    def jz(r: float, zz: float) -> float:
        return connection_diag_phi(n, Position(r, zz), params, scan) * r

    d_rho = (jz(rho + h, z) - jz(rho - h, z)) / (2 * h)
    d_z = (jz(rho, z + h) - jz(rho, z - h)) / (2 * h)
    return np.array([-d_z / rho, 0.0, d_rho / rho])


def field_strength(labels: Sequence[int], k: int, l: int, pos: Position, params: ModelParams,
                   scan: SurfaceScan | None = None) -> NDArray[np.complex128]:
    """q x q field-strength tensor F^(kl) of the subspace ``labels``."""
    return local_frame(pos, params, scan).curvature(labels, k, l)


def connection_block(labels: Sequence[int], pos: Position, params: ModelParams,
                     scan: SurfaceScan) -> NDArray[np.complex128]:
    """Phase-fixed connection restricted to ``labels``, shape (3, q, q)."""
    return local_frame(pos, params, scan).connection(labels)


def commutator_from_frame(frame: LocalFrame, pair: Sequence[int]) -> tuple[NDArray, NDArray]:
    """C = i[A^(x), A^(y)] on a two-state subspace, by two routes.

    Returns (direct 2x2 matrix, convention-free diagonal). The diagonal
    route is C_nn = Omega_n^(xy) - F_nn^(xy)(q=2).
    """
    pair = list(pair)
    A = frame.connection(pair)
    direct = 1j * (A[0] @ A[1] - A[1] @ A[0])
    f2 = frame.curvature(pair, 0, 1)
    f1 = np.array([frame.curvature([n], 0, 1)[0, 0] for n in pair])
    return direct, np.real(f1 - np.diag(f2))


def commutator_C(pos: Position, params: ModelParams, scan: SurfaceScan,
                 pair: Sequence[int]) -> NDArray[np.complex128]:
    """Non-Abelian commutator C = i[A^(1), A^(2)] of the two labelled states.

    Computed from the phase-fixed 2x2 connection blocks and checked against
    the convention-free diagonal; raises :class:`ConsistencyError` if the
    two disagree by more than ``CONSISTENCY_TOL``.
    """
    direct, diag = commutator_from_frame(local_frame(pos, params, scan), pair)
    err = float(np.max(np.abs(np.diag(direct) - diag)))
    if err > CONSISTENCY_TOL:
        raise ConsistencyError(f"commutator routes disagree by {err:.3g} at {pos}")
    return direct


def scalar_potential(labels: Sequence[int], pos: Position, params: ModelParams,
                     scan: SurfaceScan | None = None) -> NDArray[np.complex128]:
    """Phi_ab = kappa sum_{p outside} A_ap . A_pb in units hbar|delta|."""
    frame = local_frame(pos, params, scan)
    labels = list(labels)
    outside = [p for p in range(N_STATES) if p not in labels]
    if not outside:
        return np.zeros((len(labels), len(labels)), dtype=complex)
    A_in = frame.offdiag(labels, outside)
    A_out = frame.offdiag(outside, labels)
    return params.kappa * np.einsum("kap,kpb->ab", A_in, A_out)


def gauge_rows(delta_ratio: float, pos: Position, values: dict[str, complex]):
    """CSV rows (delta_ratio, rho, z, phi, quantity, real, imag), quantities sorted."""
    for name in sorted(values):
        v = complex(values[name])
        yield delta_ratio, pos.rho, pos.z, pos.phi, name, v.real, v.imag
