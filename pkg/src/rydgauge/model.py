"""Two-atom nsnp basis and the internal Hamiltonian H_int(R) = H_S + V_dd(R).

Units: energies in hbar*|delta|, lengths in R0, time in 1/|delta|. In these
units the dipole-dipole interaction is (1/R^3)[d1.d2 - 3 (d1.n)(d2.n)] with
the single-atom dipole elements of :mod:`rydgauge.angular`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import jsonschema
import numpy as np
from numpy.typing import NDArray

from .angular import AtomicState, transition_dipole
from .errors import SingularityError

N_STATES = 16

S_TWICE_M = (-1, 1)
P_TWICE_M = (-3, -1, 1, 3)


@dataclass(frozen=True)
class PairState:
    """Two-atom product state |atom1, atom2>."""

    atom1: AtomicState
    atom2: AtomicState

    @property
    def twice_M(self) -> int:
        return self.atom1.twice_m + self.atom2.twice_m

    @property
    def M(self) -> int:
        return self.twice_M // 2

    @property
    def p_component(self) -> AtomicState:
        return self.atom1 if self.atom1.orbital == "p" else self.atom2

    def swapped(self) -> PairState:
        return PairState(self.atom2, self.atom1)

    def __str__(self) -> str:
        return f"|{self.atom1},{self.atom2}>"


@dataclass(frozen=True)
class TwoAtomBasis:
    """Canonical ordering of the 16 nsnp states.

    Indices 0-7 are |s m1, p m2> with m1 ascending, then m2 ascending.
    Index ``i + 8`` is the atom-exchanged partner |p m2, s m1> of index ``i``.
    """

    states: tuple[PairState, ...]

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i: int) -> PairState:
        return self.states[i]

    def index(self, state: PairState) -> int:
        return self.states.index(state)

    @property
    def M(self) -> NDArray[np.int64]:
        return np.array([s.M for s in self.states])

    def exchange_permutation(self) -> NDArray[np.int64]:
        """perm[i] is the index of the atom-swapped partner of state i."""
        return np.array([self.index(s.swapped()) for s in self.states])


@lru_cache(maxsize=1)
def build_basis() -> TwoAtomBasis:
    sp = [
        PairState(AtomicState("s", ms), AtomicState("p", mp))
        for ms in S_TWICE_M
        for mp in P_TWICE_M
    ]
    ps = [s.swapped() for s in sp]
    return TwoAtomBasis(tuple(sp + ps))


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters.

    delta_ratio
        Delta/delta, the ratio of the two p-multiplet Stark splittings. Both
        splittings are negative, so the ratio is positive; Delta = -3|delta|
        corresponds to ``delta_ratio=3``.
    kappa
        Omega_L/|delta| = hbar/(2 mu R0^2 |delta|), the only place the reduced
        mass enters.
    """

    delta_ratio: float = 3.0
    kappa: float = 2.8e-6

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta_ratio) and self.delta_ratio > 0):
            raise ValueError(
                f"delta_ratio = Delta/delta must be positive (both shifts negative), got {self.delta_ratio}"
            )
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def delta(self) -> float:
        """delta in units of |delta| (always -1)."""
        return -1.0

    @property
    def Delta(self) -> float:
        return -self.delta_ratio

    def replace(self, **changes) -> ModelParams:
        return ModelParams(**{"delta_ratio": self.delta_ratio, "kappa": self.kappa, **changes})

    def to_dict(self) -> dict:
        return {"delta_ratio": self.delta_ratio, "kappa": self.kappa}

    @classmethod
    def from_dict(cls, data: dict) -> ModelParams:
        jsonschema.validate(data, MODEL_SCHEMA)
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> ModelParams:
        return cls.from_dict(json.loads(Path(path).read_text()))


MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "delta_ratio": {"type": "number", "exclusiveMinimum": 0},
        "kappa": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}


@dataclass(frozen=True)
class Position:
    """Relative position of atom 2 with respect to atom 1, cylindrical, units of R0."""

    rho: float
    z: float = 0.0
    phi: float = 0.0

    def __post_init__(self) -> None:
        if self.rho < 0:
            raise ValueError(f"rho must be non-negative, got {self.rho}")

    @classmethod
    def from_cartesian(cls, x: float, y: float, z: float) -> Position:
        return cls(math.hypot(x, y), z, math.atan2(y, x))

    @property
    def cartesian(self) -> NDArray[np.float64]:
        return np.array([self.rho * math.cos(self.phi), self.rho * math.sin(self.phi), self.z])

    @property
    def R(self) -> float:
        return math.hypot(self.rho, self.z)

    def at_phi(self, phi: float) -> Position:
        return Position(self.rho, self.z, phi)


def _as_cartesian(pos) -> NDArray[np.float64]:
    if isinstance(pos, Position):
        return pos.cartesian
    return np.asarray(pos, dtype=float)


@lru_cache(maxsize=1)
def dipole_tensor() -> NDArray[np.complex128]:
    """D[a, b, i, j] = <a1|d_i|b1> <a2|d_j|b2> over the 16-state basis."""
    basis = build_basis()
    out = np.zeros((N_STATES, N_STATES, 3, 3), dtype=complex)
    for a, sa in enumerate(basis):
        for b, sb in enumerate(basis):
            d1 = transition_dipole(sa.atom1, sb.atom1)
            d2 = transition_dipole(sa.atom2, sb.atom2)
            out[a, b] = np.outer(d1, d2)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=1)
def _dipole_matrix() -> NDArray[np.complex128]:
    # (256, 9) so that V = D @ T.ravel() for a batch of geometric tensors
    m = np.ascontiguousarray(dipole_tensor().reshape(N_STATES * N_STATES, 9))
    m.setflags(write=False)
    return m


def _geometry(R: NDArray[np.float64]) -> tuple[NDArray, NDArray]:
    r = np.linalg.norm(R, axis=-1)
    if np.any(r == 0):
        raise SingularityError("dipole-dipole interaction is singular at R = 0")
    return r, R / r[..., None]


def dipole_coupling_tensor(R) -> NDArray[np.float64]:
    """T_ij = (delta_ij - 3 n_i n_j)/R^3 for one position or a (..., 3) batch."""
    R = np.asarray(R, dtype=float)
    r, n = _geometry(R)
    T = np.eye(3) - 3.0 * n[..., :, None] * n[..., None, :]
    return T / r[..., None, None] ** 3


def dipole_coupling_gradient(R) -> NDArray[np.float64]:
    """dT_ij/dR_k, returned with shape (..., 3[k], 3[i], 3[j])."""
    R = np.asarray(R, dtype=float)
    r = np.linalg.norm(R, axis=-1)
    if np.any(r == 0):
        raise SingularityError("dipole-dipole interaction is singular at R = 0")
    eye = np.eye(3)
    r5 = r[..., None, None, None] ** 5
    r7 = r[..., None, None, None] ** 7
    Rk = R[..., :, None, None]
    Ri = R[..., None, :, None]
    Rj = R[..., None, None, :]
    term1 = -3.0 * eye[None, :, :] * Rk / r5
    term2 = -3.0 * (eye[:, :, None] * Rj + Ri * eye[:, None, :]) / r5
    term3 = 15.0 * Ri * Rj * Rk / r7
    return term1 + term2 + term3


def vdd_matrix(pos) -> NDArray[np.complex128]:
    """Dipole-dipole interaction in units hbar|delta| at ``pos``.

    ``pos`` is a :class:`Position`, a Cartesian 3-vector, or an (..., 3)
    array of Cartesian vectors (batched evaluation).
    """
    T = dipole_coupling_tensor(_as_cartesian(pos))
    flat = T.reshape(T.shape[:-2] + (9,)) @ _dipole_matrix().T
    return flat.reshape(T.shape[:-2] + (N_STATES, N_STATES))


def stark_hamiltonian(params: ModelParams) -> NDArray[np.complex128]:
    """Diagonal H_S with the common offset omega_0 removed.

    A pair state picks up delta/|delta| = -1 if its p atom is in p-1/2,
    Delta/|delta| if in p+1/2, and 0 for p+-3/2.
    """
    shift = {-1: params.delta, 1: params.Delta, -3: 0.0, 3: 0.0}
    diag = [shift[s.p_component.twice_m] for s in build_basis()]
    return np.diag(np.array(diag, dtype=complex))


def hint(pos, params: ModelParams) -> NDArray[np.complex128]:
    """H_int = H_S + V_dd(R); batched over leading axes like :func:`vdd_matrix`."""
    return stark_hamiltonian(params) + vdd_matrix(pos)


def grad_hint(pos, params: ModelParams | None = None) -> NDArray[np.complex128]:
    """Cartesian gradient of H_int, shape (..., 3, 16, 16), units hbar|delta|/R0.

    H_S is position independent, so ``params`` is accepted only for symmetry
    with :func:`hint`.
    """
    dT = dipole_coupling_gradient(_as_cartesian(pos))
    flat = dT.reshape(dT.shape[:-2] + (9,)) @ _dipole_matrix().T
    return flat.reshape(dT.shape[:-2] + (N_STATES, N_STATES))


def jz_matrix() -> NDArray[np.complex128]:
    """Total internal J_z (units hbar): diag(M) in the canonical basis."""
    return np.diag(build_basis().M.astype(complex))


def exchange_operator() -> NDArray[np.float64]:
    """Permutation matrix swapping the labels of the two atoms."""
    perm = build_basis().exchange_permutation()
    P = np.zeros((N_STATES, N_STATES))
    P[perm, np.arange(N_STATES)] = 1.0
    return P
