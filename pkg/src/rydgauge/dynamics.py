"""Mean-field (Ehrenfest) dynamics of the relative coordinate in the x-y plane.

The internal state obeys i dpsi/dtau = H_int(r) psi and the coordinate
d^2 r/dtau^2 = -2 kappa Re<psi|grad H_int|psi> (time in 1/|delta|, lengths in
R0). The conserved energy is |v|^2/(4 kappa) + <psi|H_int|psi>.

Integration uses the Lawson (integrating-factor) form of classic RK4: each
step freezes H0 = H_int(r_n) and integrates in the interaction picture of
H0, so the fast internal phases are propagated exactly through one
eigendecomposition per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import adiabatic as ad
from .errors import DetectionError, DomainExit
from .model import ModelParams, Position, _dipole_matrix, dipole_tensor, stark_hamiltonian

RHO_MIN = 0.5
RHO_MAX = 10.0
MAX_TIME = 1000.0
DEFAULT_DT = 0.01


@dataclass(frozen=True)
class EhrenfestState:
    position: NDArray[np.float64]
    velocity: NDArray[np.float64]
    amplitudes: NDArray[np.complex128]
    time: float = 0.0

    @property
    def rho(self) -> float:
        return float(np.hypot(*self.position))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def cartesian(self) -> NDArray[np.float64]:
        return np.array([self.position[0], self.position[1], 0.0])


_EYE = np.eye(3)


def _in_plane_geometry(r: NDArray) -> tuple[NDArray, NDArray]:
    """T_ij (9,) and dT_ij/dR_k for k = x, y (2, 9) at R = (x, y, 0)."""
    R = np.array([r[0], r[1], 0.0])
    d2 = R @ R
    if d2 == 0.0:
        raise DomainExit(float("nan"), 0.0)
    d = math.sqrt(d2)
    RR = np.outer(R, R)
    T = (_EYE - 3.0 * RR / d2) / (d2 * d)
    r5 = d2 * d2 * d
    dT = (
        -3.0 * (_EYE[None] * R[:2, None, None] + _EYE[:2, :, None] * R[None, None, :]
                + R[None, :, None] * _EYE[:2, None, :]) / r5
        + 15.0 * R[:2, None, None] * RR[None] / (r5 * d2)
    )
    return T.ravel(), dT.reshape(2, 9)


class _Forces:
    """H_int(r), <psi|H|psi> and the in-plane force for one parameter set."""

    def __init__(self, params: ModelParams):
        self.kappa = params.kappa
        self.HS = stark_hamiltonian(params)
        self.D = _dipole_matrix()
        # rows (k, a), columns b: psi-contraction gives Q_k = sum_ab psi_a^* D_abk psi_b
        self.Dk = np.ascontiguousarray(dipole_tensor().reshape(16, 16, 9).transpose(2, 0, 1).reshape(144, 16))

    def hamiltonian(self, r: NDArray) -> NDArray[np.complex128]:
        T, _ = _in_plane_geometry(r)
        return self.HS + (self.D @ T).reshape(16, 16)

    def acceleration(self, r: NDArray, psi: NDArray) -> NDArray[np.float64]:
        _, dT = _in_plane_geometry(r)
        Q = (self.Dk @ psi).reshape(9, 16) @ psi.conj()
        return -2.0 * self.kappa * np.real(dT @ Q)

    def evaluate(self, r: NDArray, psi: NDArray) -> tuple[NDArray, NDArray]:
        """H_int(r) and the acceleration, sharing one geometry evaluation."""
        T, dT = _in_plane_geometry(r)
        Q = (self.Dk @ psi).reshape(9, 16) @ psi.conj()
        return self.HS + (self.D @ T).reshape(16, 16), -2.0 * self.kappa * np.real(dT @ Q)

    def energy(self, state: EhrenfestState) -> float:
        psi = state.amplitudes
        H = self.hamiltonian(state.position)
        kinetic = float(state.velocity @ state.velocity) / (4 * self.kappa)
        return kinetic + float(np.real(psi.conj() @ H @ psi))


def total_energy(state: EhrenfestState, params: ModelParams) -> float:
    """Kinetic |v|^2/(4 kappa) plus <psi|H_int|psi>, units hbar|delta|."""
    return _Forces(params).energy(state)


def initial_state(rho0: float, surface_label: int, params: ModelParams, scan: ad.SurfaceScan) -> EhrenfestState:
    """At rest at (rho0, 0) in the phase-fixed eigenvector of a labelled surface."""
    frame = ad.frame_at(Position(rho0), params, scan)
    psi = np.asarray(frame.vector(surface_label), dtype=complex)
    return EhrenfestState(np.array([rho0, 0.0]), np.zeros(2), psi / np.linalg.norm(psi), 0.0)


def _step(state: EhrenfestState, dt: float, f: _Forces) -> EhrenfestState:
    r0, v0, psi0 = state.position, state.velocity, state.amplitudes
    H0 = f.hamiltonian(r0)
    lam, U = np.linalg.eigh(H0)

    def expo(s: float) -> NDArray[np.complex128]:
        return (U * np.exp(1j * lam * s)) @ U.conj().T

    E_half, E_full = expo(0.5 * dt), expo(dt)
    E_mhalf, E_mfull = E_half.conj().T, E_full.conj().T

    # interaction picture: phi = exp(i H0 s) psi
    def rhs(r, v, psi):
        H, acc = f.evaluate(r, psi)
        return v, acc, -1j * ((H - H0) @ psi)

    dr1, dv1, dp1 = rhs(r0, v0, psi0)
    h = 0.5 * dt
    # stage 2 at s = dt/2: psi = E(-h) (phi0 + h k1)
    r2, v2 = r0 + h * dr1, v0 + h * dv1
    psi2 = E_mhalf @ (psi0 + h * dp1)
    dr2, dv2, dp2 = rhs(r2, v2, psi2)
    dp2 = E_half @ dp2
    r3, v3 = r0 + h * dr2, v0 + h * dv2
    psi3 = E_mhalf @ (psi0 + h * dp2)
    dr3, dv3, dp3 = rhs(r3, v3, psi3)
    dp3 = E_half @ dp3
    r4, v4 = r0 + dt * dr3, v0 + dt * dv3
    psi4 = E_mfull @ (psi0 + dt * dp3)
    dr4, dv4, dp4 = rhs(r4, v4, psi4)
    dp4 = E_full @ dp4

    r = r0 + dt / 6 * (dr1 + 2 * dr2 + 2 * dr3 + dr4)
    v = v0 + dt / 6 * (dv1 + 2 * dv2 + 2 * dv3 + dv4)
    phi = psi0 + dt / 6 * (dp1 + 2 * dp2 + 2 * dp3 + dp4)
    psi = E_mfull @ phi
    psi /= math.sqrt(np.vdot(psi, psi).real)
    return EhrenfestState(r, v, psi, state.time + dt)


def _check_domain(state: EhrenfestState) -> None:
    rho = state.rho
    if not (RHO_MIN <= rho <= RHO_MAX):
        raise DomainExit(state.time, rho)


def step(state: EhrenfestState, dt: float, params: ModelParams) -> EhrenfestState:
    """Advance by one Lawson-RK4 step; raises :class:`DomainExit` outside the validity window."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    new = _step(state, dt, _Forces(params))
    _check_domain(new)
    return new


@dataclass
class Trajectory:
    """Samples at a fixed stride; ``populations[:, i]`` belongs to ``labels[i]``."""

    times: NDArray[np.float64]
    positions: NDArray[np.float64]
    velocities: NDArray[np.float64]
    populations: NDArray[np.float64]
    energies: NDArray[np.float64]
    labels: tuple[int, ...]
    final: EhrenfestState
    exit: DomainExit | None = None
    meta: dict = field(default_factory=dict)

    @property
    def rho(self) -> NDArray[np.float64]:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])

    def rows(self):
        """CSV rows (tau, x, y, rho, P1, P2, Psum, energy) for the first two labels."""
        for t, (x, y), r, P, e in zip(self.times, self.positions, self.rho, self.populations, self.energies):
            yield float(t), float(x), float(y), float(r), float(P[0]), float(P[1]), float(P[0] + P[1]), float(e)


def project_populations(state: EhrenfestState, params: ModelParams, scan: ad.SurfaceScan,
                        labels=None) -> dict[int, float]:
    """|<psi_k(r)|amplitudes>|^2 for the continuity-tracked surfaces ``labels``."""
    frame = ad.frame_at(Position.from_cartesian(state.position[0], state.position[1], 0.0), params, scan)
    _, vectors = frame.labelled()
    labels = range(vectors.shape[1]) if labels is None else labels
    amps = vectors.conj().T @ state.amplitudes
    return {int(k): float(abs(amps[k]) ** 2) for k in labels}


def run(
    state: EhrenfestState,
    t_end: float,
    params: ModelParams,
    scan: ad.SurfaceScan,
    labels=(0, 1),
    dt: float = DEFAULT_DT,
    sample_every: int = 50,
    allow_long: bool = False,
) -> Trajectory:
    """Propagate to ``t_end`` sampling every ``sample_every`` steps.

    A :class:`DomainExit` ends the run early; the trajectory keeps the samples
    taken so far and records the exit. Runs beyond ``MAX_TIME`` are refused
    unless ``allow_long`` is set.
    """
    if t_end > MAX_TIME and not allow_long:
        raise ValueError(f"t_end={t_end} exceeds the {MAX_TIME} limit set by the Rydberg lifetime")
    if not dt > 0 or sample_every < 1:
        raise ValueError("dt must be positive and sample_every >= 1")
    f = _Forces(params)
    labels = tuple(int(k) for k in labels)
    n_steps = int(round((t_end - state.time) / dt))
    times, pos, vel, pops, energies = [], [], [], [], []

    def record(s: EhrenfestState) -> None:
        P = project_populations(s, params, scan, labels)
        times.append(s.time)
        pos.append(s.position.copy())
        vel.append(s.velocity.copy())
        pops.append([P[k] for k in labels])
        energies.append(f.energy(s))

    exit_ = None
    record(state)
    t0 = state.time
    for i in range(1, n_steps + 1):
        state = _step(state, dt, f)
        # avoid accumulated round-off in the time stamps
        state = EhrenfestState(state.position, state.velocity, state.amplitudes, t0 + i * dt)
        try:
            _check_domain(state)
        except DomainExit as exc:
            exit_ = exc
            record(state)
            break
        if i % sample_every == 0:
            record(state)
    return Trajectory(
        np.array(times), np.array(pos), np.array(vel), np.array(pops), np.array(energies),
        labels, state, exit_, {"dt": dt, "sample_every": sample_every, "t_end": t_end},
    )


@dataclass(frozen=True)
class NonAbelianStates:
    """Surface labels of the three x-y plane wells at the asymmetric point."""

    psi1: int
    psi2: int
    psi3: int
    rho_avoided: float
    rho_crossing: float


def identify_states(scan: ad.SurfaceScan, well: ad.WellDescriptor) -> NonAbelianStates:
    """psi1 is the well state, psi2 its avoided-crossing partner at the barrier and
    psi3 the surface crossing psi2 inside the well region."""
    if well.rho_barrier is None:
        raise DetectionError("well state has no barrier; no avoided crossing to analyse")
    psi2 = ad.avoided_crossing_partner(scan, well.surface_label, well.rho_barrier)
    psi3, rho_x = ad.crossing_partner(scan, psi2, (0.8, well.rho_barrier))
    return NonAbelianStates(well.surface_label, psi2, psi3, well.rho_barrier, rho_x)


FIG6_PARAMS = ModelParams(delta_ratio=1.13, kappa=2.8e-6)


def run_fig6(
    params: ModelParams = FIG6_PARAMS,
    t_end: float = 400.0,
    dt: float = DEFAULT_DT,
    sample_every: int = 50,
    rho0: float = 1.5,
) -> Trajectory:
    """Start at rest at rho0 in psi2 and record rho, P1, P2 and the energy."""
    scan, well = ad.prepare_radial_scan(params)
    states = identify_states(scan, well)
    start = initial_state(rho0, states.psi2, params, scan)
    traj = run(start, t_end, params, scan, (states.psi1, states.psi2), dt, sample_every)
    traj.meta.update({"psi1": states.psi1, "psi2": states.psi2, "rho0": rho0,
                      "rho_avoided_crossing": states.rho_avoided})
    return traj


def time_reversed(state: EhrenfestState) -> EhrenfestState:
    """Velocity reversal combined with complex conjugation of the amplitudes.

    Since H_int(x, y)^* = H_int(x, -y), conjugation also mirrors y.
    """
    x, y = state.position
    vx, vy = state.velocity
    return EhrenfestState(np.array([x, -y]), np.array([-vx, vy]), state.amplitudes.conj(), state.time)
