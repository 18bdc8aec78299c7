import json
from collections import Counter

import numpy as np
import pytest

from rydgauge.angular import AtomicState
from rydgauge.errors import SingularityError
from rydgauge.model import (
    N_STATES,
    ModelParams,
    PairState,
    Position,
    build_basis,
    dipole_coupling_gradient,
    dipole_coupling_tensor,
    exchange_operator,
    grad_hint,
    hint,
    jz_matrix,
    stark_hamiltonian,
    vdd_matrix,
)


def pair(o1, m1, o2, m2):
    return PairState(AtomicState(o1, m1), AtomicState(o2, m2))


def test_basis_size_and_uniqueness():
    basis = build_basis()
    assert len(basis) == N_STATES == 16
    assert len(set(basis)) == 16


def test_basis_multiplicities():
    counts = Counter(abs(m) for m in build_basis().M)
    assert counts == {1: 8, 0: 4, 2: 4}


def test_basis_exchange_partner_order():
    basis = build_basis()
    for i in range(8):
        assert basis[i].atom1.orbital == "s"
        assert basis[i + 8] == basis[i].swapped()


def test_stark_entries(params):
    basis = build_basis()
    H = np.diag(stark_hamiltonian(params)).real
    assert H[basis.index(pair("s", 1, "p", -1))] == -1.0
    assert H[basis.index(pair("p", 1, "s", -1))] == -3.0
    assert H[basis.index(pair("s", -1, "p", 3))] == 0.0
    assert sorted(Counter(H).items()) == [(-3.0, 4), (-1.0, 4), (0.0, 8)]


def test_params_validation(tmp_path):
    with pytest.raises(ValueError):
        ModelParams(delta_ratio=-3)
    with pytest.raises(ValueError):
        ModelParams(kappa=0)
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"delta_ratio": 1.3, "kappa": 1e-6}))
    assert ModelParams.from_json(path) == ModelParams(1.3, 1e-6)
    with pytest.raises(Exception):
        ModelParams.from_dict({"delta_ratio": 1.3, "kapa": 1e-6})


def test_vdd_singular_at_origin():
    with pytest.raises(SingularityError):
        vdd_matrix(Position(0.0, 0.0))
    with pytest.raises(SingularityError):
        grad_hint(np.zeros(3))


def test_vdd_no_sp_to_sp_elements():
    V = vdd_matrix(Position(1.2, 0.4, 0.7))
    assert np.all(V[:8, :8] == 0)
    assert np.all(V[8:, 8:] == 0)


def test_vdd_hermitian_and_scaling():
    x = np.array([0.3, -0.8, 0.5])
    V1, V2 = vdd_matrix(x), vdd_matrix(2 * x)
    assert np.allclose(V1, V1.conj().T, atol=1e-15)
    assert np.allclose(V2, V1 / 8, atol=1e-15)


def test_vdd_real_symmetric_at_phi_zero():
    for pos in (Position(1.1, 0.0), Position(0.7, -0.6), Position(2.0, 1.5)):
        V = vdd_matrix(pos)
        assert np.abs(V.imag).max() < 1e-15
        assert np.allclose(V, V.T)
        for k in (0, 2):
            G = grad_hint(pos)[k]
            assert np.abs(G.imag).max() < 1e-15
            assert np.allclose(G, G.T)


def test_vdd_m_conserving_on_axis():
    M = build_basis().M
    for z in (0.5, -1.2, 3.0):
        V = vdd_matrix(Position(0.0, z))
        assert np.abs(V[M[:, None] != M[None, :]]).max() < 1e-14


def test_exchange_symmetry():
    P = exchange_operator()
    for pos in (Position(1.1, 0.2, 0.3), Position(0.4, 2.0, -1.0)):
        V = vdd_matrix(pos)
        assert np.allclose(P @ V @ P.T, V, atol=1e-15)


def test_far_field_spectrum(params):
    e = np.linalg.eigvalsh(hint(Position(100.0), params))
    expected = np.sort([0.0] * 8 + [-1.0] * 4 + [-3.0] * 4)
    assert np.abs(e - expected).max() < 1e-5


def test_batched_matches_single(params):
    xs = np.random.default_rng(1).normal(size=(5, 3)) + 2.0
    H = hint(xs, params)
    for x, h in zip(xs, H):
        assert np.array_equal(h, hint(x, params))


def test_coupling_tensor_traceless():
    T = dipole_coupling_tensor([0.3, 0.2, 1.1])
    assert abs(np.trace(T)) < 1e-14
    assert np.allclose(T, T.T)


def test_coupling_gradient_fd():
    x = np.array([0.9, -0.4, 0.6])
    h = 1e-6
    G = dipole_coupling_gradient(x)
    for k in range(3):
        dx = np.zeros(3)
        dx[k] = h
        fd = (dipole_coupling_tensor(x + dx) - dipole_coupling_tensor(x - dx)) / (2 * h)
        assert np.allclose(G[k], fd, rtol=1e-7, atol=1e-8)


def test_grad_hint_fd(params):
    rng = np.random.default_rng(7)
    h = 1e-6
    for _ in range(10):
        x = rng.normal(size=3)
        x *= rng.uniform(0.8, 3.0) / np.linalg.norm(x)
        G = grad_hint(x)
        for k in range(3):
            dx = np.zeros(3)
            dx[k] = h
            fd = (hint(x + dx, params) - hint(x - dx, params)) / (2 * h)
            assert np.linalg.norm(fd - G[k]) / np.linalg.norm(G[k]) < 1e-5


def test_azimuthal_identity(params):
    Jz = jz_matrix()
    pos = Position(1.3, 0.4, 0.9)
    h = 1e-5
    fd = (hint(pos.at_phi(pos.phi + h), params) - hint(pos.at_phi(pos.phi - h), params)) / (2 * h)
    H = hint(pos, params)
    assert np.abs(fd + 1j * (Jz @ H - H @ Jz)).max() < 1e-9


def test_rotation_covariance(params):
    Jz = np.diag(jz_matrix()).real
    pos = Position(1.1, -0.3, 0.0)
    phi = 0.77
    U = np.diag(np.exp(-1j * Jz * phi))
    assert np.allclose(hint(pos.at_phi(phi), params), U @ hint(pos, params) @ U.conj().T, atol=1e-14)


def test_jz(params):
    Jz = jz_matrix()
    basis = build_basis()
    assert Jz[basis.index(pair("s", 1, "p", 3)), basis.index(pair("s", 1, "p", 3))] == 2
    assert np.trace(Jz) == 0
    H = stark_hamiltonian(params)
    assert np.array_equal(Jz @ H, H @ Jz)


def test_position_helpers():
    p = Position.from_cartesian(-1.0, 1.0, 0.5)
    assert p.rho == pytest.approx(np.sqrt(2))
    assert p.phi == pytest.approx(3 * np.pi / 4)
    assert np.allclose(p.cartesian, [-1, 1, 0.5])
    assert p.R == pytest.approx(1.5)
    with pytest.raises(ValueError):
        Position(-1.0)
