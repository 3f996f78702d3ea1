import numpy as np
import pytest

from ionpar import chain
from ionpar.chain import Axis
from ionpar.errors import ChainInstabilityError, ValidationError


def gradient_descent_equilibrium(n, tol=1e-11, max_iter=100_000):
    """Brute-force first-order oracle: gradient descent, Barzilai-Borwein steps.

    Uses only the potential gradient (no Hessian/Newton), independent of the
    solver under test.
    """

    def grad(u):
        d = u[:, None] - u[None, :]
        absd = np.abs(d)
        np.fill_diagonal(absd, 1.0)
        f = d / absd**3
        np.fill_diagonal(f, 0.0)
        return u - f.sum(axis=1)

    u = (np.arange(n) - 0.5 * (n - 1)) * 2.018 / n**0.559
    g = grad(u)
    step = 0.05
    for _ in range(max_iter):
        if np.max(np.abs(g)) < tol:
            break
        u_new = u - step * g
        g_new = grad(u_new)
        du, dg = u_new - u, g_new - g
        denom = np.dot(du, dg)
        step = np.dot(du, du) / denom if denom > 0 else 0.05
        u, g = u_new, g_new
    assert np.max(np.abs(g)) < tol, "oracle did not converge"
    return u


def test_single_ion_sits_at_center():
    eq = chain.solve_equilibrium(chain.default_config(1))
    assert eq.positions == pytest.approx([0.0])


def test_two_ion_closed_form():
    eq = chain.solve_equilibrium(chain.default_config(2))
    a = 0.25 ** (1.0 / 3.0)
    np.testing.assert_allclose(eq.positions, [-a, a], atol=1e-12)


def test_three_ion_closed_form():
    eq = chain.solve_equilibrium(chain.default_config(3))
    b = 1.25 ** (1.0 / 3.0)
    np.testing.assert_allclose(eq.positions, [-b, 0.0, b], atol=1e-12)


@pytest.mark.parametrize("n", range(2, 11))
def test_equilibrium_matches_gradient_descent_oracle(n):
    eq = chain.solve_equilibrium(chain.default_config(n))
    oracle = gradient_descent_equilibrium(n)
    np.testing.assert_allclose(eq.positions, oracle, atol=1e-9)


def test_equilibrium_invariants():
    for n in range(1, 11):
        eq = chain.solve_equilibrium(chain.default_config(n))
        assert eq.residual_norm < 1e-12
        assert abs(eq.positions.sum()) < 1e-12
        if n > 1:
            assert np.all(np.diff(eq.positions) > 0)


def test_two_ion_axial_modes():
    cfg = chain.default_config(2)
    modes = chain.normal_modes(cfg, chain.solve_equilibrium(cfg), Axis.Z)
    # stretch at sqrt(3) w_z, COM at w_z, descending order
    np.testing.assert_allclose(
        modes.frequencies,
        [np.sqrt(3.0) * cfg.axial_freq, cfg.axial_freq], rtol=1e-12)


def test_two_ion_radial_modes():
    cfg = chain.default_config(2)
    modes = chain.normal_modes(cfg, chain.solve_equilibrium(cfg), Axis.X)
    rocking = np.sqrt(cfg.radial_freq_x**2 - cfg.axial_freq**2)
    np.testing.assert_allclose(
        modes.frequencies, [cfg.radial_freq_x, rocking], rtol=1e-12)
    # COM uniform, rocking antisymmetric
    com, rock = modes.mode_vectors[:, 0], modes.mode_vectors[:, 1]
    np.testing.assert_allclose(com, [1, 1] / np.sqrt(2), rtol=1e-12)
    np.testing.assert_allclose(np.abs(rock), [1, 1] / np.sqrt(2), rtol=1e-12)
    assert rock[0] * rock[1] < 0


def test_single_ion_modes():
    cfg = chain.default_config(1)
    eq = chain.solve_equilibrium(cfg)
    modes = chain.normal_modes(cfg, eq, Axis.X)
    np.testing.assert_allclose(modes.frequencies, [cfg.radial_freq_x])
    np.testing.assert_allclose(modes.mode_vectors, [[1.0]])
    eta = chain.lamb_dicke_matrix(cfg, modes)
    expected = cfg.wavevector_magnitude * np.sqrt(
        chain.HBAR / (2 * cfg.ion_mass * cfg.radial_freq_x))
    np.testing.assert_allclose(eta, [[expected]])


def test_lamb_dicke_signs_follow_mode_vectors():
    cfg = chain.default_config(2)
    modes = chain.normal_modes(cfg, chain.solve_equilibrium(cfg), Axis.X)
    eta = modes.lamb_dicke
    # COM row equal couplings; rocking row equal magnitude, opposite sign
    assert eta[0, 0] == pytest.approx(eta[0, 1])
    assert eta[1, 0] == pytest.approx(-eta[1, 1])
    np.testing.assert_allclose(eta, chain.lamb_dicke_matrix(cfg, modes))


@pytest.mark.parametrize("n", range(1, 11))
@pytest.mark.parametrize("axis", [Axis.X, Axis.Y, Axis.Z])
def test_mode_vector_normalization(n, axis):
    cfg = chain.default_config(n)
    modes = chain.normal_modes(cfg, chain.solve_equilibrium(cfg), axis)
    b = modes.mode_vectors
    np.testing.assert_allclose(b.T @ b, np.eye(n), atol=1e-10)
    # per-ion participation sums to one
    np.testing.assert_allclose(np.sum(b**2, axis=1), np.ones(n), atol=1e-10)


def test_radial_frequencies_bounded_by_com_axial_by_trap():
    cfg = chain.default_config(7)
    eq = chain.solve_equilibrium(cfg)
    mx = chain.normal_modes(cfg, eq, Axis.X)
    mz = chain.normal_modes(cfg, eq, Axis.Z)
    assert np.all(mx.frequencies <= cfg.radial_freq_x * (1 + 1e-12))
    assert mx.frequencies[0] == pytest.approx(cfg.radial_freq_x)
    assert np.all(mz.frequencies >= cfg.axial_freq * (1 - 1e-12))


def test_separation_report_detects_overlap_and_disjoint():
    cfg = chain.default_config(7)
    eq = chain.solve_equilibrium(cfg)
    mx = chain.normal_modes(cfg, eq, Axis.X)
    my = chain.normal_modes(cfg, eq, Axis.Y)
    rep = chain.mode_separation_report(mx, my)
    # default 3.0 vs 2.9 MHz chains have overlapping radial bands
    assert not rep.disjoint and rep.gap < 0

    far = chain.TrapConfig(ion_count=7, axial_freq=cfg.axial_freq,
                           radial_freq_x=2 * np.pi * 3.6e6,
                           radial_freq_y=2 * np.pi * 2.9e6)
    eq2 = chain.solve_equilibrium(far)
    rep2 = chain.mode_separation_report(
        chain.normal_modes(far, eq2, Axis.X),
        chain.normal_modes(far, eq2, Axis.Y))
    assert rep2.disjoint and rep2.gap > 0


def test_instability_raises():
    cfg = chain.TrapConfig(ion_count=7, axial_freq=2 * np.pi * 0.4e6,
                           radial_freq_x=2 * np.pi * 0.45e6,
                           radial_freq_y=2 * np.pi * 0.5e6)
    eq = chain.solve_equilibrium(cfg)
    with pytest.raises(ChainInstabilityError):
        chain.normal_modes(cfg, eq, Axis.X)


def test_config_validation():
    with pytest.raises(ValidationError):
        chain.TrapConfig(ion_count=0, axial_freq=1.0, radial_freq_x=2.0,
                         radial_freq_y=3.0)
    with pytest.raises(ValidationError):
        chain.TrapConfig(ion_count=2, axial_freq=1.0, radial_freq_x=2.0,
                         radial_freq_y=2.0)
    with pytest.raises(ValidationError):
        chain.TrapConfig(ion_count=2, axial_freq=3.0, radial_freq_x=2.0,
                         radial_freq_y=4.0)


def test_trap_config_round_trip(tmp_path):
    cfg = chain.default_config(5)
    path = tmp_path / "trap.json"
    path.write_text(__import__("json").dumps(chain.trap_config_to_dict(cfg)))
    loaded = chain.load_trap_config(path)
    assert loaded == cfg

    toml_path = tmp_path / "trap.toml"
    toml_path.write_text(
        "\n".join(f"{k} = {v}" for k, v in chain.trap_config_to_dict(cfg).items()))
    assert chain.load_trap_config(toml_path) == cfg


def test_mode_set_json_round_trip():
    cfg = chain.default_config(4)
    modes = chain.normal_modes(cfg, chain.solve_equilibrium(cfg), Axis.Y)
    back = chain.mode_set_from_dict(chain.mode_set_to_dict(modes))
    np.testing.assert_allclose(back.frequencies, modes.frequencies)
    np.testing.assert_allclose(back.mode_vectors, modes.mode_vectors)
    np.testing.assert_allclose(back.lamb_dicke, modes.lamb_dicke)
    assert back.axis == modes.axis
