import numpy as np
import pytest

from ionpar import chain, pulse
from ionpar.chain import Axis
from ionpar.errors import (AlignmentError, DesignError, PowerLimitError,
                           ValidationError)
pytestmark = pytest.mark.filterwarnings(
    "ignore:Lamb-Dicke validity metric")


from oracles import alpha_quadrature, chi_quadrature


@pytest.fixture(scope="module")
def seven_ion_modes():
    cfg = chain.default_config(7)
    eq = chain.solve_equilibrium(cfg)
    return cfg, chain.normal_modes(cfg, eq, Axis.X)


@pytest.fixture(scope="module")
def single_ion_modes():
    cfg = chain.default_config(1)
    eq = chain.solve_equilibrium(cfg)
    return cfg, chain.normal_modes(cfg, eq, Axis.X)


def random_schedule(modes, seed, tau=40e-6, n_seg=6, phases=(0.0, 0.0),
                    pair=(2, 4), offset=2 * np.pi * 25e3):
    rng = np.random.default_rng(seed)
    segs = [(tau / n_seg, a, b)
            for a, b in zip(rng.uniform(-2e5, 2e5, n_seg),
                            rng.uniform(-2e5, 2e5, n_seg))]
    return pulse.PulseSchedule.from_segments(
        pair, modes.axis, pulse.default_detuning(modes, offset), segs,
        motional_phase=phases)


# -- schedule validation -------------------------------------------------------

def test_segment_durations_must_sum_to_duration():
    with pytest.raises(ValidationError):
        pulse.PulseSchedule(qubit_pair=(0, 1), axis=Axis.X, detuning=1e6,
                            duration=2.0, segment_durations=[1.0, 0.5],
                            amplitudes_p=[1.0, 1.0], amplitudes_q=[1.0, 1.0])


def test_pair_must_be_distinct():
    with pytest.raises(ValidationError):
        pulse.zero_schedule((3, 3), Axis.X, 1e6, 1e-4, 4)


# -- alpha ----------------------------------------------------------------------

def test_zero_drive_gives_zero_alpha(seven_ion_modes):
    _, modes = seven_ion_modes
    sched = pulse.zero_schedule((2, 4), Axis.X, pulse.default_detuning(modes),
                                100e-6, 5)
    for k in range(7):
        assert pulse.alpha_final(sched, modes, 2, k) == 0.0


def test_alpha_trajectory_starts_at_zero(seven_ion_modes):
    _, modes = seven_ion_modes
    traj = pulse.alpha_trajectory(random_schedule(modes, 1), modes, 2, 0)
    assert traj.alphas[0] == 0.0
    assert traj.times[0] == 0.0
    assert traj.final == traj.alphas[-1]


def test_single_segment_loop_closure(single_ion_modes):
    """Constant drive with delta*tau = 2*pi closes the co-rotating loop.

    The leftover alpha is the counter-rotating residual, small of order
    eta*Omega/(mu + omega), and must match quadrature.  delta is chosen
    incommensurate with omega so that residual does not also vanish.
    """
    _, modes = single_ion_modes
    omega = modes.frequencies[0]
    delta = 2 * np.pi * 28.7e3
    tau = 2 * np.pi / delta
    mu = omega + delta
    amp = 2 * np.pi * 20e3
    sched = pulse.PulseSchedule.from_segments(
        (0, 1), Axis.X, mu, [(tau, amp, amp)])
    # NB the schedule's pair references a 1-ion chain only through ion 0
    alpha = pulse.alpha_final(sched, modes, 0, 0)
    eta = modes.lamb_dicke[0, 0]
    full_scale = eta * amp * tau
    counter_scale = eta * amp / (mu + omega)
    assert abs(alpha) < 3 * counter_scale  # co-rotating loop closed
    assert abs(alpha) < 1e-2 * full_scale
    quad = alpha_quadrature(sched, modes, 0, 0)
    assert abs(alpha - quad) < 1e-9 * abs(quad)


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("phases", [(0.0, 0.0), (0.7, -1.3)])
def test_alpha_matches_quadrature(seven_ion_modes, seed, phases):
    _, modes = seven_ion_modes
    sched = random_schedule(modes, seed, phases=phases)
    for ion in sched.qubit_pair:
        for k in (0, 2, 6):
            closed = pulse.alpha_final(sched, modes, ion, k)
            quad = alpha_quadrature(sched, modes, ion, k)
            assert closed == pytest.approx(quad, rel=1e-9)


def test_alpha_trajectory_matches_quadrature_at_boundaries(seven_ion_modes):
    _, modes = seven_ion_modes
    sched = random_schedule(modes, 11, n_seg=4)
    traj = pulse.alpha_trajectory(sched, modes, 4, 1)
    for s in range(1, 5):
        clipped = pulse.PulseSchedule.from_segments(
            sched.qubit_pair, sched.axis, sched.detuning,
            list(zip(sched.segment_durations[:s], sched.amplitudes_p[:s],
                     sched.amplitudes_q[:s])))
        quad = alpha_quadrature(clipped, modes, 4, 1)
        assert traj.alphas[s] == pytest.approx(quad, rel=1e-9)


def test_alpha_exact_resonance_is_finite(single_ion_modes):
    """mu = omega_k must hit the analytic limit, not divide by zero."""
    _, modes = single_ion_modes
    omega = modes.frequencies[0]
    tau = 20e-6
    sched = pulse.PulseSchedule.from_segments(
        (0, 1), Axis.X, omega, [(tau, 1e5, 1e5)])
    closed = pulse.alpha_final(sched, modes, 0, 0)
    assert np.isfinite(closed.real) and np.isfinite(closed.imag)
    quad = alpha_quadrature(sched, modes, 0, 0)
    assert closed == pytest.approx(quad, rel=1e-9)
    # resonant drive grows linearly: |alpha| ~ eta*Omega*tau/2
    assert abs(closed) > 0.25 * modes.lamb_dicke[0, 0] * 1e5 * tau


# -- chi --------------------------------------------------------------------------

def test_zero_drive_gives_zero_chi(seven_ion_modes):
    _, modes = seven_ion_modes
    sched = pulse.zero_schedule((2, 4), Axis.X, pulse.default_detuning(modes),
                                100e-6, 5)
    assert pulse.chi_angle(sched, modes) == 0.0


def test_chi_bilinear_scaling(seven_ion_modes):
    _, modes = seven_ion_modes
    sched = random_schedule(modes, 5)
    chi1 = pulse.chi_angle(sched, modes)
    scaled = pulse.PulseSchedule.from_segments(
        sched.qubit_pair, sched.axis, sched.detuning,
        list(zip(sched.segment_durations, 2 * sched.amplitudes_p,
                 2 * sched.amplitudes_q)))
    assert pulse.chi_angle(scaled, modes) == pytest.approx(4 * chi1, rel=1e-10)


@pytest.mark.parametrize("seed,phases", [(0, (0.0, 0.0)), (1, (0.4, 2.1))])
def test_chi_matches_double_quadrature(seven_ion_modes, seed, phases):
    _, modes = seven_ion_modes
    sched = random_schedule(modes, seed, phases=phases, n_seg=5)
    closed = pulse.chi_angle(sched, modes)
    quad = chi_quadrature(sched, modes)
    assert closed == pytest.approx(quad, rel=1e-8)


# -- design ------------------------------------------------------------------------

PAPER_PAIRS = [(3, 5), (2, 4), (1, 2), (3, 4)]  # register labels, 1-based


@pytest.mark.parametrize("pair", PAPER_PAIRS)
def test_design_closes_all_modes_and_hits_chi(seven_ion_modes, pair):
    _, modes = seven_ion_modes
    ions = tuple(p for p in pair)  # chain indices of register labels 1..5
    sched = pulse.design_amplitude_modulated(
        ions, modes, tau=200e-6, n_segments=15,
        mu=pulse.default_detuning(modes), chi_target=np.pi / 4)
    assert pulse.normalized_closure(sched, modes) < 1e-10
    assert pulse.chi_angle(sched, modes) == pytest.approx(np.pi / 4, abs=1e-9)
    np.testing.assert_array_equal(np.abs(sched.amplitudes_p),
                                  np.abs(sched.amplitudes_q))


def test_design_single_mode_chain():
    """A single retained mode closes with the minimal segment count."""
    cfg = chain.default_config(2)
    full = chain.normal_modes(cfg, chain.solve_equilibrium(cfg), Axis.X)
    modes = chain.retain_modes(full, [0])  # COM only
    omega = modes.frequencies[0]
    delta = 2 * np.pi * 40e3
    tau = 2 * np.pi / delta  # delta * tau = 2 pi
    sched = pulse.design_amplitude_modulated(
        (0, 1), modes, tau=tau, n_segments=3, mu=omega + delta,
        chi_target=np.pi / 4)
    assert pulse.normalized_closure(sched, modes) < 1e-10
    assert pulse.chi_angle(sched, modes) == pytest.approx(np.pi / 4, abs=1e-8)


def test_design_zero_target_returns_zero_pulse(seven_ion_modes):
    _, modes = seven_ion_modes
    sched = pulse.design_amplitude_modulated(
        (2, 4), modes, tau=100e-6, n_segments=15,
        mu=pulse.default_detuning(modes), chi_target=0.0)
    assert np.all(sched.amplitudes_p == 0.0)
    assert np.all(sched.amplitudes_q == 0.0)


def test_design_rejects_too_few_segments(seven_ion_modes):
    _, modes = seven_ion_modes
    with pytest.raises(ValidationError):
        pulse.design_amplitude_modulated(
            (2, 4), modes, tau=100e-6, n_segments=7,
            mu=pulse.default_detuning(modes), chi_target=np.pi / 4)


def test_design_infeasible_when_constraints_saturate():
    """N+1 segments satisfy the precondition but generically leave no slack."""
    cfg = chain.default_config(2)
    full = chain.normal_modes(cfg, chain.solve_equilibrium(cfg), Axis.X)
    modes = chain.retain_modes(full, [0])
    omega = modes.frequencies[0]
    with pytest.raises(DesignError):
        pulse.design_amplitude_modulated(
            (0, 1), modes, tau=35e-6, n_segments=2,
            mu=omega + 2 * np.pi * 37e3, chi_target=np.pi / 4)


def test_design_power_limit(seven_ion_modes):
    _, modes = seven_ion_modes
    with pytest.raises(PowerLimitError):
        pulse.design_amplitude_modulated(
            (2, 4), modes, tau=200e-6, n_segments=15,
            mu=pulse.default_detuning(modes), chi_target=np.pi / 4,
            omega_max=2 * np.pi * 1e3)


def test_design_deterministic(seven_ion_modes):
    _, modes = seven_ion_modes
    kwargs = dict(pair=(2, 4), modes=modes, tau=150e-6, n_segments=15,
                  mu=pulse.default_detuning(modes), chi_target=np.pi / 4)
    a = pulse.design_amplitude_modulated(**kwargs)
    b = pulse.design_amplitude_modulated(**kwargs)
    np.testing.assert_array_equal(a.amplitudes_p, b.amplitudes_p)
    np.testing.assert_array_equal(a.amplitudes_q, b.amplitudes_q)


def test_design_negative_chi_target(seven_ion_modes):
    _, modes = seven_ion_modes
    sched = pulse.design_amplitude_modulated(
        (1, 3), modes, tau=150e-6, n_segments=15,
        mu=pulse.default_detuning(modes), chi_target=-np.pi / 8)
    assert pulse.chi_angle(sched, modes) == pytest.approx(-np.pi / 8, abs=1e-9)
    assert pulse.normalized_closure(sched, modes) < 1e-10


# -- summed drive -----------------------------------------------------------------

def test_summed_drive_single_schedule(seven_ion_modes):
    _, modes = seven_ion_modes
    sched = random_schedule(modes, 2)
    drive = pulse.summed_drive([sched], 2)
    np.testing.assert_allclose(drive.totals, np.abs(sched.amplitudes_p))
    assert drive.maximum == pytest.approx(np.abs(sched.amplitudes_p).max())


def test_summed_drive_shared_ion_triangle_inequality(seven_ion_modes):
    _, modes = seven_ion_modes
    s1 = random_schedule(modes, 3, pair=(3, 5))
    s2 = random_schedule(modes, 4, pair=(2, 5), n_seg=5)
    drive = pulse.summed_drive([s1, s2], 5)
    assert drive.maximum <= (np.abs(s1.amplitudes_q).max()
                             + np.abs(s2.amplitudes_q).max()) + 1e-12
    assert pulse.overlapping_ions([s1, s2]) == {5}


def test_summed_drive_disjoint_pairs_have_no_overlap(seven_ion_modes):
    _, modes = seven_ion_modes
    s1 = random_schedule(modes, 3, pair=(3, 5))
    s2 = random_schedule(modes, 4, pair=(2, 4))
    assert pulse.overlapping_ions([s1, s2]) == set()
    drive = pulse.summed_drive([s1, s2], 3)
    np.testing.assert_allclose(drive.totals, np.abs(s1.amplitudes_p))


def test_summed_drive_mismatched_durations(seven_ion_modes):
    _, modes = seven_ion_modes
    s1 = random_schedule(modes, 3, tau=40e-6)
    s2 = random_schedule(modes, 4, tau=50e-6)
    with pytest.raises(AlignmentError):
        pulse.summed_drive([s1, s2], 2)


# -- serialization -------------------------------------------------------------------

def test_schedule_json_round_trip(tmp_path, seven_ion_modes):
    _, modes = seven_ion_modes
    sched = pulse.design_amplitude_modulated(
        (3, 5), modes, tau=120e-6, n_segments=15,
        mu=pulse.default_detuning(modes), chi_target=np.pi / 4)
    path = tmp_path / "sched.json"
    pulse.save_schedule(sched, path)
    back = pulse.load_schedule(path)
    assert back.qubit_pair == sched.qubit_pair
    assert back.axis == sched.axis
    assert back.detuning == pytest.approx(sched.detuning, rel=1e-15)
    np.testing.assert_allclose(back.segment_durations, sched.segment_durations)
    np.testing.assert_allclose(back.amplitudes_p, sched.amplitudes_p)
    np.testing.assert_allclose(back.amplitudes_q, sched.amplitudes_q)

    raw = pulse.schedule_to_dict(sched)
    assert set(raw) == {"pair", "axis", "detuning_hz", "tau_s", "segments"}
    assert set(raw["segments"][0]) == {"dt_s", "omega_p_rad_s", "omega_q_rad_s"}


def test_lamb_dicke_validity_metric(seven_ion_modes):
    _, modes = seven_ion_modes
    sched = random_schedule(modes, 8)
    metric = pulse.lamb_dicke_validity(sched, modes)
    eta = np.abs(modes.lamb_dicke[:, [2, 4]]).max(axis=1)
    expected = np.max(eta * sched.max_amplitude
                      / np.abs(sched.detuning - modes.frequencies))
    assert metric == pytest.approx(expected)


def test_chi_oracle_panel_settings_agree(seven_ion_modes):
    """The fast oracle settings used by the acceptance suite are validated
    against the dense defaults here."""
    _, modes = seven_ion_modes
    sched = random_schedule(modes, 21, n_seg=4, tau=25e-6)
    dense = chi_quadrature(sched, modes)
    fast = chi_quadrature(sched, modes, panels_per_cycle=2, order=12)
    assert fast == pytest.approx(dense, rel=1e-10)
