import math

import numpy as np
import pytest

from ionpar import circuit as ci, experiments as ex
from ionpar.errors import ValidationError


# -- GHZ ------------------------------------------------------------------------

def test_ghz_noiseless_is_perfect():
    res = ex.ghz_experiment()
    assert res.report.fidelity == pytest.approx(1.0, abs=1e-10)
    assert res.report.parity_contrast == pytest.approx(1.0, abs=1e-10)
    # populations only on all-zeros / all-ones of the triple
    assert len(res.populations) == 2
    assert all(p == pytest.approx(0.5, abs=1e-12)
               for p in res.populations.values())


def test_ghz_parity_period_is_two_pi_over_three():
    res = ex.ghz_experiment()
    phases, values = res.scan.phases, res.scan.parities
    fit = res.report
    model = fit.parity_contrast * np.cos(3 * phases + fit.phase_offset)
    np.testing.assert_allclose(values, model, atol=1e-10)
    # parity reaches +-1 at the fitted extremum
    phi_star = -fit.phase_offset / 3
    extremum = ci.parity_scan(res.circuit, ex.GHZ_TRIPLE, [phi_star])
    assert abs(extremum.parities[0]) == pytest.approx(1.0, abs=1e-10)


def test_ghz_bus_exchange_invariance():
    """Swapping which pair rides the X vs Y bus leaves the state unchanged."""
    a, b, c = ex.GHZ_TRIPLE
    base = ex.ghz_circuit()
    swapped = ci.Circuit(5, (
        ci.Moment((ci.ms(a, b, np.pi / 4, "Y"), ci.ms(b, c, np.pi / 4, "X"))),
    ) + base.moments[1:])
    s1 = ci.simulate_state(base)
    s2 = ci.simulate_state(swapped)
    overlap = abs(np.vdot(s1, s2))
    assert overlap == pytest.approx(1.0, abs=1e-12)


def test_ghz_with_calibrated_noise_recovered_by_estimator():
    lam = ex.calibrate_depolarizing(0.99)
    noise = ci.NoiseModel(depolarizing_per_ms=lam)
    exact = ex.ghz_experiment(noise=noise)
    sampled = ex.ghz_experiment(noise=noise, shots=3000, seed=9)
    assert exact.report.fidelity < 1.0
    tol = 3 * max(sampled.report.contrast_stderr, 0.01)
    assert abs(sampled.report.fidelity - exact.report.fidelity) < tol


def test_calibrate_depolarizing_hits_target_on_single_ms():
    target = 0.99
    noise = ci.NoiseModel(depolarizing_per_ms=ex.calibrate_depolarizing(target))
    prep = ci.circuit(2, [ci.ms(0, 1, np.pi / 4)])
    res = ci.run(prep, noise)
    pops = res.probabilities[0] + res.probabilities[3]
    scan = ci.parity_scan(prep, (0, 1),
                          np.linspace(0, 2 * np.pi, 24, endpoint=False),
                          noise=noise)
    report = ci.estimate_fidelity(pops, scan)
    assert report.fidelity == pytest.approx(target, abs=1e-10)


# -- TFIM -----------------------------------------------------------------------

def test_tfim_config_defaults():
    cfg = ex.TfimConfig()
    assert cfg.spins == 5
    assert cfg.ratio == pytest.approx(0.096)
    assert cfg.bonds == ((0, 1), (1, 2), (2, 3), (3, 4))
    with pytest.raises(ValidationError):
        ex.TfimConfig(spins=1)


def test_zero_couplings_freeze_magnetization():
    # B = 0 and J dt = 0: no dynamics at all from the z-basis ground state
    cfg = ex.TfimConfig(steps=5, ratio=0.0, step_angle=0.0)
    trace = ex.tfim_trotter(cfg, "parallel")
    np.testing.assert_allclose(trace.magnetization, 5.0, atol=1e-12)


def test_exact_reference_field_only_is_static():
    # J = 0 limit realized by a vanishing step angle at fixed B dt
    cfg = ex.TfimConfig(steps=6)
    ref = ex.exact_reference(ex.TfimConfig(steps=6, ratio=1e30,
                                           step_angle=1e-30))
    # with J -> 0 (ratio -> inf at fixed B) the field commutes with m
    np.testing.assert_allclose(ref.magnetization, 5.0, atol=1e-6)
    assert ex.exact_reference(cfg).magnetization[0] == pytest.approx(5.0)


def test_parallel_and_sequential_traces_identical_noiseless():
    cfg = ex.TfimConfig(steps=10)
    tp = ex.tfim_trotter(cfg, "parallel")
    ts = ex.tfim_trotter(cfg, "sequential")
    np.testing.assert_allclose(tp.magnetization, ts.magnetization,
                               atol=1e-12)


def test_trotter_converges_to_exact_reference():
    """Halving dt reduces the max deviation at least twofold (it is in
    fact fourfold here: the all-real model has no dt-linear error term)."""
    base = ex.TfimConfig(steps=8, step_angle=np.pi / 10)
    fine = ex.TfimConfig(steps=16, step_angle=np.pi / 20)
    err = []
    for cfg in (base, fine):
        trotter = ex.tfim_trotter(cfg, "parallel")
        exact = ex.exact_reference(cfg)
        err.append(np.abs(trotter.magnetization
                          - exact.magnetization)[1:].max())
    assert err[1] < err[0]
    assert err[0] / err[1] > 2 * 0.8  # at least halves, 20 percent slack


def test_trotter_sampled_stderr():
    cfg = ex.TfimConfig(steps=3)
    trace = ex.tfim_trotter(cfg, "parallel", shots=2000, seed=4)
    exact = ex.tfim_trotter(cfg, "parallel")
    assert trace.stderr is not None
    assert np.all(np.abs(trace.magnetization - exact.magnetization)
                  < 6 * np.maximum(trace.stderr, 0.05))


def test_step_moments_structure():
    cfg = ex.TfimConfig()
    par = ex.trotter_step_moments(cfg, "parallel")
    seq = ex.trotter_step_moments(cfg, "sequential")
    # parallel: 2 entangling layers + 1 free rotation layer
    assert len(par) == 3 and len(seq) == 5
    assert par[-1].resolved_duration(ci.DEFAULT_TIMES) == 0.0
    par_ms = [op for m in par[:-1] for op in m.ops]
    assert all(op.kind == "MS" for op in par_ms)
    assert len(par_ms) == 4
    with pytest.raises(ValidationError):
        ex.trotter_step_moments(cfg, "diagonal")


def test_runtime_error_ratio_near_two():
    noise = ci.NoiseModel(t2=0.5)
    comp = ex.runtime_error_comparison(ex.TfimConfig(steps=10), noise)
    mask = comp.high_magnetization_mask()
    assert mask.sum() >= 2
    ratios = comp.ratios()[mask]
    assert np.all(ratios >= 1.6) and np.all(ratios <= 2.1)


def test_runtime_error_vanishes_without_noise():
    comp = ex.runtime_error_comparison(ex.TfimConfig(steps=4),
                                       ci.NoiseModel(t2=math.inf))
    assert np.all(comp.error_parallel == 0.0)
    assert np.all(comp.error_sequential == 0.0)


def test_doubling_moment_duration_doubles_small_errors():
    cfg = ex.TfimConfig(steps=6)
    noise = ci.NoiseModel(t2=5.0)
    base = ex.runtime_error_comparison(cfg, noise)
    doubled = ex.runtime_error_comparison(
        cfg, noise, times=ci.GateTimes(ms=2 * ci.DEFAULT_TIMES.ms))
    mask = base.error_parallel > 1e-6
    ratio = doubled.error_parallel[mask] / base.error_parallel[mask]
    np.testing.assert_allclose(ratio, 2.0, rtol=0.1)


def test_csv_writers():
    cfg = ex.TfimConfig(steps=2)
    trace = ex.tfim_trotter(cfg, "parallel")
    text = ex.trace_to_csv(trace)
    assert text.startswith("time,magnetization,stderr")
    assert len(text.strip().splitlines()) == 4
    res = ex.ghz_experiment(shots=100, seed=1)
    out = ex.scan_to_csv(res.scan)
    assert out.startswith("phase,parity,stderr")


def test_pair_fidelity_experiment_ideal_and_noisy():
    ideal = ex.pair_fidelity_experiment()
    for report in ideal["pairs"].values():
        assert report.fidelity == pytest.approx(1.0, abs=1e-10)
    for contrast in ideal["cross_pairs"].values():
        assert contrast < 1e-10

    lam = ex.calibrate_depolarizing(0.99)
    noisy = ex.pair_fidelity_experiment(noise=ci.NoiseModel(
        depolarizing_per_ms=lam))
    for report in noisy["pairs"].values():
        assert report.fidelity == pytest.approx(0.99, abs=1e-9)
    for contrast in noisy["cross_pairs"].values():
        assert contrast < 1e-10


def test_noise_model_per_qubit_t2():
    import math
    nm = ci.NoiseModel(t2=(100e-6, math.inf))
    circ = ci.Circuit(2, (ci.Moment((ci.h(0), ci.h(1)), duration=0.0),
                          ci.Moment((), duration=50e-6)))
    rho = ci.simulate_density(circ, nm)
    # qubit 0 coherence decays, qubit 1 untouched
    rho_t = rho.reshape(2, 2, 2, 2)
    assert abs(rho_t[0, 0, 1, 0] * 4) == pytest.approx(math.exp(-0.5))
    assert abs(rho_t[0, 0, 0, 1] * 4) == pytest.approx(1.0)
