"""Smoke tests for the Python bindings on a small, fast instance."""

import math

import numpy as np
import pytest

import dmcv_py as dm


@pytest.fixture(scope="module")
def solved():
    scheme = dm.ModulationScheme(alpha=0.9, cutoff=6)
    channel = dm.HonestChannel(distance_km=10.0, excess_noise=0.01)
    return dm.solve_asymptotic(scheme, channel, max_iter=60, gap=0.05)


def test_scheme_and_channel():
    scheme = dm.ModulationScheme(alpha=0.9, delta_amp=0.9, delta_mod=0.9, cutoff=6)
    scheme.validate()
    assert scheme.module_count() == 8
    channel = dm.HonestChannel(distance_km=10.0)
    assert channel.transmittance() == pytest.approx(10 ** (-0.2), rel=1e-12)


def test_honest_statistics_shapes():
    scheme = dm.ModulationScheme(cutoff=6)
    channel = dm.HonestChannel(excess_noise=0.01)
    stats = dm.honest_statistics(channel, scheme)
    assert stats.pe.shape == (4, 8)
    assert stats.ec.shape == (4, 4)
    assert stats.tom.shape == (16,)
    assert stats.pe.sum() == pytest.approx(1.0, abs=1e-9)
    assert stats.ec.sum() == pytest.approx(1.0, abs=1e-9)
    assert stats.tom.sum() == pytest.approx(1.0, abs=1e-9)


def test_solve_and_certificate(solved):
    cert = solved.certificate
    assert solved.lower_bound > 0
    assert solved.upper_bound >= solved.lower_bound
    assert cert.nu_pe.shape == (4, 8)
    assert cert.nu_tom.shape == (16,)
    assert cert.eps_prime <= 1e-8
    # the certified bound is reproducible from the certificate fields
    rebuilt = cert.g0 + float(np.sum(cert.nu_pe * solved.stats.pe)) + float(
        np.dot(cert.nu_tom, solved.stats.tom)
    )
    assert rebuilt == pytest.approx(cert.lower_bound, abs=1e-6)


def test_asymptotic_rate(solved):
    leak = dm.ec_leak_rate(solved.stats.ec, 0.0, 1.0)
    rate = dm.asymptotic_rate(solved.certificate, solved.stats, leak)
    assert 0.0 < rate < 1.0


def test_finite_rate_pipeline(solved):
    sec = dm.SecurityParams()
    sec.n = 1e12
    sec.validate()
    grids = dm.default_rate_grids()
    point = dm.optimize_rate([solved], grids, sec, 0.01)
    assert point.finite_rate <= point.asymptotic_rate + 1e-9
    assert point.delta_pe > 0
    assert point.delta_tom > 0
    sec.n = 1e15
    later = dm.optimize_rate([solved], grids, sec, 0.01)
    assert later.finite_rate >= point.finite_rate - 1e-12


def test_special_functions():
    assert dm.gamma_fn(1.0) == pytest.approx(0.0, abs=1e-15)
    assert dm.gamma_fn(0.6) == pytest.approx(math.log2(5.0), rel=1e-13)
    pi = np.array([0.3, 0.7])
    h = np.array([-1.7, 0.0])
    delta = dm.multinoulli_deviation(pi, h, 1e6, 1e-3)
    assert delta > 0
    with pytest.raises(ValueError):
        dm.multinoulli_deviation(pi, np.array([1.0, 1.0]), 1e6, 1e-3)


def test_sampling_matches_quadrature():
    scheme = dm.ModulationScheme(cutoff=6)
    channel = dm.HonestChannel(excess_noise=0.01)
    analytic = dm.pe_statistics(channel, scheme)
    freq = dm.sample_rounds(channel, scheme, 200000, 7)
    sigma = np.sqrt(np.maximum(analytic * (1 - analytic) / 200000, 1e-300))
    assert np.max(np.abs(freq - analytic) / sigma) < 5.0
