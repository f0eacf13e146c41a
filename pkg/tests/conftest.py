"""Shared scene builders for the test suite."""

import numpy as np
import pytest

from ecalab import geometry, scene

FS = 25e6
BW = 16e6
CARRIER = 2 * np.pi * 600e6


def doppler_cell(n_samples, sample_rate=FS):
    return 2 * np.pi * sample_rate / n_samples


def make_node(rn=(8000.0, 0.0), io=(0.0, 0.0)):
    return geometry.NodeGeometry(io_position=io, rn_position=rn,
                                 carrier_angular_frequency=CARRIER)


def dd_scene(
    seed=11,
    n_samples=512,
    taps=3,
    max_delay=48,
    master=2048,
    sc_snr_db=20.0,
    dnr_db=20.0,
    cnr_db=20.0,
    rc_snr_db=60.0,
    sc_var=1.0,
    tau_cells=17.37,
    omega_cells=6.3,
    **kw,
):
    """Single-node delay/Doppler scene with direct truth."""
    if sc_var > 0:
        d = np.sqrt(sc_var * 10 ** (sc_snr_db / 10))
        b = np.sqrt(sc_var * 10 ** (dnr_db / 10))
        cn = np.sqrt(sc_var * 10 ** (cnr_db / 10))
        rc_var = 10 ** (-rc_snr_db / 10)
    else:
        d, b, cn, rc_var = 1.0, 2.0, 2.0, 0.0
    amps = scene.draw_amplitudes(seed, 1, taps, 1.0, b, d, cn)
    fields = dict(
        nodes=(make_node(),),
        target=geometry.TargetParams(5000.0, 1430.0, 70.0, -190.0),
        bandwidth=BW,
        sample_rate=FS,
        master_length=master,
        n_samples=n_samples,
        max_delay_samples=max_delay,
        clutter_taps=taps,
        amplitudes=amps,
        sc_noise_var=sc_var,
        rc_noise_var=rc_var,
        seed=seed,
        truth_delay_doppler=(
            (tau_cells / FS, omega_cells * doppler_cell(n_samples)),
        ),
    )
    fields.update(kw)
    return scene.Scenario(**fields)


def multistatic_scene(
    seed=31,
    n_samples=1024,
    taps=2,
    max_delay=32,
    master=4096,
    power_db=0.0,
    sc_snr_db=25.0,
    dnr_db=25.0,
    cnr_db=25.0,
    rc_snr_db=58.0,
    **kw,
):
    """Three-node scene with the square geometry and a moving target."""
    rns = [(-300.0, 300.0), (300.0, 300.0), (-300.0, -300.0)]
    nodes = tuple(make_node(rn) for rn in rns)
    g = 10 ** (power_db / 20)
    amps = scene.draw_amplitudes(
        seed,
        len(rns),
        taps,
        g,
        g * np.sqrt(10 ** (dnr_db / 10)),
        g * np.sqrt(10 ** (sc_snr_db / 10)),
        g * np.sqrt(10 ** (cnr_db / 10)),
    )
    fields = dict(
        nodes=nodes,
        target=geometry.TargetParams(10.0, 10.0, 100 * np.sqrt(2), 100 * np.sqrt(2)),
        bandwidth=BW,
        sample_rate=FS,
        master_length=master,
        n_samples=n_samples,
        max_delay_samples=max_delay,
        clutter_taps=taps,
        amplitudes=amps,
        sc_noise_var=1.0,
        rc_noise_var=10 ** (-rc_snr_db / 10),
        seed=seed,
    )
    fields.update(kw)
    return scene.Scenario(**fields)


@pytest.fixture
def small_scene():
    return dd_scene(n_samples=256, master=1024, max_delay=40, tau_cells=14.2)
