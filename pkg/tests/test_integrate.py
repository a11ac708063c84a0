"""ODE integration engine: accuracy, conservation, failure modes."""

import numpy as np
import pytest

from crn_ude.dsl import parse_network
from crn_ude.integrate import (
    IntegrationError,
    IntegratorConfig,
    integrate,
    sample,
)
from crn_ude.network import assemble_rhs

DECAY = parse_network("species X = 1.0\nparam k = 5.0\nX --[k]--> 0\n")
ISOMER = parse_network(
    "species A = 2.0\nspecies B = 0.0\nparam k = 1.0\nA --[k]--> B\n"
)


def test_linear_decay_matches_exponential():
    traj = integrate(assemble_rhs(DECAY), [1.0], (0.0, 1.0), [5.0])
    ts = np.linspace(0.0, 1.0, 11)
    got = sample(traj, ts)[:, 0]
    np.testing.assert_allclose(got, np.exp(-5.0 * ts), rtol=1e-5, atol=1e-8)


def test_tighter_tolerances_reduce_error():
    errors = []
    for rtol in (1e-4, 1e-6, 1e-8):
        cfg = IntegratorConfig(rtol=rtol, atol=rtol * 1e-2)
        traj = integrate(assemble_rhs(DECAY), [1.0], (0.0, 1.0), [5.0], cfg)
        errors.append(abs(traj(1.0)[0, 0] - np.exp(-5.0)))
    assert errors[0] > errors[2]
    assert errors[2] < 1e-9


def test_mass_conservation():
    traj = integrate(assemble_rhs(ISOMER), [2.0, 0.0], (0.0, 5.0), [1.0])
    totals = traj.states.sum(axis=1)
    np.testing.assert_allclose(totals, 2.0, rtol=1e-7)


def test_deterministic_replay():
    a = integrate(assemble_rhs(DECAY), [1.0], (0.0, 1.0), [5.0])
    b = integrate(assemble_rhs(DECAY), [1.0], (0.0, 1.0), [5.0])
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.states, b.states)


def test_dense_output_matches_steps():
    traj = integrate(assemble_rhs(ISOMER), [2.0, 0.0], (0.0, 5.0), [1.0])
    np.testing.assert_allclose(traj(traj.times), traj.states, rtol=1e-12)


def test_divergent_system_raises():
    growth = parse_network("species X = 1.0\nparam k = 1.0\n2X --[k]--> 3X\n")
    with pytest.raises(IntegrationError):
        integrate(assemble_rhs(growth), [1.0], (0.0, 100.0), [5.0])


def test_bad_inputs_rejected():
    sys = assemble_rhs(DECAY)
    with pytest.raises(ValueError, match="t0 < t1"):
        integrate(sys, [1.0], (1.0, 0.0), [5.0])
    with pytest.raises(ValueError, match="nonfinite"):
        integrate(sys, [np.nan], (0.0, 1.0), [5.0])
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=-1.0)


def test_sample_outside_span_rejected():
    traj = integrate(assemble_rhs(DECAY), [1.0], (0.0, 1.0), [5.0])
    with pytest.raises(ValueError, match="outside"):
        sample(traj, [0.5, 2.0])


def test_trajectory_csv_round_trip():
    traj = integrate(assemble_rhs(ISOMER), [2.0, 0.0], (0.0, 1.0), [1.0])
    text = traj.to_csv(["A", "B"])
    lines = text.strip().splitlines()
    assert lines[0] == "t,A,B"
    parsed = np.array([[float(v) for v in l.split(",")] for l in lines[1:]])
    np.testing.assert_array_equal(parsed[:, 0], traj.times)
    np.testing.assert_array_equal(parsed[:, 1:], traj.states)
