import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avery_sim.errors import EmptySegments, InvalidBand, OutOfTraceRange, ReversedInterval, TraceError
from avery_sim.harness import bundled_scenario
from avery_sim.traces import (
    BandwidthTrace,
    TraceSegmentSpec,
    bandwidth_at,
    constant_trace,
    generate_trace,
    integrate_megabits,
    parse_trace_csv,
    trace_to_csv,
)


def seg(kind, duration, **params):
    return TraceSegmentSpec(kind, duration, params)


def brute_integral(trace, t0, t1, steps=20000):
    """Midpoint rule on a fine grid; independent of the closed-form path."""
    h = (t1 - t0) / steps
    total = 0.0
    for k in range(steps):
        t = t0 + (k + 0.5) * h
        total += trace.samples[int(t // trace.resolution_s)] * h
    return total


def test_constant_segment():
    tr = generate_trace([seg("Constant", 60, level=12)], seed=0)
    assert len(tr) == 60
    assert set(tr.samples) == {12.0}


def test_random_walk_clamped_and_deterministic():
    spec = [seg("RandomWalk", 600, start=14, step_stddev=2)]
    a = generate_trace(spec, band=(8, 20), seed=42)
    b = generate_trace(spec, band=(8, 20), seed=42)
    assert len(a) == 600
    assert all(8 <= s <= 20 for s in a.samples)
    assert a.samples == b.samples
    assert generate_trace(spec, band=(8, 20), seed=43).samples != a.samples


def test_random_walk_golden_values():
    """Box-Muller over raw PCG64 words, recomputed here from numpy directly."""
    tr = generate_trace([seg("RandomWalk", 10, start=14, step_stddev=2)], seed=42)
    child = np.random.SeedSequence(42).spawn(1)[0]
    words = np.random.PCG64(child).random_raw(18)
    level, expected = 14.0, [14.0]
    for i in range(9):
        u1 = int(words[2 * i]) // 2**11 / 2.0**53
        u2 = int(words[2 * i + 1]) // 2**11 / 2.0**53
        z = math.sqrt(-2 * math.log(1 - u1)) * math.cos(2 * math.pi * u2)
        level = min(20.0, max(8.0, level + 2 * z))
        expected.append(level)
    assert tr.samples == tuple(expected)
    # frozen regression values
    assert tr.samples[1] == pytest.approx(17.779979318242, abs=1e-9)
    assert tr.samples[3] == pytest.approx(18.546044738308, abs=1e-9)


def test_ramp_and_step_drop():
    tr = generate_trace([seg("LinearRamp", 5, start=10, end=14), seg("StepDrop", 10, high=18, low=9)], seed=1)
    assert tr.samples[:5] == (10.0, 11.0, 12.0, 13.0, 14.0)
    assert tr.samples[5:] == (18.0,) * 5 + (9.0,) * 5


def test_out_of_band_levels_are_clamped():
    tr = generate_trace([seg("Constant", 3, level=30), seg("Constant", 3, level=1)], band=(8, 20))
    assert tr.samples == (20.0,) * 3 + (8.0,) * 3


def test_generate_errors():
    with pytest.raises(EmptySegments):
        generate_trace([], seed=0)
    with pytest.raises(InvalidBand):
        generate_trace([seg("Constant", 1, level=10)], band=(20, 8))
    with pytest.raises(TraceError):
        seg("Constant", 1)
    with pytest.raises(TraceError):
        generate_trace([seg("Constant", 1.5, level=10)])


def test_bundled_accuracy_trace_sub_threshold_fraction():
    tr = bundled_scenario("ref_accuracy.scenario.json").resolve_trace()
    assert len(tr) == 1200
    below = sum(1 for s in tr.samples if s < 11.68)
    assert abs(below / 1200 - 0.49) <= 0.01


def test_bundled_throughput_trace_mean():
    tr = bundled_scenario("ref_throughput.scenario.json").resolve_trace()
    assert len(tr) == 1200
    assert math.fsum(tr.samples) / 1200 == pytest.approx(12.284, abs=0.005)


def test_bandwidth_at():
    assert bandwidth_at(constant_trace(12, 60), 5.7) == 12.0
    tr = BandwidthTrace((10.0, 16.0))
    assert bandwidth_at(tr, 1.0) == 16.0
    assert bandwidth_at(tr, 0.999) == 10.0
    with pytest.raises(OutOfTraceRange):
        bandwidth_at(tr, 2.0)
    with pytest.raises(OutOfTraceRange):
        bandwidth_at(tr, -0.1)


def test_bandwidth_at_fractional_resolution_boundary():
    tr = BandwidthTrace((1.0, 2.0, 3.0, 4.0), resolution_s=0.1)
    # 0.3 / 0.1 == 2.9999999999999996 in floating point
    assert bandwidth_at(tr, 0.3) == 4.0


def test_integrate_examples():
    assert integrate_megabits(constant_trace(12, 60), 0, 2) == 24.0
    tr = BandwidthTrace((8.0, 20.0))
    assert integrate_megabits(tr, 0.5, 1.5) == pytest.approx(14.0, abs=1e-12)
    assert integrate_megabits(tr, 0.7, 0.7) == 0.0


def test_integrate_errors():
    tr = BandwidthTrace((8.0, 20.0))
    with pytest.raises(ReversedInterval):
        integrate_megabits(tr, 1.5, 0.5)
    with pytest.raises(OutOfTraceRange):
        integrate_megabits(tr, 0, 2.5)


traces = st.builds(
    lambda samples, res: BandwidthTrace(tuple(samples), resolution_s=res),
    st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=40),
    st.sampled_from([0.1, 0.5, 1.0, 2.0]),
)


@given(traces, st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_integral_additive(tr, a, b, c):
    t0, t1, t2 = sorted(x * tr.duration_s for x in (a, b, c))
    whole = integrate_megabits(tr, t0, t2)
    parts = integrate_megabits(tr, t0, t1) + integrate_megabits(tr, t1, t2)
    assert whole == pytest.approx(parts, abs=1e-9)


@given(traces, st.data())
def test_integral_aligned_equals_sample_sum(tr, data):
    i = data.draw(st.integers(0, len(tr)))
    j = data.draw(st.integers(i, len(tr)))
    got = integrate_megabits(tr, i * tr.resolution_s, j * tr.resolution_s)
    assert got == tr.resolution_s * math.fsum(tr.samples[i:j])


@settings(max_examples=30, deadline=None)
@given(traces, st.floats(0, 1), st.floats(0, 1))
def test_integral_matches_brute_force(tr, a, b):
    t0, t1 = sorted(x * tr.duration_s for x in (a, b))
    # each sample boundary may be misattributed by one midpoint step
    bound = max(tr.samples) * tr.duration_s / 20000 * (len(tr) + 2) + 1e-9
    assert integrate_megabits(tr, t0, t1) == pytest.approx(brute_integral(tr, t0, t1), abs=bound)


@given(st.integers(0, 2**64 - 1))
def test_generation_clamped_for_any_seed(seed):
    tr = generate_trace(
        [seg("RandomWalk", 50, start=14, step_stddev=5), seg("LinearRamp", 10, start=0, end=40)],
        band=(8, 20),
        seed=seed,
    )
    assert min(tr.samples) >= 8 and max(tr.samples) <= 20


def test_csv_round_trip():
    tr = generate_trace([seg("RandomWalk", 30, start=14, step_stddev=1)], seed=3)
    text = trace_to_csv(tr)
    assert text.startswith("time_s,bandwidth_mbps\n")
    back = parse_trace_csv(text)
    assert back.resolution_s == 1.0
    assert back.samples == pytest.approx(tr.samples, abs=1e-6)


def test_csv_rejects_non_uniform_steps():
    with pytest.raises(TraceError):
        parse_trace_csv("time_s,bandwidth_mbps\n0,10\n1,10\n3,10\n")
    with pytest.raises(TraceError):
        parse_trace_csv("t,b\n0,10\n")
    with pytest.raises(TraceError):
        parse_trace_csv("time_s,bandwidth_mbps\n0,25\n", band=(8, 20))
