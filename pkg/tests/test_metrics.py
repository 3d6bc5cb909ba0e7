import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mecoffload.metrics import (DeviceProfile, RunningZScore, StallError, average_latency, compute_energy,
                                compute_latency, device_power, load_status, network_usage,
                                placement_entropy, power_for_rate, rms_deviation, top_share,
                                total_energy, transfer_latency, transmission_energy,
                                transmission_rate, work_duration_ms)

P100 = DeviceProfile(kind="edge", p_full_watts=100.0, k_ratio=0.5, proc_rate_cycles_per_s=1e9)
RADIO = DeviceProfile(kind="mobile", p_full_watts=10.0, k_ratio=0.8, proc_rate_cycles_per_s=1e9,
                      channel_gain=1e-5, noise_watts=1e-13, bandwidth_hz=1e6)


def test_device_power_cases():
    assert device_power(0.0, P100) == 0.0
    assert device_power(1.0, P100) == 50.0
    assert device_power(0.4, P100) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        device_power(1.2, P100)


def test_compute_energy_cases():
    assert compute_energy(np.full(10, 0.4), P100, step_ms=1000.0) == pytest.approx(200.0)
    assert compute_energy(np.zeros(50), P100, step_ms=1.0) == 0.0
    assert compute_energy([1.0, 0.0], P100, step_ms=1000.0) == pytest.approx(50.0)
    with pytest.raises(ValueError):
        compute_energy([0.5], P100, step_ms=1.0, t0_ms=0.0, t_ms=5.0)


def test_rate_oracle_and_round_trip():
    assert transmission_rate(0.0, RADIO) == 0.0
    r = transmission_rate(0.1, RADIO)
    assert r == pytest.approx(2.3253e7, rel=1e-4)
    wide = DeviceProfile(**{**RADIO.__dict__, "bandwidth_hz": 2e6})
    assert transmission_rate(0.1, wide) == pytest.approx(2 * r, rel=1e-12)
    assert power_for_rate(0.0, RADIO) == 0.0
    assert power_for_rate(r, RADIO) == pytest.approx(0.1, rel=1e-9)


def test_power_for_rate_matches_bisection():
    target = 1e6
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if transmission_rate(mid, RADIO) < target else (lo, mid)
    assert power_for_rate(target, RADIO) == pytest.approx((lo + hi) / 2, rel=1e-9)


def test_transmission_and_total_energy():
    assert transmission_energy(0.1, 2.0) == pytest.approx(0.2)
    assert total_energy([], []) == 0.0
    # one mobile at u=0.5 and one edge at u=0.25 for 2 s, mobile sends at 0.1 W for 1 s
    mob = DeviceProfile(kind="mobile", p_full_watts=10.0, k_ratio=0.8, proc_rate_cycles_per_s=1e9)
    e_mob = compute_energy([0.5, 0.5], mob, 1000.0)
    e_edge = compute_energy([0.25, 0.25], P100, 1000.0)
    assert total_energy([e_mob, e_edge], [transmission_energy(0.1, 1.0)]) == pytest.approx(8.0 + 25.0 + 0.1)


def test_transfer_latency_cases():
    assert transfer_latency(1e6, 1e6, False, False, [1e6], [1e6], 1.0) == 0.0
    assert transfer_latency(1e6, 0, True, False, [1e6], [1e6], 1.0) == pytest.approx(1000.0)
    rates = np.r_[np.full(500, 1e6), np.full(10, 5e5)]
    assert transfer_latency(1e6, 0, True, False, rates, [1e6], 1.0) == pytest.approx(1500.0)
    with pytest.raises(StallError):
        transfer_latency(1e6, 0, True, False, [0.0], [1e6], 1.0)


def test_compute_latency_cases():
    assert compute_latency(1e9, True, 1e9, 5e8, 1.0) == pytest.approx(1000.0)
    assert compute_latency(1e9, True, 1e9, 1e9, 1.0) == compute_latency(1e9, False, 1e9, 1e9, 1.0)
    rates = np.r_[np.full(500, 1e9), np.full(10, 5e8)]
    assert compute_latency(1e9, True, rates, 1e9, 1.0) == pytest.approx(1500.0)
    # halving every rate doubles the time
    assert compute_latency(3e7, True, 5e8, 1e9, 1.0) == pytest.approx(2 * compute_latency(3e7, True, 1e9, 1e9, 1.0))


def test_average_latency_cases():
    assert average_latency([[(2.0, 3.0)]]) == 5.0
    one = [[(1.0, 4.0), (2.0, 2.0)]]
    assert average_latency(one * 2) == average_latency(one)
    with pytest.raises(ValueError):
        average_latency([])


def test_load_status_cases():
    loads, ls = load_status(np.full((3, 2, 5), 0.4), 1000.0)
    assert ls == pytest.approx(0.0, abs=1e-15)
    u = np.array([[[0.2]], [[0.8]]])
    loads, ls = load_status(u, 1000.0, weights=(1.0,))
    assert ls == pytest.approx(0.3)
    a = np.zeros((2, 2, 3))
    a[:, 0] = [[0.1, 0.2, 0.3], [0.5, 0.5, 0.5]]
    b = a.copy()
    b[:, 1] = np.random.default_rng(0).random((2, 3))
    assert load_status(a, 1.0, (1.0, 0.0))[1] == load_status(b, 1.0, (1.0, 0.0))[1]
    with pytest.raises(ValueError):
        load_status(a, 1.0, (0.5, 0.6))


def test_network_usage_cases():
    assert network_usage(0.0, 1.0, 3, 1.0) == 0.0
    assert network_usage(1e6, 1.0, 1, 1.0) == 1e6
    assert network_usage(1e6, 1.0, 1, 2.0) == pytest.approx(0.5e6)


def test_running_zscore():
    z = RunningZScore()
    xs = [1.0, 4.0, 2.0, 8.0]
    for x in xs:
        z.push(x)
    assert z.mean == pytest.approx(np.mean(xs))
    assert z.std == pytest.approx(np.std(xs))
    assert z.z(z.mean + z.std) == pytest.approx(1.0)


def test_placement_summaries():
    assert placement_entropy([5, 0, 0]) == 0.0
    assert placement_entropy([1, 1, 1, 1]) == pytest.approx(math.log(4))
    assert top_share([8, 1, 1, 0, 0, 0, 0, 0, 0, 0], 0.3) == pytest.approx(1.0)
    assert top_share([0, 0, 0, 5, 5], 0.3) == 0.0


# --- independent brute-force re-evaluation ------------------------------------

def brute_energy(u, profile, step_ms, t0, t):
    total = 0.0
    for k, uk in enumerate(u):
        a, b = max(k * step_ms, t0), min((k + 1) * step_ms, t0 + t)
        if b > a and uk > 0:
            total += profile.k_ratio * profile.p_full_watts * uk * (b - a) / 1000.0
    return total


def brute_duration(work, rates, step_ms, start):
    # cumulative capacity at every grid edge, then solve inside the crossing step
    rates = np.asarray(rates, dtype=float)
    edges = np.arange(len(rates) + 1) * step_ms
    cap = np.concatenate([[0.0], np.cumsum(rates * step_ms / 1000.0)])
    k0 = int(start // step_ms)
    done_before = cap[k0] + rates[k0] * (start - edges[k0]) / 1000.0 if k0 < len(rates) else cap[-1]
    need = done_before + work
    k = int(np.searchsorted(cap, need, side="left")) - 1
    if k >= len(rates):
        return edges[-1] + (need - cap[-1]) / rates[-1] * 1000.0 - start
    k = max(k, k0)
    return edges[k] + (need - cap[k]) / rates[k] * 1000.0 - start


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def test_kernels_match_brute_force_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        step = float(rng.choice([0.5, 1.0, 2.0]))
        u = rng.random(n) * (rng.random(n) > 0.2)
        t0 = rng.uniform(0, n * step)
        t = rng.uniform(0, n * step - t0)
        prof = DeviceProfile(kind="edge", p_full_watts=rng.uniform(1, 200), k_ratio=rng.uniform(0.1, 1),
                             proc_rate_cycles_per_s=1e9)
        e = compute_energy(u, prof, step, t0, t)
        assert rel(e, brute_energy(u, prof, step, t0, t)) < 1e-9 or e == 0.0

        rates = rng.uniform(1e5, 1e7, n)
        work = rng.uniform(1, 2 * rates.sum() * step / 1000.0)
        start = float(rng.uniform(0, n * step * 0.9))
        assert rel(work_duration_ms(work, rates, step, start), brute_duration(work, rates, step, start)) < 1e-9

        d, k = int(rng.integers(1, 8)), 2
        usage = rng.random((d, k, n))
        w = rng.dirichlet(np.ones(k))
        loads, ls = load_status(usage, step, w)
        manual = [sum(w[j] * usage[i, j, s] for j in range(k) for s in range(n)) * step / 1000.0 for i in range(d)]
        np.testing.assert_allclose(loads, manual, rtol=1e-9)
        mean = sum(manual) / d
        assert abs(ls - math.sqrt(sum((x - mean) ** 2 for x in manual) / d)) <= 1e-9 * max(ls, 1e-12) + 1e-15
        assert rms_deviation(manual) == pytest.approx(ls, rel=1e-9, abs=1e-15)

        bits, lat, apps, win = rng.uniform(0, 1e8), rng.uniform(0, 5), int(rng.integers(1, 50)), rng.uniform(0.1, 10)
        assert rel(network_usage(bits, lat, apps, win), lat * apps * bits / win) < 1e-9 or bits == 0 or lat == 0


@settings(max_examples=300, deadline=None)
@given(p=st.floats(0.0, 1.0), gain_db=st.floats(-90, -30), bw=st.floats(1e5, 1e7))
def test_rate_power_round_trip(p, gain_db, bw):
    prof = DeviceProfile(kind="mobile", p_full_watts=1.0, k_ratio=1.0, proc_rate_cycles_per_s=1.0,
                         channel_gain=10 ** (gain_db / 10), bandwidth_hz=bw)
    back = power_for_rate(transmission_rate(p, prof), prof)
    assert abs(back - p) <= 1e-9 * max(p, 1e-300) or p == 0.0 and back == 0.0


@settings(max_examples=100, deadline=None)
@given(u=st.lists(st.floats(0, 1), min_size=1, max_size=20), bits=st.floats(0, 1e9),
       lat=st.floats(0, 10), apps=st.integers(1, 100))
def test_quantities_non_negative(u, bits, lat, apps):
    assert compute_energy(u, P100, 1.0) >= 0
    assert network_usage(bits, lat, apps, 1.0) >= 0
    loads, ls = load_status(np.array(u)[None, None, :].repeat(2, 0), 1.0, (1.0,))
    assert ls >= 0 and np.all(loads >= 0)
