import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spadsim.detector import d0_params, d1_params, generate_pulse_train
from spadsim.resolver import BitStream, ResolverConfig, StreamingResolver, resolve_bits


def reference_merge(t0, t1, window):
    """Plain-Python statement of the merge rule."""
    i = j = coinc = 0
    bits = []
    while i < len(t0) or j < len(t1):
        if i < len(t0) and j < len(t1):
            d = abs(t0[i] - t1[j])
            if d < window or d == 0:
                i, j, coinc = i + 1, j + 1, coinc + 1
            elif t0[i] < t1[j]:
                bits.append(0)
                i += 1
            else:
                bits.append(1)
                j += 1
        elif i < len(t0):
            bits.append(0)
            i += 1
        else:
            bits.append(1)
            j += 1
    return bits, coinc


def _trains(seed, n=10**6, f=5e6):
    t0 = generate_pulse_train(d0_params(f), seed, n_pulses=n)
    t1 = generate_pulse_train(d1_params(f), seed + 1, n_pulses=n)
    return t0, t1


def test_solo_pulse():
    s = resolve_bits([100.0], [])
    assert s.to_string() == "0" and s.n_coincidences == 0


def test_coincidence_drops_both():
    s = resolve_bits([100.0], [105.0], ResolverConfig(12.0))
    assert len(s) == 0 and s.n_coincidences == 1


def test_hand_trace():
    s = resolve_bits([100.0, 300.0], [150.0], ResolverConfig(12.0))
    assert s.to_string() == "010" and s.n_coincidences == 0


def test_exact_tie_with_zero_window():
    s = resolve_bits([5.0, 9.0], [5.0], ResolverConfig(0.0))
    assert s.to_string() == "0" and s.n_coincidences == 1


def test_default_window():
    assert ResolverConfig().coincidence_window_ns == 12.0
    with pytest.raises(ValueError):
        ResolverConfig(-1.0)
    with pytest.raises(ValueError):
        ResolverConfig(float("inf"))


sorted_times = st.lists(st.floats(0, 1000, allow_nan=False), max_size=30).map(
    lambda xs: sorted(set(xs)))


@settings(max_examples=300)
@given(sorted_times, sorted_times, st.floats(0, 50))
def test_matches_reference(t0, t1, w):
    s = resolve_bits(np.array(t0), np.array(t1), ResolverConfig(w))
    bits, coinc = reference_merge(t0, t1, w)
    assert s.bits.tolist() == bits
    assert s.n_coincidences == coinc
    assert s.n_zeros + s.n_ones == len(s)
    assert len(t0) + len(t1) == len(s) + 2 * s.n_coincidences


@settings(max_examples=200)
@given(sorted_times, sorted_times, st.floats(0, 50))
def test_swap_complements(t0, t1, w):
    a = resolve_bits(np.array(t0), np.array(t1), ResolverConfig(w))
    b = resolve_bits(np.array(t1), np.array(t0), ResolverConfig(w))
    assert np.array_equal(a.bits, 1 - b.bits)
    assert a.n_coincidences == b.n_coincidences


@given(sorted_times, sorted_times)
def test_zero_window_is_time_order(t0, t1):
    if set(t0) & set(t1):
        return
    s = resolve_bits(np.array(t0), np.array(t1), ResolverConfig(0.0))
    labels = [b for _, b in sorted([(t, 0) for t in t0] + [(t, 1) for t in t1])]
    assert s.n_coincidences == 0
    assert s.bits.tolist() == labels


def spaced(min_gap):
    return st.lists(st.floats(min_gap, 200), max_size=25).map(
        lambda gaps: np.cumsum(gaps) if gaps else np.array([]))


@settings(max_examples=200)
@given(spaced(25.0), spaced(25.0), st.floats(0, 12), st.floats(0, 12))
def test_bits_nonincreasing_in_window(t0, t1, w1, w2):
    # intra-train gaps above twice the window keep coincidence pairs disjoint
    lo, hi = sorted((w1, w2))
    a = resolve_bits(t0, t1, ResolverConfig(lo))
    b = resolve_bits(t0, t1, ResolverConfig(hi))
    assert len(b) <= len(a)


def test_bits_nonincreasing_in_window_simulated():
    t0, t1 = _trains(40, n=200_000)
    counts = [len(resolve_bits(t0, t1, ResolverConfig(w))) for w in (0, 2, 6, 12)]
    assert counts == sorted(counts, reverse=True)


def test_conservation_and_symmetry_1e6():
    t0, t1 = _trains(3)
    a = resolve_bits(t0, t1)
    b = resolve_bits(t1, t0)
    assert a.n_zeros + a.n_ones == len(a)
    assert len(t0) + len(t1) == len(a) + 2 * a.n_coincidences
    assert np.array_equal(a.bits, 1 - b.bits)


@pytest.mark.parametrize("chunk", [1, 7, 1000, 65536])
def test_streaming_equals_batch(chunk):
    t0, t1 = _trains(5, n=20_000)
    full = resolve_bits(t0, t1)
    res = StreamingResolver()
    ts = [t0.timestamps, t1.timestamps]
    pos = [0, 0]
    while pos[0] < ts[0].size and pos[1] < ts[1].size:
        for k in (0, 1):
            if res.needs(k) and pos[k] < ts[k].size:
                res.push(k, ts[k][pos[k]:pos[k] + chunk])
                pos[k] += chunk
        res.step()
    for k in (0, 1):
        if pos[k] < ts[k].size:
            res.push(k, ts[k][pos[k]:])
    out = res.finish(drain=True)
    assert np.array_equal(out.bits, full.bits)
    assert out.n_coincidences == full.n_coincidences


def test_bitstream_helpers():
    s = BitStream(np.array([1, 0, 1, 1], dtype=np.uint8), 2)
    assert (s.n_ones, s.n_zeros, len(s)) == (3, 1, 4)
    assert s.packed() == bytes([0b1101])
