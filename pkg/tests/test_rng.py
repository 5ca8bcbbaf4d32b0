import numpy as np
import pytest
from scipy import stats

from particle_limits.fenwick import FenwickTree
from particle_limits.markov import empirical_table, total_variation, uniformized_transient
from particle_limits.rng import RngStream, philox_fill


def test_philox_known_answer():
    # Random123 reference vector: zero counter, zero key
    out = np.empty((1, 4), dtype=np.uint32)
    philox_fill(out, 0, 0, 0, 0, 0)
    assert out[0].tolist() == [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]


def test_stream_is_pure_function_of_id():
    a = RngStream(7, 2, "x").uniforms(1000)
    b = RngStream(7, 2, "x").uniforms(1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, RngStream(7, 3, "x").uniforms(1000))
    assert not np.array_equal(a, RngStream(7, 2, "y").uniforms(1000))
    assert not np.array_equal(a, RngStream(8, 2, "x").uniforms(1000))


def test_peek_does_not_consume_and_blocks_are_contiguous():
    s = RngStream(1)
    first = s.peek_blocks(8)
    assert s.position == 0
    assert np.array_equal(s.blocks(3), first[:3])
    assert np.array_equal(s.blocks(5), first[3:])
    assert np.array_equal(s.peek_blocks(2, start=4), first[4:6])


def test_uniforms_are_uniform_and_uncorrelated_across_streams():
    u = RngStream(123, 0, "a").uniforms(200000)
    v = RngStream(123, 1, "a").uniforms(200000)
    assert 0.0 <= u.min() and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-3
    assert abs(np.corrcoef(u, v)[0, 1]) < 0.01


def test_stream_rejects_out_of_range_ids():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)
    with pytest.raises(ValueError):
        RngStream(1, 2**32)


def test_spawn_keeps_seed():
    s = RngStream(5, 1, "a")
    s.advance(10)
    t = s.spawn(channel="b")
    assert t.master_seed == 5 and t.replica == 1 and t.channel == "b" and t.position == 0


def test_fenwick_prefix_and_find():
    w = np.array([0.5, 0.0, 2.0, 1.5, 3.0])
    tree = FenwickTree(w)
    assert tree.total == pytest.approx(7.0)
    for i in range(6):
        assert tree.prefix(i) == pytest.approx(w[:i].sum())
    assert tree.find(0.2)[0] == 0
    leaf, rest = tree.find(0.5)
    assert leaf == 2 and rest == pytest.approx(0.0)
    assert tree.find(4.1)[0] == 4
    assert tree.find(7.0)[0] == 5
    tree.add(1, 1.0)
    assert tree.find(0.7)[0] == 1


def test_uniformization_matches_two_state_closed_form():
    a, b = 2.0, 3.0
    Q = np.array([[-a, a], [b, -b]])
    p, info = uniformized_transient(Q, [1.0, 0.0], 0.4)
    expected = b / (a + b) + a / (a + b) * np.exp(-(a + b) * 0.4)
    assert p[0] == pytest.approx(expected, abs=1e-10)
    assert info["tail"] < 1e-10


def test_total_variation_and_table():
    assert total_variation({"a": 0.5, "b": 0.5}, {"a": 1.0}) == pytest.approx(0.5)
    assert empirical_table(["a", "b", "a", "a"]) == {"a": 0.75, "b": 0.25}
