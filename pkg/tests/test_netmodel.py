import json

import numpy as np
import pytest

from helpers import bfs_average_path_length, two_node
from sips import netmodel
from sips.netmodel import (DEFAULT_RATE_RANGES, InvalidNetworkError,
                           NetworkFormatError, RateNetwork, RateRanges,
                           generate_scale_free, generate_small_world, load,
                           save, validate)


def test_validate_passes_symmetric_two_cycle():
    net = two_node(1.0, 1.0, 1.0)
    report = validate(net)
    assert report.ok
    assert all(c.passed for c in report.checks)


def test_validate_detects_virus_connectivity_failure():
    beta = np.array([[0.0, 1.0], [0.0, 0.0]])  # no path back to node 1
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    net = RateNetwork(beta, d, d, [1.0, 1.0], [1.0, 1.0])
    report = validate(net)
    assert not report["virus_layer_strongly_connected"].passed
    assert report["patch_layer_strongly_connected"].passed


def test_validate_detects_support_mismatch():
    d1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    d2 = np.array([[0.0, 0.0], [1.0, 0.0]])
    net = RateNetwork(d1, d1, d2, [1.0, 1.0], [1.0, 1.0])
    report = validate(net)
    assert not report["patch_support_consistency"].passed


def test_validate_detects_nonpositive_decay_and_diagonal():
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    net = RateNetwork(d, d, d, [0.0, 1.0], [1.0, 1.0])
    assert not validate(net)["positive_gamma"].passed

    diag = np.array([[0.5, 1.0], [1.0, 0.0]])
    net = RateNetwork(diag, d, d, [1.0, 1.0], [1.0, 1.0])
    assert not validate(net)["zero_diagonal"].passed

    neg = np.array([[0.0, -0.1], [1.0, 0.0]])
    net = RateNetwork(neg, d, d, [1.0, 1.0], [1.0, 1.0])
    assert not validate(net)["nonnegative_rates"].passed


def test_scale_free_minimal_size_gives_complete_triangle():
    net = generate_scale_free(3, 2, seed=5)
    support = net.beta > 0
    assert support.sum() == 6  # all off-diagonal pairs
    assert not support.diagonal().any()


def test_scale_free_determinism():
    a = generate_scale_free(100, 3, seed=7)
    b = generate_scale_free(100, 3, seed=7)
    assert a == b
    c = generate_scale_free(100, 3, seed=8)
    assert not (a == c)


def test_scale_free_degree_tail():
    # attachment produces hubs: max degree far above the per-node edge count
    net = generate_scale_free(100, 3, seed=11)
    degrees = (net.beta > 0).sum(axis=0)
    assert degrees.max() > 2 * 3
    assert degrees.min() >= 3
    # skewed: the mean sits well below the hub degree
    assert degrees.mean() < degrees.max() / 2


def test_scale_free_fixed_topology_varies_rates():
    a = generate_scale_free(30, 2, seed=1, topology_seed=99)
    b = generate_scale_free(30, 2, seed=2, topology_seed=99)
    assert np.array_equal(a.beta > 0, b.beta > 0)
    assert not np.array_equal(a.beta, b.beta)


def test_small_world_no_rewiring_is_ring_lattice():
    n, k = 20, 4
    net = generate_small_world(n, k, 0.0, seed=3)
    support = net.beta > 0
    assert (support.sum(axis=0) == k).all()
    for i in range(n):
        for off in (1, 2):
            assert support[i, (i + off) % n]
            assert support[i, (i - off) % n]


def test_small_world_determinism():
    a = generate_small_world(100, 4, 0.1, seed=13)
    b = generate_small_world(100, 4, 0.1, seed=13)
    assert a == b


def test_small_world_short_average_paths():
    n, k = 100, 4
    ring = generate_small_world(n, k, 0.0, seed=3)
    rewired = generate_small_world(n, k, 0.1, seed=3)
    apl_ring = bfs_average_path_length(ring.beta)
    apl_rewired = bfs_average_path_length(rewired.beta)
    # ring lattice scales like n/(2k); rewiring collapses that
    assert apl_ring > n / (2 * k)
    assert apl_rewired < 0.5 * apl_ring


def test_generated_networks_validate():
    for seed in range(3):
        assert validate(generate_scale_free(40, 2, seed=seed)).ok
        assert validate(generate_small_world(40, 4, 0.2, seed=seed)).ok


def test_independent_layers_differ():
    net = generate_scale_free(60, 3, seed=21, independent_layers=True)
    assert not np.array_equal(net.beta > 0, net.delta1 > 0)
    assert validate(net).ok


def test_rate_ranges_validation():
    with pytest.raises(ValueError):
        RateRanges(beta=(0.5, 0.1))
    with pytest.raises(ValueError):
        RateRanges(beta=(-0.1, 0.5))
    with pytest.raises(ValueError):
        RateRanges(gamma=(0.0, 1.0))


def test_generator_preconditions():
    with pytest.raises(ValueError):
        generate_scale_free(3, 4)
    with pytest.raises(ValueError):
        generate_small_world(10, 3, 0.1)  # odd k
    with pytest.raises(ValueError):
        generate_small_world(4, 4, 0.1)  # k >= n


def test_save_load_roundtrip(tmp_path):
    net = generate_scale_free(25, 2, seed=17, rate_ranges=DEFAULT_RATE_RANGES)
    path = tmp_path / "net.json"
    save(net, path)
    loaded = load(path)
    assert loaded == net


def test_load_malformed_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n": 2,\n  "gamma": [1, 1],,\n}')
    with pytest.raises(NetworkFormatError, match=r"line \d+, column \d+"):
        load(path)


def test_load_missing_field(tmp_path):
    path = tmp_path / "missing.json"
    path.write_text(json.dumps({"n": 2, "gamma": [1, 1], "alpha": [1, 1]}))
    with pytest.raises(NetworkFormatError, match="beta"):
        load(path)


def test_load_rejects_zero_gamma(tmp_path):
    net = two_node(1.0, 1.0, 1.0)
    path = tmp_path / "net.json"
    save(net, path)
    doc = json.loads(path.read_text())
    doc["gamma"][0] = 0.0
    path.write_text(json.dumps(doc))
    with pytest.raises(InvalidNetworkError, match="positive_gamma"):
        load(path)


def test_load_relaxed_connectivity(tmp_path):
    net = RateNetwork(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)),
                      [1.0, 1.0], [1.0, 1.0])
    path = tmp_path / "net.json"
    save(net, path)
    with pytest.raises(InvalidNetworkError):
        load(path)
    loaded = load(path, require_strongly_connected=False)
    assert loaded == net


def test_network_shape_errors():
    with pytest.raises(ValueError):
        RateNetwork(np.zeros((2, 3)), np.zeros((2, 2)), np.zeros((2, 2)),
                    [1, 1], [1, 1])
    with pytest.raises(ValueError):
        RateNetwork(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)),
                    [1, 1, 1], [1, 1])
