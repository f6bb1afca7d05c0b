import math

import pytest

import trajflow_py as tf


def test_rdp_keeps_endpoints():
    path = [[0.0, 0.0], [0.1, 0.05], [0.5, 0.4], [1.0, 0.0]]
    simplified = tf.rdp(path, 0.3)
    assert simplified[0] == path[0]
    assert simplified[-1] == path[-1]
    assert len(simplified) <= len(path)


def test_rdp_to_k_exact_budget():
    path = [[math.cos(t / 10), math.sin(t / 10)] for t in range(50)]
    for k in (5, 10, 20):
        assert len(tf.rdp_to_k(path, k)) == k


def test_dtw_frechet_identity():
    a = [[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]]
    assert tf.dtw(a, a) == 0.0
    assert tf.frechet(a, a) == 0.0
    b = [[0.0, 1.0], [1.0, 2.0], [2.0, 1.5]]
    assert tf.dtw(a, b) == pytest.approx(3.0)
    assert tf.frechet(a, b) == pytest.approx(1.0)


def test_haversine_known_value():
    # one degree of latitude at the equator
    assert tf.haversine_km(0.0, 0.0, 1.0, 0.0) == pytest.approx(111.195, abs=0.01)


def test_synth_dataset_roundtrip(tmp_path):
    records = tf.make_dataset(7, "urban", 20)
    assert len(records) == 20
    for r in records:
        traj = tf.Trajectory.from_dict(r)
        traj.validate()
        assert traj.to_dict() == r


def test_jsonl_io(tmp_path):
    records = tf.make_dataset(3, "urban", 5)
    path = str(tmp_path / "d.jsonl")
    tf.write_jsonl(path, [tf.Trajectory.from_dict(r) for r in records])
    back = tf.read_jsonl(path)
    assert [t.id for t in back] == [r["id"] for r in records]


def test_evaluate_self_is_zero(tmp_path):
    records = tf.make_dataset(11, "urban", 10)
    path = str(tmp_path / "d.jsonl")
    tf.write_jsonl(path, [tf.Trajectory.from_dict(r) for r in records])
    report = tf.evaluate(path, path)
    assert report["density_js"] == pytest.approx(0.0, abs=1e-12)
    assert report["dtw_med"] == 0.0
