import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfk.errors import DimensionError, ParseError, StructuralError
from mfk.motion_data import (
    DEFAULT_JOINT_MAP,
    JOINT_NAMES,
    ManifestEntry,
    MotionSample,
    RawMotionSample,
    default_skeleton,
    downsample,
    load_sample_npy,
    load_scene_json,
    read_manifest,
    reconstruct,
    sample_filename,
    save_sample_npy,
    select_joints,
    split_dataset,
    to_displacements,
    window_samples,
    write_manifest,
    write_scene_json,
)


def make_sample(p=2, t=10, scene="Park", sample_id="s0", seed=0, fps=25.0):
    rng = np.random.default_rng(seed)
    data = np.cumsum(rng.normal(scale=10.0, size=(p, t, 18, 3)), axis=1) + 500.0
    return MotionSample(scene=scene, fps=fps, data=data, sample_id=sample_id)


def test_skeleton_is_valid_tree():
    skel = default_skeleton()
    assert skel.n_joints == 18
    assert skel.joint_names == JOINT_NAMES
    assert skel.joint_names[skel.root_index] == "Spine1"
    parents = skel.parents()
    assert parents[skel.root_index] == -1
    assert all(p >= 0 for i, p in enumerate(parents) if i != skel.root_index)


def test_motion_sample_validation():
    with pytest.raises(DimensionError):
        MotionSample("Park", 25.0, np.zeros((1, 1, 18, 3)))  # T < 2
    with pytest.raises(DimensionError):
        MotionSample("Park", 25.0, np.zeros((1, 5, 17, 3)))  # J != 18
    with pytest.raises(ValueError):
        MotionSample("Park", 25.0, np.full((1, 5, 18, 3), np.nan))
    with pytest.raises(ValueError):
        MotionSample("Park", 0.0, np.zeros((1, 5, 18, 3)))


# JSON ingestion -------------------------------------------------------------


def test_load_scene_json_minimal(tmp_path):
    doc = {
        "fps": 75.0,
        "persons": [
            {"id": p, "frames": [[[float(p), 0.0, 0.0]] * 20 for _ in range(2)]}
            for p in range(3)
        ],
    }
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(doc))
    raw = load_scene_json(path)
    assert raw.data.shape == (3, 2, 20, 3)
    assert raw.fps == 75.0


def test_load_scene_json_rejects_single_frame(tmp_path):
    doc = {"fps": 75.0, "persons": [{"id": 0, "frames": [[[0.0, 0.0, 0.0]] * 20]}]}
    path = tmp_path / "one.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(DimensionError):
        load_scene_json(path)


def test_load_scene_json_malformed_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"fps": 75,\n  "persons": [}')
    with pytest.raises(ParseError, match="line 2"):
        load_scene_json(path)


def test_load_scene_json_inconsistent_person_frames(tmp_path):
    doc = {
        "fps": 75.0,
        "persons": [
            {"id": 0, "frames": [[[0.0] * 3] * 20] * 3},
            {"id": 1, "frames": [[[0.0] * 3] * 20] * 2},
        ],
    }
    path = tmp_path / "ragged.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(StructuralError, match="frame count"):
        load_scene_json(path)


def test_scene_json_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(5)
    raw = RawMotionSample(
        scene="Street", fps=75.0, data=rng.normal(size=(2, 4, 20, 3)) * 1000.0, sample_id="rt"
    )
    path = tmp_path / "rt.json"
    write_scene_json(raw, path)
    back = load_scene_json(path)
    assert np.array_equal(back.data, raw.data)
    assert back.fps == raw.fps and back.scene == raw.scene


# joint selection ------------------------------------------------------------


def test_select_joints_constant_values():
    raw = RawMotionSample("Park", 75.0, np.ones((1, 3, 20, 3)))
    out = select_joints(raw)
    assert out.data.shape == (1, 3, 18, 3)
    assert np.all(out.data == 1.0)


def test_select_joints_applies_index_mapping():
    data = np.zeros((1, 2, 20, 3))
    data[0, :, :, 0] = np.arange(20)  # ramp identifies source joints
    out = select_joints(RawMotionSample("Park", 75.0, data))
    np.testing.assert_array_equal(out.data[0, 0, :, 0], np.array(DEFAULT_JOINT_MAP, dtype=float))


def test_select_joints_wrong_count():
    with pytest.raises(DimensionError):
        select_joints(RawMotionSample("Park", 75.0, np.zeros((1, 2, 19, 3))))


# downsampling ---------------------------------------------------------------


def test_downsample_75_to_25():
    sample = make_sample(t=75, fps=75.0)
    out = downsample(sample, 3)
    assert out.n_frames == 25 and out.fps == 25.0


def test_downsample_identity():
    sample = make_sample(t=10)
    out = downsample(sample, 1)
    assert np.array_equal(out.data, sample.data)


def test_downsample_keeps_every_kth_frame():
    sample = make_sample(t=12)
    ramp = np.zeros((1, 12, 18, 3))
    ramp[0, :, :, :] = np.arange(12)[:, None, None]
    sample = MotionSample("Park", 75.0, ramp, "r")
    out = downsample(sample, 3)
    np.testing.assert_array_equal(out.data[0, :, 0, 0], [0, 3, 6, 9])


def test_downsample_factor_too_large():
    with pytest.raises(DimensionError):
        downsample(make_sample(t=5), 6)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(2, 3), st.integers(0, 1000))
def test_downsample_composition(a, b, seed):
    sample = make_sample(t=2 * a * b + a * b, seed=seed)
    once = downsample(sample, a * b)
    twice = downsample(downsample(sample, a), b)
    np.testing.assert_array_equal(once.data, twice.data)


# displacements --------------------------------------------------------------


def test_constant_pose_zero_displacements():
    data = np.tile(np.random.default_rng(0).normal(size=(1, 1, 18, 3)), (1, 6, 1, 1))
    disp = to_displacements(MotionSample("Park", 25.0, data, "c"))
    assert np.all(disp.data == 0.0)


def test_linear_drift_constant_displacement():
    v = np.array([3.0, -1.0, 0.5])
    data = np.zeros((1, 8, 18, 3)) + np.arange(8)[None, :, None, None] * v
    disp = to_displacements(MotionSample("Park", 25.0, data, "d"))
    np.testing.assert_allclose(disp.data, np.broadcast_to(v, disp.data.shape))


def test_displacement_round_trip():
    sample = make_sample(p=3, t=20, seed=9)
    disp = to_displacements(sample)
    tail = reconstruct(sample.data[:, 0], disp.data)
    np.testing.assert_allclose(tail, sample.data[:, 1:], atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(2, 30), st.integers(0, 10_000))
def test_displacement_round_trip_property(p, t, seed):
    sample = make_sample(p=p, t=t, seed=seed)
    disp = to_displacements(sample)
    np.testing.assert_allclose(
        reconstruct(sample.data[:, 0], disp.data), sample.data[:, 1:], atol=1e-9
    )


def test_reconstruct_zero_displacements():
    anchor = np.random.default_rng(1).normal(size=(2, 18, 3))
    out = reconstruct(anchor, np.zeros((2, 5, 18, 3)))
    for k in range(5):
        np.testing.assert_array_equal(out[:, k], anchor)


def test_reconstruct_single_step():
    anchor = np.zeros((1, 18, 3))
    d = np.full((1, 1, 18, 3), 2.5)
    np.testing.assert_allclose(reconstruct(anchor, d)[:, 0], anchor + 2.5)


def test_reconstruct_shape_mismatch():
    with pytest.raises(DimensionError):
        reconstruct(np.zeros((2, 18, 3)), np.zeros((3, 5, 18, 3)))


# windowing ------------------------------------------------------------------


def test_window_t75_single_window():
    result = window_samples([make_sample(t=75)], in_len=25, out_len=50, stride=75)
    assert len(result.windows) == 1 and result.skipped == 0
    w = result.windows[0]
    assert w.input.shape[1] == 25 and w.target.shape[1] == 50


def test_window_too_short_is_skipped():
    result = window_samples([make_sample(t=74)], in_len=25, out_len=50)
    assert result.windows == [] and result.skipped == 1


def test_window_stride_start_positions():
    result = window_samples([make_sample(t=100)], in_len=25, out_len=25, stride=25)
    assert [w.start for w in result.windows] == [0, 25, 50]


def test_windows_are_contiguous_views_of_source():
    sample = make_sample(t=100, seed=4)
    for w in window_samples([sample], in_len=25, out_len=25, stride=10).windows:
        np.testing.assert_array_equal(w.input, sample.data[:, w.start : w.start + 25])
        np.testing.assert_array_equal(w.target, sample.data[:, w.start + 25 : w.start + 50])


# splits ---------------------------------------------------------------------


def _scene_samples(scene, n):
    return [make_sample(scene=scene, sample_id=f"{scene}_{i:03d}", seed=i) for i in range(n)]


def test_split_80_20_per_scene():
    split = split_dataset(_scene_samples("Park", 10))
    assert len(split.train) == 8 and len(split.test) == 2


def test_crowd_scene_all_test():
    split = split_dataset(_scene_samples("ComplexCrowd", 5))
    assert split.train == [] and len(split.test) == 5


def test_split_empty():
    split = split_dataset([])
    assert split.train == [] and split.test == []


def test_split_deterministic_under_permutation():
    samples = _scene_samples("Park", 10) + _scene_samples("Street", 5)
    a = split_dataset(samples)
    b = split_dataset(list(reversed(samples)))
    assert [s.sample_id for s in a.train] == [s.sample_id for s in b.train]
    assert [s.sample_id for s in a.test] == [s.sample_id for s in b.test]


def test_split_no_overlap():
    samples = _scene_samples("Indoor", 12)
    split = split_dataset(samples)
    train_ids = {s.sample_id for s in split.train}
    test_ids = {s.sample_id for s in split.test}
    assert not (train_ids & test_ids)
    assert train_ids | test_ids == {s.sample_id for s in samples}


# NPY + manifest -------------------------------------------------------------


def test_npy_round_trip_and_format(tmp_path):
    sample = make_sample(scene="Street", sample_id="007", seed=2)
    path = save_sample_npy(sample, tmp_path)
    assert path.name == sample_filename(sample) == "Street_007.npy"
    blob = path.read_bytes()
    assert blob[:6] == b"\x93NUMPY"
    assert blob[6:8] == bytes([1, 0])  # format version 1.0
    assert b"<f8" in blob[:128]
    back = load_sample_npy(path, scene="Street", sample_id="007")
    np.testing.assert_array_equal(back.data, sample.data)


def test_load_sample_npy_corrupt(tmp_path):
    path = tmp_path / "junk.npy"
    path.write_bytes(b"this is not an array")
    with pytest.raises(ParseError):
        load_sample_npy(path, scene="Park", sample_id="x")


def test_manifest_round_trip(tmp_path):
    entries = [
        ManifestEntry("a0", "Park", "train", "Park_a0.npy", 25.0, 3, 75),
        ManifestEntry("b1", "ComplexCrowd", "test", "ComplexCrowd_b1.npy", 25.0, 6, 75),
    ]
    path = tmp_path / "manifest.txt"
    write_manifest(entries, path)
    back = read_manifest(path)
    assert back == entries


def test_manifest_bad_line(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("[s]\nscene Park\n")
    with pytest.raises(ParseError, match="line 2"):
        read_manifest(path)
