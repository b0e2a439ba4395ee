import math

import numpy as np
import pytest

import oracles
from lineuplab.corpus import EmbeddingRecord, ImageGray, LandmarkSet
from lineuplab.errors import DataError
from lineuplab.imgfeat import (
    CLASSICAL_FEATURE_NAMES,
    assemble_feature_vector,
    classical_features,
    feature_csv_header,
    fit_standardizer,
    geometry_features,
    lighting_features,
    noise_features,
    quality_features,
    read_feature_csv,
    sharpness_features,
    texture_features,
    write_feature_csv,
)
from lineuplab.imgfeat.features import FeatureVector, sanitize
from lineuplab.imgfeat.geometry import SYMMETRY_PAIRS, eye_aspect_ratio, mouth_aspect_ratio
from lineuplab.imgfeat.standardize import Standardizer, apply_standardizer, invert_standardizer


def gray(px):
    px = np.asarray(px, dtype=np.uint8)
    return ImageGray(px.shape[1], px.shape[0], px)


def rand_image(rng, h=32, w=32):
    return gray(rng.integers(0, 256, size=(h, w), dtype=np.uint8))


def test_feature_name_layout():
    assert len(CLASSICAL_FEATURE_NAMES) == 42
    assert len(set(CLASSICAL_FEATURE_NAMES)) == 42
    prefixes = [n.split("_")[0] for n in CLASSICAL_FEATURE_NAMES]
    # 6 lighting, 7 quality, 5 noise, 6 sharpness, 2 texture, 16 geometry
    counts = {p: prefixes.count(p) for p in dict.fromkeys(prefixes)}
    assert list(counts.values()) == [6, 7, 5, 6, 2, 16]


# ---------------------------------------------------------------------------
# Spec-point examples


def test_lighting_constant_image():
    values = lighting_features(gray(np.full((8, 8), 128)))
    assert values.tolist() == [128.0, 0.0, 0.0, 0.0, 0.0, 0.0]


def test_lighting_threshold_semantics():
    dark = lighting_features(gray(np.full((8, 8), 10)))
    assert dark[3] == 1.0 and dark[4] == 0.0
    # Thresholds are strict inequalities.
    at_dark = lighting_features(gray(np.full((8, 8), 50)))
    assert at_dark[3] == 0.0
    at_bright = lighting_features(gray(np.full((8, 8), 200)))
    assert at_bright[4] == 0.0


def test_quality_constant_image():
    assert quality_features(gray(np.full((8, 8), 128))).tolist() == [0.0] * 7


def test_michelson_extremes():
    half = np.zeros((8, 8), dtype=np.uint8)
    half[:, 4:] = 255
    assert quality_features(gray(half))[4] == 1.0
    assert quality_features(gray(np.zeros((8, 8), dtype=np.uint8)))[4] == 0.0


def test_noise_constant_image():
    assert noise_features(gray(np.full((8, 8), 90))).tolist() == [0.0, 1e6, 0.0, 0.0, 0.0]


def test_noise_checkerboard_diagonal_blindspot():
    # Diagonal neighbors share parity on a checkerboard, so sigma is 0 and
    # the SNR clip rule fires even though the image is far from constant.
    idx = np.indices((8, 8)).sum(axis=0)
    board = np.where(idx % 2 == 0, 0, 255).astype(np.uint8)
    values = noise_features(gray(board))
    assert values[0] == 0.0
    assert values[1] == 1e6


def test_noise_all_zero_image():
    values = noise_features(gray(np.zeros((8, 8), dtype=np.uint8)))
    assert values[0] == 0.0
    assert values[1] == 1e6  # sigma rule precedes the zero-signal rule
    assert values[2] == 0.0


def test_sharpness_constant_image():
    values = sharpness_features(gray(np.full((8, 8), 60)))
    # Gradient stats, Laplacian variance, and high-frequency energy vanish.
    # Mean log-magnitude does not: the DC bin still holds the image sum.
    assert [values[i] for i in (0, 1, 2, 3, 5)] == [0.0] * 5
    assert values[4] == pytest.approx(math.log1p(60 * 64) / 64, rel=1e-12)


def test_sharpness_impulse_matches_dft_oracle():
    px = np.zeros((8, 8), dtype=np.uint8)
    px[3, 5] = 255
    got = sharpness_features(gray(px))
    want = oracles.oracle_sharpness(px)
    assert np.allclose(got, want, rtol=1e-9)


def test_texture_constant_image():
    assert texture_features(gray(np.full((8, 8), 128))).tolist() == [0.0, 0.0]


def test_texture_step_edge_density():
    px = np.zeros((16, 16), dtype=np.uint8)
    px[:, 8:] = 255
    got = texture_features(gray(px))
    want = oracles.oracle_texture(px)
    assert got[1] == want[1]
    assert got[1] > 0.0


def test_redundant_sharpness_equals_laplacian_variance(rng):
    img = rand_image(rng)
    values = sharpness_features(img)
    assert values[2] == values[5]
    assert values[2] == lighting_features(img)[5]


def test_entropy_duplicated_between_categories(rng):
    img = rand_image(rng)
    assert lighting_features(img)[2] == quality_features(img)[3]


# ---------------------------------------------------------------------------
# Random-image oracle agreement (the acceptance suite runs the full sweep;
# these are smaller smoke-level slices per category)


def test_category_oracles_on_random_images(rng):
    for _ in range(5):
        px = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        assert np.allclose(lighting_features(gray(px)), oracles.oracle_lighting(px), rtol=1e-6)
        assert np.allclose(quality_features(gray(px)), oracles.oracle_quality(px), rtol=1e-6)
        assert np.allclose(noise_features(gray(px)), oracles.oracle_noise(px), rtol=1e-6)
        assert np.allclose(sharpness_features(gray(px)), oracles.oracle_sharpness(px), rtol=1e-5)
        assert np.allclose(texture_features(gray(px)), oracles.oracle_texture(px), rtol=1e-6)


def test_entropy_bounds(rng):
    for _ in range(5):
        img = rand_image(rng, 8, 8)
        entropy = lighting_features(img)[2]
        assert 0.0 <= entropy <= math.log(256)


# ---------------------------------------------------------------------------
# Geometry


def _synthetic_landmarks(rng):
    pts = rng.uniform(4.0, 28.0, size=(68, 2))
    return LandmarkSet("x", pts, 1)


def test_geometry_absent_landmarks():
    assert geometry_features(None, (32, 32)).tolist() == [0.0] * 16


def test_geometry_against_oracle(rng):
    for _ in range(10):
        lm = _synthetic_landmarks(rng)
        got = geometry_features(lm, (32, 32))
        want = oracles.oracle_geometry(lm.points, lm.face_count, (32, 32))
        assert np.allclose(got, want, rtol=1e-9, atol=1e-12)


def test_ear_known_value():
    # Vertical gaps 2 and 2 over a horizontal span of 4: EAR = 0.5.
    pts = np.zeros((68, 2))
    pts[36] = (0.0, 0.0)
    pts[39] = (4.0, 0.0)
    pts[37] = (1.0, -1.0)
    pts[41] = (1.0, 1.0)
    pts[38] = (3.0, -1.0)
    pts[40] = (3.0, 1.0)
    assert eye_aspect_ratio(pts, (36, 37, 38, 39, 40, 41)) == pytest.approx(0.5)


def test_ear_mar_similarity_invariance(rng):
    lm = _synthetic_landmarks(rng)
    base_ear = eye_aspect_ratio(lm.points, (36, 37, 38, 39, 40, 41))
    base_mar = mouth_aspect_ratio(lm.points)
    theta = np.radians(30.0)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    moved = (lm.points - lm.points.mean(axis=0)) @ rot.T * 2.5 + np.array([100.0, -40.0])
    assert eye_aspect_ratio(moved, (36, 37, 38, 39, 40, 41)) == pytest.approx(base_ear, abs=1e-9)
    assert mouth_aspect_ratio(moved) == pytest.approx(base_mar, abs=1e-9)


def test_roll_reads_eye_line_angle():
    pts = np.zeros((68, 2))
    pts[list(range(36, 42))] = (0.0, 0.0)
    # Right eye raised: atan2 measures the eye-line angle in image coords.
    for i, off in zip(range(42, 48), np.zeros((6, 2))):
        pts[i] = (10.0, 10.0 * np.tan(np.radians(30.0)))
    pts[27] = (5.0, -5.0)
    pts[30] = (5.0, 0.0)
    values = geometry_features(LandmarkSet("x", pts, 1), (32, 32))
    assert values[11] == pytest.approx(30.0, abs=1e-6)


def test_degenerate_landmarks_guarded():
    # All points coincide: every denominator guard fires, nothing blows up.
    pts = np.full((68, 2), 7.0)
    values = geometry_features(LandmarkSet("x", pts, 1), (32, 32))
    assert np.isfinite(values).all()
    assert values[5] == 0.0 and values[9] == 0.0 and values[10] == 0.0


def test_symmetry_pair_count():
    assert len(SYMMETRY_PAIRS) == 23
    assert len({p for pair in SYMMETRY_PAIRS for p in pair}) == 46


def test_symmetry_of_mirror_layout():
    # Perfectly mirrored points about x = 10 give symmetry exactly 1.
    pts = np.zeros((68, 2))
    rng = np.random.default_rng(5)
    for left, right in SYMMETRY_PAIRS:
        y = rng.uniform(0, 20)
        dx = rng.uniform(1, 8)
        pts[left] = (10.0 - dx, y)
        pts[right] = (10.0 + dx, y)
    pts[27] = (10.0, 5.0)
    for i in range(68):  # fill non-pair landmarks somewhere harmless
        if not pts[i].any():
            pts[i] = (10.0, float(i))
    values = geometry_features(LandmarkSet("x", pts, 1), (32, 32))
    assert values[10] == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Assembly and serialization


def test_assemble_layout_and_dimension_check(rng):
    img = rand_image(rng)
    emb = EmbeddingRecord("a", "p", rng.normal(size=16).astype(np.float32))
    fv = assemble_feature_vector(emb, img, None)
    assert fv.image_id == "a"
    assert fv.values.shape == (16 + 42,)
    assert np.isfinite(fv.values).all()
    assert not fv.values.flags.writeable
    # Embedding occupies the head of the vector.
    assert np.allclose(fv.values[:16], emb.vector.astype(np.float64))
    with pytest.raises(DataError, match="dimension"):
        assemble_feature_vector(emb, img, None, expected_dim=32)


def test_sanitize_rules():
    values = sanitize(np.array([1.0, np.nan, np.inf, -np.inf, 1e9, -1e9]))
    assert values.tolist() == [1.0, 0.0, 0.0, 0.0, 1e6, -1e6]


def test_feature_csv_round_trip(tmp_path, rng):
    img = rand_image(rng)
    vectors = []
    labels = {}
    for i in range(4):
        emb = EmbeddingRecord(f"id{i}", "p", rng.normal(size=8).astype(np.float32))
        vectors.append(assemble_feature_vector(emb, img, None))
        labels[f"id{i}"] = i % 2
    path = write_feature_csv(vectors, labels, tmp_path / "f.csv")
    header = path.read_text().splitlines()[0].split(",")
    assert header == feature_csv_header(8)
    assert header[:2] == ["image_id", "label"]
    assert len(header) == 2 + 8 + 42
    ids, got_labels, matrix = read_feature_csv(path)
    assert list(ids) == [f"id{i}" for i in range(4)]
    assert got_labels.tolist() == [0, 1, 0, 1]
    for i, fv in enumerate(vectors):
        assert np.array_equal(matrix[i], fv.values)  # repr round-trip is exact


# ---------------------------------------------------------------------------
# Standardizer


def test_standardizer_example():
    s = fit_standardizer([np.array([[0.0], [2.0]])])
    assert s.mean.tolist() == [1.0] and s.std.tolist() == [1.0]
    assert s.transform(np.array([[0.0]])).tolist() == [[-1.0]]


def test_standardizer_zero_std_dimension():
    s = fit_standardizer([np.array([[5.0, 1.0], [5.0, 3.0]])])
    z = s.transform(np.array([[99.0, 2.0]]))
    assert z[0, 0] == 0.0
    assert z[0, 1] == 0.0  # (2 - 2) / 1
    back = s.inverse_transform(z)
    assert back[0, 0] == 5.0  # zero-std dims recover the mean


def test_standardizer_self_consistency(rng):
    X = rng.normal(size=(50, 6)) * rng.uniform(0.5, 4.0, size=6) + rng.normal(size=6)
    s = fit_standardizer([X])
    Z = s.transform(X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
    assert np.allclose(Z.std(axis=0), 1.0, atol=1e-9)
    assert np.allclose(s.inverse_transform(Z), X, atol=1e-9)


def test_standardizer_on_feature_vectors(rng):
    img = rand_image(rng)
    vectors = [
        assemble_feature_vector(
            EmbeddingRecord(f"v{i}", "p", rng.normal(size=4).astype(np.float32)), img, None
        )
        for i in range(6)
    ]
    s = fit_standardizer(vectors)
    out = apply_standardizer(s, vectors[0])
    assert isinstance(out, FeatureVector)
    assert out.image_id == "v0"
    restored = invert_standardizer(s, out)
    assert np.allclose(restored.values, vectors[0].values, atol=1e-9)


def test_standardizer_empty_raises():
    with pytest.raises(DataError):
        fit_standardizer([])
