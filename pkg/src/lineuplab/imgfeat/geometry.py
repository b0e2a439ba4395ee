"""Face-geometry features from 68-point landmark annotations.

Landmark indexing follows the 68-point convention: jaw 0-16, brows 17-26,
nose bridge 27-30, nostrils 31-35, left eye 36-41, right eye 42-47, outer
lip 48-59, inner lip 60-67. Aspect ratios use the (A + B) / (2C) scheme over
vertical gap and horizontal span distances, which makes them invariant to
translation, rotation, and uniform scaling.
"""

from __future__ import annotations

import numpy as np

from lineuplab.corpus import LandmarkSet

GEOMETRY_FEATURE_NAMES = (
    "geo_face_detected", "geo_face_count", "geo_area_ratio",
    "geo_offset_x", "geo_offset_y",
    "geo_ear_left", "geo_ear_right", "geo_ear_mean", "geo_ear_diff",
    "geo_mar", "geo_symmetry", "geo_roll", "geo_yaw", "geo_pitch",
    "geo_bbox_w_ratio", "geo_bbox_h_ratio",
)

LEFT_EYE = (36, 37, 38, 39, 40, 41)
RIGHT_EYE = (42, 43, 44, 45, 46, 47)
NOSE_TIP = 30
NOSE_BRIDGE = 27
MOUTH_RANGE = slice(48, 68)

# Mirrored landmark pairs: 8 jaw, 5 brow, 6 eye, 4 outer lip.
SYMMETRY_PAIRS = (
    (0, 16), (1, 15), (2, 14), (3, 13), (4, 12), (5, 11), (6, 10), (7, 9),
    (17, 26), (18, 25), (19, 24), (20, 23), (21, 22),
    (36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46),
    (48, 54), (49, 53), (50, 52), (59, 55),
)
assert len(SYMMETRY_PAIRS) == 23


def _dist(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.hypot(*(a - b)))


def _aspect_ratio(pts, p1, p2, p3, p4, p5, p6) -> float:
    """(A + B) / (2C): two vertical gaps over the horizontal span."""
    a = _dist(pts[p2], pts[p6])
    b = _dist(pts[p3], pts[p5])
    c = _dist(pts[p1], pts[p4])
    return (a + b) / (2.0 * c) if c > 0.0 else 0.0


def eye_aspect_ratio(pts: np.ndarray, eye) -> float:
    return _aspect_ratio(pts, *eye)


def mouth_aspect_ratio(pts: np.ndarray) -> float:
    # Inner-lip landmarks: span 60-64, vertical gaps 61-67 and 63-65.
    return _aspect_ratio(pts, 60, 61, 63, 64, 65, 67)


def _symmetry(pts: np.ndarray, inter_ocular: float) -> float:
    if inter_ocular <= 0.0:
        return 0.0
    center = pts[NOSE_BRIDGE]
    deviations = [
        abs(_dist(pts[l], center) - _dist(pts[r], center))
        for l, r in SYMMETRY_PAIRS
    ]
    score = 1.0 - float(np.mean(deviations)) / inter_ocular
    return float(np.clip(score, 0.0, 1.0))


def geometry_features(landmarks: LandmarkSet | None, img_dims) -> np.ndarray:
    """Sixteen geometry values; all zeros when no landmarks are available."""
    if landmarks is None:
        return np.zeros(len(GEOMETRY_FEATURE_NAMES))
    width, height = img_dims
    pts = landmarks.points
    min_xy = pts.min(axis=0)
    max_xy = pts.max(axis=0)
    bbox_w = float(max_xy[0] - min_xy[0])
    bbox_h = float(max_xy[1] - min_xy[1])
    center_x = float(min_xy[0] + max_xy[0]) / 2.0
    center_y = float(min_xy[1] + max_xy[1]) / 2.0

    left_center = pts[list(LEFT_EYE)].mean(axis=0)
    right_center = pts[list(RIGHT_EYE)].mean(axis=0)
    inter_ocular = _dist(left_center, right_center)
    eye_mid = (left_center + right_center) / 2.0

    ear_l = eye_aspect_ratio(pts, LEFT_EYE)
    ear_r = eye_aspect_ratio(pts, RIGHT_EYE)

    delta = right_center - left_center
    roll = float(np.degrees(np.arctan2(delta[1], delta[0])))
    yaw = float(pts[NOSE_TIP, 0] - eye_mid[0]) / inter_ocular if inter_ocular > 0.0 else 0.0
    mouth_y = float(pts[MOUTH_RANGE, 1].mean())
    pitch = (mouth_y - float(pts[NOSE_TIP, 1])) / bbox_h if bbox_h > 0.0 else 0.0

    return np.array([
        1.0,
        float(landmarks.face_count),
        bbox_w * bbox_h / (width * height),
        (center_x - width / 2.0) / width,
        (center_y - height / 2.0) / height,
        ear_l,
        ear_r,
        (ear_l + ear_r) / 2.0,
        abs(ear_l - ear_r),
        mouth_aspect_ratio(pts),
        _symmetry(pts, inter_ocular),
        roll,
        yaw,
        pitch,
        bbox_w / width,
        bbox_h / height,
    ])
