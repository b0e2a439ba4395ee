"""Corpus ingestion, validation, curation, and persistence.

The canonical data model: embeddings arrive as JSONL or as the LNUP binary
container, landmarks as JSONL sidecars, and images as 8-bit binary PGM (P5).
A loaded corpus is immutable and safe for concurrent reads.

File formats
------------
Embedding JSONL: one object per line,
    {"image_id": str, "identity_id": str, "vector": [float, ...]}

Embedding binary ("LNUP"): magic bytes ``LNUP``; little-endian u32 dim and
u64 count; then per record u16 id length, id bytes (UTF-8), u16 identity
length, identity bytes, and dim float32 values (little-endian). Round-trips
are bit-exact.

Landmark JSONL: {"image_id": str, "points": [[x, y] x 68], "face_count": int}

Image: binary PGM (P5), maxval 255. The file for an image id is expected at
``<directory>/<image_id>.pgm``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lineuplab import filters
from lineuplab.errors import DataError

ImageId = str

BINARY_MAGIC = b"LNUP"
_HEADER = struct.Struct("<IQ")
_U16 = struct.Struct("<H")

LANDMARK_POINT_COUNT = 68

# Removal reason codes emitted by curate(), in precedence order.
NO_IMAGE = "NO_IMAGE"
NO_FACE = "NO_FACE"
TOO_DARK = "TOO_DARK"
TOO_BRIGHT = "TOO_BRIGHT"
TOO_BLURRY = "TOO_BLURRY"


@dataclass(frozen=True)
class EmbeddingRecord:
    """One image's identity label and embedding vector."""

    image_id: ImageId
    identity_id: str
    vector: np.ndarray  # 1-D float32


@dataclass(frozen=True)
class ImageGray:
    """8-bit grayscale image, row-major. Both sides must fit a 3x3 kernel."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise DataError(f"image must be at least 3x3, got {self.width}x{self.height}")
        if self.pixels.shape != (self.height, self.width):
            raise DataError("pixel grid does not match declared dimensions")
        if self.pixels.dtype != np.uint8:
            raise DataError("pixels must be 8-bit")


@dataclass(frozen=True)
class LandmarkSet:
    """68-point landmark annotation for one image.

    ``face_count`` records how many faces the upstream detector reported; the
    stored points always describe the first detected face.
    """

    image_id: ImageId
    points: np.ndarray  # (68, 2) float64
    face_count: int


LandmarkTable = dict[ImageId, LandmarkSet]


@dataclass(frozen=True)
class CorpusManifest:
    source: str
    dim: int
    count: int


@dataclass(frozen=True)
class CorpusHandle:
    """Immutable embedding corpus: row order is ingestion order."""

    ids: tuple[ImageId, ...]
    identities: tuple[str, ...]
    matrix: np.ndarray  # (count, dim) float32, read-only
    identity_index: dict[str, list[ImageId]]
    manifest: CorpusManifest
    _row_of: dict[ImageId, int] = field(repr=False, default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.manifest.dim

    def __contains__(self, image_id: ImageId) -> bool:
        return image_id in self._row_of

    def row(self, image_id: ImageId) -> int:
        try:
            return self._row_of[image_id]
        except KeyError:
            raise DataError(f"image id {image_id!r} not in corpus") from None

    def vector(self, image_id: ImageId) -> np.ndarray:
        return self.matrix[self.row(image_id)]

    def identity_of(self, image_id: ImageId) -> str:
        return self.identities[self.row(image_id)]

    def record(self, image_id: ImageId) -> EmbeddingRecord:
        i = self.row(image_id)
        return EmbeddingRecord(self.ids[i], self.identities[i], self.matrix[i])

    @property
    def records(self) -> list[EmbeddingRecord]:
        return [EmbeddingRecord(i, t, v) for i, t, v in zip(self.ids, self.identities, self.matrix)]

    def subset(self, keep_ids) -> "CorpusHandle":
        """New handle restricted to ``keep_ids``, preserving corpus order."""
        keep = set(keep_ids)
        rows = [i for i, image_id in enumerate(self.ids) if image_id in keep]
        missing = keep - {self.ids[i] for i in rows}
        if missing:
            raise DataError(f"subset ids not in corpus: {sorted(missing)[:5]}")
        return _make_handle(
            [self.ids[i] for i in rows],
            [self.identities[i] for i in rows],
            self.matrix[rows].copy(),
            self.manifest.source,
        )


def _make_handle(ids, identities, matrix, source: str) -> CorpusHandle:
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    matrix.flags.writeable = False
    identity_index: dict[str, list[ImageId]] = {}
    row_of: dict[ImageId, int] = {}
    for i, (image_id, identity) in enumerate(zip(ids, identities)):
        identity_index.setdefault(identity, []).append(image_id)
        row_of[image_id] = i
    manifest = CorpusManifest(source=source, dim=int(matrix.shape[1]), count=len(ids))
    return CorpusHandle(tuple(ids), tuple(identities), matrix, identity_index, manifest, row_of)


def _validate_record(image_id: str, identity_id: str, vector: np.ndarray,
                     dim: int | None, seen: set, where: str) -> int:
    if not image_id:
        raise DataError(f"{where}: empty image_id")
    if image_id in seen:
        raise DataError(f"{where}: duplicate image_id {image_id!r}")
    seen.add(image_id)
    if vector.ndim != 1 or vector.size == 0:
        raise DataError(f"{where}: record {image_id!r} has no vector components")
    if dim is None:
        dim = vector.size
    elif vector.size != dim:
        raise DataError(
            f"{where}: record {image_id!r} has dimension {vector.size}, expected {dim}"
        )
    if not np.all(np.isfinite(vector)):
        raise DataError(f"{where}: record {image_id!r} has non-finite components")
    return dim


def ingest_embeddings(path, expected_dim: int | None = None) -> CorpusHandle:
    """Load an embedding corpus from JSONL or the LNUP binary container.

    The format is sniffed from the magic bytes. Duplicate image ids,
    non-finite components, and dimension drift all raise DataError.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"embedding file not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == BINARY_MAGIC:
        ids, identities, matrix = _read_binary(path)
    else:
        ids, identities, matrix = _read_jsonl(path)
    if expected_dim is not None and matrix.shape[1] != expected_dim:
        raise DataError(
            f"{path}: corpus dimension {matrix.shape[1]} != expected {expected_dim}"
        )
    return _make_handle(ids, identities, matrix, str(path))


def _read_jsonl(path: Path):
    ids: list[str] = []
    identities: list[str] = []
    vectors: list[np.ndarray] = []
    dim: int | None = None
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{where}: expected an object per line")
            try:
                image_id = obj["image_id"]
                identity = obj["identity_id"]
                raw = obj["vector"]
            except KeyError as exc:
                raise DataError(f"{where}: missing field {exc.args[0]!r}") from None
            if not isinstance(image_id, str) or not isinstance(identity, str):
                raise DataError(f"{where}: image_id and identity_id must be strings")
            try:
                vec = np.asarray(raw, dtype=np.float32)
            except (TypeError, ValueError):
                raise DataError(f"{where}: vector is not a numeric array") from None
            dim = _validate_record(image_id, identity, vec, dim, seen, where)
            ids.append(image_id)
            identities.append(identity)
            vectors.append(vec)
    if not ids:
        raise DataError(f"{path}: no records")
    return ids, identities, np.vstack(vectors)


def _read_binary(path: Path):
    data = path.read_bytes()
    if len(data) < 4 + _HEADER.size:
        raise DataError(f"{path}: truncated header")
    dim, count = _HEADER.unpack_from(data, 4)
    if dim == 0:
        raise DataError(f"{path}: header declares dimension 0")
    ids: list[str] = []
    identities: list[str] = []
    matrix = np.empty((count, dim), dtype=np.float32)
    seen: set[str] = set()
    offset = 4 + _HEADER.size
    vec_bytes = 4 * dim
    for n in range(count):
        where = f"{path} record {n}"
        try:
            (id_len,) = _U16.unpack_from(data, offset)
            offset += 2
            image_id = data[offset : offset + id_len].decode("utf-8")
            if len(data) < offset + id_len:
                raise struct.error
            offset += id_len
            (ident_len,) = _U16.unpack_from(data, offset)
            offset += 2
            identity = data[offset : offset + ident_len].decode("utf-8")
            if len(data) < offset + ident_len:
                raise struct.error
            offset += ident_len
            if len(data) < offset + vec_bytes:
                raise struct.error
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(
                np.float32, copy=True
            )
            offset += vec_bytes
        except (struct.error, UnicodeDecodeError):
            raise DataError(f"{where}: truncated or malformed") from None
        _validate_record(image_id, identity, vec, dim, seen, where)
        ids.append(image_id)
        identities.append(identity)
        matrix[n] = vec
    if offset != len(data):
        raise DataError(f"{path}: {len(data) - offset} trailing bytes after last record")
    if count == 0:
        raise DataError(f"{path}: no records")
    return ids, identities, matrix


def write_embeddings(corpus: CorpusHandle, path, fmt: str = "binary") -> Path:
    """Persist a corpus as the LNUP binary container or as JSONL."""
    path = Path(path)
    if fmt == "binary":
        parts = [BINARY_MAGIC, _HEADER.pack(corpus.dim, corpus.count)]
        for image_id, identity, row in zip(corpus.ids, corpus.identities, corpus.matrix):
            id_b = image_id.encode("utf-8")
            ident_b = identity.encode("utf-8")
            if len(id_b) > 0xFFFF or len(ident_b) > 0xFFFF:
                raise DataError(f"id or identity too long to serialize: {image_id!r}")
            parts.append(_U16.pack(len(id_b)))
            parts.append(id_b)
            parts.append(_U16.pack(len(ident_b)))
            parts.append(ident_b)
            parts.append(np.ascontiguousarray(row, dtype="<f4").tobytes())
        path.write_bytes(b"".join(parts))
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for image_id, identity, row in zip(corpus.ids, corpus.identities, corpus.matrix):
                fh.write(json.dumps({
                    "image_id": image_id,
                    "identity_id": identity,
                    "vector": [float(x) for x in row],
                }) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def ingest_landmarks(path) -> LandmarkTable:
    """Load landmark sidecars. Repeated ids keep the first point set and bump
    the face count; images absent from the file count as "no face detected".
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"landmark file not found: {path}")
    table: LandmarkTable = {}
    entries_seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON ({exc.msg})") from None
            try:
                image_id = obj["image_id"]
                raw_points = obj["points"]
            except KeyError as exc:
                raise DataError(f"{where}: missing field {exc.args[0]!r}") from None
            declared = int(obj.get("face_count", 1))
            points = np.asarray(raw_points, dtype=np.float64)
            if points.shape != (LANDMARK_POINT_COUNT, 2):
                raise DataError(
                    f"{where}: image {image_id!r} has {points.shape[0] if points.ndim else 0} "
                    f"points, expected {LANDMARK_POINT_COUNT}"
                )
            if not np.all(np.isfinite(points)):
                raise DataError(f"{where}: image {image_id!r} has non-finite coordinates")
            entries_seen[image_id] = entries_seen.get(image_id, 0) + 1
            if image_id in table:
                prev = table[image_id]
                count = max(prev.face_count, declared, entries_seen[image_id])
                table[image_id] = LandmarkSet(image_id, prev.points, count)
            else:
                points.flags.writeable = False
                table[image_id] = LandmarkSet(image_id, points, max(declared, 1))
    return table


def load_grayscale_image(path) -> ImageGray:
    """Read a binary PGM (P5, maxval 255) file."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"image file not found: {path}")
    data = path.read_bytes()
    if data[:2] != b"P5":
        raise DataError(f"{path}: unsupported format (want binary PGM 'P5')")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(data):
            raise DataError(f"{path}: truncated header")
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isdigit():
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise DataError(f"{path}: malformed header")
    width, height, maxval = fields
    if maxval != 255:
        raise DataError(f"{path}: maxval {maxval} unsupported (want 255)")
    pos += 1  # single whitespace byte after maxval
    expected = width * height
    payload = data[pos:]
    if len(payload) < expected:
        raise DataError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    if len(payload) > expected:
        raise DataError(f"{path}: {len(payload) - expected} trailing bytes")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
    pixels.flags.writeable = False
    return ImageGray(width=width, height=height, pixels=pixels)


def write_pgm(img: ImageGray, path) -> Path:
    path = Path(path)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    path.write_bytes(header + img.pixels.tobytes())
    return path


def image_path(directory, image_id: ImageId) -> Path:
    return Path(directory) / f"{image_id}.pgm"


@dataclass(frozen=True)
class CurationConfig:
    """Thresholds for the mechanical curation rules."""

    dark_threshold: float = 30.0     # mean intensity below this is TOO_DARK
    bright_threshold: float = 225.0  # mean intensity above this is TOO_BRIGHT
    blur_threshold: float = 15.0     # Laplacian variance below this is TOO_BLURRY


@dataclass(frozen=True)
class CurationReport:
    removed: tuple[tuple[ImageId, str], ...]
    retained: CorpusHandle
    counts: dict[str, int]


def curate(corpus: CorpusHandle, landmarks: LandmarkTable, images_dir,
           rules: CurationConfig | None = None) -> CurationReport:
    """Apply mechanical curation rules and return survivors plus removals.

    Each removed image carries exactly one reason code, checked in order:
    NO_IMAGE (file missing), NO_FACE (no landmark entry), TOO_DARK,
    TOO_BRIGHT, TOO_BLURRY. Curation is idempotent: re-curating the
    survivors removes nothing.
    """
    rules = rules or CurationConfig()
    images_dir = Path(images_dir)
    removed: list[tuple[ImageId, str]] = []
    kept: list[ImageId] = []
    for image_id in corpus.ids:
        reason = _curation_reason(image_id, landmarks, images_dir, rules)
        if reason is None:
            kept.append(image_id)
        else:
            removed.append((image_id, reason))
    counts: dict[str, int] = {}
    for _, reason in removed:
        counts[reason] = counts.get(reason, 0) + 1
    return CurationReport(tuple(removed), corpus.subset(kept), counts)


def _curation_reason(image_id, landmarks, images_dir, rules) -> str | None:
    path = image_path(images_dir, image_id)
    if not path.is_file():
        return NO_IMAGE
    if image_id not in landmarks:
        return NO_FACE
    img = load_grayscale_image(path)
    pixels = img.pixels.astype(np.float64)
    mean = float(pixels.mean())
    if mean < rules.dark_threshold:
        return TOO_DARK
    if mean > rules.bright_threshold:
        return TOO_BRIGHT
    if filters.laplacian_variance(pixels) < rules.blur_threshold:
        return TOO_BLURRY
    return None
