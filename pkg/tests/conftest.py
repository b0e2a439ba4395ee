import json

import numpy as np
import pytest

from lineuplab.corpus import ingest_embeddings


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def write_jsonl_corpus(path, records):
    """records: iterable of (image_id, identity_id, vector)."""
    with open(path, "w", encoding="utf-8") as fh:
        for image_id, identity_id, vector in records:
            fh.write(json.dumps({
                "image_id": image_id,
                "identity_id": identity_id,
                "vector": [float(v) for v in vector],
            }) + "\n")
    return path


def random_records(rng, n_identities, per_identity, dim, cluster=0.0):
    """Unit-vector corpus records; ``cluster`` pulls an identity's images
    together (1.0 = nearly identical, 0.0 = independent draws)."""
    records = []
    for pid in range(n_identities):
        base = rng.normal(size=dim)
        base /= np.linalg.norm(base)
        for j in range(per_identity):
            noise = rng.normal(size=dim)
            v = cluster * base + (1.0 - cluster) * noise if cluster > 0.0 else noise
            v = v / np.linalg.norm(v)
            records.append((f"p{pid:04d}_i{j}", f"p{pid:04d}", v))
    return records


def make_corpus(tmp_path, rng, n_identities=10, per_identity=4, dim=16,
                cluster=0.0, name="corpus.jsonl"):
    records = random_records(rng, n_identities, per_identity, dim, cluster)
    path = write_jsonl_corpus(tmp_path / name, records)
    return ingest_embeddings(path)
