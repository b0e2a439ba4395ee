"""lineuplab: batch evaluation engine for embedding-based forensic facial lineups.

The library is organized around six areas:

- ``corpus``: embedding/landmark/image ingestion, validation, and curation
- ``simindex``: exact batched top-k inner-product search over unit vectors
- ``lineup``: lineup construction, probe ranking, and rank-change analysis
- ``imgfeat``: classical image-quality and face-geometry features
- ``failpred``: the dual-cohort lineup-failure prediction ensemble
- ``pipeline``: end-to-end orchestration, reports, and the restoration hook
"""

from lineuplab.errors import ConfigError, DataError, HookError, LineupLabError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "HookError",
    "LineupLabError",
    "__version__",
]
