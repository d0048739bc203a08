"""File formats: activity logs, binned views, models, linkage and truth tables.

All writers are deterministic (stable ordering, fixed float formatting) so
identical inputs produce byte-identical files.  Text outputs start with a
``#`` comment line carrying the package version; readers skip such lines.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from seqlink.corpus import ActivityRecord, View, Vocabulary
from seqlink.lda import TopicModel
from seqlink.linkage import LinkageResult
from seqlink.synth import GroundTruth

__all__ = [
    "read_activity_log",
    "read_linkage_csv",
    "read_model",
    "read_truth_csv",
    "read_views",
    "read_vocabulary",
    "write_activity_log",
    "write_linkage_csv",
    "write_model",
    "write_recall_csv",
    "write_truth_csv",
    "write_views",
    "write_vocabulary",
]


def _version_comment() -> str:
    from seqlink import __version__

    return f"# seqlink {__version__}"


def write_activity_log(path: str | Path, records: Iterable[ActivityRecord]) -> None:
    lines = [_version_comment()]
    lines.extend(
        f"{r.domain},{r.user_id},{r.timestamp},{r.lat!r},{r.lon!r}" for r in records
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_activity_log(path: str | Path) -> list[ActivityRecord]:
    from seqlink.corpus import parse_activity_log

    with open(path, "r", encoding="utf-8") as fh:
        return parse_activity_log(fh)


def write_views(path: str | Path, views: Sequence[View]) -> None:
    """One JSON object per line: view id, domain, and sparse counts."""
    lines = [_version_comment()]
    for v in views:
        payload = {
            "view_id": v.view_id,
            "domain": v.domain,
            "counts": {str(w): c for w, c in v.counts.items()},
        }
        lines.append(json.dumps(payload, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_views(path: str | Path) -> list[View]:
    views = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            obj = json.loads(line)
            views.append(
                View.from_counts(
                    obj["view_id"], obj["domain"], {int(w): c for w, c in obj["counts"].items()}
                )
            )
    return views


def write_vocabulary(path: str | Path, vocab: Vocabulary) -> None:
    from seqlink import __version__

    payload = {
        "version": __version__,
        "n_events": vocab.size,
        "event_to_index": vocab.event_to_index,
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_vocabulary(path: str | Path) -> Vocabulary:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    mapping = obj["event_to_index"] if "event_to_index" in obj else obj
    vocab = Vocabulary({str(k): int(v) for k, v in mapping.items()})
    ids = sorted(vocab.event_to_index.values())
    if ids != list(range(len(ids))):
        raise ValueError("vocabulary ids must be dense 0..W-1")
    return vocab


def write_model(path: str | Path, model: TopicModel, vocabulary_ref: str = "") -> None:
    """Model JSON with the topic parameter at 17 significant digits."""
    from seqlink import __version__

    k, w = model.lam.shape
    flat = ", ".join(f"{v:.17g}" for v in model.lam.ravel())
    head = {
        "version": __version__,
        "K": k,
        "W": w,
        "alpha": model.alpha,
        "eta": model.eta,
        "corpus_size_used": model.corpus_size_used,
        "vocabulary_ref": vocabulary_ref,
    }
    head_json = json.dumps(head, sort_keys=True)
    text = head_json[:-1] + ', "lambda": [' + flat + "]}"
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_model(path: str | Path, vocabulary: Vocabulary | None = None) -> TopicModel:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    lam = np.array(obj["lambda"], dtype=np.float64).reshape(obj["K"], obj["W"])
    return TopicModel(
        lam,
        vocabulary=vocabulary,
        corpus_size_used=int(obj.get("corpus_size_used", 0)),
        alpha=float(obj["alpha"]),
        eta=float(obj["eta"]),
    )


def write_linkage_csv(path: str | Path, result: LinkageResult) -> None:
    """Rows ``x_view_id,rank,y_view_id,score`` with 12 significant digits."""
    lines = [_version_comment(), "x_view_id,rank,y_view_id,score"]
    for x_id, cands in result.candidates.items():
        for rank, (y_id, score) in enumerate(cands, start=1):
            lines.append(f"{x_id},{rank},{y_id},{score:.12g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_linkage_csv(path: str | Path) -> LinkageResult:
    result = LinkageResult()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x_view_id,"):
                continue
            x_id, rank, y_id, score = line.split(",")
            result.candidates.setdefault(x_id, []).append((y_id, float(score)))
    for cands in result.candidates.values():
        cands.sort(key=lambda t: (t[1], t[0]))
    return result


def write_truth_csv(path: str | Path, truth: GroundTruth) -> None:
    lines = [_version_comment(), "x_view_id,y_view_id"]
    for x_id in sorted(truth.pi):
        for y_id in sorted(truth.pi[x_id]):
            lines.append(f"{x_id},{y_id}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_truth_csv(path: str | Path) -> GroundTruth:
    pi: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x_view_id,"):
                continue
            x_id, y_id = line.split(",")
            pi.setdefault(x_id, set()).add(y_id)
    return GroundTruth(pi={x: frozenset(ys) for x, ys in pi.items()})


def write_recall_csv(path: str | Path, rows) -> None:
    """Long-format sweep/recall rows, one line per (granularity, method, k)."""
    lines = [
        _version_comment(),
        "granularity_spatial,granularity_temporal,method,k,cohort,recall,population",
    ]
    for r in rows:
        lines.append(
            f"{r.spatial_digits},{r.temporal_bins},{r.method},{r.k},"
            f"{r.cohort},{r.recall:.12g},{r.population}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
