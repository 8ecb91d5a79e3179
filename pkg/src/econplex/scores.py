from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

METRICS = (
    "diversity",
    "ubiquity",
    "mr_country",
    "mr_product",
    "eci",
    "pci",
    "fitness",
    "product_complexity",
)


def fmt(x: float) -> str:
    """Fixed 12-significant-digit float formatting used in every output file."""
    return format(float(x), ".12g")


@dataclass(frozen=True)
class ScoreVector:
    kind: str
    labels: tuple[str, ...]
    values: np.ndarray
    metric: str

    def __post_init__(self):
        if self.kind not in ("country", "product"):
            raise ValueError(f"kind must be country or product, got {self.kind!r}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) != len(self.labels) or len(values) == 0:
            raise ValueError("ScoreVector needs one finite value per label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("ScoreVector labels must be unique")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"non-finite {self.metric} scores")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.labels)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.values.tolist()))

    def get(self, label: str) -> float:
        return float(self.values[self.labels.index(label)])

    def reorder(self, labels: Sequence[str]) -> "ScoreVector":
        d = self.as_dict()
        return ScoreVector(self.kind, tuple(labels), np.array([d[x] for x in labels]), self.metric)

    def to_csv(self) -> str:
        """``label,value`` rows sorted by value descending (label breaks ties)."""
        order = sorted(range(len(self)), key=lambda i: (-self.values[i], self.labels[i]))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "value"])
        for i in order:
            w.writerow([self.labels[i], fmt(self.values[i])])
        return buf.getvalue()

    @classmethod
    def from_mapping(cls, kind: str, metric: str, values: Mapping[str, float]) -> "ScoreVector":
        labels = sorted(values)
        return cls(kind, tuple(labels), np.array([values[k] for k in labels], dtype=float), metric)
