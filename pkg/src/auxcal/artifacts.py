"""JSON persistence for fitted models.

Artifacts round-trip losslessly (floats serialize via shortest round-trip
decimal repr) and byte-identically: keys are sorted and the layout is fixed,
so write -> read -> write reproduces the file exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import DecisionRule
from .estimators import CrossFitResult, HalfFit

__all__ = ["ArtifactError", "ModelArtifact", "save_artifact", "load_artifact"]

SCHEMA_VERSION = "1"


class ArtifactError(ValueError):
    """Malformed artifact file or one unsuitable for the requested use."""


@dataclass(frozen=True)
class ModelArtifact:
    schema_version: str
    method: str
    beta: np.ndarray
    c: float
    support: tuple[int, ...]
    metadata: dict = field(default_factory=dict)

    def rule(self) -> DecisionRule:
        return DecisionRule(self.beta, self.c)

    def to_payload(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "method": self.method,
            "beta": [float(b) for b in self.beta],
            "c": float(self.c),
            "support": [int(q) for q in self.support],
            "metadata": self.metadata,
        }

    @classmethod
    def from_rule(cls, method: str, rule: DecisionRule,
                  metadata: dict | None = None) -> "ModelArtifact":
        return cls(
            schema_version=SCHEMA_VERSION,
            method=method,
            beta=np.asarray(rule.beta, dtype=float),
            c=float(rule.c),
            support=tuple(int(q) for q in np.flatnonzero(rule.beta)),
            metadata=metadata or {},
        )

    def half_fits(self) -> CrossFitResult:
        """Rebuild the cross-fit halves needed by the score test."""
        halves = self.metadata.get("halves")
        if not halves or len(halves) != 2:
            raise ArtifactError(
                f"artifact for method {self.method!r} carries no half-fit "
                "metadata; inference requires a cross-fitted model "
                "(methods 'proposed' or 'two-dataset')"
            )
        rebuilt = tuple(
            HalfFit(
                indices=np.asarray(h["indices"], dtype=int),
                beta=np.asarray(h["beta"], dtype=float),
                c=float(h["c"]),
                k_star=None if h.get("k_star") is None else int(h["k_star"]),
                pooled=None,
                fallback=bool(h.get("fallback", False)),
            )
            for h in halves
        )
        n = int(self.metadata.get("n", sum(len(h.indices) for h in rebuilt)))
        return CrossFitResult(rule=self.rule(), halves=rebuilt, n=n)


def halves_metadata(fits: CrossFitResult) -> list[dict]:
    out = []
    for h in fits.halves:
        out.append({
            "indices": [int(i) for i in h.indices],
            "beta": [float(b) for b in h.beta],
            "c": float(h.c),
            "k_star": None if h.k_star is None else int(h.k_star),
            "fallback": bool(h.fallback),
            "pooled_lambda": (None if h.pooled is None
                              else float(h.pooled.lambda_chosen)),
        })
    return out


def save_artifact(path, artifact: ModelArtifact) -> None:
    with open(path, "w") as fh:
        json.dump(artifact.to_payload(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_artifact(path) -> ModelArtifact:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"{path}: not valid JSON ({exc})") from None
    required = ("schema_version", "method", "beta", "c", "support", "metadata")
    missing = [k for k in required if k not in payload]
    if missing:
        raise ArtifactError(f"{path}: missing artifact fields {missing}")
    if payload["schema_version"] != SCHEMA_VERSION:
        raise ArtifactError(
            f"{path}: unsupported schema version {payload['schema_version']!r}"
        )
    return ModelArtifact(
        schema_version=payload["schema_version"],
        method=payload["method"],
        beta=np.asarray(payload["beta"], dtype=float),
        c=float(payload["c"]),
        support=tuple(int(q) for q in payload["support"]),
        metadata=payload["metadata"],
    )
