"""Shared result record for verification checks."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one check.  ``passed`` holds exactly when ``margin >= 0``."""

    name: str
    passed: bool
    margin: float
    samples: int
    seed: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if bool(self.passed) != bool(self.margin >= 0):
            raise ValueError("passed must agree with the sign of margin")

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = [f"{'check':<10} {self.name}",
                 f"{'pass':<10} {self.passed}",
                 f"{'margin':<10} {self.margin:.6g}",
                 f"{'samples':<10} {self.samples}",
                 f"{'seed':<10} {self.seed}"]
        for k, v in self.details.items():
            if isinstance(v, (list, tuple, np.ndarray)) and len(v) > 8:
                continue
            lines.append(f"{k:<10} {_plain(v)}")
        return "\n".join(lines)
