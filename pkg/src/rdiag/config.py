"""Experiment configuration: a JSON-serializable record of one CLI run."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

__all__ = ["ExperimentConfig", "COMMAND_PARAMS", "STOCHASTIC"]

#: Allowed ``params`` keys per command.
COMMAND_PARAMS: dict[str, frozenset] = {
    "entropy": frozenset({"law", "law_params", "op", "f", "grid"}),
    "geometry": frozenset({"check", "k", "samples"}),
    "cumulants": frozenset({"table", "variance", "order", "op", "csv", "export"}),
    "models": frozenset({"law", "law_params", "k", "samples", "order"}),
    "microstates": frozenset({"spec", "k", "samples", "method", "replicates"}),
    "amplify": frozenset({"d", "v"}),
    "suite": frozenset({"name", "quick"}),
}

#: Commands that draw random numbers and therefore require a seed.
STOCHASTIC = frozenset({"models", "microstates"})


@dataclass
class ExperimentConfig:
    """One run: command, its parameters, seed, workers, output path, tolerances.

    ``tolerances`` override assertion thresholds by name (for example
    ``{"residual": 0.01}`` for the volume check).
    """

    command: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    workers: int = 1
    output: str | None = None
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMAND_PARAMS:
            raise ValueError(f"unknown command {self.command!r}")
        unknown = set(self.params) - COMMAND_PARAMS[self.command]
        if unknown:
            raise ValueError(f"unknown {self.command} parameters: {', '.join(sorted(unknown))}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.seed is not None and not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        needs_seed = self.command in STOCHASTIC or (
            self.command == "geometry" and self.params.get("check") in ("push", "jacobian"))
        if needs_seed and self.seed is None:
            raise ValueError(f"{self.command} is stochastic and needs an explicit seed")
        for k, v in self.tolerances.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ValueError(f"tolerance {k!r} must be a number")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ValueError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "command" not in d:
            raise ValueError("config needs a 'command'")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    def digest(self) -> str:
        """SHA-256 of the canonical JSON, excluding the output path and worker count."""
        d = self.to_dict()
        d.pop("output")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()
