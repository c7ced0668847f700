"""Run configuration: one validated object drives a whole engine run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .community import SAMPLING_POLICIES
from .errors import ConfigError
from .sandbox.budget import Budget

BACKENDS = ("scripted", "live", "replay")


@dataclass(frozen=True, slots=True)
class RunConfig:
    bundle_path: str
    backend: str = "scripted"
    script_path: Optional[str] = None  # scripted: routing-table JSON
    replay_dir: Optional[str] = None  # replay: previous run's llm_logs
    endpoint: Optional[str] = None  # live
    model: Optional[str] = None  # live
    api_key: Optional[str] = None  # live
    seed: int = 0
    max_iterations: int = 2
    n_parallel: int = 4
    n_drafts: Optional[int] = None  # defaults to n_parallel
    k_kernel: int = 10
    k_discussion: int = 10
    n_kernel_samples: int = 3
    n_discussion_samples: int = 2
    sampling_policy: str = "top_score"
    dataset_access: bool = False
    train_ratio: float = 0.9
    run_wall: float = 24 * 3600.0
    session_wall: float = 5 * 3600.0
    cell_wall: float = 2 * 3600.0
    max_steps: int = 30
    poll_interval: float = 30.0
    deterministic: Optional[bool] = None  # defaults by backend

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; pick one of {BACKENDS}")
        if self.backend == "scripted" and not self.script_path:
            raise ConfigError("scripted backend needs script_path")
        if self.backend == "replay" and not self.replay_dir:
            raise ConfigError("replay backend needs replay_dir")
        if self.backend == "live" and not (self.endpoint and self.model):
            raise ConfigError("live backend needs endpoint and model")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.n_parallel < 1:
            raise ConfigError("n_parallel must be at least 1")
        if self.n_drafts is not None and self.n_drafts < 1:
            raise ConfigError("n_drafts must be at least 1 when given")
        if self.sampling_policy not in SAMPLING_POLICIES:
            raise ConfigError(
                f"unknown sampling policy {self.sampling_policy!r}; "
                f"pick one of {SAMPLING_POLICIES}"
            )
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError("train_ratio must be strictly between 0 and 1")
        for name in ("k_kernel", "k_discussion", "n_kernel_samples", "n_discussion_samples"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} cannot be negative")
        self.budget()  # Budget validates wall nesting and max_steps

    @property
    def drafts_per_iteration(self) -> int:
        return self.n_drafts if self.n_drafts is not None else self.n_parallel

    @property
    def is_deterministic(self) -> bool:
        if self.deterministic is not None:
            return self.deterministic
        return self.backend in ("scripted", "replay")

    def budget(self) -> Budget:
        return Budget(
            run_wall=self.run_wall,
            session_wall=self.session_wall,
            cell_wall=self.cell_wall,
            max_steps=self.max_steps,
        )

    def derive_seed(self, purpose: str) -> int:
        """Stable per-purpose seed so subsystems never share RNG streams."""
        digest = hashlib.sha256(f"{self.seed}:{purpose}".encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")

    @classmethod
    def from_file(cls, path: str, **overrides) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"config file {path} has unknown keys: {unknown}")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        if "bundle_path" not in raw:
            raise ConfigError(f"config file {path} does not name a bundle_path")
        return cls(**raw)

    def with_overrides(self, **overrides) -> "RunConfig":
        cleaned = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **cleaned) if cleaned else self

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        out["api_key"] = "***" if self.api_key else None  # never persist secrets
        return out


def make_backend(config: RunConfig):
    from .gateway.backends import LiveBackend, ReplayBackend, ScriptedBackend

    if config.backend == "scripted":
        return ScriptedBackend.from_json(config.script_path)
    if config.backend == "replay":
        return ReplayBackend(config.replay_dir)
    return LiveBackend(config.endpoint, config.model, api_key=config.api_key)
