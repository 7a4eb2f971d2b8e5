"""Experiment configuration: TOML loading, validation and hashing.

A config file looks like::

    command = "ric-exact"
    seed = 7
    trials = 1000
    out = "ric.csv"

    [dist]
    kind = "gaussian"
    variance = 1.0

    [dims]
    L = 2
    m = 8
    d = 4
    s = 2

    [partition]
    size = 2            # or: groups = [[1, 2], [3, 4], ...]  (1-based)

    [basis]
    mode = "identity"   # or "haar"

    [grid]
    m = [4, 8, 16]

    [options]
    delta_target = 0.3

Command-line flags (``--seed``, ``--trials``, ``--out``) override file values,
which override the defaults below.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .distributions import DistributionSpec
from .errors import BlockRipError, ValidationError
from .group_model import GroupPartition

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

COMMANDS = ("sample", "psi-norm", "ric-exact", "ric-mc", "chaos-tail", "moment-check", "chaining",
            "phase-transition", "recover", "increment-check")

NEEDS_DIMS = {"ric-exact", "ric-mc", "chaining", "phase-transition", "recover"}
NEEDS_GRID = {
    "chaos-tail": ("thresholds",),
    "moment-check": ("p",),
    "increment-check": ("u",),
    "phase-transition": ("s", "m"),
    "recover": ("m",),
}
DEFAULT_TRIALS = 10_000


@dataclass
class ExperimentConfig:
    command: str
    dist: dict = field(default_factory=lambda: {"kind": "gaussian", "variance": 1.0})
    dims: dict = field(default_factory=dict)
    partition: dict = field(default_factory=dict)
    basis: dict = field(default_factory=dict)
    matrix: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    seed: int = 0
    trials: int = DEFAULT_TRIALS
    out: str | None = None
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | str = ".") -> "ExperimentConfig":
        known = {"command", "dist", "dims", "partition", "basis", "matrix", "grid", "options", "seed",
                 "trials", "out"}
        extra = sorted(set(raw) - known)
        if extra:
            raise ValidationError(f"config: unknown key {extra[0]!r}")
        kw = {k: raw[k] for k in known if k in raw}
        kw.setdefault("command", "")
        return cls(**kw, base_dir=Path(base_dir))

    @classmethod
    def load(cls, path, command: str | None = None, **overrides) -> "ExperimentConfig":
        """Read a TOML file; keyword overrides that are not ``None`` win."""
        path = Path(path)
        try:
            raw = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"config: {exc}") from None
        cfg = cls.from_dict(raw, path.parent)
        if command is not None:
            if cfg.command and cfg.command != command:
                raise ValidationError(f"command: config is for {cfg.command!r}, not {command!r}")
            cfg.command = command
        return cfg.with_overrides(**overrides)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        """Canonical, JSON-serialisable echo of every field that affects results."""
        return {"command": self.command, "dist": self.dist, "dims": self.dims, "partition": self.partition,
                "basis": self.basis, "matrix": self.matrix, "grid": self.grid, "options": self.options,
                "seed": self.seed, "trials": self.trials}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # resolved objects -------------------------------------------------
    def dist_spec(self) -> DistributionSpec:
        return DistributionSpec.from_config(self.dist)

    @property
    def D(self) -> int:
        return int(self.dims["d"]) * int(self.dims["L"])

    def partition_obj(self) -> GroupPartition:
        if "groups" in self.partition:
            return GroupPartition.from_config(self.partition["groups"], self.D)
        return GroupPartition.contiguous(self.D, int(self.partition.get("size", 1)))

    def option(self, key, default=None):
        return self.options.get(key, default)

    def path(self, rel) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate(config: ExperimentConfig) -> list[str]:
    """All rule violations of ``config``; an empty list means it is runnable."""
    out: list[str] = []
    if config.command not in COMMANDS:
        out.append(f"command: must be one of {', '.join(COMMANDS)}")
    if not _is_int(config.seed) or not 0 <= config.seed < 2**64:
        out.append("seed: must be an integer in [0, 2^64)")
    if not _is_int(config.trials) or config.trials < 1:
        out.append("trials: must be a positive integer")
    try:
        config.dist_spec()
    except (BlockRipError, ValueError, TypeError) as exc:
        msg = str(exc)
        out.append(msg if msg.startswith("dist:") else f"dist: {msg}")

    dims = config.dims
    if dims or config.command in NEEDS_DIMS:
        bad = [k for k in ("L", "m", "d") if not (_is_int(dims.get(k)) and dims[k] >= 1)]
        for k in bad:
            out.append(f"dims: {k} must be a positive integer")
        if not bad:
            if "D" in dims and dims["D"] != config.D:
                out.append("dims: D must equal d*L")
            try:
                part = config.partition_obj()
            except BlockRipError as exc:
                out.append(str(exc))
            else:
                if "G" in dims and dims["G"] != part.G:
                    out.append(f"dims: G must equal the number of groups ({part.G})")
                s = dims.get("s")
                if s is not None and not (_is_int(s) and 0 <= s <= part.G):
                    out.append("dims: s must lie in [0, G]")
            if config.basis.get("mode", "identity") not in ("identity", "haar"):
                out.append("basis: mode must be identity or haar")
        if config.command in ("ric-exact", "ric-mc", "chaining", "recover") and "s" not in dims:
            out.append("dims: s is required")

    for key in NEEDS_GRID.get(config.command, ()):
        vals = config.grid.get(key)
        if not isinstance(vals, list) or not vals:
            out.append(f"grid: {key} must be a non-empty list")
    if "file" in config.matrix and not config.path(config.matrix["file"]).is_file():
        out.append(f"matrix: file {config.matrix['file']} not found")
    return out


def check(config: ExperimentConfig) -> None:
    """Raise :class:`ValidationError` carrying every violation on one line."""
    problems = validate(config)
    if problems:
        raise ValidationError("; ".join(problems))
