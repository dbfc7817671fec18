"""Run configuration: YAML text validated against a JSON schema.

A config names only what it changes. Everything else is filled from the
bundled ``default.config`` and the operator parameter file, and the fully
resolved document is what the run manifest stores and hashes.
"""
from __future__ import annotations

import copy
import hashlib
import json
import platform
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numba
import numpy as np
import yaml

from . import __version__
from .rcm import IkParams
from .sim.experiment import ExperimentConfig
from .sim.operator import OperatorModel, default_operator_models
from .sim.trial import ConditionConfig, ContactModel
from .teleop import TeleopConfig

OPERATOR_FIELDS = ("tremor_rms", "tremor_band", "reaction_delay", "max_hand_speed",
                   "perception_noise", "press_threshold", "angle_sensitivity", "patience")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _data_text(name: str) -> str:
    return resources.files("rcmsim.data").joinpath(name).read_text()


def schema() -> dict:
    return json.loads(_data_text("config.schema.json"))


def default_config_text() -> str:
    return _data_text("default.config")


def _field_path(error) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        parts += extra[:1]
    elif error.validator == "required":
        missing = [k for k in error.validator_value if k not in error.instance]
        parts += missing[:1]
    return ".".join(parts) or "<root>"


def validate(doc) -> None:
    """Schema check; raises ConfigError listing every problem by field path."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>: config must be a mapping")
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        lines = [f"{_field_path(e)}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _floatify(obj):
    """Numbers as floats, except the keys that must stay integers."""
    if isinstance(obj, dict):
        return {k: (v if k in ("seed", "count", "max_iters", "version") else _floatify(v))
                for k, v in obj.items()}
    if isinstance(obj, list):
        return [_floatify(v) for v in obj]
    if isinstance(obj, int) and not isinstance(obj, bool):
        return float(obj)
    return obj


def resolve(doc: dict) -> dict:
    """Validate ``doc`` and fill every unset field from the bundled defaults."""
    validate(doc)
    base = yaml.safe_load(default_config_text())
    models = default_operator_models()
    for tier, m in models.items():
        base["operators"][tier].update(
            {f: (list(getattr(m, f)) if f == "tremor_band" else getattr(m, f))
             for f in OPERATOR_FIELDS})
    resolved = _floatify(_merge(base, doc))
    validate(resolved)
    return resolved


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration; ``document`` is the full nested mapping."""

    document: dict

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        cfg = cls(resolve(doc))
        cfg.experiment()  # cross-field checks
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        if isinstance(doc, dict) and "config_hash" in doc and "config" in doc:
            doc = doc["config"]  # a run manifest
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def default(cls) -> "RunConfig":
        return cls.from_text(default_config_text())

    def to_dict(self) -> dict:
        return copy.deepcopy(self.document)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.document, sort_keys=False, default_flow_style=None)

    @property
    def seed(self) -> int:
        return int(self.document["seed"])

    @property
    def output_dir(self) -> str:
        return self.document["output_dir"]

    @property
    def trace(self) -> bool:
        return bool(self.document["trace"])

    def config_hash(self) -> str:
        canon = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def experiment(self, threads: int | None = None) -> ExperimentConfig:
        d = self.document
        ops = {}
        for tier in ("expert", "novice"):
            params = {k: v for k, v in d["operators"][tier].items() if k != "count"}
            params["tremor_band"] = tuple(params["tremor_band"])
            ops[tier] = _build(f"operators.{tier}", OperatorModel, tier=tier, **params)
        c = d["conditions"]
        rob = c["robotic"]
        ik = dict(rob["ik"])
        ik["max_iters"] = int(ik["max_iters"])
        robotic = _build("conditions.robotic", ConditionConfig, "robotic",
                         teleop=_build("conditions.robotic.teleop", TeleopConfig, **rob["teleop"]),
                         ik=_build("conditions.robotic.ik", IkParams, **ik),
                         workspace_radius=rob["workspace_radius"],
                         reengage_radius=rob["reengage_radius"])
        b = d["board"]
        return _build(
            "operators", ExperimentConfig,
            seed=self.seed,
            n_expert=d["operators"]["expert"]["count"],
            n_novice=d["operators"]["novice"]["count"],
            operators=ops,
            manual=_build("conditions.manual", ConditionConfig.manual, **c["manual"]),
            robotic=robotic,
            contact=_build("contact", ContactModel, **d["contact"]),
            board_seed=b["seed"],
            fulcrum=tuple(b["fulcrum"]),
            depth_range=tuple(b["depth_range"]),
            min_separation=b["min_separation"],
            threads=threads,
        )


def _build(where, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


# ---------------------------------------------------------------- manifest

def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    return {"rcmsim": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "numba": numba.__version__,
            "pyyaml": yaml.__version__}


def build_manifest(cfg: RunConfig, outputs) -> dict:
    """Everything needed to regenerate ``outputs``: the resolved config and hashes."""
    return {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "versions": versions(),
        "config": cfg.to_dict(),
        "outputs": {Path(p).name: file_sha256(p) for p in outputs},
    }
