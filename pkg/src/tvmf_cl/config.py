"""TOML experiment configuration: parsing, validation, serialization.

Sections and keys are validated against a fixed schema and unknown keys
are rejected, so a typo in a hyperparameter name fails loudly instead of
silently running defaults. Every key has a default; an empty file is a
valid (if tiny) experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .continual import RunConfig
from .data import AugmentConfig, CIFAR_IMAGE_SHAPE
from .encoder import SgdConfig
from .loss import LossConfig
from .similarity import SimilarityKind


class ConfigError(ValueError):
    """Invalid configuration file or contents."""


@dataclass
class DataConfig:
    kind: str = "synthetic"
    seed: int = 0
    n_classes: int = 10
    dim: int = 32
    per_class: int = 40
    spread: float = 0.3
    path: str = ""

    def __post_init__(self):
        if self.kind not in ("synthetic", "cifar10"):
            raise ConfigError(f"data.kind must be 'synthetic' or 'cifar10', got {self.kind!r}")


@dataclass
class ExperimentConfig:
    """Full experiment description: dataset, run settings, output dir."""

    data: DataConfig = field(default_factory=DataConfig)
    run: RunConfig = field(default_factory=RunConfig)
    out_dir: str = "runs/out"

    def to_dict(self) -> dict:
        """Nested plain dict mirroring the TOML layout."""
        return {
            "experiment": {
                "seeds": list(self.run.seeds),
                "out_dir": self.out_dir,
            },
            "data": {
                "kind": self.data.kind,
                "seed": self.data.seed,
                "n_classes": self.data.n_classes,
                "dim": self.data.dim,
                "per_class": self.data.per_class,
                "spread": self.data.spread,
                "path": self.data.path,
            },
            "model": {
                "hidden_dims": list(self.run.hidden_dims),
                "representation_dim": self.run.representation_dim,
                "projection_dim": self.run.projection_dim,
            },
            "train": {
                "learning_rate": self.run.sgd.learning_rate,
                "momentum": self.run.sgd.momentum,
                "epochs_per_task": self.run.epochs_per_task,
                "batch_current": self.run.batch_current,
                "batch_replay": self.run.batch_replay,
                "buffer_capacity": self.run.buffer_capacity,
            },
            "loss": {
                "similarity": self.run.loss.kind.kind,
                "kappa": self.run.loss.kind.kappa,
                "temperature": self.run.loss.temperature,
                "mean_over_anchors": self.run.loss.mean_over_anchors,
            },
            "augment": {
                "noise_sigma": self.run.augment.noise_sigma,
                "scale_jitter": self.run.augment.scale_jitter,
                "crop_padding": self.run.augment.crop_padding,
                "flip_prob": self.run.augment.flip_prob,
            },
            "probe": {
                "epochs": self.run.probe_epochs,
                "lr": self.run.probe_lr,
                "on_embedding": self.run.probe_on_embedding,
            },
        }


_SCHEMA: dict[str, set[str]] = {
    "experiment": {"seeds", "out_dir"},
    "data": {"kind", "seed", "n_classes", "dim", "per_class", "spread", "path"},
    "model": {"hidden_dims", "representation_dim", "projection_dim"},
    "train": {
        "learning_rate",
        "momentum",
        "epochs_per_task",
        "batch_current",
        "batch_replay",
        "buffer_capacity",
    },
    "loss": {"similarity", "kappa", "temperature", "mean_over_anchors"},
    "augment": {"noise_sigma", "scale_jitter", "crop_padding", "flip_prob"},
    "probe": {"epochs", "lr", "on_embedding"},
}


def _validate_schema(raw: dict) -> None:
    for section, content in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"[{section}] must be a table")
        unknown = set(content) - _SCHEMA[section]
        if unknown:
            raise ConfigError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
            )


def _section(raw: dict, name: str) -> dict:
    return raw.get(name, {})


def _similarity_kind(loss_raw: dict) -> SimilarityKind:
    name = loss_raw.get("similarity", "tvmf")
    kappa = float(loss_raw.get("kappa", 16.0))
    try:
        if name == "cosine":
            return SimilarityKind.cosine()
        if name == "vmf":
            return SimilarityKind.vmf(kappa)
        if name == "tvmf":
            return SimilarityKind.tvmf(kappa)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    raise ConfigError(f"loss.similarity must be cosine, vmf or tvmf, got {name!r}")


def from_dict(raw: dict) -> ExperimentConfig:
    """Build a validated ExperimentConfig from a parsed TOML dict."""
    _validate_schema(raw)
    exp = _section(raw, "experiment")
    d = _section(raw, "data")
    model = _section(raw, "model")
    train = _section(raw, "train")
    loss_raw = _section(raw, "loss")
    aug = _section(raw, "augment")
    probe = _section(raw, "probe")

    try:
        data_cfg = DataConfig(
            kind=d.get("kind", "synthetic"),
            seed=int(d.get("seed", 0)),
            n_classes=int(d.get("n_classes", 10)),
            dim=int(d.get("dim", 32)),
            per_class=int(d.get("per_class", 40)),
            spread=float(d.get("spread", 0.3)),
            path=str(d.get("path", "")),
        )
        image_shape = CIFAR_IMAGE_SHAPE if data_cfg.kind == "cifar10" else None
        run_cfg = RunConfig(
            sgd=SgdConfig(
                learning_rate=float(train.get("learning_rate", 0.05)),
                momentum=float(train.get("momentum", 0.0)),
            ),
            loss=LossConfig(
                temperature=float(loss_raw.get("temperature", 0.5)),
                kind=_similarity_kind(loss_raw),
                mean_over_anchors=bool(loss_raw.get("mean_over_anchors", False)),
            ),
            augment=AugmentConfig(
                noise_sigma=float(aug.get("noise_sigma", 0.1)),
                scale_jitter=float(aug.get("scale_jitter", 0.1)),
                crop_padding=int(aug.get("crop_padding", 0)),
                flip_prob=float(aug.get("flip_prob", 0.0)),
                image_shape=image_shape,
            ),
            hidden_dims=[int(v) for v in model.get("hidden_dims", [32])],
            representation_dim=int(model.get("representation_dim", 16)),
            projection_dim=int(model.get("projection_dim", 16)),
            epochs_per_task=int(train.get("epochs_per_task", 5)),
            batch_current=int(train.get("batch_current", 32)),
            batch_replay=int(train.get("batch_replay", 32)),
            buffer_capacity=int(train.get("buffer_capacity", 200)),
            probe_epochs=int(probe.get("epochs", 300)),
            probe_lr=float(probe.get("lr", 0.5)),
            probe_on_embedding=bool(probe.get("on_embedding", False)),
            seeds=[int(s) for s in exp.get("seeds", [0])],
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e

    return ExperimentConfig(
        data=data_cfg,
        run=run_cfg,
        out_dir=str(exp.get("out_dir", "runs/out")),
    )


def parse_text(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        # tomllib error messages carry line and column information.
        raise ConfigError(f"TOML parse error: {e}") from e
    return from_dict(raw)


def parse_file(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_text(p.read_text())


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__} to TOML")


def to_toml(cfg: ExperimentConfig) -> str:
    """Serialize back to TOML; reparsing yields semantically equal settings."""
    lines = []
    for section, content in cfg.to_dict().items():
        lines.append(f"[{section}]")
        for key, value in content.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)
