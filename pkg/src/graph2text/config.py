"""Flat key=value run configuration with a typed key registry.

Files hold one ``namespace.key = value`` pair per line ('#' starts a
comment); command-line ``--set key=value`` overrides win over the file.
Unknown keys are an error.  ``train.lr = auto`` resolves by training mode.
"""

from __future__ import annotations

from .adapters import AdapterConfig
from .training import TrainConfig
from .transformer import BackboneConfig


class ConfigError(ValueError):
    pass


def _bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _optional_float(raw: str):
    return None if raw.lower() in ("auto", "none") else float(raw)


# key -> (parser, default)
REGISTRY: dict[str, tuple] = {
    "data.dataset": (str, ""),
    "data.vocab": (str, ""),
    "data.backbone": (str, ""),
    "data.max_nodes": (int, 8),
    "data.reentrancy_rate": (float, 0.3),
    "data.records": (int, 1000),

    "backbone.layers": (int, 2),
    "backbone.d_model": (int, 64),
    "backbone.heads": (int, 4),
    "backbone.ffn": (int, 128),
    "backbone.vocab_size": (int, 0),  # 0: derive from the vocabulary file
    "backbone.max_src_len": (int, 192),
    "backbone.max_tgt_len": (int, 64),
    "backbone.dropout": (float, 0.0),

    "adapter.variant": (str, "none"),  # none | adapt | structadapt_gcn | structadapt_rgcn
    "adapter.hidden": (int, 16),
    "adapter.encoder": (_bool, True),
    "adapter.decoder": (_bool, True),
    "adapter.basis": (int, 0),
    "adapter.gcn_degree": (str, "in_self"),

    "train.mode": (str, "adapters_only"),
    "train.lr": (_optional_float, None),
    "train.batch_size": (int, 4),
    "train.beam": (int, 5),
    "train.max_steps": (int, 2000),
    "train.patience": (int, 5),
    "train.seed": (int, 0),
    "train.max_epochs": (int, 1000),
    "train.linearization": (str, "canon"),
    "train.variant": (str, "nodes_and_edges"),
    "train.rep": (str, "rep1"),
}


def default_config() -> dict:
    return {key: default for key, (_, default) in REGISTRY.items()}


def parse_entry(key: str, raw: str):
    if key not in REGISTRY:
        raise ConfigError(f"unknown config key {key!r}")
    parser, _ = REGISTRY[key]
    try:
        return parser(raw.strip())
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def load_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = stripped.split("=", 1)
            values[key.strip()] = parse_entry(key.strip(), raw)
    return values


def resolve_config(path=None, overrides=()) -> dict:
    cfg = default_config()
    if path:
        cfg.update(load_config_file(path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        cfg[key.strip()] = parse_entry(key.strip(), raw)
    return cfg


def save_config(cfg: dict, path) -> None:
    """Deterministic snapshot: sorted keys, canonical rendering."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(cfg):
            value = cfg[key]
            if value is None:
                value = "auto"
            elif isinstance(value, bool):
                value = "true" if value else "false"
            fh.write(f"{key} = {value}\n")


# --- builders -------------------------------------------------------------------


def backbone_config(cfg: dict, vocab_size: int | None = None) -> BackboneConfig:
    size = cfg["backbone.vocab_size"] or vocab_size
    if not size:
        raise ConfigError("backbone.vocab_size is unset and no vocabulary was given")
    return BackboneConfig(
        vocab_size=size,
        layers=cfg["backbone.layers"],
        d_model=cfg["backbone.d_model"],
        heads=cfg["backbone.heads"],
        ffn=cfg["backbone.ffn"],
        max_src_len=cfg["backbone.max_src_len"],
        max_tgt_len=cfg["backbone.max_tgt_len"],
        dropout=cfg["backbone.dropout"],
    )


def adapter_config(cfg: dict, relations: tuple[str, ...]) -> AdapterConfig | None:
    if cfg["adapter.variant"] == "none":
        return None
    return AdapterConfig(
        variant=cfg["adapter.variant"],
        hidden=cfg["adapter.hidden"],
        encoder=cfg["adapter.encoder"],
        decoder=cfg["adapter.decoder"],
        relations=relations,
        basis=cfg["adapter.basis"],
        gcn_degree=cfg["adapter.gcn_degree"],
    )


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        mode=cfg["train.mode"],
        lr=cfg["train.lr"],
        batch_size=cfg["train.batch_size"],
        beam=cfg["train.beam"],
        max_steps=cfg["train.max_steps"],
        patience=cfg["train.patience"],
        seed=cfg["train.seed"],
        max_epochs=cfg["train.max_epochs"],
        linearization=cfg["train.linearization"],
        variant=cfg["train.variant"],
        rep=cfg["train.rep"],
    )
