"""Key-value run configuration files.

One ``key = value`` per line; ``#`` starts a comment; blank lines and
``[section]`` headers are ignored.  Values are parsed as bool
(``true``/``false``), int, float, or otherwise kept as strings (quotes
optional).  Relative paths are resolved against the config file's directory.

Recognised keys
---------------
model            transformer | lstm
attention        relative | sliding_window | dense_causal   (transformer only)
vocab_size, d_model, num_layers, num_heads, ff_dim, max_len,
attention_window, dilation, dropout
embed_dim, hidden_dim, lstm_layers                           (lstm only)
lr, beta1, beta2, eps_adam, batch_size, max_steps, use_xavier_init,
use_early_stopping, early_stop_patience, eval_interval, max_eval_windows,
clip_norm, seed
train_data       token file or directory of ``.bbtk`` files
val_data         same; if absent, the last ``val_fraction`` of train files
val_fraction     default 0.1
window           training window length L (default max_len + 1)
stride           window stride (default = window)
output_dir       where the checkpoint and log go

Environment overrides: ``LONGMUSIC_SEED`` replaces ``seed``;
``LONGMUSIC_THREADS`` caps BLAS threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .model import LstmConfig, ModelConfig
from .training import TrainConfig

MODEL_KEYS = {
    "model", "attention", "vocab_size", "d_model", "num_layers", "num_heads", "ff_dim", "max_len",
    "attention_window", "dilation", "dropout", "embed_dim", "hidden_dim", "lstm_layers",
}
TRAIN_KEYS = {
    "lr", "beta1", "beta2", "eps_adam", "batch_size", "max_steps", "use_xavier_init", "use_early_stopping",
    "early_stop_patience", "eval_interval", "max_eval_windows", "clip_norm", "seed",
}
DATA_KEYS = {"train_data", "val_data", "val_fraction", "window", "stride", "output_dir"}
PATH_KEYS = {"train_data", "val_data", "output_dir"}


class ConfigError(ValueError):
    pass


def _parse_value(raw: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in MODEL_KEYS | TRAIN_KEYS | DATA_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(value)
    return out


@dataclass
class RunConfig:
    train: TrainConfig
    train_data: Path | None
    val_data: Path | None
    val_fraction: float
    window: int
    stride: int
    output_dir: Path


def model_config_from(values: dict) -> ModelConfig | LstmConfig:
    kind = values.get("model", "transformer")
    common = {k: values[k] for k in ("vocab_size", "max_len") if k in values}
    if "dropout" in values:
        common["dropout_p"] = float(values["dropout"])
    if kind == "lstm":
        extra = {k: values[k] for k in ("embed_dim", "hidden_dim") if k in values}
        if "lstm_layers" in values:
            extra["num_layers"] = values["lstm_layers"]
        return LstmConfig(**common, **extra)
    if kind != "transformer":
        raise ConfigError(f"unknown model kind {kind!r}")
    extra = {k: values[k] for k in ("d_model", "num_layers", "num_heads", "ff_dim", "attention_window", "dilation") if k in values}
    if "attention" in values:
        extra["attention_mode"] = values["attention"]
    return ModelConfig(**common, **extra)


def run_config_from(values: dict, base_dir: Path = Path(".")) -> RunConfig:
    values = dict(values)
    if "LONGMUSIC_SEED" in os.environ:
        values["seed"] = int(os.environ["LONGMUSIC_SEED"])
    for key in PATH_KEYS & values.keys():
        if values[key] is not None:
            p = Path(str(values[key]))
            values[key] = p if p.is_absolute() else (base_dir / p)
    try:
        mcfg = model_config_from(values)
        tcfg = TrainConfig(mcfg, **{k: values[k] for k in TRAIN_KEYS if k in values})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    window = int(values.get("window", mcfg.max_len + 1))
    if window - 1 > mcfg.max_len:
        raise ConfigError(f"window {window} needs max_len >= {window - 1}")
    return RunConfig(
        train=tcfg,
        train_data=values.get("train_data"),
        val_data=values.get("val_data"),
        val_fraction=float(values.get("val_fraction", 0.1)),
        window=window,
        stride=int(values.get("stride", window)),
        output_dir=values.get("output_dir") or base_dir / "runs",
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    return run_config_from(parse_config_text(path.read_text()), path.parent)


def thread_limit() -> int | None:
    raw = os.environ.get("LONGMUSIC_THREADS")
    return int(raw) if raw else None
