"""Run configuration and the flat ``key=value`` config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .knowledge import Strategy


class ConfigError(ValueError):
    """Invalid configuration. ``problems`` lists every offending key."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class RunConfig:
    clients: int = 10
    rounds: int = 20
    s: int = 1
    beta: float = 1.0
    tau: float = 1.0
    lr: float = 0.05
    local_epochs: int = 1
    batch_size: int = 32
    # one spec shared by all clients ("64" or "128,64"); ";" separates
    # per-client specs, which are reused cyclically when fewer than clients
    hidden_dims: str = "64"
    strategy: str = Strategy.PEER_LABEL_AVG.value
    dataset: str = "synthetic"
    mnist_images: str = ""
    mnist_labels: str = ""
    subset_size: int = 0
    synthetic_classes: int = 10
    synthetic_dim: int = 20
    synthetic_per_class: int = 100
    synthetic_spread: float = 1.0
    alpha: float = 0.5
    test_fraction: float = 0.2
    eval_set: str = "personal"
    seed: int = 0
    warmup_ce_rounds: int = 0
    eval_every: int = 1
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        problems = validate(self)
        if problems:
            raise ConfigError(problems)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def client_hidden_dims(self) -> list[list[int]]:
        specs = [_parse_hidden(spec) for spec in self.hidden_dims.split(";")]
        return [specs[k % len(specs)] for k in range(self.clients)]


def _parse_hidden(spec: str) -> list[int]:
    spec = spec.strip()
    if not spec:
        return []
    return [int(v) for v in spec.split(",")]


def validate(cfg: RunConfig) -> list[str]:
    problems = []

    def need(ok, msg):
        if not ok:
            problems.append(msg)

    need(cfg.clients >= 2, f"clients={cfg.clients}: need clients >= 2")
    need(cfg.rounds >= 1, f"rounds={cfg.rounds}: need rounds >= 1")
    need(cfg.s >= 1, f"s={cfg.s}: need s >= 1")
    need(cfg.beta >= 0, f"beta={cfg.beta}: need beta >= 0")
    need(cfg.tau > 0, f"tau={cfg.tau}: need tau > 0")
    need(cfg.lr > 0, f"lr={cfg.lr}: need lr > 0")
    need(cfg.local_epochs >= 1, f"local_epochs={cfg.local_epochs}: need local_epochs >= 1")
    need(cfg.batch_size >= 1, f"batch_size={cfg.batch_size}: need batch_size >= 1")
    try:
        dims = cfg.client_hidden_dims()
        need(all(d >= 1 for spec in dims for d in spec), f"hidden_dims={cfg.hidden_dims}: widths must be >= 1")
    except ValueError:
        problems.append(f"hidden_dims={cfg.hidden_dims}: expected comma-separated integers, ';' between clients")
    need(cfg.strategy in {s.value for s in Strategy},
         f"strategy={cfg.strategy}: expected one of {', '.join(s.value for s in Strategy)}")
    need(cfg.dataset in ("synthetic", "mnist"), f"dataset={cfg.dataset}: expected synthetic or mnist")
    if cfg.dataset == "mnist":
        need(bool(cfg.mnist_images), "mnist_images: required when dataset=mnist")
        need(bool(cfg.mnist_labels), "mnist_labels: required when dataset=mnist")
    need(cfg.subset_size >= 0, f"subset_size={cfg.subset_size}: need subset_size >= 0")
    need(cfg.synthetic_classes >= 1, f"synthetic_classes={cfg.synthetic_classes}: need >= 1")
    need(cfg.synthetic_dim >= 1, f"synthetic_dim={cfg.synthetic_dim}: need >= 1")
    need(cfg.synthetic_per_class >= 1, f"synthetic_per_class={cfg.synthetic_per_class}: need >= 1")
    need(cfg.synthetic_spread > 0, f"synthetic_spread={cfg.synthetic_spread}: need > 0")
    need(cfg.alpha > 0, f"alpha={cfg.alpha}: need alpha > 0")
    need(0 < cfg.test_fraction < 1, f"test_fraction={cfg.test_fraction}: need 0 < test_fraction < 1")
    need(cfg.eval_set in ("personal", "global"), f"eval_set={cfg.eval_set}: expected personal or global")
    need(cfg.seed >= 0, f"seed={cfg.seed}: need seed >= 0")
    need(cfg.warmup_ce_rounds >= 0, f"warmup_ce_rounds={cfg.warmup_ce_rounds}: need >= 0")
    need(cfg.eval_every >= 1, f"eval_every={cfg.eval_every}: need eval_every >= 1")
    need(cfg.workers >= 1, f"workers={cfg.workers}: need workers >= 1")
    return problems


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name: str, raw: str):
    kind = _FIELDS[name].type
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key=value`` lines; ``#`` starts a comment. Every problem is reported at once."""
    values, problems = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep:
            problems.append(f"{source}:{lineno}: expected key=value, got {line!r}")
        elif key not in _FIELDS:
            problems.append(f"{key}: unknown key ({source}:{lineno})")
        elif key in values:
            problems.append(f"{key}: given more than once ({source}:{lineno})")
        else:
            try:
                values[key] = _convert(key, raw)
            except ValueError as exc:
                problems.append(f"{key}={raw}: {exc}")
    if problems:
        raise ConfigError(problems)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path}: {exc.strerror or exc}"]) from exc
    return parse_config_text(text, str(path))


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"
