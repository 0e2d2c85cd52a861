"""Run configuration: INI file with per-module sections plus CLI overrides.

Example::

    [run]
    seed = 7
    jobs = 2
    out = results

    [protocol]
    p_z = 0.9
    block_n_z = 1e7

    [scenario:C]          ; adds a hardware scenario named C
    base = A              ; start from scenario A and override fields
    dark_rate_hz = 100

    [anneal]
    n_temps = 100
"""
from dataclasses import dataclass, field, fields, replace
import configparser
import hashlib
from pathlib import Path

from .detection import SCENARIOS, HardwareScenario
from .optimize import AnnealSchedule

__all__ = ["ConfigError", "RunConfig", "load_config", "task_seed", "DEFAULT_PROTOCOL"]

DEFAULT_PROTOCOL = {
    "p_z": 0.8,
    "p_mu": 0.7,
    "mu": 0.5,
    "nu": 0.15,
    "t_gat_over_j": 6.0,
    "block_n_z": 1e7,
    "eps_sec": 1e-9,
    "eps_cor": 1e-15,
    "f_ec": 1.16,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    jobs: int = 1
    out: str = "results"
    protocol: dict = field(default_factory=lambda: dict(DEFAULT_PROTOCOL))
    scenarios: dict = field(default_factory=lambda: dict(SCENARIOS))
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    atmosphere: str = ""
    radiance: str = ""
    source_text: str = ""

    @property
    def digest(self):
        """Hash of the configuration contents that affect results."""
        items = [
            f"seed={self.seed}",
            *(f"protocol.{k}={v!r}" for k, v in sorted(self.protocol.items())),
            *(f"scenario.{k}={v!r}" for k, v in sorted(self.scenarios.items())),
            f"anneal={self.anneal!r}",
            f"atmosphere={_file_digest(self.atmosphere)}",
        ]
        return hashlib.sha256("\n".join(items).encode()).hexdigest()[:16]

    def scenario(self, name):
        try:
            return self.scenarios[name]
        except KeyError:
            raise ConfigError(f"scenario: unknown name {name!r} (known: {', '.join(sorted(self.scenarios))})")


def _file_digest(path):
    if not path:
        return "bundled"
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _number(section, key, raw, kind=float):
    try:
        return kind(float(raw)) if kind is int else kind(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected a number, got {raw!r}") from None


def load_config(path=None):
    cfg = RunConfig()
    if path is None:
        return cfg
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    text = p.read_text(encoding="utf-8")
    try:
        parser.read_string(text, source=str(p))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg.source_text = text
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "run":
            for key, raw in items.items():
                if key in ("seed", "jobs"):
                    setattr(cfg, key, _number(section, key, raw, int))
                elif key in ("out", "atmosphere", "radiance"):
                    setattr(cfg, key, raw)
                else:
                    raise ConfigError(f"run.{key}: unknown key")
        elif section == "protocol":
            for key, raw in items.items():
                if key not in DEFAULT_PROTOCOL:
                    raise ConfigError(f"protocol.{key}: unknown key")
                cfg.protocol[key] = _number(section, key, raw)
        elif section == "anneal":
            names = {f.name: f.type for f in fields(AnnealSchedule)}
            kw = {}
            for key, raw in items.items():
                if key not in names:
                    raise ConfigError(f"anneal.{key}: unknown key")
                kw[key] = _number(section, key, raw, int if key.startswith("n_") else float)
            cfg.anneal = replace(cfg.anneal, **kw)
        elif section.startswith("scenario:"):
            name = section.split(":", 1)[1].strip()
            cfg.scenarios[name] = _scenario(section, name, items, cfg.scenarios)
        else:
            raise ConfigError(f"{section}: unknown section")
    if cfg.jobs < 1:
        raise ConfigError("run.jobs: must be >= 1")
    return cfg


def _scenario(section, name, items, known):
    base_name = items.pop("base", None)
    valid = {f.name for f in fields(HardwareScenario)} - {"name"}
    kw = {}
    for key, raw in items.items():
        if key not in valid:
            raise ConfigError(f"{section}.{key}: unknown key")
        kw[key] = _number(section, key, raw)
    try:
        if base_name is not None:
            if base_name not in known:
                raise ConfigError(f"{section}.base: unknown scenario {base_name!r}")
            return replace(known[base_name], name=name, **kw)
        return HardwareScenario(name=name, **kw)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def task_seed(seed, task):
    """Per-task seed from the run seed and a stable task name."""
    h = hashlib.sha256(f"{seed}:{task}".encode()).digest()
    return int.from_bytes(h[:8], "little")
