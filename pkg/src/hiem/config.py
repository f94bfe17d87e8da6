"""Run configuration: INI-style sections with a strict schema.

Every key has a documented default; unknown sections or keys are rejected.
`resolve()` expands all defaults so the snapshot written next to run outputs
can reproduce the run exactly.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .agent import HiemParams
from .gridworld import ConfigError
from .nets import Schedule

# (section, key) -> (parser, default)
_SCHEMA = {
    ("run", "fixture"): (str, "bench15"),
    ("run", "method"): (str, "hiem"),
    ("run", "train_episodes"): (int, 300),
    ("run", "eval_episodes"): (int, 100),
    ("run", "seed"): (int, 0),
    ("run", "out_dir"): (str, "runs/out"),
    ("run", "checkpoint_every"): (int, 100),
    ("params", "gamma"): (float, 0.99),
    ("params", "max_atomic"): (int, 500),
    ("params", "max_low_level"): (int, 25),
    ("params", "hidden"): (str, "128,64"),
    ("params", "history_len"): (int, 4),
    ("params", "lr"): (float, 1e-3),
    ("params", "optimizer"): (str, "adam"),
    ("params", "buffer_capacity"): (int, 50_000),
    ("params", "batch_size"): (int, 32),
    ("params", "min_buffer"): (int, 1_000),
    ("params", "train_every"): (int, 1),
    ("params", "target_sync"): (int, 500),
    ("params", "alpha_start"): (float, 1.0),
    ("params", "alpha_end"): (float, 0.0),
    ("params", "eps_end"): (float, 0.05),
    ("params", "force_term_zero"): (bool, False),
    ("params", "force_alpha"): (str, "none"),
    ("params", "term_threshold_eval"): (bool, False),
    ("params", "value_alarm"): (bool, True),
    ("params", "alarm_warmup"): (int, 10_000),
    ("params", "option_count"): (int, 4),
    ("bench", "methods"): (str, "oracle,random"),
    ("bench", "seeds"): (str, "0"),
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _parse_value(parser, raw: str):
    if parser is bool:
        low = raw.strip().lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"bad boolean value {raw!r}")
    return parser(raw)


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, (_, default) in _SCHEMA.items():
            self.values.setdefault(key, default)

    def get(self, section: str, key: str):
        if (section, key) not in _SCHEMA:
            raise ConfigError(f"unknown config key [{section}] {key}")
        return self.values[(section, key)]

    def set(self, section: str, key: str, raw: str):
        if (section, key) not in _SCHEMA:
            raise ConfigError(f"unknown config key [{section}] {key}")
        parser, _ = _SCHEMA[(section, key)]
        self.values[(section, key)] = _parse_value(parser, raw)

    # -- derived objects -----------------------------------------------------

    def hidden_sizes(self) -> tuple:
        return tuple(
            int(s) for s in str(self.get("params", "hidden")).split(",") if s.strip()
        )

    def force_alpha(self):
        raw = str(self.get("params", "force_alpha")).strip().lower()
        return None if raw in ("none", "") else float(raw)

    def hiem_params(self) -> HiemParams:
        train_episodes = self.get("run", "train_episodes")
        half = max(1, train_episodes // 2)
        return HiemParams(
            gamma=self.get("params", "gamma"),
            max_atomic=self.get("params", "max_atomic"),
            max_low_level=self.get("params", "max_low_level"),
            hidden=self.hidden_sizes(),
            history_len=self.get("params", "history_len"),
            lr=self.get("params", "lr"),
            optimizer=self.get("params", "optimizer"),
            buffer_capacity=self.get("params", "buffer_capacity"),
            batch_size=self.get("params", "batch_size"),
            min_buffer=self.get("params", "min_buffer"),
            train_every=self.get("params", "train_every"),
            target_sync=self.get("params", "target_sync"),
            alpha_schedule=Schedule(
                self.get("params", "alpha_start"),
                self.get("params", "alpha_end"),
                max(1, train_episodes),
            ),
            eps_high=Schedule(1.0, self.get("params", "eps_end"), half),
            eps_low=Schedule(1.0, self.get("params", "eps_end"), half),
            force_term_zero=self.get("params", "force_term_zero"),
            force_alpha=self.force_alpha(),
            term_threshold_eval=self.get("params", "term_threshold_eval"),
            value_alarm=self.get("params", "value_alarm"),
            alarm_warmup=self.get("params", "alarm_warmup"),
        )

    def bench_methods(self) -> list[str]:
        return [m.strip() for m in self.get("bench", "methods").split(",") if m.strip()]

    def bench_seeds(self) -> list[int]:
        return [int(s) for s in self.get("bench", "seeds").split(",") if s.strip()]

    # -- serialization -------------------------------------------------------

    def snapshot_text(self) -> str:
        """All keys, defaults expanded, stable ordering."""
        lines = []
        sections = sorted({s for s, _ in _SCHEMA})
        for section in sections:
            lines.append(f"[{section}]")
            for (s, key), _ in sorted(_SCHEMA.items()):
                if s != section:
                    continue
                v = self.values[(s, key)]
                if isinstance(v, bool):
                    v = "true" if v else "false"
                lines.append(f"{key} = {v}")
            lines.append("")
        return "\n".join(lines)

    def write_snapshot(self, path) -> None:
        Path(path).write_text(self.snapshot_text())


def load_config(path=None, overrides=None) -> RunConfig:
    """Read an INI file (optional) and apply KEY=VALUE overrides, where KEY
    is section.key, e.g. params.lr=0.0005."""
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        cp = configparser.ConfigParser()
        cp.read(path)
        for section in cp.sections():
            for key, raw in cp[section].items():
                cfg.set(section, key, raw)
    for ov in overrides or []:
        if "=" not in ov:
            raise ConfigError(f"bad override {ov!r}, expected section.key=value")
        dotted, raw = ov.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"bad override key {dotted!r}, expected section.key")
        section, key = dotted.split(".", 1)
        cfg.set(section.strip(), key.strip(), raw.strip())
    return cfg
