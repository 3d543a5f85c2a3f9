"""Config plumbing shared by the simulator, networks, and CLI."""
from __future__ import annotations

from dataclasses import asdict, fields


class ConfigError(ValueError):
    """Invalid configuration value."""


class ConfigMixin:
    """``from_dict``/``to_dict`` for flat dataclass configs.

    Lists in the input become tuples; unknown keys are rejected.
    """

    def validate(self) -> None:
        pass

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict | None):
        d = d or {}
        types = {f.name: str(f.type) for f in fields(cls)}
        unknown = set(d) - set(types)
        if unknown:
            raise ConfigError(f"unknown {cls.__name__} options: {sorted(unknown)}")
        kwargs = {}
        for k, v in d.items():
            if isinstance(v, list):
                v = tuple(v)
            elif isinstance(v, str) and types[k].startswith("float"):
                # YAML 1.1 reads "1e-3" as a string
                try:
                    v = float(v)
                except ValueError:
                    raise ConfigError(f"{cls.__name__}.{k}: expected a number, got {v!r}") from None
            kwargs[k] = v
        try:
            cfg = cls(**kwargs)
            cfg.validate()
        except TypeError as exc:
            raise ConfigError(f"{cls.__name__}: {exc}") from exc
        return cfg
