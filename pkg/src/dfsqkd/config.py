"""JSON session configs with line-numbered validation errors."""
from __future__ import annotations

import json
import re
from dataclasses import replace
from pathlib import Path
from typing import Any

from . import gf2
from .noise import AngleDistribution, ChannelConfig
from .postprocessing import CSSCodePair
from .quantum import ValidationError
from .session import SessionConfig

TOP_KEYS = {
    "protocol", "n", "delta_pad", "channel", "decoder", "attack", "attack_position",
    "threshold", "css", "seed", "passive_swap", "fig3_slot_aware",
}
CHANNEL_KEYS = {"kind", "loss_prob", "photon_loss_prob", "noise_distribution"}
NOISE_KEYS = {"kind", "low", "high", "value", "sigma"}
CSS_KEYS = {"generator_C1", "generator_C2", "parity_check_C1", "t"}

SWEEPABLE = {
    "loss_prob": float,
    "photon_loss_prob": float,
    "threshold": float,
    "delta_pad": float,
    "n": int,
}


class ConfigError(ValidationError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path:
            where = f"{path}:{line}: " if line else f"{path}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


class _Locator:
    """Maps a key path to the line of its first occurrence in the source text."""

    def __init__(self, text: str, path: str | None):
        self.text = text
        self.path = path

    def line(self, keys: tuple[str, ...]) -> int | None:
        pos = 0
        for key in keys:
            m = re.compile(r'"%s"\s*:' % re.escape(key)).search(self.text, pos)
            if m is None:
                return None
            pos = m.start()
        return self.text.count("\n", 0, pos) + 1

    def error(self, message: str, keys: tuple[str, ...]) -> ConfigError:
        return ConfigError(message, self.line(keys), self.path)


def _number(value: Any, name: str, loc: _Locator, keys: tuple[str, ...], integer: bool = False):
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok:
        kind = "an integer" if integer else "a number"
        raise loc.error(f"{name} must be {kind}, got {value!r}", keys)
    return value


def _check_keys(obj: dict, allowed: set, loc: _Locator, keys: tuple[str, ...]) -> None:
    for k in obj:
        if k not in allowed:
            raise loc.error(f"unknown key {k!r}" + (f" in {keys[-1]!r}" if keys else ""), keys + (k,))


def _noise(raw: Any, loc: _Locator) -> AngleDistribution:
    keys = ("channel", "noise_distribution")
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        raise loc.error("noise_distribution must be a name or an object", keys)
    _check_keys(raw, NOISE_KEYS, loc, keys)
    kwargs = {k: _number(v, k, loc, keys + (k,)) for k, v in raw.items() if k != "kind"}
    try:
        return AngleDistribution(kind=raw.get("kind", "uniform"), **{k: float(v) for k, v in kwargs.items()})
    except ValidationError as exc:
        raise loc.error(str(exc), keys) from None


def _channel(raw: Any, loc: _Locator) -> ChannelConfig:
    keys = ("channel",)
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        raise loc.error("channel must be a kind name or an object", keys)
    _check_keys(raw, CHANNEL_KEYS, loc, keys)
    kwargs: dict[str, Any] = {}
    if "kind" in raw:
        kwargs["kind"] = raw["kind"]
    for name in ("loss_prob", "photon_loss_prob"):
        if name in raw:
            p = _number(raw[name], name, loc, keys + (name,))
            if not 0.0 <= p <= 1.0:
                raise loc.error(f"{name} must lie in [0,1]", keys + (name,))
            kwargs[name] = float(p)
    if "noise_distribution" in raw:
        kwargs["noise_distribution"] = _noise(raw["noise_distribution"], loc)
    try:
        return ChannelConfig(**kwargs)
    except ValidationError as exc:
        raise loc.error(str(exc), keys + ("kind",)) from None


def _css(raw: Any, loc: _Locator) -> CSSCodePair:
    keys = ("css",)
    if not isinstance(raw, dict):
        raise loc.error("css must be an object", keys)
    _check_keys(raw, CSS_KEYS, loc, keys)
    missing = CSS_KEYS - set(raw)
    if missing:
        raise loc.error(f"css is missing {sorted(missing)}", keys)
    mats = {}
    for name in ("generator_C1", "generator_C2", "parity_check_C1"):
        rows = raw[name]
        if not isinstance(rows, list):
            raise loc.error(f"{name} must be a list of '0'/'1' row strings", keys + (name,))
        try:
            mats[name] = gf2.parse_rows(rows)
        except ValueError as exc:
            raise loc.error(f"{name}: {exc}", keys + (name,)) from None
    t = _number(raw["t"], "t", loc, keys + ("t",), integer=True)
    n = mats["generator_C1"].shape[1]
    try:
        return CSSCodePair(n, mats["generator_C1"], mats["generator_C2"], mats["parity_check_C1"], t)
    except ValidationError as exc:
        msg = str(exc)
        field = next((f for f in ("generator_C2", "parity_check_C1", "generator_C1") if msg.startswith(f)), None)
        raise loc.error(f"css: {msg}", keys + ((field,) if field else ())) from None


def parse_config(text: str, path: str | None = None, seed: int | None = None) -> SessionConfig:
    """Parse and validate a JSON config; missing fields take SessionConfig defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", 1, path)
    loc = _Locator(text, path)
    _check_keys(raw, TOP_KEYS, loc, ())
    kwargs: dict[str, Any] = {}
    if "protocol" in raw:
        p = _number(raw["protocol"], "protocol", loc, ("protocol",), integer=True)
        if p not in (1, 2):
            raise loc.error("protocol must be 1 or 2", ("protocol",))
        kwargs["protocol"] = p
    if "n" in raw:
        n = _number(raw["n"], "n", loc, ("n",), integer=True)
        if n < 1:
            raise loc.error("n must be a positive integer", ("n",))
        kwargs["n"] = n
    if "delta_pad" in raw:
        d = _number(raw["delta_pad"], "delta_pad", loc, ("delta_pad",))
        if d < 0:
            raise loc.error("delta_pad must be >= 0", ("delta_pad",))
        kwargs["delta_pad"] = float(d)
    if "threshold" in raw:
        t = _number(raw["threshold"], "threshold", loc, ("threshold",))
        if not 0.0 < t < 1.0:
            raise loc.error("threshold must lie in (0,1)", ("threshold",))
        kwargs["threshold"] = float(t)
    if "seed" in raw:
        s = _number(raw["seed"], "seed", loc, ("seed",), integer=True)
        if not 0 <= s < 2**64:
            raise loc.error("seed must be an unsigned 64-bit integer", ("seed",))
        kwargs["seed"] = s
    for name in ("decoder", "attack", "attack_position"):
        if name in raw:
            if raw[name] is not None and not isinstance(raw[name], str):
                raise loc.error(f"{name} must be a string", (name,))
            kwargs[name] = None if raw[name] in (None, "none") and name == "attack" else raw[name]
    for name in ("passive_swap", "fig3_slot_aware"):
        if name in raw:
            if not isinstance(raw[name], bool):
                raise loc.error(f"{name} must be true or false", (name,))
            kwargs[name] = raw[name]
    if "channel" in raw:
        kwargs["channel"] = _channel(raw["channel"], loc)
    if "css" in raw:
        kwargs["css"] = _css(raw["css"], loc)
    if seed is not None:
        kwargs["seed"] = seed
    try:
        return SessionConfig(**kwargs)
    except ValidationError as exc:
        key = next((k for k in ("decoder", "attack", "attack_position", "seed") if k in str(exc)), None)
        raise loc.error(str(exc), (key,) if key and key in raw else ()) from None


def load_config(path: str | Path | None, seed: int | None = None) -> SessionConfig:
    if path is None:
        return SessionConfig() if seed is None else SessionConfig(seed=seed)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    return parse_config(text, str(path), seed)


def set_parameter(config: SessionConfig, name: str, value) -> SessionConfig:
    """Copy of ``config`` with one sweepable numeric field changed."""
    if name not in SWEEPABLE:
        raise ValidationError(f"unknown sweep parameter {name!r}; choose from {sorted(SWEEPABLE)}")
    value = SWEEPABLE[name](value)
    if name in ("loss_prob", "photon_loss_prob"):
        return replace(config, channel=replace(config.channel, **{name: value}))
    return replace(config, **{name: value})
