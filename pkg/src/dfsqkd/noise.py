"""Collective noise channels.

Every qubit of one transmission sees the same noise draw; separate
transmissions get independent draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtri

from .quantum import PureState, ValidationError, apply_matrix

TWO_PI = 2 * math.pi

CHANNEL_KINDS = ("identity", "collective-dephasing", "collective-rotation")


@dataclass(frozen=True)
class DephasingDraw:
    phi0: float
    phi1: float
    delta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", self.phi0 + self.phi1)

    def as_dict(self) -> dict:
        return {"kind": "collective-dephasing", "phi0": self.phi0, "phi1": self.phi1, "delta": self.delta}


@dataclass(frozen=True)
class RotationDraw:
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta < TWO_PI:
            raise ValidationError(f"rotation angle {self.theta} outside [0, 2pi)")

    def as_dict(self) -> dict:
        return {"kind": "collective-rotation", "theta": self.theta}


@dataclass(frozen=True)
class IdentityDraw:
    def as_dict(self) -> dict:
        return {"kind": "identity"}


NoiseDraw = Union[DephasingDraw, RotationDraw, IdentityDraw]


@dataclass(frozen=True)
class AngleDistribution:
    """How each noise angle is drawn.

    ``uniform`` samples [low, high); ``fixed`` always returns ``value``;
    ``gaussian`` samples N(value, sigma) wrapped into [0, 2pi).
    """

    kind: str = "uniform"
    low: float = 0.0
    high: float = TWO_PI
    value: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "fixed", "gaussian"):
            raise ValidationError(f"unknown noise distribution {self.kind!r}")
        if self.kind == "uniform" and not self.low < self.high:
            raise ValidationError("uniform noise distribution needs low < high")
        if self.kind == "gaussian" and self.sigma < 0:
            raise ValidationError("gaussian noise distribution needs sigma >= 0")

    def sample(self, rng: np.random.Generator) -> float:
        # One draw per call whatever the kind, so stream positions do not depend on it.
        u = rng.random()
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * u
        if self.kind == "fixed":
            return self.value
        # u == 0 has probability 2^-53; map it to the mean instead of -inf.
        z = float(ndtri(u)) if u > 0.0 else 0.0
        return self.value + self.sigma * z

    def as_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "low": self.low, "high": self.high}
        if self.kind == "fixed":
            return {"kind": "fixed", "value": self.value}
        return {"kind": "gaussian", "value": self.value, "sigma": self.sigma}


@dataclass(frozen=True)
class ChannelConfig:
    kind: str = "identity"
    loss_prob: float = 0.0
    noise_distribution: AngleDistribution = AngleDistribution()
    photon_loss_prob: float = 0.0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValidationError(f"unknown channel kind {self.kind!r}; expected one of {CHANNEL_KINDS}")
        for name in ("loss_prob", "photon_loss_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must lie in [0,1], got {p}")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "loss_prob": self.loss_prob,
            "photon_loss_prob": self.photon_loss_prob,
            "noise_distribution": self.noise_distribution.as_dict(),
        }


@dataclass(frozen=True)
class ChannelSample:
    draw: NoiseDraw
    lost: bool
    lost_photons: tuple[int, ...] = ()

    @property
    def delivered(self) -> bool:
        return not self.lost and not self.lost_photons

    def as_dict(self) -> dict:
        return {**self.draw.as_dict(), "lost": self.lost, "lost_photons": list(self.lost_photons)}


def _wrap(angle: float) -> float:
    a = math.fmod(angle, TWO_PI)
    if a < 0:
        a += TWO_PI
    return 0.0 if a >= TWO_PI else a


def sample_channel(config: ChannelConfig, rng: np.random.Generator, photons: int = 2) -> ChannelSample:
    """Draw one transmission's noise parameters and loss flags.

    ``lost`` removes the whole transmission; ``lost_photons`` lists photons
    dropped individually (per-photon loss mode).
    """
    if config.kind == "collective-dephasing":
        dist = config.noise_distribution
        draw: NoiseDraw = DephasingDraw(_wrap(dist.sample(rng)), _wrap(dist.sample(rng)))
    elif config.kind == "collective-rotation":
        draw = RotationDraw(_wrap(config.noise_distribution.sample(rng)))
    else:
        draw = IdentityDraw()
    lost = bool(rng.random() < config.loss_prob)
    photon_draws = rng.random(photons)
    lost_photons = tuple(int(i) for i in np.flatnonzero(photon_draws < config.photon_loss_prob))
    return ChannelSample(draw, lost, lost_photons)


def dephasing_matrix(draw: DephasingDraw) -> np.ndarray:
    return np.diag([np.exp(1j * draw.phi0), np.exp(1j * draw.phi1)])


def rotation_matrix(draw: RotationDraw) -> np.ndarray:
    c, s = math.cos(draw.theta), math.sin(draw.theta)
    return np.array([[c, s], [-s, c]], dtype=complex)


def apply_collective_dephasing(state: PureState, draw: DephasingDraw, targets: Sequence[int]) -> PureState:
    if len(set(targets)) != len(targets):
        raise ValidationError(f"target qubits must be distinct: {list(targets)}")
    m = dephasing_matrix(draw)
    for t in targets:
        state = apply_matrix(state, m, [t])
    return state


def apply_collective_rotation(state: PureState, draw: RotationDraw, targets: Sequence[int]) -> PureState:
    if len(set(targets)) != len(targets):
        raise ValidationError(f"target qubits must be distinct: {list(targets)}")
    m = rotation_matrix(draw)
    for t in targets:
        state = apply_matrix(state, m, [t])
    return state


def apply_draw(state: PureState, draw: NoiseDraw, targets: Sequence[int] | None = None) -> PureState:
    """Apply a sampled draw to ``targets`` (all qubits by default)."""
    if targets is None:
        targets = range(state.num_qubits)
    targets = list(targets)
    if isinstance(draw, DephasingDraw):
        return apply_collective_dephasing(state, draw, targets)
    if isinstance(draw, RotationDraw):
        return apply_collective_rotation(state, draw, targets)
    return state
