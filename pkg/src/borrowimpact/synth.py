"""Synthetic series with planted ground truth.

Noise comes from a fixed recipe so fixtures do not depend on numpy's
default generator: Philox-4x64-10 keyed by ``(seed, stream)`` produces raw
64-bit words from counter zero, the top 53 bits become uniforms on (0, 1],
and Box-Muller turns consecutive pairs into standard normals.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .series import WINDOW_T, EventWindow, MonthKey

GENERATOR = "philox4x64-boxmuller/1"

_STREAM_RDD = 0
_STREAM_PREDICTOR = 1
_STREAM_TARGET = 2


def standard_normals(seed: int, n: int, stream: int = 0) -> np.ndarray:
    """``n`` i.i.d. N(0, 1) draws, reproducible from ``(seed, stream)``."""
    if seed < 0 or stream < 0:
        raise DomainError("seed and stream must be non-negative")
    if n <= 0:
        return np.zeros(0)
    key = (int(seed) % (1 << 64)) | (int(stream) << 64)
    raw = np.random.Philox(key=key).random_raw(2 * ((n + 1) // 2))
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    z = np.empty(2 * radius.size)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:n]


@dataclass(frozen=True)
class RddScenario:
    beta: tuple[float, float, float, float]
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if len(self.beta) != 4:
            raise DomainError(f"beta needs four coefficients, got {len(self.beta)}")
        if not self.noise_sigma >= 0:
            raise DomainError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class GrangerScenario:
    coupling: float
    lag: int = 1
    length: int = 100
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.noise_sigma >= 0:
            raise DomainError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.lag < 1 or self.length < 1:
            raise DomainError("lag and length must be positive")


def rdd_curve(beta, t) -> np.ndarray:
    b0, b1, b2, b3 = beta
    t = np.asarray(t, dtype=float)
    post = (t > 0).astype(float)
    return b0 + b1 * t + b2 * post + b3 * t * post


def gen_rdd_window(scenario: RddScenario, *, borrowed_id="synthetic", borrowee_id="",
                   release: MonthKey | None = None) -> EventWindow:
    y = rdd_curve(scenario.beta, WINDOW_T)
    if scenario.noise_sigma > 0:
        y = y + scenario.noise_sigma * standard_normals(scenario.seed, y.size, _STREAM_RDD)
    return EventWindow.from_values(y, borrowed_id=borrowed_id, borrowee_id=borrowee_id,
                                   release=release)


def gen_granger_pair(scenario: GrangerScenario) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(target, predictor)`` with ``target[t] = c * predictor[t - lag] + noise``."""
    n = scenario.length
    predictor = standard_normals(scenario.seed, n, _STREAM_PREDICTOR)
    target = scenario.noise_sigma * standard_normals(scenario.seed, n, _STREAM_TARGET)
    if scenario.coupling != 0 and scenario.lag < n:
        target[scenario.lag:] += scenario.coupling * predictor[:-scenario.lag]
    return target, predictor


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def load_scenarios(path) -> dict[str, RddScenario | GrangerScenario]:
    """Read scenarios from an INI file.

    Sections are named ``rdd:<name>`` or ``granger:<name>``::

        [rdd:step]
        beta = 10, 0, 20, 0
        noise_sigma = 0
        seed = 42

        [granger:coupled]
        coupling = 0.8
        lag = 1
        length = 100
        noise_sigma = 0.1
        seed = 7
    """
    parser = configparser.ConfigParser()
    if not parser.read(Path(path), encoding="utf-8"):
        raise FileNotFoundError(path)
    out: dict[str, RddScenario | GrangerScenario] = {}
    for section in parser.sections():
        kind, _, name = section.partition(":")
        sec = parser[section]
        if kind == "rdd":
            out[name] = RddScenario(tuple(_floats(sec["beta"])),
                                    sec.getfloat("noise_sigma", 0.0), sec.getint("seed", 0))
        elif kind == "granger":
            out[name] = GrangerScenario(sec.getfloat("coupling"), sec.getint("lag", 1),
                                        sec.getint("length", 100),
                                        sec.getfloat("noise_sigma", 0.1), sec.getint("seed", 0))
        else:
            raise ValueError(f"unknown scenario section {section!r}")
    return out
