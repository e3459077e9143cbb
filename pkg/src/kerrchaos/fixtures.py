"""Deterministic reference signals for testing the analysis chain."""

import hashlib

import numpy as np

from .evolve import TimeSeries


def _hash(text: str) -> bytes:
    return hashlib.sha256(text.encode()).digest()


def sine_series(n: int = 100_000, dt: float = 1.0, period: float = 97.618034,
                amplitude: float = 1.0, phase: float = 0.0) -> TimeSeries:
    t = dt * np.arange(n)
    values = amplitude * np.sin(2.0 * np.pi * t / period + phase)
    return TimeSeries(dt=dt, values=values, label="sine",
                      params_hash=_hash(f"sine|{n}|{dt}|{period}|{amplitude}|{phase}"))


def two_tone_series(n: int = 100_000, dt: float = 1.0, period1: float = 97.618034,
                    period2: float = 97.618034 / np.sqrt(2.0)) -> TimeSeries:
    t = dt * np.arange(n)
    values = np.sin(2.0 * np.pi * t / period1) + 0.8 * np.sin(2.0 * np.pi * t / period2)
    return TimeSeries(dt=dt, values=values, label="two_tone",
                      params_hash=_hash(f"two_tone|{n}|{dt}|{period1}|{period2}"))


def logistic_series(n: int = 100_000, r: float = 4.0, x0: float = 0.4,
                    burn: int = 1000) -> TimeSeries:
    """Fully chaotic logistic map orbit (dt = 1 per iteration)."""
    x = x0
    for _ in range(burn):
        x = r * x * (1.0 - x)
    values = np.empty(n)
    for i in range(n):
        values[i] = x
        x = r * x * (1.0 - x)
    return TimeSeries(dt=1.0, values=values, label="logistic",
                      params_hash=_hash(f"logistic|{n}|{r}|{x0}|{burn}"))


def iid_series(n: int = 100_000, dt: float = 1.0, seed: int = 1234,
               distribution: str = "uniform") -> TimeSeries:
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        values = rng.random(n)
    elif distribution == "gaussian":
        values = rng.standard_normal(n)
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    return TimeSeries(dt=dt, values=values, label=f"iid_{distribution}",
                      params_hash=_hash(f"iid|{distribution}|{n}|{dt}|{seed}"))


FIXTURES = {
    "sine": sine_series,
    "two-tone": two_tone_series,
    "logistic": logistic_series,
    "iid": iid_series,
}
