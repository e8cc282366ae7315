"""The four benchmark wave problems: coefficients, sources and initial data.

All callables are vectorized over points ``x`` of shape (m, 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Domain2D, UNIT_SQUARE

PROBLEM_IDS = ("MP1", "MP2", "MP3", "MP4")


def _zero(x, t=0.0):
    return np.zeros(len(x))


@dataclass(frozen=True, eq=False)
class ModelProblem:
    id: str
    domain: Domain2D
    coefficient: Callable
    source: Callable
    f: Callable = _zero
    g: Callable = _zero
    alpha: float = 0.0
    beta: float = np.inf
    T_final: float = 1.0
    time_dependent: bool = False
    source_is_zero: bool = False
    params: dict = field(default_factory=dict)


# --- MP1: smooth coefficient without scale separation, Gaussian source ---

MP1_EPS = (1 / 5, 1 / 13, 1 / 17, 1 / 31, 1 / 65)


def mp1_coefficient(x, eps=MP1_EPS):
    x1, x2 = x[:, 0], x[:, 1]
    e1, e2, e3, e4, e5 = eps
    tp = 2 * np.pi
    return (
        1
        + np.sin(4 * x1**2 * x2**2)
        + (1.1 + np.sin(tp * x1 / e1)) / (1.1 + np.sin(tp * x2 / e1))
        + (1.1 + np.sin(tp * x1 / e2)) / (1.1 + np.cos(tp * x2 / e2))
        + (1.1 + np.cos(tp * x1 / e3)) / (1.1 + np.sin(tp * x2 / e3))
        + (1.1 + np.sin(tp * x1 / e4)) / (1.1 + np.cos(tp * x2 / e4))
        + (1.1 + np.cos(tp * x1 / e5)) / (1.1 + np.sin(tp * x2 / e5))
    ) / 6.0


def mp1_source(x, t=0.0, sigma=0.05):
    r2 = x[:, 0] ** 2 + (x[:, 1] - 0.15) ** 2
    return (2 * np.pi * sigma**2) ** -0.5 * np.exp(-r2 / (2 * sigma**2))


# --- MP2: discontinuous coefficient h(c_eps(x)) ---


def mp2_h(t):
    t = np.asarray(t, dtype=float)
    out = t.copy()
    quartic = (t > 0.5) & (t < 1.0)
    root = (t > 1.0) & (t < 1.5)
    out[quartic] = t[quartic] ** 4
    out[root] = t[root] ** 1.5
    return out


def mp2_c(x, eps=2.0**-5):
    x1, x2 = x[:, 0], x[:, 1]
    total = np.zeros(len(x))
    floor_x2 = np.floor(x2 / eps)
    for j in range(5):
        for i in range(j + 1):
            arg = np.floor(i * x2 - x1 / (1 + i)) + np.floor(i * x1 / eps) + floor_x2
            total += 2.0 / (j + 1) * np.cos(arg)
    return 1.0 + total / 10.0


def mp2_coefficient(x, eps=2.0**-5):
    return mp2_h(mp2_c(x, eps))


# --- MP3: MP2 plus a high-conductivity arc channel ---


@dataclass(frozen=True)
class Channel:
    center: tuple = (0.5, 0.5)
    radius: float = 0.3
    thickness: float = 0.05
    angle_start: float = 200.0  # degrees
    angle_end: float = 340.0
    value: float = 100.0

    def contains(self, x) -> np.ndarray:
        dx = x[:, 0] - self.center[0]
        dy = x[:, 1] - self.center[1]
        r = np.hypot(dx, dy)
        ang = np.degrees(np.arctan2(dy, dx)) % 360.0
        radial = np.abs(r - self.radius) <= 0.5 * self.thickness
        return radial & (ang >= self.angle_start) & (ang <= self.angle_end)


def mp3_coefficient(x, eps=2.0**-5, channel=Channel()):
    a = mp2_coefficient(x, eps)
    return np.where(channel.contains(x), channel.value, a)


def mp3_source(x, t=0.0):
    return np.sin(2.4 * x[:, 0] - 1.8 * x[:, 1] + 2 * np.pi * t)


# --- MP4: MP2 coefficient, not well-prepared smooth initial data ---


def mp4_source(x, t=0.0):
    return np.sin(2 * np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1])


def mp4_f(x):
    x1, x2 = x[:, 0], x[:, 1]
    return x1 * (1 - x1) * x2 * (1 - x2)


def mp4_g(x):
    x1, x2 = x[:, 0], x[:, 1]
    return np.sin(2 * np.pi * x1) * x2 * (1 - x2)


def _ones(x, t=0.0):
    return np.ones(len(x))


def get_problem(problem_id: str, **overrides) -> ModelProblem:
    """Build a model problem; ``overrides`` may set ``sigma`` (MP1), ``eps`` (MP2-4) and ``channel`` (MP3)."""
    pid = problem_id.upper()
    if pid == "MP1":
        sigma = float(overrides.pop("sigma", 0.05))
        _reject(overrides)
        lo = 5 * 0.1 / 2.1 / 6.0
        hi = (2 + 5 * 2.1 / 0.1) / 6.0
        return ModelProblem(
            "MP1", Domain2D(-1.0, 1.0, -1.0, 1.0), mp1_coefficient,
            lambda x, t=0.0: mp1_source(x, t, sigma), alpha=lo, beta=hi, params={"sigma": sigma},
        )
    eps = float(overrides.pop("eps", 2.0**-5))
    coef2 = lambda x: mp2_coefficient(x, eps)  # noqa: E731
    # c_eps <= 2 and h(t) = t above 3/2; the lower bound is data dependent, see coefficient_range
    if pid == "MP2":
        _reject(overrides)
        return ModelProblem("MP2", UNIT_SQUARE, coef2, _ones, alpha=0.0, beta=2.0, params={"eps": eps})
    if pid == "MP3":
        ch = overrides.pop("channel", {})
        channel = ch if isinstance(ch, Channel) else Channel(**{**ch, "center": tuple(ch.get("center", (0.5, 0.5)))})
        _reject(overrides)
        return ModelProblem(
            "MP3", UNIT_SQUARE, lambda x: mp3_coefficient(x, eps, channel), mp3_source,
            alpha=0.0, beta=max(2.0, channel.value), time_dependent=True,
            params={"eps": eps, "channel": channel.__dict__ | {"center": list(channel.center)}},
        )
    if pid == "MP4":
        _reject(overrides)
        return ModelProblem(
            "MP4", UNIT_SQUARE, coef2, mp4_source, f=mp4_f, g=mp4_g, alpha=0.0, beta=2.0, params={"eps": eps}
        )
    raise ValueError(f"unknown problem {problem_id!r}; expected one of {PROBLEM_IDS}")


def _reject(overrides):
    if overrides:
        raise ValueError(f"unsupported problem parameters: {sorted(overrides)}")


def evaluate(problem: ModelProblem, quantity: str, x, t: float = 0.0):
    """Evaluate ``coef``, ``source``, ``f`` or ``g`` at a point or an (m, 2) array of points."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    scalar = np.ndim(x) == 1
    if quantity == "coef":
        out = problem.coefficient(pts)
    elif quantity == "source":
        out = problem.source(pts, t)
    elif quantity == "f":
        out = problem.f(pts)
    elif quantity == "g":
        out = problem.g(pts)
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    out = np.broadcast_to(np.asarray(out, dtype=float), (len(pts),))
    return float(out[0]) if scalar else out.copy()


def coefficient_range(problem: ModelProblem, points) -> tuple[float, float]:
    vals = problem.coefficient(np.asarray(points, dtype=float))
    return float(vals.min()), float(vals.max())
