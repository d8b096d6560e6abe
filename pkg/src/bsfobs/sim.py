"""Fixed-step simulation, input signals and synthetic measurements."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .model import dynamics
from .params import ConfigError, LumpedParameters


class SimulationError(RuntimeError):
    """Integration produced a non-finite state."""

    def __init__(self, t: float, last_state):
        self.t = t
        self.last_state = tuple(float(v) for v in last_state)
        super().__init__(f"non-finite state at t={t:.6g} h; last finite state {self.last_state}")


# ---------------------------------------------------------------------------
# signals


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t):
        return self.value + 0.0 * np.asarray(t, dtype=float)

    def derivative(self, t):
        return 0.0 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class Step:
    time: float
    before: float
    after: float

    def __call__(self, t):
        return np.where(np.asarray(t, dtype=float) < self.time, self.before, self.after)

    def derivative(self, t):
        return 0.0 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class Sinusoid:
    """``mean + amplitude * sin(2 pi t / period + phase)``, phase in radians."""

    mean: float
    amplitude: float
    period: float
    phase: float = 0.0

    def __call__(self, t):
        w = 2.0 * math.pi / self.period
        return self.mean + self.amplitude * np.sin(w * np.asarray(t, dtype=float) + self.phase)

    def derivative(self, t):
        w = 2.0 * math.pi / self.period
        return self.amplitude * w * np.cos(w * np.asarray(t, dtype=float) + self.phase)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Linear interpolation between ``(t, value)`` knots, held outside the range."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ts = [k[0] for k in self.knots]
        if len(ts) < 1 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("piecewise-linear knots must be nonempty and strictly increasing in time")

    def __call__(self, t):
        ts, vs = zip(*self.knots)
        return np.interp(np.asarray(t, dtype=float), ts, vs)

    def derivative(self, t):
        ts, vs = map(np.asarray, zip(*self.knots))
        t = np.asarray(t, dtype=float)
        if len(ts) == 1:
            return 0.0 * t
        slopes = np.diff(vs) / np.diff(ts)
        idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(slopes) - 1)
        inside = (t >= ts[0]) & (t < ts[-1])
        return np.where(inside, slopes[idx], 0.0)


Signal = Constant | Step | Sinusoid | PiecewiseLinear


@dataclass(frozen=True)
class Signals:
    u1: Signal
    u2: Signal
    d: Signal

    @classmethod
    def constant(cls, u1: float, u2: float, d: float) -> "Signals":
        return cls(Constant(u1), Constant(u2), Constant(d))


def signal_from_dict(spec, where: str = "signal") -> Signal:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Constant(float(spec))
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise ConfigError(f"{where}: expected a number or an object with 'kind'")
    kind = spec["kind"]
    body = {k: v for k, v in spec.items() if k != "kind"}
    try:
        if kind == "constant":
            sig = Constant(float(body.pop("value")))
        elif kind == "step":
            sig = Step(float(body.pop("time")), float(body.pop("before")), float(body.pop("after")))
        elif kind == "sinusoid":
            sig = Sinusoid(
                float(body.pop("mean")),
                float(body.pop("amplitude")),
                float(body.pop("period")),
                float(body.pop("phase", 0.0)),
            )
        elif kind == "piecewise-linear":
            sig = PiecewiseLinear(tuple((float(a), float(b)) for a, b in body.pop("knots")))
        else:
            raise ConfigError(f"{where}: unknown signal kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"{where}: missing required key {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc
    if body:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(sorted(body))}")
    return sig


def signal_to_dict(sig: Signal) -> dict[str, Any]:
    if isinstance(sig, Constant):
        return {"kind": "constant", "value": sig.value}
    if isinstance(sig, Step):
        return {"kind": "step", "time": sig.time, "before": sig.before, "after": sig.after}
    if isinstance(sig, Sinusoid):
        return {"kind": "sinusoid", "mean": sig.mean, "amplitude": sig.amplitude,
                "period": sig.period, "phase": sig.phase}
    return {"kind": "piecewise-linear", "knots": [list(k) for k in sig.knots]}


# ---------------------------------------------------------------------------
# integration


def rk4_solve(f: Callable[[float, np.ndarray], np.ndarray], x0, t_end: float, dt: float):
    """Classical fixed-step RK4 for ``x' = f(t, x)``.

    Returns ``(t, x)`` with ``t = i * dt``, ``i = 0..round(t_end / dt)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end >= dt:
        raise ValueError("t_end must be at least dt")
    n = int(round(t_end / dt))
    x = np.empty((n + 1, len(x0)))
    x[0] = x0
    t = np.arange(n + 1) * dt
    xi = np.asarray(x0, dtype=float)
    # overflow surfaces as a non-finite state below
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            ti = t[i]
            a = f(ti, xi)
            b = f(ti + 0.5 * dt, xi + 0.5 * dt * a)
            c = f(ti + 0.5 * dt, xi + 0.5 * dt * b)
            e = f(ti + dt, xi + dt * c)
            nxt = xi + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + e)
            if not np.all(np.isfinite(nxt)):
                raise SimulationError(t[i + 1], xi)
            x[i + 1] = nxt
            xi = nxt
    return t, x


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # (n, 3)
    u: np.ndarray  # (n, 2)
    d: np.ndarray  # (n,)
    dt: float
    method: str = "rk4"

    @property
    def y(self) -> np.ndarray:
        return self.x[:, 1:3]

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path) -> None:
        cols = np.column_stack([self.t, self.x, self.y, self.u, self.d])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x1", "x2", "x3", "y1", "y2", "u1", "u2", "d"])
            for row in cols:
                w.writerow([repr(float(v)) for v in row])


def integrate(x0, signals: Signals, params: LumpedParameters, t_end: float, dt: float = 0.01) -> Trajectory:
    """Simulate the model with signals evaluated at the RK4 stage times."""

    def rhs(t, x):
        u = (float(signals.u1(t)), float(signals.u2(t)))
        return dynamics(x, u, float(signals.d(t)), params)

    t, x = rk4_solve(rhs, np.asarray(x0, dtype=float), t_end, dt)
    u = np.column_stack([signals.u1(t), signals.u2(t)])
    d = np.asarray(signals.d(t), dtype=float)
    return Trajectory(t=t, x=x, u=u, d=d, dt=dt)


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
    return Trajectory(t=t, x=data[:, 1:4], u=data[:, 6:8], d=data[:, 8], dt=dt)


# ---------------------------------------------------------------------------
# measurements


@dataclass(frozen=True)
class MeasurementSeries:
    t: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        for name in ("y1", "y2", "u1", "u2", "d"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"channel {name} has length {len(getattr(self, name))}, expected {n}")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "MeasurementSeries":
        return cls(traj.t, traj.x[:, 1].copy(), traj.x[:, 2].copy(), traj.u[:, 0], traj.u[:, 1], traj.d)

    def check(self) -> None:
        """Raise ``ValueError`` unless sampling is uniform and values finite."""
        if len(self.t) < 2:
            raise ValueError("measurement series needs at least two samples")
        steps = np.diff(self.t)
        if np.any(np.abs(steps - steps[0]) > 1e-9 * max(1.0, abs(float(self.t[-1])))):
            raise ValueError("measurement series is not uniformly sampled")
        for name in ("t", "y1", "y2", "u1", "u2", "d"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"channel {name} contains non-finite values")

    def to_csv(self, path) -> None:
        cols = np.column_stack([self.t, self.y1, self.y2, self.u1, self.u2, self.d])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y1", "y2", "u1", "u2", "d"])
            for row in cols:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path) -> "MeasurementSeries":
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        cols = {name.strip(): i for i, name in enumerate(header)}
        missing = [c for c in ("t", "y1", "y2", "u1", "u2", "d") if c not in cols]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(*(data[:, cols[c]] for c in ("t", "y1", "y2", "u1", "u2", "d")))


@dataclass(frozen=True)
class NoiseSpec:
    std_y1: float = 0.0
    std_y2: float = 0.0
    std_d: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.std_y1, self.std_y2, self.std_d) < 0:
            raise ValueError("noise standard deviations must be nonnegative")


def sample_measurements(traj: Trajectory, noise: NoiseSpec = NoiseSpec()) -> MeasurementSeries:
    """Measurement channels of ``traj`` with seeded additive Gaussian noise."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    rng = np.random.default_rng(noise.seed)
    n = len(traj)
    ey1, ey2, ed = rng.standard_normal((3, n))
    return MeasurementSeries(
        t=traj.t.copy(),
        y1=traj.x[:, 1] + noise.std_y1 * ey1,
        y2=traj.x[:, 2] + noise.std_y2 * ey2,
        u1=traj.u[:, 0].copy(),
        u2=traj.u[:, 1].copy(),
        d=traj.d + noise.std_d * ed,
    )


# ---------------------------------------------------------------------------
# scenario files


@dataclass(frozen=True)
class Scenario:
    x0: tuple[float, float, float]
    t_end: float
    dt: float
    signals: Signals
    noise: NoiseSpec | None = None

    def run(self, params: LumpedParameters) -> Trajectory:
        return integrate(self.x0, self.signals, params, self.t_end, self.dt)


_SCENARIO_KEYS = {"x0", "t_end", "dt", "signals", "noise"}
_NOISE_KEYS = {"std_y1", "std_y2", "std_d", "seed"}


def scenario_from_dict(data: Mapping[str, Any], source: str = "<dict>") -> Scenario:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{source}: top level must be a JSON object")
    unknown = sorted(set(data) - _SCENARIO_KEYS)
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(unknown)}")
    for key in ("x0", "t_end", "signals"):
        if key not in data:
            raise ConfigError(f"{source}: missing required key {key}")
    x0 = data["x0"]
    if not (isinstance(x0, Sequence) and len(x0) == 3):
        raise ConfigError(f"{source}: x0 must be a list of three numbers")
    sig = data["signals"]
    if not isinstance(sig, Mapping):
        raise ConfigError(f"{source}: signals must be an object")
    unknown = sorted(set(sig) - {"u1", "u2", "d"})
    if unknown:
        raise ConfigError(f"{source}: signals: unknown key(s) {', '.join(unknown)}")
    parts = {}
    for key in ("u1", "u2", "d"):
        if key not in sig:
            raise ConfigError(f"{source}: signals: missing required key {key}")
        parts[key] = signal_from_dict(sig[key], f"{source}: signals.{key}")
    noise = None
    if data.get("noise") is not None:
        nz = data["noise"]
        unknown = sorted(set(nz) - _NOISE_KEYS)
        if unknown:
            raise ConfigError(f"{source}: noise: unknown key(s) {', '.join(unknown)}")
        try:
            noise = NoiseSpec(
                float(nz.get("std_y1", 0.0)),
                float(nz.get("std_y2", 0.0)),
                float(nz.get("std_d", 0.0)),
                int(nz.get("seed", 0)),
            )
        except ValueError as exc:
            raise ConfigError(f"{source}: noise: {exc}") from exc
    dt = float(data.get("dt", 0.01))
    t_end = float(data["t_end"])
    if not dt > 0 or not t_end >= dt:
        raise ConfigError(f"{source}: need dt > 0 and t_end >= dt")
    return Scenario(tuple(float(v) for v in x0), t_end, dt, Signals(**parts), noise)


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    out: dict[str, Any] = {
        "x0": list(sc.x0),
        "t_end": sc.t_end,
        "dt": sc.dt,
        "signals": {k: signal_to_dict(getattr(sc.signals, k)) for k in ("u1", "u2", "d")},
    }
    if sc.noise is not None:
        out["noise"] = {"std_y1": sc.noise.std_y1, "std_y2": sc.noise.std_y2,
                        "std_d": sc.noise.std_d, "seed": sc.noise.seed}
    return out


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read scenario file ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(data, str(path))


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")
