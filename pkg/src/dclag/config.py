"""Flat ``key = value`` experiment configuration.

One assignment per line, ``#`` starts a comment, blank lines are ignored and
there are no sections. Omitted keys take the defaults listed in ``FIELDS``
(the experiment's physical constants, ``h = 0.05`` and the reference gains).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .cart_pendulum import CartPendulumParams
from .controlled import VARIANTS, Gains, QuadraticShaping
from .mechanics import ConfigPoint, NewtonSettings, VelocityState
from .mpc import REALIZATIONS, MpcConfig

MODES = ("closed_loop_discrete", "controlled_lagrangian_side", "linearized", "mpc", "unforced")


class ConfigError(ValueError):
    """Base class; ``line`` is 1-based, or None for whole-file problems."""

    kind = "ConfigError"

    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class UnknownKey(ConfigError):
    kind = "UnknownKey"


class ConfigTypeError(ConfigError, TypeError):
    kind = "TypeError"


class MissingRequired(ConfigError):
    kind = "MissingRequired"


class ConfigSyntaxError(ConfigError):
    kind = "SyntaxError"


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(text)


def _finite(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(text)
    return value


_bool.label = "boolean"
_finite.label = "finite number"


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(text)
        return text
    parse.options = options
    return parse


# key -> (parser, default)
FIELDS = {
    "mode": (_choice(MODES), "closed_loop_discrete"),
    "m": (_finite, 0.14),
    "M": (_finite, 0.44),
    "l": (_finite, 0.215),
    "psi": (_finite, math.pi / 9),
    "g": (_finite, 9.81),
    "sigma": (_finite, -0.1),
    "rho": (_finite, -0.05),
    "veps_curvature": (_finite, -0.1),
    "D": (_finite, 0.005),
    "phi_e": (_finite, 0.0),
    "s_e": (_finite, 0.0),
    "h": (_finite, 0.05),
    "steps": (int, 2000),
    "phi0": (_finite, 0.1),
    "s0": (_finite, 0.0),
    "phidot0": (_finite, 0.0),
    "sdot0": (_finite, 0.0),
    "variant": (_choice(VARIANTS), "y_midpoint"),
    "T_f": (_finite, 30.0),
    "plant_substeps": (int, 50),
    "realtime_mode": (_bool, False),
    "realization": (_choice(REALIZATIONS), "continuous"),
    "assert_stable": (_bool, False),
    "newton_tol": (_finite, 1e-12),
    "newton_max_iter": (int, 50),
    "out": (str, "."),
}


@dataclass(frozen=True)
class SimulationSpec:
    params: CartPendulumParams = field(default_factory=CartPendulumParams)
    gains: Gains = field(default_factory=lambda: Gains(-0.1, -0.05, QuadraticShaping(-0.1), D=0.005))
    h: float = 0.05
    steps: int = 2000
    initial: VelocityState = VelocityState(ConfigPoint(0.1, 0.0), (0.0, 0.0))
    mode: str = "closed_loop_discrete"
    variant: str = "y_midpoint"
    T_f: float = 30.0
    plant_substeps: int = 50
    realtime_mode: bool = False
    realization: str = "continuous"
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    assert_stable: bool = False
    out: str = "."

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.h > 0.0:
            raise ValueError("h must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "mpc":
            self.mpc_config()

    def mpc_config(self) -> MpcConfig:
        return MpcConfig(h=self.h, T_f=self.T_f, plant_substeps=self.plant_substeps,
                         realtime_mode=self.realtime_mode, realization=self.realization)


def _build(values):
    v = values
    params = CartPendulumParams(m=v["m"], M=v["M"], l=v["l"], psi=v["psi"], g=v["g"])
    gains = Gains(v["sigma"], v["rho"], QuadraticShaping(v["veps_curvature"]),
                  D=v["D"], phi_e=v["phi_e"], s_e=v["s_e"])
    return SimulationSpec(
        params=params, gains=gains, h=v["h"], steps=v["steps"],
        initial=VelocityState(ConfigPoint(v["phi0"], v["s0"]), (v["phidot0"], v["sdot0"])),
        mode=v["mode"], variant=v["variant"], T_f=v["T_f"],
        plant_substeps=v["plant_substeps"], realtime_mode=v["realtime_mode"],
        realization=v["realization"],
        newton=NewtonSettings(residual_tolerance=v["newton_tol"],
                              max_iterations=v["newton_max_iter"]),
        assert_stable=v["assert_stable"], out=v["out"])


def parse_config(text: str) -> SimulationSpec:
    values = {key: default for key, (_, default) in FIELDS.items()}
    seen = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigSyntaxError(f"expected 'key = value', got {line!r}", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in FIELDS:
            raise UnknownKey(f"unknown key {key!r}", number)
        if key in seen:
            raise ConfigSyntaxError(f"duplicate key {key!r} (first on line {seen[key]})", number)
        if not value:
            raise MissingRequired(f"key {key!r} has no value", number)
        parser = FIELDS[key][0]
        try:
            values[key] = parser(value)
        except ValueError:
            expected = getattr(parser, "label", None) or getattr(parser, "__name__", "value")
            if hasattr(parser, "options"):
                expected = "choice among " + ", ".join(parser.options)
            raise ConfigTypeError(f"{key} = {value!r}: expected {expected}", number) from None
        seen[key] = number
    try:
        return _build(values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _values_of(spec: SimulationSpec):
    p, g = spec.params, spec.gains
    return {
        "mode": spec.mode, "m": p.m, "M": p.M, "l": p.l, "psi": p.psi, "g": p.g,
        "sigma": g.sigma, "rho": g.rho, "veps_curvature": g.veps.curvature, "D": g.D,
        "phi_e": g.phi_e, "s_e": g.s_e, "h": spec.h, "steps": spec.steps,
        "phi0": spec.initial.q[0], "s0": spec.initial.q[1],
        "phidot0": spec.initial.qdot[0], "sdot0": spec.initial.qdot[1],
        "variant": spec.variant, "T_f": spec.T_f,
        "plant_substeps": spec.plant_substeps, "realtime_mode": spec.realtime_mode,
        "realization": spec.realization, "assert_stable": spec.assert_stable,
        "newton_tol": spec.newton.residual_tolerance,
        "newton_max_iter": spec.newton.max_iterations, "out": spec.out,
    }


def render(spec: SimulationSpec) -> str:
    """Serialize every key; floats use ``repr`` so parsing restores them exactly."""
    lines = []
    for key, value in _values_of(spec).items():
        if isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def with_overrides(spec: SimulationSpec, **changes) -> SimulationSpec:
    return replace(spec, **changes)
