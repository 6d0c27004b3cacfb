"""Scenario files: KEY=VALUE text validated into pydantic models"""

from io import StringIO
from pathlib import Path
from typing import Dict, List, Optional, Tuple
import logging
import re

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from src.config.settings import settings
from src.controller.cbf import CBFSpec, build_s_chain, build_xi, relative_degree, shrink_input_box
from src.controller.system import ControlAffineSystem
from src.exceptions import ExpressionError, InfeasibleInputSet, SafetyFilterError, ScenarioError
from src.interval.arrays import IntervalVector
from src.margin.margin import check_initial_condition
from src.poly.multipoly import MultiPoly, VarSpace
from src.poly.parser import parse_polynomial
from src.sim.episode import GainTracking, PolynomialFeedback, Reference, Scenario
from src.sim.noise import NoiseMode

logger = logging.getLogger(__name__)


# Configuration models

class SystemConfig(BaseModel):
    """Dynamics dx/dt = f(x) + g(x) u with input box and actuation radius"""

    state_dim: int
    input_dim: int
    parameters: Dict[str, float] = {}
    drift: List[str]
    input_matrix: List[List[str]]
    input_bounds: List[Tuple[float, float]]
    eps_u: float = 0.0

    @model_validator(mode="after")
    def check_shapes(self) -> "SystemConfig":
        n, m = self.state_dim, self.input_dim
        if n < 1 or m < 1:
            raise ValueError("state and input dimensions must be positive")
        if len(self.drift) != n:
            raise ValueError(f"expected {n} drift components, got {len(self.drift)}")
        if len(self.input_matrix) != n or any(len(row) != m for row in self.input_matrix):
            raise ValueError(f"input matrix must be {n} x {m}")
        if len(self.input_bounds) != m:
            raise ValueError(f"expected {m} input bounds, got {len(self.input_bounds)}")
        if any(lo > hi for lo, hi in self.input_bounds):
            raise ValueError("input bounds must satisfy lo <= hi")
        if self.eps_u < 0.0:
            raise ValueError("eps_u must be nonnegative")
        return self


class BarrierConfig(BaseModel):
    """Barrier expression with its class-K gain or characteristic coefficients"""

    h: str
    gamma: Optional[float] = None
    a_vec: Optional[List[float]] = None
    lambdas: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_gains(self) -> "BarrierConfig":
        if self.gamma is None and self.a_vec is None and self.lambdas is None:
            raise ValueError("barrier needs GAMMA, A or LAMBDAS")
        if self.gamma is not None and (self.a_vec is not None or self.lambdas is not None):
            raise ValueError("GAMMA cannot be combined with A or LAMBDAS")
        return self


class SamplingConfig(BaseModel):
    dt: float
    horizon: float
    substeps: int = 100

    @model_validator(mode="after")
    def check_times(self) -> "SamplingConfig":
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.horizon < self.dt:
            raise ValueError("horizon must be at least dt")
        if self.substeps < 1:
            raise ValueError("substeps must be at least 1")
        return self


class NoiseConfig(BaseModel):
    eps_x: float = 0.0
    mode: NoiseMode = NoiseMode.UNIFORM_BALL
    seed: int = 0

    @field_validator("eps_x")
    @classmethod
    def check_radius(cls, value: float) -> float:
        if value < 0.0:
            raise ValueError("eps_x must be nonnegative")
        return value


class NominalConfig(BaseModel):
    """Polynomial feedback laws, or a gain matrix tracking a reference"""

    laws: Optional[List[str]] = None
    gain: Optional[List[List[float]]] = None
    reference: str = "constant"
    reference_center: Optional[List[float]] = None
    reference_amplitude: Optional[List[float]] = None
    reference_period: float = 10.0

    @model_validator(mode="after")
    def check_kind(self) -> "NominalConfig":
        if (self.laws is None) == (self.gain is None):
            raise ValueError("give either NOMINAL_<j> laws or NOMINAL_GAIN")
        if self.reference not in ("constant", "lemniscate"):
            raise ValueError(f"unknown reference '{self.reference}'")
        return self


class MarginConfig(BaseModel):
    taylor_order: Optional[int] = None
    pop_tol: Optional[float] = None
    pop_budget: Optional[int] = None


class ScenarioConfig(BaseModel):
    """Declarative description of one experiment"""

    name: str
    description: str = ""
    system: SystemConfig
    barriers: List[BarrierConfig]
    sampling: SamplingConfig
    noise: NoiseConfig = NoiseConfig()
    nominal: NominalConfig
    margin: MarginConfig = MarginConfig()
    x0: List[float]

    @model_validator(mode="after")
    def check_consistency(self) -> "ScenarioConfig":
        if not self.barriers:
            raise ValueError("at least one barrier is required")
        if len(self.x0) != self.system.state_dim:
            raise ValueError(f"x0 must have {self.system.state_dim} entries")
        if self.nominal.laws is not None and len(self.nominal.laws) != self.system.input_dim:
            raise ValueError(f"expected {self.system.input_dim} nominal laws")
        if self.nominal.gain is not None:
            shape = (self.system.input_dim, self.system.state_dim)
            if len(self.nominal.gain) != shape[0] or any(len(r) != shape[1] for r in self.nominal.gain):
                raise ValueError(f"nominal gain must be {shape[0]} x {shape[1]}")
        return self

    # Construction

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ScenarioError(f"Cannot read scenario file {path}: {e}")
        return cls.from_text(text, source=str(path))

    @classmethod
    def from_text(cls, text: str, source: str = "<text>") -> "ScenarioConfig":
        """Parse KEY=VALUE text; errors name the key and its line"""
        return _ScenarioReader(text, source).read()

    def with_overrides(self, **overrides) -> "ScenarioConfig":
        """
        Copy with scalar fields replaced

        Args:
            overrides: Any of eps_x, eps_u, rate, dt, seed, noise_mode, taylor_order, pop_budget, pop_tol (None is ignored)

        Returns:
            Revalidated configuration
        """
        data = self.model_dump()
        locations = {
            "eps_x": ("noise", "eps_x"),
            "eps_u": ("system", "eps_u"),
            "dt": ("sampling", "dt"),
            "seed": ("noise", "seed"),
            "noise_mode": ("noise", "mode"),
            "taylor_order": ("margin", "taylor_order"),
            "pop_budget": ("margin", "pop_budget"),
            "pop_tol": ("margin", "pop_tol"),
        }
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "rate":
                if value <= 0:
                    raise ScenarioError("Sampling rate must be positive", field="RATE")
                key, value = "dt", 1.0 / value
            if key not in locations:
                raise ScenarioError(f"Unknown override '{key}'")
            section, name = locations[key]
            data[section][name] = value
        try:
            return ScenarioConfig.model_validate(data)
        except ValidationError as e:
            raise ScenarioError(f"Invalid override: {e.errors()[0]['msg']}")

    # Serialization

    def to_text(self) -> str:
        """Canonical KEY=VALUE text; from_text(to_text()) reproduces an equal config"""
        lines = [f"NAME={self.name}"]
        if self.description:
            lines.append(f"DESCRIPTION={_quote(self.description)}")
        s = self.system
        lines += [f"STATE_DIM={s.state_dim}", f"INPUT_DIM={s.input_dim}"]
        for key in sorted(s.parameters):
            lines.append(f"PARAM_{key}={_num(s.parameters[key])}")
        for i, expr in enumerate(s.drift, start=1):
            lines.append(f"F_{i}={_quote(expr)}")
        for i, row in enumerate(s.input_matrix, start=1):
            for j, expr in enumerate(row, start=1):
                if expr.strip() != "0":
                    lines.append(f"G_{i}_{j}={_quote(expr)}")
        for j, (lo, hi) in enumerate(s.input_bounds, start=1):
            lines.append(f"U_{j}={_num(lo)}, {_num(hi)}")
        lines.append(f"EPS_U={_num(s.eps_u)}")
        for k, b in enumerate(self.barriers, start=1):
            lines.append(f"BARRIER_{k}_H={_quote(b.h)}")
            if b.gamma is not None:
                lines.append(f"BARRIER_{k}_GAMMA={_num(b.gamma)}")
            if b.a_vec is not None:
                lines.append(f"BARRIER_{k}_A={_nums(b.a_vec)}")
            if b.lambdas is not None:
                lines.append(f"BARRIER_{k}_LAMBDAS={_nums(b.lambdas)}")
        lines += [
            f"DT={_num(self.sampling.dt)}",
            f"HORIZON={_num(self.sampling.horizon)}",
            f"SUBSTEPS={self.sampling.substeps}",
            f"EPS_X={_num(self.noise.eps_x)}",
            f"NOISE_MODE={self.noise.mode.value}",
            f"SEED={self.noise.seed}",
        ]
        nominal = self.nominal
        if nominal.laws is not None:
            for j, law in enumerate(nominal.laws, start=1):
                lines.append(f"NOMINAL_{j}={_quote(law)}")
        else:
            lines.append(f"NOMINAL_GAIN={'; '.join(_nums(row) for row in nominal.gain)}")
            lines.append(f"REFERENCE={nominal.reference}")
            if nominal.reference_center is not None:
                lines.append(f"REFERENCE_CENTER={_nums(nominal.reference_center)}")
            if nominal.reference_amplitude is not None:
                lines.append(f"REFERENCE_AMPLITUDE={_nums(nominal.reference_amplitude)}")
            lines.append(f"REFERENCE_PERIOD={_num(nominal.reference_period)}")
        m = self.margin
        if m.taylor_order is not None:
            lines.append(f"TAYLOR_ORDER={m.taylor_order}")
        if m.pop_tol is not None:
            lines.append(f"POP_TOL={_num(m.pop_tol)}")
        if m.pop_budget is not None:
            lines.append(f"POP_BUDGET={m.pop_budget}")
        lines.append(f"X0={_nums(self.x0)}")
        return "\n".join(lines) + "\n"

    # Runtime objects

    @property
    def space(self) -> VarSpace:
        return VarSpace.standard(self.system.state_dim, self.system.input_dim)

    def _parse(self, text: str, key: str) -> MultiPoly:
        try:
            return parse_polynomial(text, self.space, self.system.parameters)
        except ExpressionError as e:
            raise ScenarioError(str(e), field=key)

    def build_system(self) -> ControlAffineSystem:
        s = self.system
        f = [self._parse(expr, f"F_{i}") for i, expr in enumerate(s.drift, start=1)]
        g = [
            [self._parse(expr, f"G_{i}_{j}") for j, expr in enumerate(row, start=1)]
            for i, row in enumerate(s.input_matrix, start=1)
        ]
        U_box = IntervalVector([lo for lo, _ in s.input_bounds], [hi for _, hi in s.input_bounds])
        return ControlAffineSystem(self.space, f, g, U_box, s.eps_u)

    def build_barriers(self) -> List[CBFSpec]:
        barriers = []
        for k, b in enumerate(self.barriers, start=1):
            h = self._parse(b.h, f"BARRIER_{k}_H")
            try:
                barriers.append(CBFSpec(
                    h=h,
                    gamma=b.gamma,
                    a_vec=tuple(b.a_vec) if b.a_vec is not None else None,
                    lambdas=tuple(b.lambdas) if b.lambdas is not None else None,
                    name=f"h{k}",
                ))
            except SafetyFilterError as e:
                raise ScenarioError(str(e), field=f"BARRIER_{k}")
        return barriers

    def build(self) -> Scenario:
        """Parse every expression and assemble the runtime scenario"""
        system = self.build_system()
        nominal_cfg = self.nominal
        if nominal_cfg.laws is not None:
            laws = [self._parse(law, f"NOMINAL_{j}") for j, law in enumerate(nominal_cfg.laws, start=1)]
            nominal = PolynomialFeedback(laws, system.U_box)
        else:
            center = nominal_cfg.reference_center or [0.0, 0.0, 0.0]
            amplitude = nominal_cfg.reference_amplitude or [0.0] * len(center)
            reference = Reference(
                kind=nominal_cfg.reference,
                center=tuple(center),
                amplitude=tuple(amplitude),
                period=nominal_cfg.reference_period,
            )
            nominal = GainTracking(np.array(nominal_cfg.gain), reference, system.U_box)
        return Scenario(
            name=self.name,
            system=system,
            barriers=self.build_barriers(),
            nominal=nominal,
            x0=np.array(self.x0, dtype=float),
            dt=self.sampling.dt,
            horizon=self.sampling.horizon,
            substeps=self.sampling.substeps,
            eps_x=self.noise.eps_x,
            noise_mode=self.noise.mode,
            seed=self.noise.seed,
            taylor_order=self.margin.taylor_order,
            pop_tolerance=self.margin.pop_tol,
            pop_budget=self.margin.pop_budget,
        )


def _num(value: float) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() and abs(value) < 1e15 else repr(value)


def _nums(values) -> str:
    return ", ".join(_num(v) for v in values)


def _quote(text: str) -> str:
    return f'"{text}"' if ("#" in text or text != text.strip()) else text


# Reading

_KEY_LINE = re.compile(r"^\s*(?:export\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*=")
_FIELD_KEYS = {
    ("system", "eps_u"): "EPS_U",
    ("system",): "STATE_DIM",
    ("sampling",): "DT",
    ("sampling", "dt"): "DT",
    ("sampling", "horizon"): "HORIZON",
    ("noise", "eps_x"): "EPS_X",
    ("noise", "mode"): "NOISE_MODE",
    ("nominal",): "NOMINAL_GAIN",
    ("x0",): "X0",
    ("name",): "NAME",
}


class _ScenarioReader:
    """Turns raw key/value pairs into a ScenarioConfig with key and line diagnostics"""

    def __init__(self, text: str, source: str):
        """Initialize from file text"""
        self.source = source
        self.values = dict(dotenv_values(stream=StringIO(text)))
        self.lines: Dict[str, int] = {}
        for number, line in enumerate(text.splitlines(), start=1):
            match = _KEY_LINE.match(line)
            if match:
                self.lines.setdefault(match.group(1), number)
        self.used = set()

    def error(self, message: str, key: Optional[str] = None) -> ScenarioError:
        return ScenarioError(f"{self.source}: {message}", field=key, line=self.lines.get(key) if key else None)

    def raw(self, key: str, required: bool = True) -> Optional[str]:
        value = self.values.get(key)
        if key in self.values:
            self.used.add(key)
        if value is None or not value.strip():
            if required:
                raise self.error(f"missing value for {key}", key)
            return None
        return value.strip()

    def number(self, key: str, required: bool = True, cast=float):
        text = self.raw(key, required)
        if text is None:
            return None
        try:
            value = float(text)
        except ValueError:
            raise self.error(f"{key} must be a number, got '{text}'", key)
        if cast is int:
            if not value.is_integer():
                raise self.error(f"{key} must be an integer, got '{text}'", key)
            return int(value)
        return value

    def numbers(self, key: str, required: bool = True, separator: str = ",") -> Optional[List[float]]:
        text = self.raw(key, required)
        if text is None:
            return None
        try:
            return [float(part) for part in text.split(separator)]
        except ValueError:
            raise self.error(f"{key} must be a list of numbers, got '{text}'", key)

    def indexed(self, pattern: str) -> Dict[int, str]:
        """Keys matching a pattern with one integer group"""
        regex = re.compile(pattern)
        found = {}
        for key in self.values:
            match = regex.fullmatch(key)
            if match:
                found[int(match.group(1))] = key
        return found

    def read(self) -> ScenarioConfig:
        n = self.number("STATE_DIM", cast=int)
        m = self.number("INPUT_DIM", cast=int)
        if n is None or n < 1 or m < 1:
            raise self.error("dimensions must be positive", "STATE_DIM")

        parameters = {}
        for key in self.values:
            if key.startswith("PARAM_"):
                parameters[key[len("PARAM_"):]] = self.number(key)

        drift = [self.raw(f"F_{i}") for i in range(1, n + 1)]
        matrix = [[self.raw(f"G_{i}_{j}", required=False) or "0" for j in range(1, m + 1)] for i in range(1, n + 1)]
        bounds = []
        for j in range(1, m + 1):
            pair = self.numbers(f"U_{j}")
            if len(pair) != 2:
                raise self.error(f"U_{j} must be 'lo, hi'", f"U_{j}")
            bounds.append((pair[0], pair[1]))

        barrier_keys = self.indexed(r"BARRIER_(\d+)_H")
        if not barrier_keys:
            raise self.error("at least one BARRIER_<k>_H is required")
        barriers = []
        for k in sorted(barrier_keys):
            prefix = f"BARRIER_{k}"
            barriers.append(self._model(BarrierConfig, f"{prefix}_H", {
                "h": self.raw(f"{prefix}_H"),
                "gamma": self.number(f"{prefix}_GAMMA", required=False),
                "a_vec": self.numbers(f"{prefix}_A", required=False),
                "lambdas": self.numbers(f"{prefix}_LAMBDAS", required=False),
            }))

        dt = self.number("DT", required=False)
        rate = self.number("RATE", required=False)
        if (dt is None) == (rate is None):
            raise self.error("give exactly one of DT or RATE", "DT" if dt is not None else "RATE")
        if rate is not None:
            if rate <= 0.0:
                raise self.error("RATE must be positive", "RATE")
            dt = 1.0 / rate

        law_keys = self.indexed(r"NOMINAL_(\d+)")
        laws = [self.raw(f"NOMINAL_{j}") for j in range(1, m + 1)] if law_keys else None
        gain_text = self.raw("NOMINAL_GAIN", required=False)
        gain = None
        if gain_text is not None:
            try:
                gain = [[float(v) for v in row.split(",")] for row in gain_text.split(";")]
            except ValueError:
                raise self.error("NOMINAL_GAIN must be rows of numbers separated by ';'", "NOMINAL_GAIN")

        seed = self.number("SEED", required=False, cast=int)
        x0 = self.numbers("X0")
        if len(x0) != n:
            raise self.error(f"X0 must have {n} entries, got {len(x0)}", "X0")

        data = {
            "name": self.raw("NAME"),
            "description": self.raw("DESCRIPTION", required=False) or "",
            "system": {
                "state_dim": n,
                "input_dim": m,
                "parameters": parameters,
                "drift": drift,
                "input_matrix": matrix,
                "input_bounds": bounds,
                "eps_u": self.number("EPS_U", required=False) or 0.0,
            },
            "barriers": barriers,
            "sampling": {
                "dt": dt,
                "horizon": self.number("HORIZON"),
                "substeps": self.number("SUBSTEPS", required=False, cast=int) or 100,
            },
            "noise": {
                "eps_x": self.number("EPS_X", required=False) or 0.0,
                "mode": self.raw("NOISE_MODE", required=False) or NoiseMode.UNIFORM_BALL.value,
                "seed": seed if seed is not None else settings.default_seed,
            },
            "nominal": {
                "laws": laws,
                "gain": gain,
                "reference": self.raw("REFERENCE", required=False) or "constant",
                "reference_center": self.numbers("REFERENCE_CENTER", required=False),
                "reference_amplitude": self.numbers("REFERENCE_AMPLITUDE", required=False),
                "reference_period": self.number("REFERENCE_PERIOD", required=False) or 10.0,
            },
            "margin": {
                "taylor_order": self.number("TAYLOR_ORDER", required=False, cast=int),
                "pop_tol": self.number("POP_TOL", required=False),
                "pop_budget": self.number("POP_BUDGET", required=False, cast=int),
            },
            "x0": x0,
        }
        unknown = sorted(set(self.values) - self.used)
        if unknown:
            raise self.error(f"unknown key {unknown[0]}", unknown[0])
        return self._model(ScenarioConfig, None, data)

    def _model(self, model, key: Optional[str], data: dict):
        try:
            return model.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            location = tuple(str(part) for part in first["loc"])
            field = key
            for size in range(len(location), 0, -1):
                if location[:size] in _FIELD_KEYS:
                    field = _FIELD_KEYS[location[:size]]
                    break
            raise self.error(f"{first['msg']} ({'.'.join(location) or 'scenario'})", field)


# Static validation

class BarrierReport(BaseModel):
    name: str
    relative_degree: Optional[int] = None
    gamma: Optional[float] = None
    a_vec: Optional[List[float]] = None
    lambdas: Optional[List[float]] = None
    initial_condition: Optional[bool] = None
    error: Optional[str] = None


class ValidationReport(BaseModel):
    """Outcome of the static checks on one scenario"""

    scenario: str
    ok: bool = True
    barriers: List[BarrierReport] = []
    shrunk_input: Optional[List[List[float]]] = None
    errors: List[str] = []

    def fail(self, message: str) -> None:
        self.ok = False
        self.errors.append(message)

    def render(self) -> str:
        lines = [f"Scenario: {self.scenario}", f"Status: {'OK' if self.ok else 'FAILED'}"]
        if self.shrunk_input is not None:
            lines.append(f"Shrunk input box: {self.shrunk_input}")
        for b in self.barriers:
            parts = [f"r = {b.relative_degree}"]
            if b.gamma is not None:
                parts.append(f"gamma = {_num(b.gamma)}")
            if b.a_vec is not None:
                parts.append(f"a = ({_nums(b.a_vec)})")
            if b.lambdas is not None:
                parts.append(f"lambda = ({', '.join(f'{v:.6g}' for v in b.lambdas)})")
            if b.initial_condition is not None:
                parts.append("initial s-chain nonnegative" if b.initial_condition else "initial s-chain NOT certified")
            if b.error:
                parts.append(f"error: {b.error}")
            lines.append(f"  {b.name}: " + ", ".join(parts))
        for message in self.errors:
            lines.append(f"  ! {message}")
        return "\n".join(lines)


def validate_scenario(path) -> ValidationReport:
    """
    Static checks: parsing, relative degrees, gain consistency, initial condition, shrunk inputs

    Args:
        path: Scenario file

    Returns:
        Report; never raises for scenario problems
    """
    report = ValidationReport(scenario=str(path))
    try:
        config = ScenarioConfig.from_file(path)
        report.scenario = config.name
        system = config.build_system()
        barriers = config.build_barriers()
    except SafetyFilterError as e:
        report.fail(f"{type(e).__name__}: {e}")
        return report

    try:
        shrunk = shrink_input_box(system.U_box, system.eps_u)
        report.shrunk_input = shrunk.to_list()
    except InfeasibleInputSet as e:
        report.fail(f"{type(e).__name__}: {e}")

    for spec in barriers:
        entry = BarrierReport(
            name=spec.name,
            gamma=spec.gamma,
            a_vec=list(spec.a_vec) if spec.a_vec is not None else None,
            lambdas=list(spec.lambdas) if spec.lambdas is not None else None,
        )
        try:
            r = relative_degree(spec.h, system, [config.x0])
            entry.relative_degree = r
            build_xi(spec, system, r)
            chain = build_s_chain(spec, system, r)
            entry.initial_condition = check_initial_condition(
                chain, config.x0, config.noise.eps_x,
                tol=config.margin.pop_tol, budget=config.margin.pop_budget,
            )
            if not entry.initial_condition:
                report.fail(f"{spec.name}: initial condition not certified")
        except SafetyFilterError as e:
            entry.error = str(e)
            report.fail(f"{spec.name}: {type(e).__name__}: {e}")
        report.barriers.append(entry)
    return report
