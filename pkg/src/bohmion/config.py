"""Run configuration: a flat, sectioned key=value text format.

Sections select the scenario and its physics; values are typed at read
time and every parse error names the offending section and key.  Example:

    [run]
    scenario = bohmions
    seed = 1234

    [physics]
    hbar = 1.0
    mass = 1.0

    [kernel]
    family = gaussian
    alpha = 0.5

    [integrator]
    dt = 1e-3
    steps = 2000
    stride = 10

    [potential]
    family = harmonic
    omega = 1.0

    [bohmions]
    mode = hamiltonian
    q = -1.0, 0.0, 1.0
    p = 0.2, 0.0, -0.2
    w = 1, 1, 1
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .integrators import PhysicalConstants
from .kernels import SmoothingKernel
from .potentials import Potential

SCENARIOS = ("bohmions", "schrodinger", "meanfield", "ef_bohmions")


class _Section:
    def __init__(self, parser: configparser.ConfigParser, name: str):
        self._name = name
        self._present = parser.has_section(name)
        self._items = dict(parser.items(name)) if self._present else {}

    @property
    def present(self) -> bool:
        return self._present

    def _fetch(self, key: str, default):
        if key not in self._items:
            if default is not _REQUIRED:
                return default
            raise ConfigurationError(f"[{self._name}] is missing required key '{key}'")
        return self._items[key]

    def get_float(self, key: str, default=None) -> float:
        raw = self._fetch(key, default)
        if not isinstance(raw, str):
            return raw
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigurationError(f"[{self._name}] {key} = {raw!r} is not a number") from exc

    def get_int(self, key: str, default=None) -> int:
        raw = self._fetch(key, default)
        if not isinstance(raw, str):
            return raw
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigurationError(f"[{self._name}] {key} = {raw!r} is not an integer") from exc

    def get_str(self, key: str, default=None) -> str:
        raw = self._fetch(key, default)
        return raw.strip() if isinstance(raw, str) else raw

    def get_floats(self, key: str, default=None) -> np.ndarray:
        raw = self._fetch(key, default)
        if not isinstance(raw, str):
            return np.asarray(raw, dtype=float)
        try:
            return np.array([float(tok) for tok in raw.replace(",", " ").split()])
        except ValueError as exc:
            raise ConfigurationError(
                f"[{self._name}] {key} = {raw!r} is not a list of numbers"
            ) from exc

    def get_complexes(self, key: str, default=None) -> np.ndarray:
        raw = self._fetch(key, default)
        if not isinstance(raw, str):
            return np.asarray(raw, dtype=complex)
        try:
            return np.array([complex(tok) for tok in raw.replace(",", " ").split()])
        except ValueError as exc:
            raise ConfigurationError(
                f"[{self._name}] {key} = {raw!r} is not a list of complex numbers"
            ) from exc

    def get_matrix(self, key: str, default=None) -> np.ndarray:
        raw = self._fetch(key, default)
        if not isinstance(raw, str):
            return np.asarray(raw, dtype=complex)
        try:
            rows = [
                [complex(tok) for tok in row.replace(",", " ").split()]
                for row in raw.split(";")
            ]
            return np.asarray(rows, dtype=complex)
        except ValueError as exc:
            raise ConfigurationError(
                f"[{self._name}] {key} = {raw!r} is not a ';'-separated matrix"
            ) from exc

    def keys(self):
        return self._items.keys()


_REQUIRED = object()


@dataclass
class RunConfig:
    scenario: str
    seed: int
    constants: PhysicalConstants
    kernel: SmoothingKernel
    dt: float
    steps: int
    stride: int
    potential: Potential
    sections: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output_dir: str | None = None
    raw_text: str = ""


def _build_potential(sec: _Section, mass: float) -> Potential:
    family = sec.get_str("family", "free") if sec.present else "free"
    if family in ("free", "zero"):
        return Potential.zero()
    if family == "harmonic":
        return Potential.harmonic(omega=sec.get_float("omega", 1.0), mass=mass)
    if family == "double_well":
        return Potential.double_well(
            height=sec.get_float("height", 1.0),
            half_separation=sec.get_float("half_separation", 1.0),
        )
    if family == "polynomial":
        return Potential.polynomial(sec.get_floats("coeffs"))
    raise ConfigurationError(f"[potential] unknown family {family!r}")


def load_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config parse error: {exc}") from exc

    run = _Section(parser, "run")
    scenario = run.get_str("scenario", _REQUIRED)
    if scenario not in SCENARIOS:
        raise ConfigurationError(
            f"[run] scenario = {scenario!r}; expected one of {SCENARIOS}"
        )
    seed = run.get_int("seed", 1234)

    phys = _Section(parser, "physics")
    constants = PhysicalConstants(
        hbar=phys.get_float("hbar", 1.0),
        mass=phys.get_float("mass", 1.0),
        electron_mass=phys.get_float("electron_mass", 1.0),
    )

    kern = _Section(parser, "kernel")
    kernel = SmoothingKernel(
        family=kern.get_str("family", "gaussian"),
        alpha=kern.get_float("alpha", 1.0),
    )

    integ = _Section(parser, "integrator")
    dt = integ.get_float("dt", _REQUIRED if integ.present else 1e-3)
    steps = integ.get_int("steps", _REQUIRED if integ.present else 1000)
    stride = integ.get_int("stride", 1)
    if not dt > 0:
        raise ConfigurationError("[integrator] dt must be positive")
    if steps < 1:
        raise ConfigurationError("[integrator] steps must be >= 1")
    if stride < 1:
        raise ConfigurationError("[integrator] stride must be >= 1")

    potential = _build_potential(_Section(parser, "potential"), constants.mass)

    tol_sec = _Section(parser, "tolerances")
    tolerances = {key: tol_sec.get_float(key) for key in tol_sec.keys()}

    out_sec = _Section(parser, "output")
    output_dir = out_sec.get_str("directory", None) if out_sec.present else None

    sections = {
        name: _Section(parser, name)
        for name in ("bohmions", "schrodinger", "meanfield", "ef", "electronic")
    }
    return RunConfig(
        scenario=scenario,
        seed=seed,
        constants=constants,
        kernel=kernel,
        dt=dt,
        steps=steps,
        stride=stride,
        potential=potential,
        sections=sections,
        tolerances=tolerances,
        output_dir=output_dir,
        raw_text=text,
    )
