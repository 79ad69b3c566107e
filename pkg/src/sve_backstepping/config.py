"""Flat ``key = value`` scenario files.

A scenario either describes a physical channel (``model = physical``, the
default) or a system given directly by constant characteristic
coefficients (``model = abstract``), which is handy for synthetic checks.
"""

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, SVEError
from .kernels import DEFAULT_N, DEFAULT_TOL, AbstractCoefficients
from .model import EquilibriumSetup, PhysicalParams

CONTROLLERS = ("none", "state", "output")
BOUNDARY_TERMS = ("measured", "estimated")
MODELS = ("physical", "abstract")

_PHYSICAL = ("g", "Cf", "Ag", "pg", "Hstar", "Vstar", "Bstar")
_GATES = ("rho1", "rho2", "q1", "q2")
_ABSTRACT = ("mu", "gamma1", "gamma2", "sigma11", "sigma12", "sigma21", "sigma22",
             "alpha", "theta1", "theta2")
_NUMERIC = ("cells", "cfl", "t_final", "kernel_n", "kernel_tol")

REQUIRED = {
    "physical": _PHYSICAL + _GATES + ("t_final", "controller"),
    "abstract": ("mu", "gamma1", "gamma2", "t_final", "controller"),
}
DEFAULTS = {
    "model": "physical", "cells": 100, "cfl": 0.9, "kernel_n": DEFAULT_N,
    "kernel_tol": DEFAULT_TOL, "boundary_terms": "measured", "out_dir": None,
    "rho1": 0.0, "rho2": 0.0, "q1": 0.0, "q2": 0.0,
    "sigma11": 0.0, "sigma12": 0.0, "sigma21": 0.0, "sigma22": 0.0,
    "alpha": 0.0, "theta1": 0.0, "theta2": 0.0,
}
INT_KEYS = ("cells", "kernel_n")
STR_KEYS = ("model", "controller", "boundary_terms", "out_dir")
KNOWN = set(_PHYSICAL + _GATES + _ABSTRACT + _NUMERIC + STR_KEYS)


@dataclass
class Scenario:
    values: dict
    path: Path | None = None
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def name(self):
        return self.path.stem if self.path is not None else "scenario"

    @property
    def model(self):
        return self.values["model"]

    def setup(self):
        """``EquilibriumSetup`` of a physical scenario."""
        if self.model != "physical":
            raise ConfigError(f"{self.name}: abstract scenarios have no physical set point")
        v = self.values
        params = PhysicalParams(g=v["g"], Cf=v["Cf"], Ag=v["Ag"], pg=v["pg"])
        return EquilibriumSetup(params, v["Hstar"], v["Vstar"], v["Bstar"],
                                v["rho1"], v["rho2"], v["q1"], v["q2"])

    def coefficients(self):
        """``AbstractCoefficients`` for either kind of scenario."""
        v = self.values
        if self.model == "physical":
            return AbstractCoefficients.from_setup(self.setup())
        sigma = np.array([[v["sigma11"], v["sigma12"]], [v["sigma21"], v["sigma22"]]])
        return AbstractCoefficients.constant(
            v["mu"], v["gamma1"], v["gamma2"], sigma=sigma, alpha=v["alpha"],
            theta1=v["theta1"], theta2=v["theta2"], q1=v["q1"], q2=v["q2"],
            rho1=v["rho1"], rho2=v["rho2"])

    def override(self, **kw):
        vals = dict(self.values)
        for k, val in kw.items():
            if val is None:
                continue
            if k not in KNOWN:
                raise ConfigError(f"unknown key '{k}'")
            vals[k] = val
        sc = Scenario(vals, self.path, dict(self.lines))
        _validate(sc)
        return sc


def _convert(key, raw, where):
    if key in STR_KEYS:
        return raw
    try:
        if key in INT_KEYS:
            return int(raw)
        val = float(raw)
    except ValueError:
        raise ConfigError(f"{where}: '{key}' expects a number, got '{raw}'") from None
    if not math.isfinite(val):
        raise ConfigError(f"{where}: '{key}' must be finite")
    return val


def parse_scenario(text, path=None):
    """Parse scenario text; errors name the file, line and key."""
    src = str(path) if path is not None else "<string>"
    values, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{src}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got '{line}'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN:
            raise ConfigError(f"{where}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"{where}: duplicate key '{key}' (first on line {lines[key]})")
        if not raw:
            raise ConfigError(f"{where}: empty value for '{key}'")
        values[key] = _convert(key, raw, where)
        lines[key] = lineno
    model = values.get("model", DEFAULTS["model"])
    if model not in MODELS:
        raise ConfigError(f"{src}:{lines.get('model')}: model must be one of {MODELS}")
    missing = [k for k in REQUIRED[model] if k not in values]
    if missing:
        raise ConfigError(f"{src}: missing required key(s) {', '.join(missing)}")
    for k, d in DEFAULTS.items():
        values.setdefault(k, d)
    sc = Scenario(values, Path(path) if path is not None else None, lines)
    _validate(sc)
    return sc


def _validate(sc):
    v, src = sc.values, str(sc.path or "<string>")

    def fail(key, msg):
        line = sc.lines.get(key)
        at = f"{src}:{line}" if line else src
        raise ConfigError(f"{at}: '{key}' {msg}")

    if v["controller"] not in CONTROLLERS:
        fail("controller", f"must be one of {CONTROLLERS}, got '{v['controller']}'")
    if v["boundary_terms"] not in BOUNDARY_TERMS:
        fail("boundary_terms", f"must be one of {BOUNDARY_TERMS}, got '{v['boundary_terms']}'")
    if v["cells"] < 10:
        fail("cells", "must be >= 10")
    if not 0 < v["cfl"] <= 1:
        fail("cfl", "must lie in (0, 1]")
    if not v["t_final"] > 0:
        fail("t_final", "must be positive")
    if v["kernel_n"] < 3:
        fail("kernel_n", "must be >= 3")
    if not v["kernel_tol"] > 0:
        fail("kernel_tol", "must be positive")
    if v["model"] == "abstract":
        for k in ("mu", "gamma1", "gamma2"):
            if not v[k] > 0:
                fail(k, "must be positive")
    else:
        try:
            sc.setup()
        except SVEError as exc:
            raise ConfigError(f"{src}: {exc}") from exc


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario '{path}': {exc}") from exc
    return parse_scenario(text, path)


def bundled_scenario(name):
    """Path of a scenario shipped with the package (``table1``, ``table2``, ...)."""
    ref = resources.files("sve_backstepping") / "scenarios" / f"{name}.cfg"
    if not ref.is_file():
        raise ConfigError(f"no bundled scenario '{name}'")
    return Path(str(ref))


def sim_config(sc):
    """``SimConfig`` for a physical scenario."""
    from .simulation import SimConfig
    v = sc.values
    return SimConfig(sc.setup(), cells=v["cells"], cfl=v["cfl"], t_final=v["t_final"],
                     controller=v["controller"], boundary_terms=v["boundary_terms"],
                     kernel_n=v["kernel_n"], kernel_tol=v["kernel_tol"])
