"""Scenario configuration: strict JSON parsing, defaults, and overrides.

One JSON document configures a whole run.  Parsing is strict: unknown
keys are rejected with their full path, values are range-checked, and a
parsed configuration serializes back to an equivalent document, so
configs round-trip and golden tests stay byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .upconv import DEFAULT_SIGMA_P, DEFAULT_SIGMA_S, matched_collection_width


class ConfigError(ValueError):
    """Configuration rejected; the message carries the offending key path."""


def _require_keys(mapping: dict, allowed: set[str], path: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {path}{key!r}")


def _number(value: Any, path: str, lo: float = -float("inf"), hi: float = float("inf"),
            strict_lo: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    value = float(value)
    if strict_lo and not (value > lo):
        raise ConfigError(f"{path}: must be > {lo}, got {value}")
    if not (lo <= value <= hi):
        raise ConfigError(f"{path}: must be in [{lo}, {hi}], got {value}")
    return value


def _integer(value: Any, path: str, lo: int = 0, hi: int = 2**64 - 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if not (lo <= value <= hi):
        raise ConfigError(f"{path}: must be in [{lo}, {hi}], got {value}")
    return value


def _number_list(value: Any, path: str, lo: float, strict_lo: bool) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of numbers")
    return tuple(_number(v, f"{path}[{i}]", lo=lo, strict_lo=strict_lo) for i, v in enumerate(value))


@dataclass(frozen=True)
class GeometryConfig:
    """Beam widths inside the crystal [um]; sigma_f defaults to the
    mode-matched collection width."""

    sigma_s: float = DEFAULT_SIGMA_S
    sigma_p: float = DEFAULT_SIGMA_P
    sigma_f: Optional[float] = None

    def collection_width(self) -> float:
        if self.sigma_f is not None:
            return self.sigma_f
        return matched_collection_width(self.sigma_p, self.sigma_s)

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "GeometryConfig":
        _require_keys(data, {"sigma_s", "sigma_p", "sigma_f"}, path)
        base = cls()
        sigma_f = data.get("sigma_f", base.sigma_f)
        if sigma_f is not None:
            sigma_f = _number(sigma_f, f"{path}sigma_f", lo=0, strict_lo=True, hi=1e4)
        return cls(
            sigma_s=_number(data.get("sigma_s", base.sigma_s), f"{path}sigma_s", lo=0, strict_lo=True, hi=1e4),
            sigma_p=_number(data.get("sigma_p", base.sigma_p), f"{path}sigma_p", lo=0, strict_lo=True, hi=1e4),
            sigma_f=sigma_f,
        )

    def to_dict(self) -> dict:
        return {"sigma_s": self.sigma_s, "sigma_p": self.sigma_p, "sigma_f": self.sigma_f}


@dataclass(frozen=True)
class ModeSetConfig:
    """Pump mode set: odd x-orders and arbitrary y-orders."""

    l_list: tuple[int, ...] = (1, 3, 5, 7)
    m_list: tuple[int, ...] = (0, 1, 2, 3, 4)

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "ModeSetConfig":
        _require_keys(data, {"l_list", "m_list"}, path)
        base = cls()
        l_list = data.get("l_list", list(base.l_list))
        m_list = data.get("m_list", list(base.m_list))
        if not isinstance(l_list, list) or not l_list:
            raise ConfigError(f"{path}l_list: expected a non-empty list")
        if not isinstance(m_list, list) or not m_list:
            raise ConfigError(f"{path}m_list: expected a non-empty list")
        l_tuple = tuple(_integer(v, f"{path}l_list[{i}]", lo=1, hi=99) for i, v in enumerate(l_list))
        if any(l % 2 == 0 for l in l_tuple):
            raise ConfigError(f"{path}l_list: x-orders must be odd, got {list(l_tuple)}")
        m_tuple = tuple(_integer(v, f"{path}m_list[{i}]", lo=0, hi=99) for i, v in enumerate(m_list))
        return cls(l_list=l_tuple, m_list=m_tuple)

    def to_dict(self) -> dict:
        return {"l_list": list(self.l_list), "m_list": list(self.m_list)}


@dataclass(frozen=True)
class CountsConfig:
    """Count-model parameters.  gain_opt null means: calibrate per
    displacement so both pumps yield equal expected counts on the
    two-source state.

    The default dark_per_pulse is a dark-plus-background floor, not bare
    detector dark (3 Hz at a 50 MHz gate would be 6e-8): pump-induced
    background in upconversion detectors sits orders of magnitude above
    detector dark and is what actually limits the single-source
    extinction ratio.  Together with the default even-mode leakage it
    yields single-source ratios and required budgets on the scale the
    reference experiment reports.
    """

    eta0: float = 1e-4
    dark_per_pulse: float = 1.5e-5
    gain_opt: Optional[float] = None
    leak_even: float = 0.05
    misalign_x: float = 0.0

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "CountsConfig":
        _require_keys(data, {"eta0", "dark_per_pulse", "gain_opt", "leak_even", "misalign_x"}, path)
        base = cls()
        gain = data.get("gain_opt", base.gain_opt)
        if gain is not None:
            gain = _number(gain, f"{path}gain_opt", lo=0, strict_lo=True, hi=1e12)
        return cls(
            eta0=_number(data.get("eta0", base.eta0), f"{path}eta0", lo=0, strict_lo=True, hi=1.0),
            dark_per_pulse=_number(
                data.get("dark_per_pulse", base.dark_per_pulse), f"{path}dark_per_pulse", lo=0.0, hi=1.0
            ),
            gain_opt=gain,
            leak_even=_number(data.get("leak_even", base.leak_even), f"{path}leak_even", lo=-0.5, hi=0.5),
            misalign_x=_number(data.get("misalign_x", base.misalign_x), f"{path}misalign_x", lo=-100.0, hi=100.0),
        )

    def to_dict(self) -> dict:
        return {
            "eta0": self.eta0,
            "dark_per_pulse": self.dark_per_pulse,
            "gain_opt": self.gain_opt,
            "leak_even": self.leak_even,
            "misalign_x": self.misalign_x,
        }


@dataclass(frozen=True)
class FeedbackConfig:
    """Adaptive-feedback loop settings used when method is "feedback"."""

    step_a: float = 0.2
    step_offset: float = 10.0
    perturb_c: float = 0.1
    max_iters: int = 500
    shots_per_eval: Optional[float] = 10_000.0

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "FeedbackConfig":
        _require_keys(data, {"step_a", "step_offset", "perturb_c", "max_iters", "shots_per_eval"}, path)
        base = cls()
        shots = data.get("shots_per_eval", base.shots_per_eval)
        if shots is not None:
            shots = _number(shots, f"{path}shots_per_eval", lo=1.0, hi=1e15)
        return cls(
            step_a=_number(data.get("step_a", base.step_a), f"{path}step_a", lo=0, strict_lo=True, hi=100),
            step_offset=_number(data.get("step_offset", base.step_offset), f"{path}step_offset", lo=0, hi=1e6),
            perturb_c=_number(data.get("perturb_c", base.perturb_c), f"{path}perturb_c", lo=0, strict_lo=True, hi=10),
            max_iters=_integer(data.get("max_iters", base.max_iters), f"{path}max_iters", lo=0, hi=10**7),
            shots_per_eval=shots,
        )

    def to_dict(self) -> dict:
        return {
            "step_a": self.step_a,
            "step_offset": self.step_offset,
            "perturb_c": self.perturb_c,
            "max_iters": self.max_iters,
            "shots_per_eval": self.shots_per_eval,
        }


@dataclass(frozen=True)
class ScenarioConfig:
    """Full run configuration; see the README for the JSON layout."""

    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    mode_set: ModeSetConfig = field(default_factory=ModeSetConfig)
    counts: CountsConfig = field(default_factory=CountsConfig)
    theta_x_um: tuple[float, ...] = (3.0, 5.0, 10.0)
    n_ave: Optional[tuple[float, ...]] = (30.0, 60.0, 110.0, 170.0, 300.0, 530.0)
    pulses: Optional[tuple[float, ...]] = None
    trials: int = 10_000
    seed: int = 20_205
    method: str = "eigen"
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    out_dir: str = "out"

    def __post_init__(self):
        if self.n_ave is None and self.pulses is None:
            raise ConfigError("budgets: one of n_ave or pulses must be set")
        if self.n_ave is not None and self.pulses is not None:
            raise ConfigError("budgets: set either n_ave or pulses, not both")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"top level: expected an object, got {type(data).__name__}")
        allowed = {
            "geometry", "mode_set", "counts", "theta_x_um", "budgets",
            "trials", "seed", "method", "feedback", "out_dir",
        }
        _require_keys(data, allowed, "")
        base = cls()

        budgets = data.get("budgets", None)
        n_ave: Optional[tuple[float, ...]] = base.n_ave
        pulses: Optional[tuple[float, ...]] = base.pulses
        if budgets is not None:
            if not isinstance(budgets, dict):
                raise ConfigError("budgets: expected an object")
            _require_keys(budgets, {"n_ave", "pulses"}, "budgets.")
            has_n = budgets.get("n_ave") is not None
            has_p = budgets.get("pulses") is not None
            if has_n == has_p:
                raise ConfigError("budgets: set exactly one of n_ave or pulses")
            if has_n:
                n_ave, pulses = _number_list(budgets["n_ave"], "budgets.n_ave", lo=0, strict_lo=True), None
            else:
                n_ave, pulses = None, _number_list(budgets["pulses"], "budgets.pulses", lo=0, strict_lo=True)

        method = data.get("method", base.method)
        if method not in ("eigen", "feedback"):
            raise ConfigError(f"method: must be 'eigen' or 'feedback', got {method!r}")

        out_dir = data.get("out_dir", base.out_dir)
        if not isinstance(out_dir, str) or not out_dir:
            raise ConfigError(f"out_dir: expected a non-empty string, got {out_dir!r}")

        return cls(
            geometry=GeometryConfig.from_dict(data.get("geometry", {}), "geometry."),
            mode_set=ModeSetConfig.from_dict(data.get("mode_set", {}), "mode_set."),
            counts=CountsConfig.from_dict(data.get("counts", {}), "counts."),
            theta_x_um=_number_list(
                data.get("theta_x_um", list(base.theta_x_um)), "theta_x_um", lo=0.0, strict_lo=False
            ),
            n_ave=n_ave,
            pulses=pulses,
            trials=_integer(data.get("trials", base.trials), "trials", lo=1, hi=10**9),
            seed=_integer(data.get("seed", base.seed), "seed", lo=0, hi=2**64 - 1),
            method=method,
            feedback=FeedbackConfig.from_dict(data.get("feedback", {}), "feedback."),
            out_dir=out_dir,
        )

    def to_dict(self) -> dict:
        budgets = {"n_ave": list(self.n_ave)} if self.n_ave is not None else {"pulses": list(self.pulses)}
        return {
            "geometry": self.geometry.to_dict(),
            "mode_set": self.mode_set.to_dict(),
            "counts": self.counts.to_dict(),
            "theta_x_um": list(self.theta_x_um),
            "budgets": budgets,
            "trials": self.trials,
            "seed": self.seed,
            "method": self.method,
            "feedback": self.feedback.to_dict(),
            "out_dir": self.out_dir,
        }

    def budget_list(self) -> tuple[tuple[str, float], ...]:
        """Budgets as (kind, value) pairs, kind in {"n_ave", "pulses"}."""
        if self.n_ave is not None:
            return tuple(("n_ave", v) for v in self.n_ave)
        return tuple(("pulses", v) for v in self.pulses)


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> ScenarioConfig:
    """Load a config file (or defaults when path is None) and apply
    ``--set key=value`` overrides; values parse as JSON fragments."""
    if path is None:
        data: dict = {}
    else:
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _apply_override(data, key.strip(), value)
    return ScenarioConfig.from_dict(data)


def _apply_override(data: dict, dotted_key: str, value: Any) -> None:
    parts = dotted_key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {dotted_key}: {part} is not an object")
    node[parts[-1]] = value
