"""Scenario file parsing and echoing.

Scenario files are JSON documents with sections {gait, vertical, mpc,
pushes, contact, sim}; every physical quantity is SI. Unknown keys are
rejected, unspecified fields take the documented defaults, and
`scenario_to_dict` echoes every resolved value so a run is reproducible
from its summary alone.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .mpc import MpcConfig
from .simulator import CONTROLLER_MODES, PushEvent, Scenario


class ScenarioFormatError(ValueError):
    """Malformed scenario document; message carries the offending location."""


_GAIT_KEYS = {
    "step_count",
    "step_length",
    "step_width",
    "durations",
    "control_period",
    "half_length",
    "half_width",
}
_DURATION_KEYS = {"initial_dsp", "dsp", "ssp", "final_dsp"}
_VERTICAL_KEYS = {"com_height", "waypoints"}
_MPC_KEYS = {
    "mode",
    "horizon",
    "preview_steps",
    "w_cop_rate",
    "w_momentum",
    "w_momentum_rate",
    "w_cop_track",
    "w_dcm_track",
    "reach_bound",
    "lateral_clearance",
    "hessian_reg",
    "min_terminal_horizon",
    "foothold_bounds",
}
_PUSH_KEYS = {"force", "start", "duration"}
_CONTACT_KEYS = {"half_extents"}
_SIM_KEYS = {"inner_dt", "mass", "gravity", "seed"}
_TOP_KEYS = {"name", "gait", "vertical", "mpc", "pushes", "contact", "sim"}


def _require_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{where}: expected an object, got {type(obj).__name__}")
    return obj


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioFormatError(f"{where}: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")


def _number(obj: dict, key: str, where: str, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioFormatError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _integer(obj: dict, key: str, where: str, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioFormatError(f"{where}.{key}: expected an integer, got {v!r}")
    return v


def _pair(v, where: str) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ScenarioFormatError(f"{where}: expected a pair of numbers, got {v!r}")
    for item in v:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ScenarioFormatError(f"{where}: expected a pair of numbers, got {v!r}")
    return (float(v[0]), float(v[1]))


def _parse_mpc(section: dict | None) -> MpcConfig:
    if section is None:
        return MpcConfig()
    section = _require_mapping(section, "mpc")
    _reject_unknown(section, _MPC_KEYS, "mpc")
    kwargs = {}
    mode = section.get("mode")
    if mode is not None:
        if mode not in CONTROLLER_MODES:
            raise ScenarioFormatError(
                f"mpc.mode: {mode!r} is not one of {sorted(CONTROLLER_MODES)}"
            )
        kwargs.update(CONTROLLER_MODES[mode])
    for key in ("horizon", "preview_steps", "min_terminal_horizon"):
        v = _integer(section, key, "mpc")
        if v is not None:
            kwargs[key] = v
    for key in (
        "w_cop_rate",
        "w_momentum",
        "w_momentum_rate",
        "w_cop_track",
        "w_dcm_track",
        "reach_bound",
        "lateral_clearance",
        "hessian_reg",
    ):
        v = _number(section, key, "mpc")
        if v is not None:
            kwargs[key] = v
    if "foothold_bounds" in section:
        fb = section["foothold_bounds"]
        if fb is not None:
            if not isinstance(fb, (list, tuple)) or len(fb) != 2:
                raise ScenarioFormatError(
                    "mpc.foothold_bounds: expected [[xlo, xhi], [ylo, yhi]] or null"
                )
            fb = (_pair(fb[0], "mpc.foothold_bounds[0]"), _pair(fb[1], "mpc.foothold_bounds[1]"))
        kwargs["foothold_bounds"] = fb
    return MpcConfig(**kwargs)


def _parse_pushes(section) -> list:
    if section is None:
        return []
    if not isinstance(section, list):
        raise ScenarioFormatError("pushes: expected a list of push objects")
    pushes = []
    for i, item in enumerate(section):
        where = f"pushes[{i}]"
        item = _require_mapping(item, where)
        _reject_unknown(item, _PUSH_KEYS, where)
        for key in _PUSH_KEYS:
            if key not in item:
                raise ScenarioFormatError(f"{where}: missing required key {key!r}")
        pushes.append(
            PushEvent(
                force=np.array(_pair(item["force"], f"{where}.force")),
                start=_number(item, "start", where),
                duration=_number(item, "duration", where),
            )
        )
    return pushes


def parse_scenario(doc: dict, name_hint: str = "scenario") -> Scenario:
    """Build a Scenario from a parsed document, validating the schema."""
    doc = _require_mapping(doc, "document root")
    _reject_unknown(doc, _TOP_KEYS, "document root")

    kwargs = {"name": doc.get("name", name_hint)}
    if not isinstance(kwargs["name"], str):
        raise ScenarioFormatError("name: expected a string")

    gait = doc.get("gait")
    if gait is not None:
        gait = _require_mapping(gait, "gait")
        _reject_unknown(gait, _GAIT_KEYS, "gait")
        v = _integer(gait, "step_count", "gait")
        if v is not None:
            kwargs["step_count"] = v
        for key in ("step_length", "step_width", "control_period", "half_length", "half_width"):
            v = _number(gait, key, "gait")
            if v is not None:
                kwargs[key] = v
        if "durations" in gait:
            dur = _require_mapping(gait["durations"], "gait.durations")
            _reject_unknown(dur, _DURATION_KEYS, "gait.durations")
            missing = _DURATION_KEYS - set(dur)
            if missing:
                raise ScenarioFormatError(f"gait.durations: missing keys {sorted(missing)}")
            kwargs["durations"] = {k: _number(dur, k, "gait.durations") for k in dur}

    vertical = doc.get("vertical")
    if vertical is not None:
        vertical = _require_mapping(vertical, "vertical")
        _reject_unknown(vertical, _VERTICAL_KEYS, "vertical")
        if "com_height" in vertical and "waypoints" in vertical:
            raise ScenarioFormatError("vertical: give either com_height or waypoints, not both")
        if "com_height" in vertical:
            kwargs["com_height"] = _number(vertical, "com_height", "vertical")
        if "waypoints" in vertical:
            wps = vertical["waypoints"]
            if not isinstance(wps, list) or not wps:
                raise ScenarioFormatError("vertical.waypoints: expected a non-empty list of [t, z]")
            kwargs["vertical_waypoints"] = [
                _pair(w, f"vertical.waypoints[{i}]") for i, w in enumerate(wps)
            ]

    kwargs["mpc"] = _parse_mpc(doc.get("mpc"))
    kwargs["pushes"] = _parse_pushes(doc.get("pushes"))

    contact = doc.get("contact")
    if contact is not None:
        contact = _require_mapping(contact, "contact")
        _reject_unknown(contact, _CONTACT_KEYS, "contact")
        if "half_extents" in contact and contact["half_extents"] is not None:
            kwargs["contact_half"] = _pair(contact["half_extents"], "contact.half_extents")

    sim = doc.get("sim")
    if sim is not None:
        sim = _require_mapping(sim, "sim")
        _reject_unknown(sim, _SIM_KEYS, "sim")
        for key in ("inner_dt", "mass", "gravity"):
            v = _number(sim, key, "sim")
            if v is not None:
                kwargs[key] = v
        v = _integer(sim, "seed", "sim")
        if v is not None:
            kwargs["seed"] = v

    try:
        return Scenario(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ScenarioFormatError(f"invalid scenario values: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    """Read, validate and build a Scenario from a JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_scenario(doc, name_hint=path.stem)


def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package."""
    root = resources.files("dcm_mpc") / "scenarios" / f"{name}.json"
    return Path(str(root))


def controller_mode_name(cfg: MpcConfig) -> str:
    """Controller mode label of a config's authority flags."""
    for name, flags in CONTROLLER_MODES.items():
        if all(getattr(cfg, k) == v for k, v in flags.items()):
            return name
    raise ValueError("unreachable: flags always match a mode")


def scenario_to_dict(sc: Scenario) -> dict:
    """Full echo of a scenario with every default resolved."""
    cfg = sc.mpc
    vertical = (
        {"com_height": sc.com_height}
        if sc.vertical_waypoints is None
        else {"waypoints": [list(w) for w in sc.vertical_waypoints]}
    )
    fb = cfg.foothold_bounds
    return {
        "name": sc.name,
        "gait": {
            "step_count": sc.step_count,
            "step_length": sc.step_length,
            "step_width": sc.step_width,
            "durations": dict(sc.durations),
            "control_period": sc.control_period,
            "half_length": sc.half_length,
            "half_width": sc.half_width,
        },
        "vertical": vertical,
        "mpc": {
            "mode": controller_mode_name(cfg),
            "horizon": cfg.horizon,
            "preview_steps": cfg.preview_steps,
            "w_cop_rate": cfg.w_cop_rate,
            "w_momentum": cfg.w_momentum,
            "w_momentum_rate": cfg.w_momentum_rate,
            "w_cop_track": cfg.w_cop_track,
            "w_dcm_track": cfg.w_dcm_track,
            "reach_bound": cfg.reach_bound,
            "lateral_clearance": cfg.lateral_clearance,
            "hessian_reg": cfg.hessian_reg,
            "min_terminal_horizon": cfg.min_terminal_horizon,
            "foothold_bounds": None if fb is None else [list(fb[0]), list(fb[1])],
        },
        "pushes": [
            {"force": list(map(float, ev.force)), "start": ev.start, "duration": ev.duration}
            for ev in sc.pushes
        ],
        "contact": {"half_extents": None if sc.contact_half is None else list(sc.contact_half)},
        "sim": {
            "inner_dt": sc.inner_dt,
            "mass": sc.mass,
            "gravity": sc.gravity,
            "seed": sc.seed,
        },
    }
