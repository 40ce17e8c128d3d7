"""Strict, versioned YAML configuration for the virtual lab.

The parser is deliberately unforgiving: unknown keys anywhere in the
document are fatal and reported by their full dotted path, because a
silently ignored typo in a calibrated physics parameter is the worst
possible failure mode. ``LabConfig.effective()`` echoes the fully
defaulted configuration back for audit.

Top-level sections (all optional except ``format_version``):

    format_version: 1
    seed: 0
    instrument:     stage_voltage, laser_power, attenuation, mw{...},
                    magnet_field, spad{...}
    psf:            lateral_sigma, axial_sigma, wavelength,
                    numerical_aperture
    noise:          enabled, sigma_static, sigma_ou, tau_corr, substep,
                    max_substeps
    physics:        d_zfs, gamma_e, t2_star, t1, axis,
                    lindblad_dephasing, drive_dephasing_rate
    optical_rates:  k_rad, k_isc_pm, k_isc_0, k_s0, k_s_pm,
                    pump_rate_per_watt
    sample:         preset name string, {file: path}, a preset mapping,
                    or an inline emitter list

The ``physics`` and ``optical_rates`` sections apply to every emitter of
the configured sample; inline emitters may override individual
parameters on top of them.
"""

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from ..physics.model import NVParameters, OpticalRates
from ..vlab import (InstrumentState, MWSettings, NoiseModel, PSFModel,
                    SPADConfig, VirtualLab)
from ..vlab.sample import (Emitter, VirtualSample, empty_sample,
                           implanted_layer_sample, single_nv_sample)

FORMAT_VERSION = 1

_SAMPLE_PRESETS = ("single_nv", "implanted_layer", "empty")


class ConfigError(ValueError):
    """Invalid, unknown, or unparseable configuration content."""


def _require_mapping(node, path: str) -> dict:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(f"{path or 'document'} must be a mapping, "
                          f"got {type(node).__name__}")
    return node


def _check_keys(node: dict, allowed, path: str) -> None:
    for key in node:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(f"unknown key {where!r}")


def _number(node: dict, key: str, default: float, path: str) -> float:
    value = node.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number")
    return float(value)


def _integer(node: dict, key: str, default: int, path: str) -> int:
    value = node.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{key} must be an integer")
    return value


def _boolean(node: dict, key: str, default: bool, path: str) -> bool:
    value = node.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"{path}.{key} must be true or false")
    return value


def _vector3(node: dict, key: str, default, path: str) -> np.ndarray:
    value = node.get(key)
    if value is None:
        return np.asarray(default, dtype=float)
    if (not isinstance(value, (list, tuple)) or len(value) != 3
            or any(isinstance(v, bool) or not isinstance(v, (int, float))
                   for v in value)):
        raise ConfigError(f"{path}.{key} must be a list of 3 numbers")
    return np.asarray(value, dtype=float)


def _parse_instrument(node: dict, seed: int) -> InstrumentState:
    path = "instrument"
    _check_keys(node, ("stage_voltage", "laser_power", "attenuation", "mw",
                       "magnet_field", "spad"), path)
    mw_node = _require_mapping(node.get("mw"), f"{path}.mw")
    _check_keys(mw_node, ("frequency", "rabi", "on"), f"{path}.mw")
    mw = MWSettings(
        frequency=_number(mw_node, "frequency", 2.87e9, f"{path}.mw"),
        rabi=_number(mw_node, "rabi", 0.0, f"{path}.mw"),
        on=_boolean(mw_node, "on", False, f"{path}.mw"))
    spad_node = _require_mapping(node.get("spad"), f"{path}.spad")
    _check_keys(spad_node, ("dark_rate", "dead_time", "quantum_efficiency",
                            "collection_efficiency"), f"{path}.spad")
    defaults = SPADConfig()
    spad = SPADConfig(
        dark_rate=_number(spad_node, "dark_rate", defaults.dark_rate,
                          f"{path}.spad"),
        dead_time=_number(spad_node, "dead_time", defaults.dead_time,
                          f"{path}.spad"),
        quantum_efficiency=_number(spad_node, "quantum_efficiency",
                                   defaults.quantum_efficiency,
                                   f"{path}.spad"),
        collection_efficiency=_number(spad_node, "collection_efficiency",
                                      defaults.collection_efficiency,
                                      f"{path}.spad"))
    return InstrumentState(
        stage_voltage=_vector3(node, "stage_voltage", [5.0, 5.0, 5.0], path),
        laser_power=_number(node, "laser_power", 1.0e-3, path),
        attenuation=_number(node, "attenuation", 0.0, path),
        mw=mw,
        magnet_field=_vector3(node, "magnet_field", [0.0, 0.0, 0.0], path),
        spad=spad,
        seed=seed)


def _parse_psf(node: dict) -> PSFModel:
    path = "psf"
    _check_keys(node, ("lateral_sigma", "axial_sigma", "wavelength",
                       "numerical_aperture"), path)
    d = PSFModel()
    return PSFModel(
        lateral_sigma=_number(node, "lateral_sigma", d.lateral_sigma, path),
        axial_sigma=_number(node, "axial_sigma", d.axial_sigma, path),
        wavelength=_number(node, "wavelength", d.wavelength, path),
        numerical_aperture=_number(node, "numerical_aperture",
                                   d.numerical_aperture, path))


def _parse_noise(node: dict) -> NoiseModel:
    path = "noise"
    _check_keys(node, ("enabled", "sigma_static", "sigma_ou", "tau_corr",
                       "substep", "max_substeps"), path)
    d = NoiseModel()
    return NoiseModel(
        enabled=_boolean(node, "enabled", d.enabled, path),
        sigma_static=_number(node, "sigma_static", d.sigma_static, path),
        sigma_ou=_number(node, "sigma_ou", d.sigma_ou, path),
        tau_corr=_number(node, "tau_corr", d.tau_corr, path),
        substep=_number(node, "substep", d.substep, path),
        max_substeps=_integer(node, "max_substeps", d.max_substeps, path))


def _parse_optical_rates(node: dict) -> OpticalRates:
    path = "optical_rates"
    fields = ("k_rad", "k_isc_pm", "k_isc_0", "k_s0", "k_s_pm",
              "pump_rate_per_watt")
    _check_keys(node, fields, path)
    d = OpticalRates()
    return OpticalRates(**{f: _number(node, f, getattr(d, f), path)
                           for f in fields})


def _parse_physics(node: dict, rates: OpticalRates) -> NVParameters:
    path = "physics"
    _check_keys(node, ("d_zfs", "gamma_e", "t2_star", "t1", "axis",
                       "lindblad_dephasing", "drive_dephasing_rate"), path)
    d = NVParameters()
    drive = node.get("drive_dephasing_rate")
    if drive is not None and (isinstance(drive, bool)
                              or not isinstance(drive, (int, float))):
        raise ConfigError(f"{path}.drive_dephasing_rate must be a number")
    return NVParameters(
        d_zfs=_number(node, "d_zfs", d.d_zfs, path),
        gamma_e=_number(node, "gamma_e", d.gamma_e, path),
        t2_star=_number(node, "t2_star", d.t2_star, path),
        t1=_number(node, "t1", d.t1, path),
        axis=_vector3(node, "axis", d.axis, path),
        lindblad_dephasing=_boolean(node, "lindblad_dephasing",
                                    d.lindblad_dephasing, path),
        drive_dephasing_rate=None if drive is None else float(drive),
        optical_rates=rates)


def _emitter_params(base: NVParameters, overrides: dict,
                    path: str) -> NVParameters:
    _check_keys(overrides, ("d_zfs", "gamma_e", "t2_star", "t1", "axis",
                            "lindblad_dephasing", "drive_dephasing_rate"),
                path)
    changes = {}
    for key in ("d_zfs", "gamma_e", "t2_star", "t1", "drive_dephasing_rate"):
        if key in overrides:
            changes[key] = _number(overrides, key, 0.0, path)
    if "lindblad_dephasing" in overrides:
        changes["lindblad_dephasing"] = _boolean(
            overrides, "lindblad_dephasing", False, path)
    if "axis" in overrides:
        changes["axis"] = _vector3(overrides, "axis", base.axis, path)
    return dataclasses.replace(base, **changes) if changes else base


def _apply_physics(sample: VirtualSample,
                   params: NVParameters) -> VirtualSample:
    """Re-base every emitter on the configured physics, keeping its axis."""
    emitters = tuple(
        dataclasses.replace(
            e, params=dataclasses.replace(params, axis=e.params.axis))
        for e in sample.emitters)
    return dataclasses.replace(sample, emitters=emitters)


def _parse_sample(node, params: NVParameters, base_dir: Path,
                  path: str = "sample") -> VirtualSample:
    if node is None:
        return _apply_physics(single_nv_sample(), params)
    if isinstance(node, str):
        node = {"preset": node}
    node = _require_mapping(node, path)
    if "file" in node:
        _check_keys(node, ("file",), path)
        ref = base_dir / str(node["file"])
        if not ref.is_file():
            raise ConfigError(f"{path}.file {str(ref)!r} not found")
        inner = _load_yaml(ref)
        return _parse_sample(inner, params, ref.parent, path=f"{path}.file")
    if "emitters" in node:
        _check_keys(node, ("emitters", "background_rate_per_watt", "name"),
                    path)
        entries = node["emitters"]
        if not isinstance(entries, list):
            raise ConfigError(f"{path}.emitters must be a list")
        emitters = []
        for i, entry in enumerate(entries):
            epath = f"{path}.emitters[{i}]"
            entry = _require_mapping(entry, epath)
            if "position" not in entry:
                raise ConfigError(f"{epath}.position is required")
            position = _vector3(entry, "position", None, epath)
            brightness = _number(entry, "brightness_scale", 1.0, epath)
            overrides = {k: v for k, v in entry.items()
                         if k not in ("position", "brightness_scale")}
            emitters.append(Emitter(
                position=position,
                params=_emitter_params(params, overrides, epath),
                brightness_scale=brightness))
        name = node.get("name", "custom")
        if not isinstance(name, str):
            raise ConfigError(f"{path}.name must be a string")
        return VirtualSample(
            emitters=tuple(emitters),
            background_rate_per_watt=_number(
                node, "background_rate_per_watt", 2.0e7, path),
            name=name)
    preset = node.get("preset")
    if preset not in _SAMPLE_PRESETS:
        raise ConfigError(
            f"{path}.preset must be one of {', '.join(_SAMPLE_PRESETS)}")
    if preset == "single_nv":
        _check_keys(node, ("preset", "position", "axis"), path)
        sample = single_nv_sample(
            position=_vector3(node, "position", [50.0, 50.0, 50.0], path),
            axis=_vector3(node, "axis", params.axis, path))
    elif preset == "implanted_layer":
        _check_keys(node, ("preset", "n_emitters", "sample_seed", "depth_um",
                           "region_um", "tetrahedral_axes"), path)
        sample = implanted_layer_sample(
            n_emitters=_integer(node, "n_emitters", 12, path),
            seed=_integer(node, "sample_seed", 1234, path),
            depth_um=_number(node, "depth_um", 0.01, path),
            region_um=_number(node, "region_um", 20.0, path),
            tetrahedral_axes=_boolean(node, "tetrahedral_axes", False, path))
    else:
        _check_keys(node, ("preset",), path)
        sample = empty_sample()
    return _apply_physics(sample, params)


def parse_sample(node, params: Optional[NVParameters] = None,
                 base_dir: Union[str, Path] = ".") -> VirtualSample:
    """Validate a standalone sample specification (config schema)."""
    return _parse_sample(node, params if params is not None else NVParameters(),
                         Path(base_dir))


def _load_yaml(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as ex:
        raise ConfigError(f"cannot read {str(path)!r}: {ex}") from None
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as ex:
        mark = getattr(ex, "problem_mark", None)
        where = (f" at line {mark.line + 1}, column {mark.column + 1}"
                 if mark is not None else "")
        raise ConfigError(f"parse error in {path.name}{where}: "
                          f"{getattr(ex, 'problem', ex)}") from None


@dataclass(frozen=True)
class LabConfig:
    """Fully validated and defaulted virtual-lab configuration."""

    format_version: int
    seed: int
    instrument: InstrumentState
    psf: PSFModel
    noise: NoiseModel
    physics: NVParameters
    sample: VirtualSample

    def build_lab(self) -> VirtualLab:
        return VirtualLab(state=self.instrument, sample=self.sample,
                          psf=self.psf, noise=self.noise, seed=self.seed)

    def effective(self) -> dict:
        """The complete configuration after defaulting, for audit logs."""
        s = self.instrument
        p = self.physics
        r = p.optical_rates
        return {
            "format_version": self.format_version,
            "seed": self.seed,
            "instrument": {
                "stage_voltage": [float(v) for v in s.stage_voltage],
                "laser_power": s.laser_power,
                "attenuation": s.attenuation,
                "mw": {"frequency": s.mw.frequency, "rabi": s.mw.rabi,
                       "on": s.mw.on},
                "magnet_field": [float(b) for b in s.magnet_field],
                "spad": {
                    "dark_rate": s.spad.dark_rate,
                    "dead_time": s.spad.dead_time,
                    "quantum_efficiency": s.spad.quantum_efficiency,
                    "collection_efficiency": s.spad.collection_efficiency,
                },
            },
            "psf": {
                "lateral_sigma": self.psf.lateral_sigma,
                "axial_sigma": self.psf.axial_sigma,
                "wavelength": self.psf.wavelength,
                "numerical_aperture": self.psf.numerical_aperture,
            },
            "noise": {
                "enabled": self.noise.enabled,
                "sigma_static": self.noise.sigma_static,
                "sigma_ou": self.noise.sigma_ou,
                "tau_corr": self.noise.tau_corr,
                "substep": self.noise.substep,
                "max_substeps": self.noise.max_substeps,
            },
            "physics": {
                "d_zfs": p.d_zfs,
                "gamma_e": p.gamma_e,
                "t2_star": p.t2_star,
                "t1": p.t1,
                "axis": [float(a) for a in p.axis],
                "lindblad_dephasing": p.lindblad_dephasing,
                "drive_dephasing_rate": p.drive_dephasing_rate,
            },
            "optical_rates": {
                "k_rad": r.k_rad,
                "k_isc_pm": r.k_isc_pm,
                "k_isc_0": r.k_isc_0,
                "k_s0": r.k_s0,
                "k_s_pm": r.k_s_pm,
                "pump_rate_per_watt": r.pump_rate_per_watt,
            },
            "sample": {
                "name": self.sample.name,
                "n_emitters": len(self.sample.emitters),
                "background_rate_per_watt":
                    self.sample.background_rate_per_watt,
            },
        }


def parse_config(document, base_dir: Union[str, Path] = ".") -> LabConfig:
    """Validate an already-parsed YAML document into a LabConfig."""
    doc = _require_mapping(document, "")
    _check_keys(doc, ("format_version", "seed", "instrument", "psf", "noise",
                      "physics", "optical_rates", "sample"), "")
    if "format_version" not in doc:
        raise ConfigError("format_version is required")
    version = doc["format_version"]
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported format_version {version!r}; "
                          f"this build reads version {FORMAT_VERSION}")
    seed = _integer(doc, "seed", 0, "")
    rates = _parse_optical_rates(
        _require_mapping(doc.get("optical_rates"), "optical_rates"))
    physics = _parse_physics(
        _require_mapping(doc.get("physics"), "physics"), rates)
    try:
        instrument = _parse_instrument(
            _require_mapping(doc.get("instrument"), "instrument"), seed)
        psf = _parse_psf(_require_mapping(doc.get("psf"), "psf"))
        noise = _parse_noise(_require_mapping(doc.get("noise"), "noise"))
        sample = _parse_sample(doc.get("sample"), physics, Path(base_dir))
    except ConfigError:
        raise
    except ValueError as ex:
        raise ConfigError(str(ex)) from None
    return LabConfig(format_version=FORMAT_VERSION, seed=seed,
                     instrument=instrument, psf=psf, noise=noise,
                     physics=physics, sample=sample)


def load_config(path: Union[str, Path]) -> LabConfig:
    """Load, strictly validate, and default a YAML lab configuration."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(p)!r} not found")
    return parse_config(_load_yaml(p), base_dir=p.parent)


def default_config(seed: int = 0) -> LabConfig:
    """The all-defaults configuration (equivalent to a minimal file)."""
    return parse_config({"format_version": FORMAT_VERSION, "seed": seed})
