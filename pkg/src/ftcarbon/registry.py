"""Hardware-power and facility databases.

A registry file is a UTF-8 JSON document with the top-level keys
``cpus``, ``gpus``, ``facilities`` and ``profiles`` (all optional)::

    {
      "cpus": {"<name>": {"cores": 12, "power_per_core_w": 7.5}},
      "gpus": {"<name>": {"power_w": 250.0}},
      "facilities": {"<id>": {"carbon_intensity_g_per_kwh": 293.8, "pue": 1.1}},
      "profiles": {"<name>": {"cpu": "<cpu name>", "gpu": "<gpu name>",
                              "gpu_count": 1, "cpu_count_override": null,
                              "memory": {"capacity_gb": 83.5,
                                         "power_per_gb_w": 0.3725}}}
    }

Unknown keys are rejected at every level. Loaded files are merged over
the bundled document; a file entry replaces a built-in of the same name.

The bundled ``paper-rig`` profile is a calibration: 250 W for one A100,
7.5 W per core for a 12-core Xeon E5-2680 v3 and 83.5 GB of RAM at
0.3725 W/GB reproduce the reported per-epoch energies of the T5, BART and
LLaMA fine-tuning runs and their 67.4/24.3/8.3 % GPU/CPU/memory split.
"""

from __future__ import annotations

import difflib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

from .errors import FileUnreadable, InvariantViolation, NotFound, SchemaViolation

DEFAULT_MEMORY_POWER_W_PER_GB = 0.3725

_TOP_LEVEL_KEYS = ("cpus", "gpus", "facilities", "profiles")


@dataclass(frozen=True)
class CpuSpec:
    model_name: str
    cores: int
    power_per_core_w: float

    def __post_init__(self):
        if isinstance(self.cores, bool) or not isinstance(self.cores, int) or self.cores < 1:
            raise InvariantViolation(f"cpu {self.model_name!r}: cores must be an integer >= 1, got {self.cores!r}")
        _check_nonneg(f"cpu {self.model_name!r}: power_per_core_w", self.power_per_core_w)


@dataclass(frozen=True)
class GpuSpec:
    model_name: str
    power_w: float

    def __post_init__(self):
        _check_nonneg(f"gpu {self.model_name!r}: power_w", self.power_w)


@dataclass(frozen=True)
class MemorySpec:
    capacity_gb: float
    power_per_gb_w: float = DEFAULT_MEMORY_POWER_W_PER_GB

    def __post_init__(self):
        _check_nonneg("memory capacity_gb", self.capacity_gb)
        _check_nonneg("memory power_per_gb_w", self.power_per_gb_w)


@dataclass(frozen=True)
class HardwareProfile:
    cpu: CpuSpec
    gpu: GpuSpec
    gpu_count: int
    memory: MemorySpec
    cpu_count_override: int | None = None

    def __post_init__(self):
        if isinstance(self.gpu_count, bool) or not isinstance(self.gpu_count, int) or self.gpu_count < 0:
            raise InvariantViolation(f"gpu_count must be an integer >= 0, got {self.gpu_count!r}")
        ov = self.cpu_count_override
        if ov is not None and (isinstance(ov, bool) or not isinstance(ov, int) or ov < 1):
            raise InvariantViolation(f"cpu_count_override must be an integer >= 1, got {ov!r}")

    @property
    def cpu_cores(self) -> int:
        """Number of CPU cores charged in the power model."""
        if self.cpu_count_override is not None:
            return self.cpu_count_override
        return self.cpu.cores


@dataclass(frozen=True)
class FacilityProfile:
    """A data-center location.

    ``pue`` is bounded below by 1.0, the ideal facility in which every watt
    drawn reaches the computing equipment.
    """

    location_id: str
    carbon_intensity_g_per_kwh: float
    pue: float

    def __post_init__(self):
        _check_nonneg(f"facility {self.location_id!r}: carbon_intensity_g_per_kwh",
                      self.carbon_intensity_g_per_kwh)
        if not _is_real(self.pue) or not math.isfinite(self.pue) or self.pue < 1.0:
            raise InvariantViolation(f"facility {self.location_id!r}: pue must be >= 1.0, got {self.pue!r}")


@dataclass(frozen=True)
class ProfileEntry:
    """A hardware profile as stored: devices are referenced by name."""

    cpu: str
    gpu: str | None
    gpu_count: int
    memory: MemorySpec
    cpu_count_override: int | None = None


@dataclass(frozen=True)
class Registry:
    cpus: Mapping[str, CpuSpec] = field(default_factory=dict)
    gpus: Mapping[str, GpuSpec] = field(default_factory=dict)
    facilities: Mapping[str, FacilityProfile] = field(default_factory=dict)
    profiles: Mapping[str, ProfileEntry] = field(default_factory=dict)

    def __post_init__(self):
        for name in _TOP_LEVEL_KEYS:
            object.__setattr__(self, name, MappingProxyType(dict(getattr(self, name))))
        for pname, entry in self.profiles.items():
            self._resolve(pname, entry)

    def _resolve(self, name: str, entry: ProfileEntry) -> HardwareProfile:
        if entry.cpu not in self.cpus:
            raise InvariantViolation(f"profiles.{name}: unknown cpu {entry.cpu!r}")
        if entry.gpu is None:
            if entry.gpu_count:
                raise InvariantViolation(f"profiles.{name}: gpu_count > 0 requires a gpu")
            gpu = NO_GPU
        elif entry.gpu not in self.gpus:
            raise InvariantViolation(f"profiles.{name}: unknown gpu {entry.gpu!r}")
        else:
            gpu = self.gpus[entry.gpu]
        try:
            return HardwareProfile(cpu=self.cpus[entry.cpu], gpu=gpu, gpu_count=entry.gpu_count,
                                   memory=entry.memory, cpu_count_override=entry.cpu_count_override)
        except InvariantViolation as exc:
            raise InvariantViolation(f"profiles.{name}: {exc}") from None

    def __eq__(self, other):
        if not isinstance(other, Registry):
            return NotImplemented
        return all(dict(getattr(self, k)) == dict(getattr(other, k)) for k in _TOP_LEVEL_KEYS)

    def __hash__(self):
        return hash(tuple(tuple(sorted(getattr(self, k).items())) for k in _TOP_LEVEL_KEYS))


# -- validation helpers -----------------------------------------------------

def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check_nonneg(what: str, x) -> None:
    if not _is_real(x) or not math.isfinite(x) or x < 0:
        raise InvariantViolation(f"{what} must be a finite number >= 0, got {x!r}")


def _require_object(where: str, obj, allowed, required=()) -> dict:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise SchemaViolation(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise SchemaViolation(f"{where}: missing key(s) {', '.join(missing)}")
    return obj


def _table(origin: str, doc: dict, key: str) -> dict:
    obj = doc.get(key, {})
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{origin}: {key}: expected an object, got {type(obj).__name__}")
    return obj


def _number(where: str, value) -> float:
    if not _is_real(value):
        raise SchemaViolation(f"{where}: expected a number, got {value!r}")
    return float(value)


def _integer(where: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaViolation(f"{where}: expected an integer, got {value!r}")
    return value


def _text(where: str, value) -> str:
    if not isinstance(value, str):
        raise SchemaViolation(f"{where}: expected a string, got {value!r}")
    return value


def _build(where: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except InvariantViolation as exc:
        raise InvariantViolation(f"{where}: {exc}") from None


NO_GPU = GpuSpec("none", 0.0)


# -- (de)serialization ------------------------------------------------------

def _parse_document(doc, origin: str) -> dict[str, dict]:
    _require_object(origin, doc, _TOP_LEVEL_KEYS)
    out: dict[str, dict] = {k: {} for k in _TOP_LEVEL_KEYS}

    for name, e in _table(origin, doc, "cpus").items():
        where = f"cpus.{name}"
        _require_object(where, e, ("cores", "power_per_core_w"), ("cores", "power_per_core_w"))
        out["cpus"][name] = _build(where, CpuSpec, model_name=name,
                                   cores=_integer(f"{where}.cores", e["cores"]),
                                   power_per_core_w=_number(f"{where}.power_per_core_w", e["power_per_core_w"]))

    for name, e in _table(origin, doc, "gpus").items():
        where = f"gpus.{name}"
        _require_object(where, e, ("power_w",), ("power_w",))
        out["gpus"][name] = _build(where, GpuSpec, model_name=name,
                                   power_w=_number(f"{where}.power_w", e["power_w"]))

    facilities = _table(origin, doc, "facilities")
    for name, e in facilities.items():
        out["facilities"][name] = facility_from_dict(e, location_id=name, where=f"facilities.{name}")

    for name, e in _table(origin, doc, "profiles").items():
        where = f"profiles.{name}"
        _require_object(where, e, ("cpu", "gpu", "gpu_count", "cpu_count_override", "memory"),
                        ("cpu", "gpu_count", "memory"))
        mem = _require_object(f"{where}.memory", e["memory"], ("capacity_gb", "power_per_gb_w"), ("capacity_gb",))
        memory = _build(where, MemorySpec,
                        capacity_gb=_number(f"{where}.memory.capacity_gb", mem["capacity_gb"]),
                        power_per_gb_w=_number(f"{where}.memory.power_per_gb_w",
                                               mem.get("power_per_gb_w", DEFAULT_MEMORY_POWER_W_PER_GB)))
        gpu = e.get("gpu")
        override = e.get("cpu_count_override")
        out["profiles"][name] = ProfileEntry(
            cpu=_text(f"{where}.cpu", e["cpu"]),
            gpu=None if gpu is None else _text(f"{where}.gpu", gpu),
            gpu_count=_integer(f"{where}.gpu_count", e["gpu_count"]),
            memory=memory,
            cpu_count_override=None if override is None else _integer(f"{where}.cpu_count_override", override),
        )
    return out


def facility_from_dict(e, location_id: str | None = None, where: str = "facility") -> FacilityProfile:
    """Build a facility from its JSON form.

    When ``location_id`` is None the object must carry its own
    ``location_id`` key (the inline form used by location lists).
    """
    keys = ("carbon_intensity_g_per_kwh", "pue")
    if location_id is None:
        _require_object(where, e, ("location_id",) + keys, ("location_id",) + keys)
        location_id = _text(f"{where}.location_id", e["location_id"])
    else:
        _require_object(where, e, keys, keys)
    return _build(where, FacilityProfile, location_id=location_id,
                  carbon_intensity_g_per_kwh=_number(f"{where}.carbon_intensity_g_per_kwh",
                                                     e["carbon_intensity_g_per_kwh"]),
                  pue=_number(f"{where}.pue", e["pue"]))


def registry_to_dict(registry: Registry) -> dict:
    """Serialize to the registry file schema (round-trips through :func:`load_registry`)."""
    profiles = {}
    for name, p in registry.profiles.items():
        d: dict[str, Any] = {"cpu": p.cpu, "gpu": p.gpu, "gpu_count": p.gpu_count}
        if p.cpu_count_override is not None:
            d["cpu_count_override"] = p.cpu_count_override
        d["memory"] = {"capacity_gb": p.memory.capacity_gb, "power_per_gb_w": p.memory.power_per_gb_w}
        profiles[name] = d
    return {
        "cpus": {n: {"cores": c.cores, "power_per_core_w": c.power_per_core_w} for n, c in registry.cpus.items()},
        "gpus": {n: {"power_w": g.power_w} for n, g in registry.gpus.items()},
        "facilities": {n: {"carbon_intensity_g_per_kwh": f.carbon_intensity_g_per_kwh, "pue": f.pue}
                       for n, f in registry.facilities.items()},
        "profiles": profiles,
    }


_BUILTIN: Registry | None = None


def builtin_registry() -> Registry:
    """The bundled registry. Validated on first use."""
    global _BUILTIN
    if _BUILTIN is None:
        text = resources.files("ftcarbon").joinpath("data/builtin_registry.json").read_text("utf-8")
        _BUILTIN = Registry(**_parse_document(json.loads(text), "builtin registry"))
    return _BUILTIN


def merge(base: Registry, overlay: dict[str, dict]) -> Registry:
    parts = {k: {**getattr(base, k), **overlay.get(k, {})} for k in _TOP_LEVEL_KEYS}
    return Registry(**parts)


def load_registry(path: str | Path | None = None) -> Registry:
    """Load a registry file merged over the built-ins.

    ``path=None`` returns the built-ins alone.
    """
    base = builtin_registry()
    if path is None:
        return base
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read registry {str(path)!r}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"registry {str(path)!r} is not valid JSON: {exc}") from None
    return merge(base, _parse_document(doc, f"registry {str(path)!r}"))


def save_registry(registry: Registry, path: str | Path) -> None:
    Path(path).write_text(json.dumps(registry_to_dict(registry), indent=2) + "\n", encoding="utf-8")


# -- lookups ----------------------------------------------------------------

def _suggest(name: str, names) -> list[str]:
    names = sorted(names)
    folded = [n for n in names if n.lower() == name.lower()]
    close = difflib.get_close_matches(name.lower(), [n.lower() for n in names], n=3, cutoff=0.6)
    out = list(folded)
    for low in close:
        for n in names:
            if n.lower() == low and n not in out:
                out.append(n)
    return out


def _lookup(table: Mapping, kind: str, name: str):
    try:
        return table[name]
    except KeyError:
        raise NotFound(kind, name, _suggest(name, table)) from None


def lookup_cpu(registry: Registry, name: str) -> CpuSpec:
    return _lookup(registry.cpus, "cpu", name)


def lookup_gpu(registry: Registry, name: str) -> GpuSpec:
    return _lookup(registry.gpus, "gpu", name)


def lookup_facility(registry: Registry, location_id: str) -> FacilityProfile:
    return _lookup(registry.facilities, "facility", location_id)


def lookup_profile(registry: Registry, name: str) -> HardwareProfile:
    entry = _lookup(registry.profiles, "profile", name)
    return registry._resolve(name, entry)
