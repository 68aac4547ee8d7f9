"""Footprint model for a training run.

Energy per epoch, in watt-hours at the facility meter::

    Wh = t * (n_cpu * P_cpu * u_cpu + n_gpu * P_gpu * u_gpu + n_mem * P_mem) * PUE

and the carbon footprint is ``Wh * 0.001 * CI`` grams CO2e. With no GPUs
this collapses to the single-device-class form, where ``n_cpu * P_cpu``
stands for any homogeneous set of compute cores.

Memory power is charged on installed capacity, not on allocated memory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import geo
from .errors import (
    EmptyFacilityList,
    FileUnreadable,
    NegativeRuntime,
    NonPositiveDistance,
    SchemaViolation,
    UsageOutOfRange,
    ValueOutOfRange,
)
from .registry import FacilityProfile, HardwareProfile

WH_TO_KWH = 0.001
FLIGHT_G_PER_PASSENGER_KM = 139.0


def _check_usage(name: str, u) -> None:
    if not isinstance(u, (int, float)) or isinstance(u, bool) or not (0.0 <= u <= 1.0):
        raise UsageOutOfRange(f"{name} must be in [0, 1], got {u!r}")


@dataclass(frozen=True)
class RunSpec:
    """One training run. ``runtime_hours`` is the wall time of a single epoch."""

    label: str
    runtime_hours: float
    u_cpu: float = 1.0
    u_gpu: float = 1.0
    epochs: int = 1
    profile_ref: str = "paper-rig"
    facility_ref: str = "paper-iowa"

    def __post_init__(self):
        _check_usage("u_cpu", self.u_cpu)
        _check_usage("u_gpu", self.u_gpu)
        t = self.runtime_hours
        if not isinstance(t, (int, float)) or isinstance(t, bool) or not math.isfinite(t):
            raise NegativeRuntime(f"runtime must be a finite number, got {t!r}")
        if t < 0:
            raise NegativeRuntime(f"runtime must be >= 0, got {t!r} h")
        if isinstance(self.epochs, bool) or not isinstance(self.epochs, int) or self.epochs < 1:
            raise ValueOutOfRange(f"epochs must be a positive integer, got {self.epochs!r}")

    @classmethod
    def from_minutes(cls, label: str, minutes: float, **kwargs) -> "RunSpec":
        return cls(label, minutes / 60.0, **kwargs)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-resource energy of one epoch, Wh, PUE included.

    ``shares_defined`` is False for a zero-energy run; the shares are then
    reported as 0.0 and carry no meaning.
    """

    cpu_wh: float
    gpu_wh: float
    memory_wh: float
    total_wh: float
    share_cpu: float
    share_gpu: float
    share_memory: float
    shares_defined: bool

    @classmethod
    def from_components(cls, cpu_wh: float, gpu_wh: float, memory_wh: float) -> "EnergyBreakdown":
        total = cpu_wh + gpu_wh + memory_wh
        if total > 0:
            return cls(cpu_wh, gpu_wh, memory_wh, total,
                       cpu_wh / total, gpu_wh / total, memory_wh / total, True)
        return cls(cpu_wh, gpu_wh, memory_wh, total, 0.0, 0.0, 0.0, False)


@dataclass(frozen=True)
class FootprintResult:
    label: str
    energy: EnergyBreakdown
    grams_co2e_per_epoch: float
    epochs: int
    grams_co2e_total: float
    energy_wh_total: float
    facility: FacilityProfile
    u_cpu: float = 1.0
    u_gpu: float = 1.0
    runtime_hours: float = 0.0
    source_label: str | None = None


@dataclass(frozen=True)
class Equivalence:
    """Fraction of a passenger flight's emissions that a footprint amounts to.

    Used both as a route template (``fraction`` left at 0) and as a result.
    """

    route_label: str
    distance_km: float
    per_km_g: float = FLIGHT_G_PER_PASSENGER_KM
    fraction: float = 0.0
    kind: str = "flight"

    @property
    def percent_text(self) -> str:
        return f"{self.fraction * 100:.2f}%"


def flight_route(origin: str, destination: str, per_km_g: float = FLIGHT_G_PER_PASSENGER_KM) -> Equivalence:
    label = f"{origin.title()}-{destination.title()}"
    return Equivalence(label, geo.city_distance_km(origin, destination), per_km_g)


PARIS_LONDON = flight_route("paris", "london")
KOLKATA_DEHRADUN = flight_route("kolkata", "dehradun")


def device_power_w(profile: HardwareProfile, u_cpu: float = 1.0, u_gpu: float = 1.0) -> float:
    """Power draw of the devices alone (no facility overhead), in watts."""
    _check_usage("u_cpu", u_cpu)
    _check_usage("u_gpu", u_gpu)
    cpu_w, gpu_w, mem_w = _component_power(profile, u_cpu, u_gpu)
    return cpu_w + gpu_w + mem_w


def _component_power(profile: HardwareProfile, u_cpu: float, u_gpu: float) -> tuple[float, float, float]:
    return (profile.cpu_cores * profile.cpu.power_per_core_w * u_cpu,
            profile.gpu_count * profile.gpu.power_w * u_gpu,
            profile.memory.capacity_gb * profile.memory.power_per_gb_w)


def estimate(run: RunSpec, profile: HardwareProfile, facility: FacilityProfile) -> FootprintResult:
    cpu_w, gpu_w, mem_w = _component_power(profile, run.u_cpu, run.u_gpu)
    scale = run.runtime_hours * facility.pue
    energy = EnergyBreakdown.from_components(cpu_w * scale, gpu_w * scale, mem_w * scale)
    grams = energy.total_wh * WH_TO_KWH * facility.carbon_intensity_g_per_kwh
    return FootprintResult(
        label=run.label,
        energy=energy,
        grams_co2e_per_epoch=grams,
        epochs=run.epochs,
        grams_co2e_total=grams * run.epochs,
        energy_wh_total=energy.total_wh * run.epochs,
        facility=facility,
        u_cpu=run.u_cpu,
        u_gpu=run.u_gpu,
        runtime_hours=run.runtime_hours,
    )


def scale_to_epochs(result: FootprintResult, epochs: int) -> FootprintResult:
    if isinstance(epochs, bool) or not isinstance(epochs, int) or epochs < 1:
        raise ValueOutOfRange(f"epochs must be a positive integer, got {epochs!r}")
    return replace(result, epochs=epochs,
                   grams_co2e_total=result.grams_co2e_per_epoch * epochs,
                   energy_wh_total=result.energy.total_wh * epochs)


def flight_equivalent(grams: float, route: Equivalence) -> Equivalence:
    if not route.distance_km > 0:
        raise NonPositiveDistance(f"route {route.route_label!r}: distance must be > 0, got {route.distance_km!r}")
    if not route.per_km_g > 0:
        raise NonPositiveDistance(f"route {route.route_label!r}: per-km emission must be > 0, got {route.per_km_g!r}")
    if grams < 0:
        raise ValueOutOfRange(f"grams must be >= 0, got {grams!r}")
    return replace(route, fraction=grams / (route.per_km_g * route.distance_km))


def sweep_locations(run: RunSpec, profile: HardwareProfile,
                    facilities: Sequence[FacilityProfile]) -> list[tuple[str, FootprintResult]]:
    if not facilities:
        raise EmptyFacilityList("location sweep needs at least one facility")
    return [(f.location_id, estimate(run, profile, f)) for f in facilities]


# -- scenario files ---------------------------------------------------------

_SCENARIO_KEYS = {"label", "runtime", "u_cpu", "u_gpu", "epochs", "profile_ref", "facility_ref"}


def run_from_dict(doc, where: str = "scenario") -> RunSpec:
    """Build a RunSpec from its JSON form.

    ``runtime`` is ``{"minutes": x}`` or ``{"hours": x}``, exactly one.
    """
    if not isinstance(doc, dict):
        raise SchemaViolation(f"{where}: expected an object")
    unknown = sorted(set(doc) - _SCENARIO_KEYS)
    if unknown:
        raise SchemaViolation(f"{where}: unknown key(s) {', '.join(unknown)}")
    for key in ("label", "runtime"):
        if key not in doc:
            raise SchemaViolation(f"{where}: missing key {key!r}")
    runtime = doc["runtime"]
    if not isinstance(runtime, dict) or len(runtime) != 1 or not set(runtime) <= {"minutes", "hours"}:
        raise SchemaViolation(f'{where}.runtime: expected exactly one of {{"minutes": x}} or {{"hours": x}}')
    (unit, value), = runtime.items()
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(f"{where}.runtime.{unit}: expected a number, got {value!r}")
    hours = value / 60.0 if unit == "minutes" else float(value)

    kwargs = {}
    for key, typ in (("u_cpu", (int, float)), ("u_gpu", (int, float)), ("epochs", int),
                     ("profile_ref", str), ("facility_ref", str)):
        if key in doc:
            v = doc[key]
            if isinstance(v, bool) or not isinstance(v, typ):
                raise SchemaViolation(f"{where}.{key}: wrong type {type(v).__name__}")
            kwargs[key] = float(v) if key.startswith("u_") else v
    if not isinstance(doc["label"], str):
        raise SchemaViolation(f"{where}.label: expected a string")
    return RunSpec(doc["label"], hours, **kwargs)


def load_scenario(path: str | Path) -> RunSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read scenario {str(path)!r}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"scenario {str(path)!r} is not valid JSON: {exc}") from None
    return run_from_dict(doc, f"scenario {str(path)!r}")


# -- serialization ----------------------------------------------------------

def facility_to_dict(f: FacilityProfile) -> dict:
    return {"location_id": f.location_id, "carbon_intensity_g_per_kwh": f.carbon_intensity_g_per_kwh, "pue": f.pue}


def footprint_to_dict(r: FootprintResult) -> dict:
    e = r.energy
    return {
        "label": r.label,
        "source_label": r.source_label,
        "runtime_hours": r.runtime_hours,
        "u_cpu": r.u_cpu,
        "u_gpu": r.u_gpu,
        "epochs": r.epochs,
        "facility": facility_to_dict(r.facility),
        "energy": {
            "cpu_wh": e.cpu_wh, "gpu_wh": e.gpu_wh, "memory_wh": e.memory_wh, "total_wh": e.total_wh,
            "share_cpu": e.share_cpu, "share_gpu": e.share_gpu, "share_memory": e.share_memory,
            "shares_defined": e.shares_defined,
        },
        "grams_co2e_per_epoch": r.grams_co2e_per_epoch,
        "grams_co2e_total": r.grams_co2e_total,
        "energy_wh_total": r.energy_wh_total,
    }


def footprint_from_dict(d: dict) -> FootprintResult:
    return FootprintResult(
        label=d["label"],
        energy=EnergyBreakdown(**d["energy"]),
        grams_co2e_per_epoch=d["grams_co2e_per_epoch"],
        epochs=d["epochs"],
        grams_co2e_total=d["grams_co2e_total"],
        energy_wh_total=d["energy_wh_total"],
        facility=FacilityProfile(**d["facility"]),
        u_cpu=d["u_cpu"],
        u_gpu=d["u_gpu"],
        runtime_hours=d["runtime_hours"],
        source_label=d.get("source_label"),
    )
