# scenario_module/scenario.py
# Parses, validates and normalizes scenario documents. load_scenario is the
# only entry point that turns user units (hours, km, km/h, ...) into SI.

import hashlib
import json
import logging
import math
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config import DIGEST_ALGORITHM, SCHEMA_VERSION
from emissions_module.emissions import EmissionCurve
from scenario_module.units import S_PER_MIN, UNIT_TABLES, kmh_to_ms, ms_to_kmh
from utilities_module.errors import InvariantError, ScenarioSchemaError

logger = logging.getLogger(__name__)

RoadModelName = Literal["ring-road", "open-plane"]
BehaviorPolicyName = Literal["baseline", "dlt-controlled"]

# Document layout: section -> [(quantity, unit kind or None for plain values)].
# A quantity with a unit kind appears in the document with exactly one unit
# suffix from scenario_module.units (e.g. period_T_h or period_T_s).
DOCUMENT_LAYOUT: dict[str, list[tuple[str, Optional[str]]]] = {
    "time": [
        ("period_T", "duration"),
        ("sample_Ts", "duration"),
        ("n_periods", None),
    ],
    "fleet": [
        ("n_vehicles", None),
        ("initial_balance_B0", None),
    ],
    "road": [
        ("road_model", None),
        ("circumference", "distance"),
        ("speed_limit", "speed"),
        ("speed_min", "speed"),
        ("speed_max", "speed"),
        ("redraw_interval", "duration"),
        ("two_way", None),
        ("plane_size", "distance"),
        ("stop_probability", None),
    ],
    "market": [
        ("threshold_T_cal", None),
        ("penalty_alpha", None),
        ("subsidy_beta", None),
        ("subsidy_cap", None),
        ("trade_target_fraction", None),
    ],
    "comms": [
        ("comm_range_r", "distance"),
        ("data_rate_R", "rate"),
        ("contact_horizon", "duration"),
    ],
    "ledger": [
        ("block_size_SB", "bits"),
        ("miner_count_M", None),
        ("lambda0", None),
        ("power_Pc", "power"),
        ("ledger_confirmation", None),
    ],
    "emissions": [
        ("coeff_a", None),
        ("coeff_b", None),
        ("coeff_c", None),
        ("nox_scale", None),
        ("idle_reference_speed", "speed"),
        ("idle_reference_duration", "duration"),
        ("idle_rate_g_per_h", None),
        ("measurement_noise_sd", None),
    ],
    "behavior": [
        ("behavior_policy", None),
        ("moderate_target", "speed"),
    ],
    "analysis": [
        ("base_rel_speed", "speed"),
        ("n_trials", None),
    ],
    "costs": [
        ("gas_price_gwei", None),
        ("usd_per_gwei", None),
    ],
}
TOP_LEVEL_KEYS = {"schema_version", "name", "rng_seed"}


class ScenarioConfig(BaseModel):
    """Normalized experiment description. Every physical quantity is SI:
    seconds, meters, meters/second, bits, bits/second, watts. Emission
    quantities stay in grams-CO2-per-km, the canonical emissions unit."""

    model_config = ConfigDict(frozen=True, extra="forbid", strict=True)

    schema_version: int = SCHEMA_VERSION
    name: str = "scenario"
    rng_seed: int = Field(ge=0, lt=2**64)

    # time
    period_T: float
    sample_Ts: float
    n_periods: int = 1

    # fleet
    n_vehicles: int
    initial_balance_B0: float

    # road
    road_model: RoadModelName
    circumference: float = 10_000.0
    speed_limit: float = kmh_to_ms(130.0)
    speed_min: float = kmh_to_ms(30.0)
    speed_max: float = kmh_to_ms(130.0)
    redraw_interval: float = 60.0
    two_way: bool = True
    plane_size: float = 5_000.0
    stop_probability: float = 0.0

    # market
    threshold_T_cal: float
    penalty_alpha: float
    subsidy_beta: float
    subsidy_cap: float = 5.0
    trade_target_fraction: float = 0.25

    # comms
    comm_range_r: float
    data_rate_R: float
    contact_horizon: float = 600.0

    # ledger
    block_size_SB: float
    miner_count_M: int
    lambda0: float
    power_Pc: float
    ledger_confirmation: bool = True

    # emissions
    coeff_a: float = 3000.0
    coeff_b: float = 80.0
    coeff_c: float = 0.005
    nox_scale: float = 0.004
    idle_reference_speed: float = kmh_to_ms(8.0)
    idle_reference_duration: float = 600.0
    idle_rate_g_per_h: Optional[float] = None
    measurement_noise_sd: float = 0.0

    # behavior
    behavior_policy: BehaviorPolicyName
    moderate_target: float = kmh_to_ms(72.0)

    # analysis
    base_rel_speed: float = kmh_to_ms(50.0)
    n_trials: int = 100_000

    # costs
    gas_price_gwei: float = 20.0
    usd_per_gwei: float = 1.0 / 4_182_471.9949

    @property
    def lambda_c(self) -> float:
        return self.lambda0 * self.power_Pc

    @property
    def ticks_per_period(self) -> int:
        return math.ceil(self.period_T / self.sample_Ts - 1e-9)

    @property
    def trade_target(self) -> float:
        return self.initial_balance_B0 * self.trade_target_fraction

    @property
    def curve(self) -> EmissionCurve:
        return EmissionCurve(
            coeff_a=self.coeff_a,
            coeff_b=self.coeff_b,
            coeff_c=self.coeff_c,
            idle_reference_speed_kmh=ms_to_kmh(self.idle_reference_speed),
            idle_reference_minutes=self.idle_reference_duration / S_PER_MIN,
            idle_rate_g_per_h=self.idle_rate_g_per_h,
        )

    @property
    def requires_trading(self) -> bool:
        return self.behavior_policy == "dlt-controlled"


def _is_multiple(value: float, step: float) -> bool:
    ratio = value / step
    return abs(ratio - round(ratio)) < 1e-9 * max(1.0, ratio)


def check_invariants(cfg: ScenarioConfig) -> ScenarioConfig:
    """Raises InvariantError naming the first violated rule."""
    if cfg.initial_balance_B0 <= 0:
        raise InvariantError("Remark 1", "Remark 1: initial_balance_B0 must be > 0")
    if cfg.period_T <= 0 or cfg.sample_Ts <= 0:
        raise InvariantError("sampling", "period_T and sample_Ts must be > 0")
    if not cfg.sample_Ts < cfg.period_T:
        raise InvariantError("sampling", "sample_Ts must be < period_T")
    if not _is_multiple(cfg.period_T, cfg.sample_Ts):
        raise InvariantError("sampling", "period_T must be a whole number of sample_Ts intervals")
    for field in ("comm_range_r", "data_rate_R", "block_size_SB", "lambda0", "power_Pc", "threshold_T_cal"):
        if getattr(cfg, field) <= 0:
            raise InvariantError(f"{field} > 0", f"{field} must be > 0")
    if cfg.miner_count_M < 1:
        raise InvariantError("miner_count_M >= 1", "miner pool needs at least one miner")
    if cfg.n_vehicles < 1:
        raise InvariantError("n_vehicles >= 1", "the fleet needs at least one vehicle")
    if cfg.requires_trading and cfg.n_vehicles < 2:
        raise InvariantError("trading counterparty", "n_vehicles must be >= 2 when behavior_policy trades")
    if cfg.n_periods < 1:
        raise InvariantError("n_periods >= 1", "at least one period is required")
    for field in ("penalty_alpha", "subsidy_beta", "subsidy_cap", "measurement_noise_sd"):
        if getattr(cfg, field) < 0:
            raise InvariantError(f"{field} >= 0", f"{field} must be >= 0")
    if cfg.redraw_interval <= 0 or cfg.contact_horizon <= 0:
        raise InvariantError("time grid", "redraw_interval and contact_horizon must be > 0")
    if not (0 <= cfg.speed_min <= cfg.speed_max <= cfg.speed_limit):
        raise InvariantError("speed range", "need 0 <= speed_min <= speed_max <= speed_limit")
    if not (0 < cfg.moderate_target <= cfg.speed_limit):
        raise InvariantError("speed range", "moderate_target must lie in (0, speed_limit]")
    if cfg.circumference <= 0 or cfg.plane_size <= 0:
        raise InvariantError("road geometry", "circumference and plane_size must be > 0")
    if not (0 <= cfg.stop_probability <= 1):
        raise InvariantError("stop_probability", "must lie in [0, 1]")
    if cfg.trade_target_fraction <= 0:
        raise InvariantError("trade_target_fraction > 0", "trade target must be positive")
    if cfg.idle_reference_speed <= 0 or cfg.idle_reference_duration <= 0:
        raise InvariantError("idle reference", "idle reference speed and duration must be > 0")
    if cfg.idle_rate_g_per_h is not None and cfg.idle_rate_g_per_h <= 0:
        raise InvariantError("idle reference", "idle_rate_g_per_h must be > 0")
    if cfg.gas_price_gwei <= 0 or cfg.usd_per_gwei <= 0:
        raise InvariantError("currency rates", "gas_price_gwei and usd_per_gwei must be > 0")
    if cfg.n_trials < 1 or cfg.base_rel_speed <= 0:
        raise InvariantError("analysis", "n_trials >= 1 and base_rel_speed > 0 required")
    # Curve invariants (positive coefficients, v* inside the moderate band).
    cfg.curve
    return cfg


def _read_document(source) -> dict:
    if isinstance(source, Mapping):
        return dict(source)
    path = Path(os.fspath(source))
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioSchemaError(f"cannot read scenario file {path}: {e}") from e
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioSchemaError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise ScenarioSchemaError("scenario document must be a JSON object")
    return document


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _flatten(document: dict) -> dict[str, Any]:
    """Resolves unit suffixes and flattens sections into ScenarioConfig fields."""
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioSchemaError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")

    unknown_sections = set(document) - TOP_LEVEL_KEYS - set(DOCUMENT_LAYOUT)
    if unknown_sections:
        raise ScenarioSchemaError(f"unknown sections: {sorted(unknown_sections)}")

    flat: dict[str, Any] = {key: document[key] for key in TOP_LEVEL_KEYS if key in document}

    for section, quantities in DOCUMENT_LAYOUT.items():
        body = document.get(section, {})
        if not isinstance(body, Mapping):
            raise ScenarioSchemaError(f"section '{section}' must be an object")
        known: set[str] = set()

        for name, kind in quantities:
            if kind is None:
                known.add(name)
                if name in body:
                    flat[name] = body[name]
                continue

            table = UNIT_TABLES[kind]
            keys = [f"{name}{suffix}" for suffix in table]
            known.update(keys)
            present = [(key, factor) for key, factor in zip(keys, table.values()) if key in body]
            if len(present) > 1:
                raise ScenarioSchemaError(f"{section}.{name}: give exactly one of {keys}")
            if present:
                key, factor = present[0]
                if not _is_number(body[key]):
                    raise ScenarioSchemaError(f"{section}.{key} must be a number")
                flat[name] = float(body[key]) * factor

        if section == "costs" and "gwei_per_usd" in body:
            known.add("gwei_per_usd")
            if "usd_per_gwei" in body:
                raise ScenarioSchemaError("costs: give usd_per_gwei or gwei_per_usd, not both")
            if not _is_number(body["gwei_per_usd"]) or body["gwei_per_usd"] <= 0:
                raise ScenarioSchemaError("costs.gwei_per_usd must be a positive number")
            flat["usd_per_gwei"] = 1.0 / float(body["gwei_per_usd"])

        unknown = set(body) - known
        if unknown:
            raise ScenarioSchemaError(f"unknown fields in '{section}': {sorted(unknown)}")

    return flat


def load_scenario(source) -> ScenarioConfig:
    """Loads a scenario from a JSON file path or an already-parsed mapping."""
    flat = _flatten(_read_document(source))
    try:
        cfg = ScenarioConfig.model_validate(flat)
    except ValidationError as e:
        raise ScenarioSchemaError(str(e)) from e
    check_invariants(cfg)
    logger.debug("Loaded scenario '%s' (seed %d, %d vehicles)", cfg.name, cfg.rng_seed, cfg.n_vehicles)
    return cfg


def dump_scenario(cfg: ScenarioConfig) -> dict:
    """Serializes to a document using SI unit suffixes, so load_scenario(dump_scenario(c)) == c."""
    document: dict[str, Any] = {
        "schema_version": cfg.schema_version,
        "name": cfg.name,
        "rng_seed": cfg.rng_seed,
    }
    for section, quantities in DOCUMENT_LAYOUT.items():
        body: dict[str, Any] = {}
        for name, kind in quantities:
            value = getattr(cfg, name)
            if value is None:
                continue
            if kind is None:
                body[name] = value
            else:
                si_suffix = next(iter(UNIT_TABLES[kind]))
                body[f"{name}{si_suffix}"] = value
        document[section] = body
    return document


def canonical_json(document) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"))


def scenario_hash(cfg: ScenarioConfig) -> str:
    return hashlib.new(DIGEST_ALGORITHM, canonical_json(dump_scenario(cfg)).encode("utf-8")).hexdigest()


def with_overrides(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """Validated copy of cfg with some fields replaced (SI values)."""
    try:
        updated = ScenarioConfig.model_validate({**cfg.model_dump(), **changes})
    except ValidationError as e:
        raise ScenarioSchemaError(str(e)) from e
    return check_invariants(updated)
