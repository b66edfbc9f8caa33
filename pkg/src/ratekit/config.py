"""Tool configuration: one JSON document wiring plant, rates, levels and budget."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .energy import EnergyBudget
from .plant import PlantModel, load_plant
from .sim import MatchFixedBudget, NoiseScenario, Strategy, scenario_from_shares
from .tables import LevelSpec, RateSet


class ConfigError(ValueError):
    """Configuration problem; the message names the offending field."""


def _require(doc: dict, field: str, where: str):
    if field not in doc:
        raise ConfigError(f"{where}: missing required field '{field}'")
    return doc[field]


@dataclass
class ToolConfig:
    plant: PlantModel
    rates: RateSet
    levels: LevelSpec
    peak_power_mw: float
    hyper_period_s: float
    budget: object            # EnergyBudget | MatchFixedBudget | None
    scenario: NoiseScenario   # may be None when unused
    strategy: Strategy
    rve_lambda: float
    seed: int
    pattern: tuple            # default pattern for precompute/profit tables
    battery_capacity_mah: float
    battery_voltage: float
    plant_sha256: str
    config_sha256: str


def _load_scenario(doc, base: Path, seed: int):
    if doc is None:
        return None
    if isinstance(doc, (str, Path)):
        path = base / doc
        if not path.exists():
            raise ConfigError(f"scenario: file not found: {path}")
        doc = json.loads(path.read_text())
    if "segments" in doc:
        return NoiseScenario(segments=tuple((float(d), float(r)) for d, r in doc["segments"]),
                             seed=int(doc.get("seed", seed)))
    if "shares" in doc:
        for field in ("r_values", "total_s", "piece_s"):
            _require(doc, field, "scenario")
        return scenario_from_shares(doc["shares"], doc["r_values"],
                                    float(doc["total_s"]), float(doc["piece_s"]),
                                    seed=int(doc.get("seed", seed)))
    raise ConfigError("scenario: expected 'segments' or 'shares'")


def load_config(path) -> ToolConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_text()
    doc = json.loads(raw)
    base = path.parent

    plant_doc = _require(doc, "plant", "config")
    if isinstance(plant_doc, str):
        plant_path = base / plant_doc
        if not plant_path.exists():
            raise ConfigError(f"plant: file not found: {plant_path}")
        plant_bytes = plant_path.read_bytes()
        try:
            plant = load_plant(plant_path)
        except ValueError as exc:
            raise ConfigError(f"plant: {exc}") from exc
    else:
        plant_bytes = json.dumps(plant_doc, sort_keys=True).encode()
        try:
            plant = load_plant(plant_doc)
        except ValueError as exc:
            raise ConfigError(f"plant: {exc}") from exc

    try:
        rates = RateSet.from_milliseconds(_require(doc, "rates_ms", "config"))
    except ValueError as exc:
        raise ConfigError(f"rates_ms: {exc}") from exc

    lv = _require(doc, "levels", "config")
    try:
        levels = LevelSpec(thresholds=tuple(_require(lv, "thresholds", "levels")),
                           representative_r=tuple(_require(lv, "representative_r", "levels")))
    except ValueError as exc:
        raise ConfigError(f"levels: {exc}") from exc

    peak = float(doc.get("peak_power_mw", 100.0))
    if peak <= 0:
        raise ConfigError(f"peak_power_mw: must be positive, got {peak}")
    hyper = float(doc.get("hyper_period_s", 100.0))
    if hyper <= 0:
        raise ConfigError(f"hyper_period_s: must be positive, got {hyper}")
    if hyper < rates.periods[-1]:
        raise ConfigError("hyper_period_s: shorter than the slowest sampling period")

    seed = int(doc.get("seed", 0))

    budget = None
    budget_doc = doc.get("budget")
    if budget_doc is not None:
        if "energy_j" in budget_doc:
            try:
                budget = EnergyBudget(e_max=float(budget_doc["energy_j"]), window=hyper)
            except ValueError as exc:
                raise ConfigError(f"budget.energy_j: {exc}") from exc
        elif budget_doc.get("mode") == "match-fixed":
            ref_ms = float(_require(budget_doc, "reference_h_ms", "budget"))
            try:
                rates.index_of(ref_ms / 1000.0)
            except ValueError as exc:
                raise ConfigError(f"budget.reference_h_ms: {exc}") from exc
            budget = MatchFixedBudget(reference_h=ref_ms / 1000.0, window=hyper)
        else:
            raise ConfigError("budget: expected 'energy_j' or mode 'match-fixed'")

    strategy_doc = doc.get("strategy", {"adaptive": "approach1"})
    if "fixed_ms" in strategy_doc:
        h = float(strategy_doc["fixed_ms"]) / 1000.0
        try:
            rates.index_of(h)
        except ValueError as exc:
            raise ConfigError(f"strategy.fixed_ms: {exc}") from exc
        strategy = Strategy.fixed(h)
    elif "adaptive" in strategy_doc:
        algo = strategy_doc["adaptive"]
        if algo not in ("exhaustive", "approach1", "approach2"):
            raise ConfigError(f"strategy.adaptive: unknown algorithm {algo!r}")
        strategy = Strategy.adaptive(algo)
    else:
        raise ConfigError("strategy: expected 'fixed_ms' or 'adaptive'")

    scenario = _load_scenario(doc.get("scenario"), base, seed)

    lam = float(doc.get("rve_lambda", 0.05))
    if not 0.0 < lam <= 1.0:
        raise ConfigError(f"rve_lambda: must lie in (0, 1], got {lam}")

    pattern = tuple(float(f) for f in doc.get("pattern", [1.0 / levels.k] * levels.k))
    if len(pattern) != levels.k:
        raise ConfigError(f"pattern: expected {levels.k} fractions, got {len(pattern)}")
    if abs(sum(pattern) - 1.0) > 1e-9:
        raise ConfigError(f"pattern: fractions must sum to 1, got {sum(pattern)}")

    batt = doc.get("battery", {})
    cap = float(batt.get("capacity_mah", 1000.0))
    volt = float(batt.get("voltage", 3.7))
    if cap <= 0 or volt <= 0:
        raise ConfigError("battery: capacity_mah and voltage must be positive")

    return ToolConfig(
        plant=plant, rates=rates, levels=levels, peak_power_mw=peak,
        hyper_period_s=hyper, budget=budget, scenario=scenario,
        strategy=strategy, rve_lambda=lam, seed=seed, pattern=pattern,
        battery_capacity_mah=cap, battery_voltage=volt,
        plant_sha256=hashlib.sha256(plant_bytes).hexdigest(),
        config_sha256=hashlib.sha256(raw.encode()).hexdigest(),
    )
