"""JSON scenario files: schema validation, parsing and serialization."""

import hashlib
import json
from functools import lru_cache
from importlib import resources

import jsonschema

from .errors import ConfigError
from .scenario import (
    Bernoulli,
    CalibrationSettings,
    Categorical,
    CategoryShift,
    DependenceSpec,
    DesignInputs,
    EndpointSpec,
    EstimatorConfig,
    Exponential,
    HazardRatio,
    MeanDifference,
    MeanRatio,
    Normal,
    Poisson,
    RiskDifference,
    ScenarioSpec,
    SimulationSettings,
    event_prob_to_rate,
    validate_scenario,
)

SCHEMA_VERSION = 1


@lru_cache(maxsize=1)
def schema():
    text = resources.files("winplan").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


def preset_names():
    folder = resources.files("winplan").joinpath("data/presets")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def preset_path(name):
    path = resources.files("winplan").joinpath(f"data/presets/{name}.json")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path


def _pointer(parts):
    return "/" + "/".join(str(p) for p in parts) if parts else "/"


def check_schema(doc):
    validator = jsonschema.Draft202012Validator(schema())
    errors = list(validator.iter_errors(doc))
    if errors:
        # the deepest error usually names the actual offending field
        err = max(errors, key=lambda e: len(e.absolute_path))
        raise ConfigError(err.message, _pointer(err.absolute_path))


def _marginal(d):
    family = d["family"]
    if family == "normal":
        return Normal(float(d["mean"]), float(d["sd"]))
    if family == "bernoulli":
        return Bernoulli(float(d["p"]))
    if family == "exponential":
        if "rate" in d:
            return Exponential(float(d["rate"]))
        return Exponential(event_prob_to_rate(d["event_prob"], d.get("horizon", 1.0)))
    if family == "poisson":
        return Poisson(float(d["mean"]))
    return Categorical(tuple(d["scores"]), tuple(d["probs"]))


def _effect(d):
    kind = d["kind"]
    if kind == "mean_difference":
        return MeanDifference(float(d["value"]), None if d.get("sd") is None else float(d["sd"]))
    if kind == "risk_difference":
        return RiskDifference(float(d["value"]))
    if kind == "hazard_ratio":
        return HazardRatio(float(d["value"]))
    if kind == "mean_ratio":
        return MeanRatio(float(d["value"]))
    return CategoryShift(tuple(d["probs"]))


def _matrix(rows):
    return tuple(tuple(float(v) for v in row) for row in rows)


def spec_from_dict(doc):
    """Parse a scenario document into a ScenarioSpec (schema-checked, not yet validated)."""
    check_schema(doc)
    endpoints = []
    for ep in doc["endpoints"]:
        treatment = _effect(ep["effect"]) if "effect" in ep else _marginal(ep["treatment"])
        endpoints.append(EndpointSpec(
            ep["type"], _marginal(ep["control"]), treatment, float(ep.get("threshold", 0.0)),
            bool(ep.get("higher_is_better", True)), ep.get("name"),
        ))
    dep = doc.get("dependence", {"kind": "independence"})
    matrix = dep.get("R") if dep["kind"] == "latent" else dep.get("K")
    dependence = DependenceSpec(
        dep["kind"],
        None if matrix is None else _matrix(matrix),
        CalibrationSettings(**dep.get("calibration", {})),
    )
    design = doc.get("design", {})
    measures = tuple(design.get("measures", DesignInputs().measures))
    design = DesignInputs(**{**design, "measures": measures})
    return ScenarioSpec(
        tuple(endpoints),
        dependence,
        doc.get("follow_up"),
        design,
        EstimatorConfig(**doc.get("estimator", {})),
        SimulationSettings(**doc.get("simulation", {})),
        doc.get("name"),
    )


def scenario_from_dict(doc, repair_correlation=False):
    return validate_scenario(spec_from_dict(doc), repair_correlation_matrix=repair_correlation)


def load_document(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def load_scenario(path, repair_correlation=False):
    return scenario_from_dict(load_document(path), repair_correlation)


def spec_to_dict(spec):
    """Inverse of :func:`spec_from_dict` with every default written out."""
    endpoints = []
    for ep in spec.endpoints:
        d = {"type": ep.data_type.value, "control": ep.control.to_dict()}
        if ep.name is not None:
            d = {"name": ep.name, **d}
        if hasattr(ep.treatment, "kind"):
            d["effect"] = ep.treatment.to_dict()
        else:
            d["treatment"] = ep.treatment.to_dict()
        d["threshold"] = ep.threshold
        d["higher_is_better"] = ep.higher_is_better
        endpoints.append(d)
    dep = {"kind": spec.dependence.kind}
    if spec.dependence.matrix is not None:
        dep["R" if spec.dependence.kind == "latent" else "K"] = [list(r) for r in spec.dependence.matrix]
    dep["calibration"] = dict(vars(spec.dependence.calibration))
    design = dict(vars(spec.design))
    design["measures"] = list(design["measures"])
    design = {k: v for k, v in design.items() if v is not None}
    doc = {"version": SCHEMA_VERSION}
    if spec.name is not None:
        doc["name"] = spec.name
    doc["endpoints"] = endpoints
    doc["dependence"] = dep
    if spec.follow_up is not None:
        doc["follow_up"] = spec.follow_up
    doc["design"] = design
    doc["estimator"] = dict(vars(spec.estimator))
    doc["simulation"] = dict(vars(spec.simulation))
    return doc


def canonical_json(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(spec):
    """Short stable digest of the fully expanded scenario."""
    return hashlib.sha256(canonical_json(spec_to_dict(spec)).encode()).hexdigest()[:16]
