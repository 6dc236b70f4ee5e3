"""Finite POMDP tuple, validation, cost shifting and JSON serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .measures import FiniteMeasure, MetricSupport

ROW_TOL = 1e-10
BELIEF_TOL = 1e-12
SCHEMA_VERSION = 1


class ModelError(ValueError):
    """Raised for an invalid model; ``failures`` itemizes every violation."""

    def __init__(self, failures: list[str], pointer: str | None = None):
        self.failures = list(failures)
        self.pointer = pointer
        super().__init__("; ".join(self.failures))


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _coords(values, labels) -> np.ndarray:
    if values is None:
        return _frozen(np.arange(len(labels), dtype=float).reshape(-1, 1))
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return _frozen(arr)


@dataclass(frozen=True, eq=False)
class DiscretePomdp:
    """POMDP with finite state, observation and action alphabets.

    Array layout (all indices are positions in the label lists):

    * ``transition[a, x, x2]`` = P(x2 | x, a)
    * ``observation[a, x2, y]`` = Q(y | a, x2), x2 being the state *after*
      the transition
    * ``initial_observation[x, y]`` = Q0(y | x)
    * ``cost[x, a]``, ``+inf`` marks an action infeasible at ``x``

    Coordinates place states, observations and actions in a metric space
    (``state_metric`` for states, the real line or R^d otherwise); they
    default to the label positions.
    """

    states: tuple
    observations: tuple
    actions: tuple
    transition: np.ndarray
    observation: np.ndarray
    initial_observation: np.ndarray
    prior: np.ndarray
    cost: np.ndarray
    discount: float
    cost_mode: str = "D"
    state_coords: np.ndarray | None = None
    observation_coords: np.ndarray | None = None
    action_coords: np.ndarray | None = None
    state_metric: MetricSupport = field(default_factory=MetricSupport)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("states", tuple(str(s) for s in self.states))
        set_("observations", tuple(str(s) for s in self.observations))
        set_("actions", tuple(str(s) for s in self.actions))
        set_("transition", _frozen(self.transition))
        set_("observation", _frozen(self.observation))
        set_("initial_observation", _frozen(self.initial_observation))
        set_("prior", _frozen(self.prior))
        set_("cost", _frozen(self.cost))
        set_("discount", float(self.discount))
        set_("state_coords", _coords(self.state_coords, self.states))
        set_("observation_coords", _coords(self.observation_coords, self.observations))
        set_("action_coords", _coords(self.action_coords, self.actions))
        set_("metadata", dict(self.metadata))
        if self.state_coords.shape[1] > 1 and self.state_metric.kind == "euclidean-1d":
            set_("state_metric", MetricSupport("euclidean-nd"))
        nx, ny, na = len(self.states), len(self.observations), len(self.actions)
        shapes = {
            "transition": (self.transition.shape, (na, nx, nx)),
            "observation": (self.observation.shape, (na, nx, ny)),
            "initial_observation": (self.initial_observation.shape, (nx, ny)),
            "prior": (self.prior.shape, (nx,)),
            "cost": (self.cost.shape, (nx, na)),
        }
        bad = [f"{k} has shape {got}, expected {want}" for k, (got, want) in shapes.items() if got != want]
        if bad:
            raise ModelError(bad)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action_index(self, action) -> int:
        return _lookup(action, self.actions, "action")

    def observation_index(self, obs) -> int:
        return _lookup(obs, self.observations, "observation")

    def prior_measure(self) -> FiniteMeasure:
        return FiniteMeasure(self.state_coords, self.prior, self.state_metric)

    def with_(self, **changes) -> "DiscretePomdp":
        return replace(self, **changes)


def _lookup(key, labels, what) -> int:
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
        if 0 <= key < len(labels):
            return int(key)
        raise IndexError(f"{what} index {key} out of range")
    try:
        return labels.index(str(key))
    except ValueError:
        raise KeyError(f"unknown {what} {key!r}") from None


def as_belief(z, n_states: int) -> np.ndarray:
    """Validate a belief vector over ``n_states`` states."""
    b = np.asarray(z, dtype=float).reshape(-1)
    if b.shape != (n_states,):
        raise ValueError(f"belief has {b.size} components, model has {n_states} states")
    if np.any(b < 0) or abs(b.sum() - 1.0) > BELIEF_TOL * max(1, n_states):
        raise ValueError("belief must be nonnegative and sum to 1")
    return b


@dataclass
class ValidationReport:
    failures: list[str]
    lower_bound: float  # K >= 0 with c + K >= 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def raise_for_failures(self):
        if self.failures:
            raise ModelError(self.failures)


def _check_rows(name: str, arr: np.ndarray, index_names: tuple[str, ...]) -> list[str]:
    out = []
    if not np.all(np.isfinite(arr)):
        out.append(f"{name} has non-finite entries")
        return out
    sums = arr.sum(axis=-1)
    neg = (arr < 0).any(axis=-1)
    for idx in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_TOL)):
        where = ", ".join(f"{n}={i}" for n, i in zip(index_names, idx))
        out.append(f"{name} row ({where}) sums to {sums[idx]:.12g}")
    for idx in zip(*np.nonzero(neg)):
        where = ", ".join(f"{n}={i}" for n, i in zip(index_names, idx))
        out.append(f"{name} row ({where}) has negative entries")
    return out


def validate(model: DiscretePomdp) -> ValidationReport:
    failures = []
    failures += _check_rows("transition", model.transition, ("a", "x"))
    failures += _check_rows("observation", model.observation, ("a", "x'"))
    failures += _check_rows("initial_observation", model.initial_observation, ("x",))
    if np.any(model.prior < 0) or abs(model.prior.sum() - 1.0) > ROW_TOL:
        failures.append("prior is not a probability vector")
    c = model.cost
    if np.isnan(c).any() or np.isneginf(c).any():
        failures.append("cost has NaN or -inf entries")
    finite = c[np.isfinite(c)]
    cmin = float(finite.min()) if finite.size else 0.0
    for x in np.nonzero(~np.isfinite(c).any(axis=1))[0]:
        failures.append(f"state {model.states[x]!r} has no action with finite cost")
    alpha = model.discount
    if model.cost_mode == "D":
        if not 0.0 <= alpha < 1.0:
            failures.append(f"cost mode D needs discount in [0, 1), got {alpha}")
    elif model.cost_mode == "P":
        if not 0.0 <= alpha <= 1.0:
            failures.append(f"cost mode P needs discount in [0, 1], got {alpha}")
        if cmin < 0:
            failures.append(f"cost mode P needs nonnegative costs, min is {cmin}")
    else:
        failures.append(f"unknown cost mode {model.cost_mode!r}")
    if model.state_coords.shape[0] != model.n_states:
        failures.append("state_coords length differs from states")
    if model.observation_coords.shape[0] != model.n_observations:
        failures.append("observation_coords length differs from observations")
    return ValidationReport(failures, max(0.0, -cmin))


def shift_costs(model: DiscretePomdp) -> DiscretePomdp:
    """Nonnegative-cost (mode P) version of a mode-D model.

    The shift ``K`` and the infinite-horizon value offset ``K / (1 - alpha)``
    are stored in ``metadata['cost_shift']`` and ``metadata['value_offset']``.
    Mode-P models come back unchanged with offset 0.
    """
    if model.cost_mode == "P":
        meta = dict(model.metadata, cost_shift=0.0, value_offset=0.0)
        return model.with_(metadata=meta)
    report = validate(model)
    report.raise_for_failures()
    k = report.lower_bound
    meta = dict(model.metadata, cost_shift=k, value_offset=k / (1.0 - model.discount))
    return model.with_(cost=model.cost + k, cost_mode="P", metadata=meta)


def horizon_offset(model: DiscretePomdp, horizon: int | None = None) -> float:
    """Value offset a cost shift adds over ``horizon`` steps (None: infinite)."""
    k = model.metadata.get("cost_shift", 0.0)
    a = model.discount
    if horizon is None:
        return k / (1.0 - a)
    return k * horizon if a == 1.0 else k * (1.0 - a ** horizon) / (1.0 - a)


# -- JSON ------------------------------------------------------------------

def _encode_float(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _encode(arr: np.ndarray):
    if arr.ndim == 0:
        return _encode_float(float(arr))
    return [_encode(a) for a in arr]


def _decode(obj):
    if isinstance(obj, list):
        return [_decode(o) for o in obj]
    if isinstance(obj, str):
        if obj in ("inf", "+inf"):
            return math.inf
        if obj == "-inf":
            return -math.inf
        raise ValueError(f"unexpected string {obj!r} in numeric array")
    return obj


def model_to_dict(model: DiscretePomdp) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "states": list(model.states),
        "observations": list(model.observations),
        "actions": list(model.actions),
        "state_coords": _encode(model.state_coords),
        "observation_coords": _encode(model.observation_coords),
        "action_coords": _encode(model.action_coords),
        "state_metric": {"kind": model.state_metric.kind, "cuts": list(model.state_metric.cuts)},
        "transition": _encode(model.transition),
        "observation": _encode(model.observation),
        "initial_observation": _encode(model.initial_observation),
        "prior": _encode(model.prior),
        "cost": _encode(model.cost),
        "discount": model.discount,
        "cost_mode": model.cost_mode,
        "metadata": _jsonable(model.metadata),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _encode(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _encode_float(float(obj))
    return obj


def load_schema() -> dict:
    text = resources.files("comdp").joinpath("schema/model-v1.schema.json").read_text()
    return json.loads(text)


def check_schema(doc: dict):
    """Raise ModelError with a JSON pointer for the first schema violation."""
    import jsonschema

    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ModelError([f"{pointer}: {err.message}"], pointer=pointer)


def model_from_dict(doc: dict) -> DiscretePomdp:
    check_schema(doc)
    metric = doc.get("state_metric") or {}
    try:
        return DiscretePomdp(
            states=doc["states"],
            observations=doc["observations"],
            actions=doc["actions"],
            transition=_decode(doc["transition"]),
            observation=_decode(doc["observation"]),
            initial_observation=_decode(doc["initial_observation"]),
            prior=_decode(doc["prior"]),
            cost=_decode(doc["cost"]),
            discount=doc["discount"],
            cost_mode=doc.get("cost_mode", "D"),
            state_coords=_decode(doc["state_coords"]) if "state_coords" in doc else None,
            observation_coords=_decode(doc["observation_coords"]) if "observation_coords" in doc else None,
            action_coords=_decode(doc["action_coords"]) if "action_coords" in doc else None,
            state_metric=MetricSupport(metric.get("kind", "euclidean-1d"), tuple(metric.get("cuts", ()))),
            metadata=doc.get("metadata", {}),
        )
    except ModelError as exc:
        if exc.pointer is None:
            field_name = exc.failures[0].split(" ", 1)[0]
            raise ModelError(exc.failures, pointer=f"/{field_name}") from None
        raise
    except ValueError as exc:
        raise ModelError([str(exc)]) from None


def save_model(model: DiscretePomdp, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> DiscretePomdp:
    return model_from_dict(json.loads(Path(path).read_text()))
