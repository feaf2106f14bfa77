"""Object classes, instances and the scene that holds them.

A scene is a registry of :class:`ObjectClass` plus the live
:class:`ObjectInstance` set. Active instances carry their own reward model
and trust bookkeeping; neutral instances never act. The global state is the
union of per-object attribute vectors, one per present object.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .errors import DuplicateClass, OutOfRangeAttribute, UnknownClass, UnknownObject

SCENE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class AttributeEntry:
    name: str
    low: float | None = None
    high: float | None = None
    unit: str = ""
    choices: tuple | None = None

    def __post_init__(self):
        if self.choices is None:
            if self.low is None or self.high is None or self.low > self.high:
                raise ValueError(f"attribute {self.name!r} needs low <= high")

    def contains(self, value) -> bool:
        if self.choices is not None:
            return value in self.choices
        return self.low <= value <= self.high


@dataclass(frozen=True)
class AttributeSchema:
    entries: tuple[AttributeEntry, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate attribute names in {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def ranges(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([e.low for e in self.entries], dtype=float)
        hi = np.array([e.high for e in self.entries], dtype=float)
        return lo, hi

    def validate(self, values: dict[str, float]) -> np.ndarray:
        """Order ``values`` by the schema, raising on missing or out-of-range entries."""
        unknown = set(values) - set(self.names)
        if unknown:
            raise OutOfRangeAttribute(f"unknown attributes {sorted(unknown)}")
        out = []
        for e in self.entries:
            if e.name not in values:
                raise OutOfRangeAttribute(f"missing attribute {e.name!r}")
            v = float(values[e.name])
            if not math.isfinite(v) or not e.contains(v):
                raise OutOfRangeAttribute(f"{e.name}={v} outside [{e.low}, {e.high}]")
            out.append(v)
        return np.array(out)


@dataclass(frozen=True)
class ActionSpec:
    """Which attributes an action overwrites, and their bounds.

    ``null_action`` (``None``) is the only action a neutral object ever takes.
    """

    attributes: tuple[str, ...] = ()
    bounds: tuple[tuple[float, float], ...] = ()
    null_action = None

    @property
    def dim(self) -> int:
        return len(self.attributes)

    @property
    def low(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds], dtype=float)

    @property
    def high(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds], dtype=float)

    def clip(self, action) -> np.ndarray:
        return np.clip(np.asarray(action, dtype=float).reshape(self.dim), self.low, self.high)


@dataclass
class ObjectClass:
    class_id: str
    name: str
    schema: AttributeSchema
    action_spec: ActionSpec = field(default_factory=ActionSpec)
    shape: str = "segment"  # segment | arc | ball
    class_q: Any = None
    class_transition: Any = None

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "name": self.name,
            "shape": self.shape,
            "schema": [
                {"name": e.name, "low": e.low, "high": e.high, "unit": e.unit}
                | ({"choices": list(e.choices)} if e.choices is not None else {})
                for e in self.schema.entries
            ],
            "action_spec": {
                "attributes": list(self.action_spec.attributes),
                "bounds": [list(b) for b in self.action_spec.bounds],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectClass":
        entries = tuple(
            AttributeEntry(
                e["name"], e.get("low"), e.get("high"), e.get("unit", ""),
                tuple(e["choices"]) if "choices" in e else None,
            )
            for e in d["schema"]
        )
        spec = d.get("action_spec", {})
        return cls(
            d["class_id"],
            d["name"],
            AttributeSchema(entries),
            ActionSpec(tuple(spec.get("attributes", ())), tuple(tuple(b) for b in spec.get("bounds", ()))),
            d.get("shape", "segment"),
        )


@dataclass
class ObjectInstance:
    object_id: int
    class_id: str
    attributes: np.ndarray
    active: bool
    placement: dict = field(default_factory=dict)
    own_q: Any = None
    class_q_copy: Any = None
    trust: Any = None
    has_acted_this_episode: bool = False

    def attribute(self, name: str, schema: AttributeSchema) -> float:
        return float(self.attributes[schema.index(name)])


@dataclass
class GlobalState:
    per_object_states: list[tuple[int, np.ndarray]]

    def __len__(self) -> int:
        return len(self.per_object_states)


@dataclass(frozen=True)
class Observation:
    """What an active object may see: the neutral ball, its own attributes and
    the ball's offset from its own anchor. Nothing about other active objects."""

    object_id: int
    neutral: np.ndarray
    own: np.ndarray
    offset: np.ndarray


class Scene:
    """Single-writer registry of classes and live objects."""

    def __init__(self):
        self.classes: dict[str, ObjectClass] = {}
        self.objects: dict[int, ObjectInstance] = {}
        self._next_id = 0
        # Installed by an agent: (ObjectClass, object_id) -> fresh reward model.
        self.model_factory: Callable[[ObjectClass, int], Any] | None = None
        self.trust_factory: Callable[[bool], Any] | None = None

    def register_class(self, cls: ObjectClass) -> str:
        if cls.class_id in self.classes:
            raise DuplicateClass(cls.class_id)
        self.classes[cls.class_id] = cls
        return cls.class_id

    def get_class(self, class_id: str) -> ObjectClass:
        try:
            return self.classes[class_id]
        except KeyError:
            raise UnknownClass(class_id) from None

    def spawn_object(
        self,
        class_id: str,
        attribute_values: dict[str, float],
        active: bool,
        placement: dict | None = None,
        object_id: int | None = None,
    ) -> ObjectInstance:
        cls = self.get_class(class_id)
        attrs = cls.schema.validate(attribute_values)
        if object_id is None:
            object_id = self._next_id
        elif object_id in self.objects:
            raise ValueError(f"object id {object_id} already present")
        self._next_id = max(self._next_id, object_id + 1)
        obj = ObjectInstance(object_id, class_id, attrs, bool(active), dict(placement or {}))
        if obj.active:
            self.init_models(obj)
        self.objects[object_id] = obj
        return obj

    def init_models(self, obj: ObjectInstance) -> None:
        """Give an active object its reward model: a copy of the class model when
        the class has one (and start by trusting it), else a fresh model."""
        cls = self.classes[obj.class_id]
        inherited = cls.class_q is not None
        if inherited:
            obj.own_q = cls.class_q.copy()
            obj.class_q_copy = cls.class_q.copy()
        elif self.model_factory is not None:
            obj.own_q = self.model_factory(cls, obj.object_id)
        if self.trust_factory is not None:
            obj.trust = self.trust_factory(inherited)

    def remove_object(self, object_id: int) -> None:
        if object_id not in self.objects:
            raise UnknownObject(object_id)
        del self.objects[object_id]

    def get(self, object_id: int) -> ObjectInstance:
        try:
            return self.objects[object_id]
        except KeyError:
            raise UnknownObject(object_id) from None

    def class_of(self, object_id: int) -> str:
        return self.get(object_id).class_id

    def active_objects(self) -> list[ObjectInstance]:
        return [o for o in self.objects.values() if o.active]

    def neutral_objects(self) -> list[ObjectInstance]:
        return [o for o in self.objects.values() if not o.active]

    @property
    def n_active(self) -> int:
        return sum(1 for o in self.objects.values() if o.active)

    def global_state(self) -> GlobalState:
        return GlobalState([(oid, o.attributes.copy()) for oid, o in self.objects.items()])

    def set_attributes(self, object_id: int, values: dict[str, float]) -> None:
        """Overwrite attributes of one object (its own action, or episode setup)."""
        obj = self.get(object_id)
        schema = self.classes[obj.class_id].schema
        merged = dict(zip(schema.names, obj.attributes.tolist()))
        merged.update(values)
        obj.attributes = schema.validate(merged)

    def observation(self, object_id: int, neutral_state: np.ndarray, neutral_position) -> Observation:
        obj = self.get(object_id)
        anchor = np.asarray(obj.placement.get("anchor", (0.0, 0.0)), dtype=float)
        return Observation(
            object_id,
            np.asarray(neutral_state, dtype=float).copy(),
            obj.attributes.copy(),
            np.asarray(neutral_position, dtype=float) - anchor,
        )

    def reset_episode_flags(self) -> None:
        for o in self.objects.values():
            o.has_acted_this_episode = False

    # -- scene description files -------------------------------------------------

    def to_dict(self) -> dict:
        out_instances = []
        for o in self.objects.values():
            schema = self.classes[o.class_id].schema
            out_instances.append(
                {
                    "object_id": o.object_id,
                    "class_id": o.class_id,
                    "attributes": dict(zip(schema.names, o.attributes.tolist())),
                    "active": o.active,
                    "placement": _jsonable(o.placement),
                }
            )
        return {
            "format_version": SCENE_FORMAT_VERSION,
            "classes": [c.to_dict() for c in self.classes.values()],
            "instances": out_instances,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        if d.get("format_version") != SCENE_FORMAT_VERSION:
            raise ValueError(f"unsupported scene format {d.get('format_version')!r}")
        scene = cls()
        for c in d["classes"]:
            scene.register_class(ObjectClass.from_dict(c))
        for inst in d["instances"]:
            scene.spawn_object(
                inst["class_id"], inst["attributes"], inst["active"], inst.get("placement"), inst["object_id"]
            )
        return scene

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Scene":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def clone(self) -> "Scene":
        return copy.deepcopy(self)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def make_schema(*entries: Sequence) -> AttributeSchema:
    """Build a schema from ``(name, low, high, unit)`` tuples."""
    return AttributeSchema(tuple(AttributeEntry(*e) for e in entries))
