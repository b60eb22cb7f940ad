"""Packing problem description: volume, ingredients and tunable defaults.

A recipe is the input file of the packing engine.  It is parsed from a strict
JSON schema, validated structurally, and immutable afterwards so it can be
shared freely between concurrent packing jobs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum


class VolumeMode(str, Enum):
    BOX3D = "box3d"
    PLANE2D = "plane2d"
    SPHERE_SURFACE = "sphere_surface"


class PointSelection(str, Enum):
    RANDOM = "random"
    ORDERED = "ordered"


class IngredientOrder(str, Enum):
    BY_RADIUS_DESC = "by_radius_desc"
    RANDOM_INTERLEAVE = "random_interleave"


# Defaults filled in when a recipe document omits per-ingredient parameters.
DEFAULT_NB_JITTER = 10
DEFAULT_REJECTION_THRESHOLD = 100
DEFAULT_WEIGHT = 0.0


class RecipeError(Exception):
    """Base class for recipe handling failures."""


class MalformedDocument(RecipeError):
    """The document is not well-formed JSON."""


class SchemaViolation(RecipeError):
    """The document does not match the recipe schema (missing/unknown/wrong-typed keys)."""


class ValidationError(RecipeError):
    """The document parsed but violates recipe invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class PackingVolume:
    mode: VolumeMode
    extents: tuple[float, float, float]
    periodic: bool = False

    @property
    def active_axes(self) -> int:
        return 2 if self.mode in (VolumeMode.PLANE2D, VolumeMode.SPHERE_SURFACE) else 3

    @property
    def radius(self) -> float:
        """Surface radius; only meaningful for sphere_surface mode."""
        return self.extents[0]

    def measure(self) -> float:
        """Volume for box3d, area for plane2d and sphere_surface."""
        x, y, z = self.extents
        if self.mode is VolumeMode.BOX3D:
            return x * y * z
        if self.mode is VolumeMode.PLANE2D:
            return x * y
        import math

        return 4.0 * math.pi * self.radius**2


@dataclass(frozen=True)
class PartnerSpec:
    partner_name: str
    weight: float
    binding_distance: float


@dataclass(frozen=True)
class Ingredient:
    name: str
    radius: float
    count_requested: int
    nb_jitter: int = DEFAULT_NB_JITTER
    jitter_max: float = 0.0
    rejection_threshold: int = DEFAULT_REJECTION_THRESHOLD
    partners: tuple[PartnerSpec, ...] = ()


@dataclass(frozen=True)
class GeneralParams:
    grid_spacing: float
    point_selection: PointSelection = PointSelection.RANDOM
    seed: int = 0
    ingredient_order: IngredientOrder = IngredientOrder.BY_RADIUS_DESC


@dataclass(frozen=True)
class Recipe:
    name: str
    volume: PackingVolume
    ingredients: tuple[Ingredient, ...]
    defaults: GeneralParams

    def ingredient(self, name: str) -> Ingredient:
        for ing in self.ingredients:
            if ing.name == name:
                return ing
        raise KeyError(name)


def _require(obj: dict, key: str, typ, where: str):
    if key not in obj:
        raise SchemaViolation(f"{where}: missing required key '{key}'")
    val = obj[key]
    if typ is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise SchemaViolation(f"{where}: key '{key}' must be a number")
        return float(val)
    if typ is int:
        if not isinstance(val, int) or isinstance(val, bool):
            raise SchemaViolation(f"{where}: key '{key}' must be an integer")
        return val
    if not isinstance(val, typ):
        raise SchemaViolation(f"{where}: key '{key}' has wrong type")
    return val


def _optional(obj: dict, key: str, typ, default, where: str):
    if key not in obj:
        return default
    return _require(obj, key, typ, where)


def _reject_unknown(obj: dict, allowed: set[str], where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaViolation(f"{where}: unknown key(s) {sorted(unknown)}")


def _parse_enum(enum_cls, raw: str, where: str):
    try:
        return enum_cls(raw)
    except ValueError:
        choices = ", ".join(e.value for e in enum_cls)
        raise SchemaViolation(f"{where}: expected one of {{{choices}}}, got '{raw}'")


def parse_recipe(text: str) -> Recipe:
    """Parse a recipe document.

    Unknown keys are rejected so that a typo in a parameter name fails loudly
    instead of silently falling back to a default.  Omitted per-ingredient
    parameters are filled from documented defaults; an omitted jitter_max
    defaults to the grid spacing.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation("top level must be a JSON object")
    recipe = recipe_from_dict(doc)
    violations = validate_recipe(recipe)
    if violations:
        raise ValidationError(violations)
    return recipe


def recipe_from_dict(doc: dict) -> Recipe:
    """Build a Recipe from a parsed JSON object without validating invariants."""
    _reject_unknown(doc, {"name", "volume", "defaults", "ingredients"}, "recipe")
    name = _require(doc, "name", str, "recipe")

    vol = _require(doc, "volume", dict, "recipe")
    _reject_unknown(vol, {"mode", "extents", "periodic"}, "volume")
    mode = _parse_enum(VolumeMode, _require(vol, "mode", str, "volume"), "volume.mode")
    extents_raw = _require(vol, "extents", list, "volume")
    if len(extents_raw) != 3 or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in extents_raw
    ):
        raise SchemaViolation("volume.extents must be a list of 3 numbers")
    extents = tuple(float(v) for v in extents_raw)
    periodic = _optional(vol, "periodic", bool, False, "volume")
    volume = PackingVolume(mode=mode, extents=extents, periodic=periodic)

    dfl = _require(doc, "defaults", dict, "recipe")
    _reject_unknown(
        dfl, {"grid_spacing", "point_selection", "ingredient_order", "seed"}, "defaults"
    )
    grid_spacing = _require(dfl, "grid_spacing", float, "defaults")
    point_selection = _parse_enum(
        PointSelection,
        _optional(dfl, "point_selection", str, PointSelection.RANDOM.value, "defaults"),
        "defaults.point_selection",
    )
    ingredient_order = _parse_enum(
        IngredientOrder,
        _optional(dfl, "ingredient_order", str, IngredientOrder.BY_RADIUS_DESC.value, "defaults"),
        "defaults.ingredient_order",
    )
    seed = _optional(dfl, "seed", int, 0, "defaults")
    defaults = GeneralParams(
        grid_spacing=grid_spacing,
        point_selection=point_selection,
        seed=seed,
        ingredient_order=ingredient_order,
    )

    ings_raw = _require(doc, "ingredients", list, "recipe")
    ingredients = []
    for i, ing_doc in enumerate(ings_raw):
        where = f"ingredients[{i}]"
        if not isinstance(ing_doc, dict):
            raise SchemaViolation(f"{where}: must be an object")
        _reject_unknown(
            ing_doc,
            {
                "name",
                "radius",
                "count",
                "nb_jitter",
                "jitter_max",
                "rejection_threshold",
                "partners",
            },
            where,
        )
        partners = []
        for j, p_doc in enumerate(ing_doc.get("partners", [])):
            p_where = f"{where}.partners[{j}]"
            if not isinstance(p_doc, dict):
                raise SchemaViolation(f"{p_where}: must be an object")
            _reject_unknown(p_doc, {"name", "weight", "binding_distance"}, p_where)
            partners.append(
                PartnerSpec(
                    partner_name=_require(p_doc, "name", str, p_where),
                    weight=_optional(p_doc, "weight", float, DEFAULT_WEIGHT, p_where),
                    binding_distance=_require(p_doc, "binding_distance", float, p_where),
                )
            )
        ingredients.append(
            Ingredient(
                name=_require(ing_doc, "name", str, where),
                radius=_require(ing_doc, "radius", float, where),
                count_requested=_require(ing_doc, "count", int, where),
                nb_jitter=_optional(ing_doc, "nb_jitter", int, DEFAULT_NB_JITTER, where),
                jitter_max=_optional(ing_doc, "jitter_max", float, grid_spacing, where),
                rejection_threshold=_optional(
                    ing_doc, "rejection_threshold", int, DEFAULT_REJECTION_THRESHOLD, where
                ),
                partners=tuple(partners),
            )
        )

    return Recipe(name=name, volume=volume, ingredients=tuple(ingredients), defaults=defaults)


def recipe_to_dict(r: Recipe) -> dict:
    return {
        "name": r.name,
        "volume": {
            "mode": r.volume.mode.value,
            "extents": list(r.volume.extents),
            "periodic": r.volume.periodic,
        },
        "defaults": {
            "grid_spacing": r.defaults.grid_spacing,
            "point_selection": r.defaults.point_selection.value,
            "ingredient_order": r.defaults.ingredient_order.value,
            "seed": r.defaults.seed,
        },
        "ingredients": [
            {
                "name": ing.name,
                "radius": ing.radius,
                "count": ing.count_requested,
                "nb_jitter": ing.nb_jitter,
                "jitter_max": ing.jitter_max,
                "rejection_threshold": ing.rejection_threshold,
                "partners": [
                    {
                        "name": p.partner_name,
                        "weight": p.weight,
                        "binding_distance": p.binding_distance,
                    }
                    for p in ing.partners
                ],
            }
            for ing in r.ingredients
        ],
    }


def serialize_recipe(r: Recipe) -> str:
    """Canonical serialization: sorted keys, shortest round-trip floats."""
    return json.dumps(recipe_to_dict(r), sort_keys=True, indent=2) + "\n"


def validate_recipe(r: Recipe) -> list[str]:
    """Return every invariant violation; an empty list means the recipe is valid."""
    out: list[str] = []
    vol = r.volume
    if vol.mode is VolumeMode.BOX3D:
        for axis, e in zip("xyz", vol.extents):
            if e <= 0:
                out.append(f"volume: {axis} extent must be > 0")
    elif vol.mode is VolumeMode.PLANE2D:
        for axis, e in zip("xy", vol.extents[:2]):
            if e <= 0:
                out.append(f"volume: {axis} extent must be > 0")
        if vol.extents[2] != 0:
            out.append("volume: plane2d requires z extent = 0")
    else:
        if vol.radius <= 0:
            out.append("volume: sphere_surface radius must be > 0")
        if vol.periodic:
            out.append("volume: periodic is invalid for sphere_surface")

    if vol.mode is VolumeMode.SPHERE_SURFACE:
        smallest = vol.radius
    else:
        smallest = min(vol.extents[: vol.active_axes])
    if r.defaults.grid_spacing <= 0:
        out.append("defaults: grid_spacing must be > 0")
    elif smallest > 0 and r.defaults.grid_spacing > smallest:
        out.append("defaults: grid_spacing must not exceed the smallest volume extent")
    if r.defaults.seed < 0 or r.defaults.seed >= 2**64:
        out.append("defaults: seed must fit in an unsigned 64-bit integer")

    if not r.ingredients:
        out.append("recipe: at least one ingredient required")
    names = [ing.name for ing in r.ingredients]
    seen = set()
    for n in names:
        if n in seen:
            out.append(f"ingredient {n}: duplicate name")
        seen.add(n)
    for ing in r.ingredients:
        tag = f"ingredient {ing.name}"
        if ing.radius <= 0:
            out.append(f"{tag}: radius must be > 0")
        if ing.count_requested < 0:
            out.append(f"{tag}: count must be >= 0")
        if ing.nb_jitter < 1:
            out.append(f"{tag}: nb_jitter must be >= 1")
        if ing.jitter_max < 0:
            out.append(f"{tag}: jitter_max must be >= 0")
        if ing.rejection_threshold < 1:
            out.append(f"{tag}: rejection_threshold must be >= 1")
        for p in ing.partners:
            if p.partner_name not in seen:
                out.append(f"{tag}: partner '{p.partner_name}' is not an ingredient of this recipe")
            if not (0.0 <= p.weight <= 1.0):
                out.append(f"{tag}: partner weight must be in [0, 1]")
            if p.binding_distance <= 0:
                out.append(f"{tag}: binding_distance must be > 0")
    return out


def strip_partners(r: Recipe) -> Recipe:
    """The same recipe with every partner relation removed."""
    return replace(r, ingredients=tuple(replace(i, partners=()) for i in r.ingredients))
