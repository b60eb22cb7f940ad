"""Seeded stochastic loose-packing simulator.

Places sphere (or circle) instances onto a grid-discretized volume under
collision, jitter, rejection and partner-attraction rules.  A single pack()
call is strictly sequential and bit-reproducible: the RNG is a PCG64 stream
seeded from the job seed, and the reported runtime is a deterministic cost
model (candidate evaluations x a fixed per-candidate cost) so that repeated
runs of the same job produce byte-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Optional

import numpy as np

from .recipe import (
    Ingredient,
    IngredientOrder,
    PackingVolume,
    PointSelection,
    Recipe,
    ValidationError,
    VolumeMode,
    validate_recipe,
)

# Relative slack on contact distances; two spheres may touch exactly.
OVERLAP_EPS_REL = 1e-9

# Deterministic cost model: seconds charged per collision-candidate evaluation.
COST_PER_CANDIDATE = 1e-6


class EmptyGrid(ValueError):
    """No grid point fits in the volume."""


class NoFreePoint(RuntimeError):
    """Every grid point is occupied."""


@dataclass(frozen=True)
class PlacedInstance:
    ingredient: str
    position: tuple[float, float, float]
    radius: float


@dataclass(frozen=True)
class PackingOutput:
    instances: tuple[PlacedInstance, ...]
    seed: int
    runtime_seconds: float
    placed_counts: dict[str, int]
    requested_counts: dict[str, int]
    config_ref: tuple[int, dict[str, Any]]


@dataclass
class Grid:
    points: np.ndarray  # (n, 3) candidate drop points
    spacing: float
    free: np.ndarray  # (n,) bool occupancy bitmap

    @property
    def n_free(self) -> int:
        return int(self.free.sum())


def fibonacci_sphere(n: int, radius: float) -> np.ndarray:
    """n area-uniform points on a sphere surface (Fibonacci spiral)."""
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    pts = np.stack([np.cos(phi) * r, np.sin(phi) * r, z], axis=1)
    return pts * radius


def build_grid(volume: PackingVolume, spacing: float) -> Grid:
    """Candidate drop points for the volume at the given spacing.

    Boxes and planes use an axis-aligned lattice at cell centers; sphere
    surfaces use a Fibonacci spiral, which is area-uniform (a latitude-
    longitude grid is not and biases packing toward the poles).
    """
    if spacing <= 0:
        raise EmptyGrid("spacing must be positive")
    if volume.mode is VolumeMode.SPHERE_SURFACE:
        n = math.ceil(4.0 * math.pi * volume.radius**2 / spacing**2)
        if n < 1:
            raise EmptyGrid("no grid point fits on the surface")
        points = fibonacci_sphere(n, volume.radius)
    else:
        axes = []
        ndim = volume.active_axes
        for e in volume.extents[:ndim]:
            k = math.ceil(e / spacing)
            if k < 1:
                raise EmptyGrid("no grid point fits in the volume")
            axes.append((np.arange(k) + 0.5) * spacing)
        if ndim == 2:
            axes.append(np.zeros(1))
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        points = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    return Grid(points=points, spacing=spacing, free=np.ones(len(points), dtype=bool))


def _periodic_lengths(volume: PackingVolume) -> Optional[np.ndarray]:
    """Per-axis wrap lengths, or None when the volume is not periodic."""
    if not volume.periodic:
        return None
    if volume.mode is VolumeMode.BOX3D:
        return np.array(volume.extents)
    if volume.mode is VolumeMode.PLANE2D:
        # z stays 0 for circles; give it a dummy length so wrapping is a no-op
        return np.array([volume.extents[0], volume.extents[1], np.inf])
    return None


def _sq_distances(pos: np.ndarray, others: np.ndarray, box: Optional[np.ndarray]) -> np.ndarray:
    delta = others - pos
    if box is not None:
        finite = np.isfinite(box)
        delta[:, finite] -= box[finite] * np.round(delta[:, finite] / box[finite])
    return np.einsum("ij,ij->i", delta, delta)


def min_image_distance(p: np.ndarray, q: np.ndarray, volume: PackingVolume) -> float:
    """Distance between two points, minimum-image when the volume is periodic."""
    box = _periodic_lengths(volume)
    return float(np.sqrt(_sq_distances(np.asarray(p, float), np.asarray(q, float)[None, :], box)[0]))


def collision_free(
    pos: np.ndarray,
    radius: float,
    placed_positions: np.ndarray,
    placed_radii: np.ndarray,
    volume: PackingVolume,
) -> bool:
    """True iff a sphere at pos does not overlap any placed instance and is contained.

    Periodic volumes use minimum-image distances and waive containment
    (instances wrap around).  Surface mode has no containment beyond lying on
    the surface, which candidates satisfy by construction.
    """
    if volume.mode is not VolumeMode.SPHERE_SURFACE and not volume.periodic:
        ndim = volume.active_axes
        for a in range(ndim):
            if pos[a] < radius - 1e-12 or pos[a] > volume.extents[a] - radius + 1e-12:
                return False
    if len(placed_positions) == 0:
        return True
    box = _periodic_lengths(volume)
    d2 = _sq_distances(pos, placed_positions, box)
    contact = radius + placed_radii
    limit = contact * (1.0 - OVERLAP_EPS_REL)
    return bool(np.all(d2 >= limit * limit))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _uniform_in_ball(rng: np.random.Generator, radius: float, ndim: int) -> np.ndarray:
    """Uniform point in a 2D disk or 3D ball of the given radius (z = 0 pad in 2D)."""
    if ndim == 2:
        r = radius * math.sqrt(rng.uniform())
        theta = rng.uniform(0.0, 2.0 * math.pi)
        return np.array([r * math.cos(theta), r * math.sin(theta), 0.0])
    v = rng.standard_normal(3)
    n = np.linalg.norm(v)
    if n == 0.0:
        return np.zeros(3)
    r = radius * rng.uniform() ** (1.0 / 3.0)
    return v / n * r


def _tangent_disk_offset(rng: np.random.Generator, at: np.ndarray, radius: float) -> np.ndarray:
    """Uniform offset in the disk tangent to the sphere surface at `at`."""
    normal = _unit(at)
    # any vector not parallel to the normal
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = _unit(np.cross(normal, helper))
    v = np.cross(normal, u)
    r = radius * math.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return u * (r * math.cos(theta)) + v * (r * math.sin(theta))


class Packer:
    """Mutable state of one pack() call."""

    def __init__(self, recipe: Recipe, seed: int):
        self.recipe = recipe
        self.volume = recipe.volume
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.grid = build_grid(recipe.volume, recipe.defaults.grid_spacing)
        self.box = _periodic_lengths(recipe.volume)
        self.positions = np.empty((0, 3))
        self.radii = np.empty(0)
        self.names: list[str] = []
        self.by_ingredient: dict[str, list[int]] = {i.name: [] for i in recipe.ingredients}
        self.candidates_evaluated = 0

    # --- drop point selection ---

    def choose_drop_point(self, ing: Ingredient) -> np.ndarray:
        """Partner-biased or grid-based candidate drop point.

        The bias coin is only tossed when some partner already has a placed
        instance and a positive weight, so a zero-weight recipe consumes the
        exact same random stream as the partner-free recipe.
        """
        best = None
        for p in sorted(ing.partners, key=lambda p: -p.weight):
            if p.weight > 0.0 and self.by_ingredient.get(p.partner_name):
                best = p
                break
        if best is not None and self.rng.uniform() < best.weight:
            idxs = self.by_ingredient[best.partner_name]
            anchor = self.positions[idxs[int(self.rng.integers(0, len(idxs)))]]
            if self.volume.mode is VolumeMode.SPHERE_SURFACE:
                off = _tangent_disk_offset(self.rng, anchor, best.binding_distance)
                return _unit(anchor + off) * self.volume.radius
            ndim = self.volume.active_axes
            return anchor + _uniform_in_ball(self.rng, best.binding_distance, ndim)

        free_idx = np.flatnonzero(self.grid.free)
        if len(free_idx) == 0:
            raise NoFreePoint
        if self.recipe.defaults.point_selection is PointSelection.RANDOM:
            pick = free_idx[int(self.rng.integers(0, len(free_idx)))]
        else:
            pick = free_idx[0]
        return self.grid.points[pick].copy()

    # --- placement ---

    def _wrap(self, pos: np.ndarray) -> np.ndarray:
        if self.box is not None:
            finite = np.isfinite(self.box)
            pos = pos.copy()
            pos[finite] = np.mod(pos[finite], self.box[finite])
        return pos

    def attempt_place(self, ing: Ingredient, drop: np.ndarray) -> Optional[PlacedInstance]:
        """Up to nb_jitter candidates around the drop point; None on failure."""
        surface = self.volume.mode is VolumeMode.SPHERE_SURFACE
        ndim = self.volume.active_axes
        for k in range(ing.nb_jitter):
            if k == 0:
                cand = drop
            elif surface:
                off = _tangent_disk_offset(self.rng, drop, ing.jitter_max)
                cand = _unit(drop + off) * self.volume.radius
            else:
                cand = drop + _uniform_in_ball(self.rng, ing.jitter_max, ndim)
            cand = self._wrap(cand)
            self.candidates_evaluated += 1
            if collision_free(cand, ing.radius, self.positions, self.radii, self.volume):
                return self._commit(ing, cand)
        return None

    def _commit(self, ing: Ingredient, pos: np.ndarray) -> PlacedInstance:
        idx = len(self.names)
        self.positions = np.vstack([self.positions, pos[None, :]])
        self.radii = np.append(self.radii, ing.radius)
        self.names.append(ing.name)
        self.by_ingredient[ing.name].append(idx)
        # grid bookkeeping: points inside the new instance are no longer offered
        if self.grid.free.any():
            d2 = _sq_distances(pos, self.grid.points, self.box)
            self.grid.free &= d2 > ing.radius**2
        return PlacedInstance(
            ingredient=ing.name, position=tuple(float(c) for c in pos), radius=ing.radius
        )


def apply_assignment(recipe: Recipe, assignment: dict[str, Any]) -> Recipe:
    """Recipe with parameter overrides applied.

    Paths are `global.<field>` or `ingredient.<name or *>.<field>`; the fields
    `weight` and `binding_distance` apply to all partner entries of the
    addressed ingredient(s).
    """
    r = recipe
    for path, value in assignment.items():
        parts = path.split(".")
        if parts[0] == "global" and len(parts) == 2:
            fieldname = parts[1]
            if fieldname == "grid_spacing":
                r = replace(r, defaults=replace(r.defaults, grid_spacing=float(value)))
            elif fieldname == "point_selection":
                r = replace(
                    r, defaults=replace(r.defaults, point_selection=PointSelection(value))
                )
            elif fieldname == "ingredient_order":
                r = replace(
                    r, defaults=replace(r.defaults, ingredient_order=IngredientOrder(value))
                )
            else:
                raise ValidationError([f"assignment {path}: unknown global field"])
            continue
        if parts[0] != "ingredient" or len(parts) != 3:
            raise ValidationError([f"assignment {path}: malformed parameter path"])
        _, name, fieldname = parts
        hit = False
        new_ings = []
        for ing in r.ingredients:
            if name not in ("*", ing.name):
                new_ings.append(ing)
                continue
            hit = True
            if fieldname == "radius":
                ing = replace(ing, radius=float(value))
            elif fieldname == "count":
                ing = replace(ing, count_requested=int(round(float(value))))
            elif fieldname == "nb_jitter":
                ing = replace(ing, nb_jitter=int(round(float(value))))
            elif fieldname == "jitter_max":
                ing = replace(ing, jitter_max=float(value))
            elif fieldname == "rejection_threshold":
                ing = replace(ing, rejection_threshold=int(round(float(value))))
            elif fieldname == "weight":
                ing = replace(
                    ing,
                    partners=tuple(replace(p, weight=float(value)) for p in ing.partners),
                )
            elif fieldname == "binding_distance":
                ing = replace(
                    ing,
                    partners=tuple(
                        replace(p, binding_distance=float(value)) for p in ing.partners
                    ),
                )
            else:
                raise ValidationError([f"assignment {path}: unknown ingredient field"])
            new_ings.append(ing)
        if not hit:
            raise ValidationError([f"assignment {path}: no ingredient named '{name}'"])
        r = replace(r, ingredients=tuple(new_ings))
    return r


def pack(
    recipe: Recipe,
    assignment: Optional[dict[str, Any]] = None,
    seed: int = 0,
    run_index: int = 0,
) -> PackingOutput:
    """Run one seeded packing job and return its output.

    Geometric frustration never raises; it shows up as usage below 100%.
    """
    assignment = dict(assignment or {})
    effective = apply_assignment(recipe, assignment)
    problems = validate_recipe(effective)
    if problems:
        raise ValidationError(problems)

    packer = Packer(effective, seed)
    remaining = {i.name: i.count_requested for i in effective.ingredients}
    failures = {i.name: 0 for i in effective.ingredients}
    exhausted = {
        i.name: i.count_requested == 0 for i in effective.ingredients
    }
    order = IngredientOrder(effective.defaults.ingredient_order)
    by_radius = sorted(effective.ingredients, key=lambda i: (-i.radius, i.name))

    instances: list[PlacedInstance] = []
    while not all(exhausted.values()):
        if order is IngredientOrder.BY_RADIUS_DESC:
            ing = next(i for i in by_radius if not exhausted[i.name])
        else:
            active = [i for i in effective.ingredients if not exhausted[i.name]]
            weights = np.array([remaining[i.name] for i in active], dtype=float)
            pick = _weighted_pick(packer.rng, weights)
            ing = active[pick]

        try:
            drop = packer.choose_drop_point(ing)
        except NoFreePoint:
            placed = None
        else:
            placed = packer.attempt_place(ing, drop)

        if placed is None:
            failures[ing.name] += 1
            if failures[ing.name] >= ing.rejection_threshold:
                exhausted[ing.name] = True
        else:
            instances.append(placed)
            failures[ing.name] = 0
            remaining[ing.name] -= 1
            if remaining[ing.name] == 0:
                exhausted[ing.name] = True

    placed_counts = {i.name: 0 for i in effective.ingredients}
    for inst in instances:
        placed_counts[inst.ingredient] += 1
    return PackingOutput(
        instances=tuple(instances),
        seed=seed,
        runtime_seconds=packer.candidates_evaluated * COST_PER_CANDIDATE,
        placed_counts=placed_counts,
        requested_counts={i.name: i.count_requested for i in effective.ingredients},
        config_ref=(run_index, assignment),
    )


def _weighted_pick(rng: np.random.Generator, weights: np.ndarray) -> int:
    """Index drawn proportional to weights (remaining-count interleave order)."""
    total = weights.sum()
    u = rng.uniform(0.0, total)
    return int(np.searchsorted(np.cumsum(weights), u, side="right").clip(0, len(weights) - 1))


def check_no_overlap(out: PackingOutput, volume: PackingVolume) -> list[str]:
    """O(n^2) post-scan of the non-overlap invariant; empty list means clean."""
    bad = []
    inst = out.instances
    for a in range(len(inst)):
        for b in range(a + 1, len(inst)):
            d = min_image_distance(
                np.array(inst[a].position), np.array(inst[b].position), volume
            )
            contact = inst[a].radius + inst[b].radius
            if d < contact * (1.0 - OVERLAP_EPS_REL) - 1e-12:
                bad.append(f"instances {a} and {b} overlap: d={d}, contact={contact}")
    return bad
