"""Typed build plans: a closed instruction set interpreted deterministically.

Free-form script generation is deliberately replaced by this closed set so
structure construction is reproducible and safe to run in-process.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .structures import AtomicStructure, ELEMENT_SYMBOLS, StructureError


class PlanError(ValueError):
    pass


class UnknownPreset(PlanError):
    pass


class SelectorEmpty(PlanError):
    pass


class InstructionConflict(PlanError):
    pass


@dataclass(frozen=True)
class LatticePreset:
    name: str
    lattice_constant: float
    species: tuple[str, ...]
    frac_basis: tuple[tuple[float, float, float], ...]  # z in angstrom offsets for 2D
    two_d: bool
    default_vacuum: float = 15.0
    z_offsets: tuple[float, ...] = ()  # angstrom, per basis atom, 2D only


_S3 = np.sqrt(3.0)

PRESETS: dict[str, LatticePreset] = {
    "graphene": LatticePreset(
        "graphene", 2.46, ("C", "C"),
        ((0.0, 0.0, 0.0), (1 / 3, 2 / 3, 0.0)),
        two_d=True, z_offsets=(0.0, 0.0),
    ),
    # 2H monolayer: Mo plane between two S planes 1.56 angstrom away
    "MoS2_monolayer": LatticePreset(
        "MoS2_monolayer", 3.19, ("Mo", "S", "S"),
        ((0.0, 0.0, 0.0), (1 / 3, 2 / 3, 0.0), (1 / 3, 2 / 3, 0.0)),
        two_d=True, z_offsets=(0.0, 1.56, -1.56),
    ),
    "fcc": LatticePreset(
        "fcc", 3.615, ("Cu",) * 4,
        ((0, 0, 0), (0, 0.5, 0.5), (0.5, 0, 0.5), (0.5, 0.5, 0)),
        two_d=False,
    ),
    "bcc": LatticePreset(
        "bcc", 2.866, ("Fe",) * 2, ((0, 0, 0), (0.5, 0.5, 0.5)), two_d=False
    ),
    "diamond": LatticePreset(
        "diamond", 5.431, ("Si",) * 8,
        (
            (0, 0, 0), (0, 0.5, 0.5), (0.5, 0, 0.5), (0.5, 0.5, 0),
            (0.25, 0.25, 0.25), (0.25, 0.75, 0.75), (0.75, 0.25, 0.75), (0.75, 0.75, 0.25),
        ),
        two_d=False,
    ),
    "rocksalt": LatticePreset(
        "rocksalt", 5.64, ("Na",) * 4 + ("Cl",) * 4,
        (
            (0, 0, 0), (0, 0.5, 0.5), (0.5, 0, 0.5), (0.5, 0.5, 0),
            (0.5, 0, 0), (0.5, 0.5, 0.5), (0, 0, 0.5), (0, 0.5, 0),
        ),
        two_d=False,
    ),
}


@dataclass(frozen=True)
class Selector:
    """Either explicit indices, or species + count + placement rule."""

    indices: Optional[tuple[int, ...]] = None
    species: Optional[str] = None
    count: int = 1
    placement: str = "random"  # random | nearest-line | site
    seed: Optional[int] = None
    site: Optional[int] = None

    def __post_init__(self):
        if self.indices is None and self.species is None:
            raise PlanError("selector needs indices or species")
        if self.species is not None:
            if self.placement not in ("random", "nearest-line", "site"):
                raise PlanError(f"unknown placement {self.placement!r}")
            if self.placement == "random" and self.seed is None:
                raise PlanError("random placement requires an explicit seed")
            if self.placement == "site" and self.site is None:
                raise PlanError("site placement requires a site id")

    def to_value(self) -> dict:
        if self.indices is not None:
            return {"indices": list(self.indices)}
        v = {"species": self.species, "count": self.count, "placement": self.placement}
        if self.seed is not None:
            v["seed"] = self.seed
        if self.site is not None:
            v["site"] = self.site
        return v

    @staticmethod
    def from_value(v: dict) -> "Selector":
        if "indices" in v:
            return Selector(indices=tuple(int(i) for i in v["indices"]))
        return Selector(
            species=v["species"],
            count=int(v.get("count", 1)),
            placement=v.get("placement", "random"),
            seed=v.get("seed"),
            site=v.get("site"),
        )


@dataclass(frozen=True)
class MakeLattice:
    preset: str
    lattice_constant: Optional[float] = None
    vacuum: Optional[float] = None
    species: Optional[tuple[str, ...]] = None  # override for elemental/binary presets

    def to_value(self) -> dict:
        v: dict = {"op": "MakeLattice", "preset": self.preset}
        if self.lattice_constant is not None:
            v["lattice_constant"] = self.lattice_constant
        if self.vacuum is not None:
            v["vacuum"] = self.vacuum
        if self.species is not None:
            v["species"] = list(self.species)
        return v


@dataclass(frozen=True)
class MakeSupercell:
    na: int
    nb: int
    nc: int

    def to_value(self) -> dict:
        return {"op": "MakeSupercell", "na": self.na, "nb": self.nb, "nc": self.nc}


@dataclass(frozen=True)
class RemoveAtoms:
    selector: Selector

    def to_value(self) -> dict:
        return {"op": "RemoveAtoms", "selector": self.selector.to_value()}


@dataclass(frozen=True)
class Substitute:
    selector: Selector
    new_species: str

    def to_value(self) -> dict:
        return {
            "op": "Substitute",
            "selector": self.selector.to_value(),
            "new_species": self.new_species,
        }


@dataclass(frozen=True)
class Displace:
    selector: Selector
    vector: tuple[float, float, float]

    def to_value(self) -> dict:
        return {"op": "Displace", "selector": self.selector.to_value(), "vector": list(self.vector)}


@dataclass(frozen=True)
class SetVacuum:
    axis: int
    thickness: float

    def to_value(self) -> dict:
        return {"op": "SetVacuum", "axis": self.axis, "thickness": self.thickness}


Instruction = Union[MakeLattice, MakeSupercell, RemoveAtoms, Substitute, Displace, SetVacuum]


@dataclass(frozen=True)
class BuildPlan:
    instructions: tuple[Instruction, ...]

    def __post_init__(self):
        if not self.instructions:
            raise PlanError("empty plan")
        if not isinstance(self.instructions[0], MakeLattice):
            raise PlanError("MakeLattice must be the first instruction")
        if sum(isinstance(i, MakeLattice) for i in self.instructions) != 1:
            raise PlanError("MakeLattice must appear exactly once")

    def to_value(self) -> list:
        return [i.to_value() for i in self.instructions]

    @staticmethod
    def from_value(items: Sequence[dict]) -> "BuildPlan":
        out: list[Instruction] = []
        for item in items:
            if not isinstance(item, dict) or "op" not in item:
                raise PlanError(f"malformed instruction {item!r}")
            op = item["op"]
            if op == "MakeLattice":
                if item["preset"] not in PRESETS:
                    raise UnknownPreset(item["preset"])
                sp = item.get("species")
                out.append(
                    MakeLattice(
                        preset=item["preset"],
                        lattice_constant=item.get("lattice_constant"),
                        vacuum=item.get("vacuum"),
                        species=tuple(sp) if sp else None,
                    )
                )
            elif op == "MakeSupercell":
                na, nb, nc = int(item["na"]), int(item["nb"]), int(item["nc"])
                if min(na, nb, nc) < 1:
                    raise PlanError("supercell multipliers must be >= 1")
                out.append(MakeSupercell(na, nb, nc))
            elif op == "RemoveAtoms":
                out.append(RemoveAtoms(Selector.from_value(item["selector"])))
            elif op == "Substitute":
                sp = item["new_species"]
                if sp not in ELEMENT_SYMBOLS:
                    raise PlanError(f"invalid species {sp!r}")
                out.append(Substitute(Selector.from_value(item["selector"]), sp))
            elif op == "Displace":
                vec = tuple(float(x) for x in item["vector"])
                if len(vec) != 3:
                    raise PlanError("displacement vector must have 3 components")
                out.append(Displace(Selector.from_value(item["selector"]), vec))
            elif op == "SetVacuum":
                axis = int(item["axis"])
                if axis not in (0, 1, 2):
                    raise PlanError(f"axis must be 0, 1, or 2, got {axis}")
                out.append(SetVacuum(axis, float(item["thickness"])))
            else:
                raise PlanError(f"unknown instruction {op!r}")
        return BuildPlan(tuple(out))


def _build_lattice(instr: MakeLattice) -> AtomicStructure:
    preset = PRESETS.get(instr.preset)
    if preset is None:
        raise UnknownPreset(instr.preset)
    a = instr.lattice_constant if instr.lattice_constant is not None else preset.lattice_constant
    species = instr.species if instr.species is not None else preset.species
    if len(species) != len(preset.species):
        raise PlanError(
            f"preset {preset.name} takes {len(preset.species)} species, got {len(species)}"
        )
    if preset.two_d:
        vacuum = instr.vacuum if instr.vacuum is not None else preset.default_vacuum
        z_lo = min(preset.z_offsets)
        z_hi = max(preset.z_offsets)
        c = (z_hi - z_lo) + vacuum
        lattice = np.array([[a, 0, 0], [-a / 2, a * _S3 / 2, 0], [0, 0, c]])
        positions = []
        for (fx, fy, _), dz in zip(preset.frac_basis, preset.z_offsets):
            xy = fx * lattice[0] + fy * lattice[1]
            positions.append([xy[0], xy[1], c / 2 + dz - (z_hi + z_lo) / 2])
        pbc = (True, True, False)
    else:
        lattice = np.eye(3) * a
        positions = [np.asarray(f) * a for f in preset.frac_basis]
        pbc = (True, True, True)
    return AtomicStructure(
        species=tuple(species), positions=np.asarray(positions, dtype=float),
        lattice=lattice, pbc=pbc,
    ).canonicalized()


def _supercell(s: AtomicStructure, na: int, nb: int, nc: int) -> AtomicStructure:
    species: list[str] = []
    positions = []
    for i in range(na):
        for j in range(nb):
            for k in range(nc):
                shift = i * s.lattice[0] + j * s.lattice[1] + k * s.lattice[2]
                for sp, p in zip(s.species, s.positions):
                    species.append(sp)
                    positions.append(p + shift)
    lattice = s.lattice * np.array([[na], [nb], [nc]])
    return AtomicStructure(
        species=tuple(species), positions=np.asarray(positions), lattice=lattice, pbc=s.pbc
    ).canonicalized()


def _nearest_line_indices(positions: np.ndarray, candidates: np.ndarray, count: int) -> list[int]:
    """Pick `count` collinear, equally spaced atoms from `candidates` (greedy chain)."""
    pts = positions[candidates]
    if len(pts) < count:
        raise InstructionConflict(f"nearest-line needs {count} atoms, only {len(pts)} available")
    if count == 1:
        return [int(candidates[0])]
    from scipy.spatial.distance import cdist

    dmat = cdist(pts, pts)
    np.fill_diagonal(dmat, np.inf)
    d0 = dmat.min()
    for i in range(len(pts)):
        for j in np.argsort(dmat[i]):
            if dmat[i, j] > 1.3 * d0:
                break
            step = pts[j] - pts[i]
            chain = [i, int(j)]
            expected = pts[j] + step
            while len(chain) < count:
                dist_to_expected = np.linalg.norm(pts - expected, axis=1)
                for k in np.argsort(dist_to_expected):
                    if int(k) not in chain and dist_to_expected[k] < 0.3 * np.linalg.norm(step):
                        chain.append(int(k))
                        expected = pts[k] + step
                        break
                else:
                    break
            if len(chain) == count:
                return [int(candidates[c]) for c in chain]
    raise SelectorEmpty(f"no line of {count} atoms found")


def _resolve_selector(s: AtomicStructure, sel: Selector) -> list[int]:
    n = len(s)
    if sel.indices is not None:
        for i in sel.indices:
            if not 0 <= i < n:
                raise InstructionConflict(f"index {i} out of range for {n} atoms")
        if not sel.indices:
            raise SelectorEmpty("empty index list")
        return list(sel.indices)

    matching = [i for i in range(n) if s.species[i] == sel.species]
    if not matching:
        raise SelectorEmpty(f"no atoms of species {sel.species!r}")
    if sel.count > len(matching):
        raise InstructionConflict(
            f"selector wants {sel.count} {sel.species} atoms, only {len(matching)} present"
        )
    if sel.placement == "random":
        rng = np.random.default_rng(sel.seed)
        picked = rng.choice(len(matching), size=sel.count, replace=False)
        return [matching[i] for i in sorted(picked)]
    if sel.placement == "site":
        if not 0 <= sel.site < len(matching):
            raise InstructionConflict(f"site {sel.site} out of range for {len(matching)} atoms")
        return [matching[sel.site]]
    return _nearest_line_indices(s.positions, np.asarray(matching), sel.count)


def _set_vacuum(s: AtomicStructure, axis: int, thickness: float) -> AtomicStructure:
    frac = s.fractional
    axis_vec = s.lattice[axis]
    length = np.linalg.norm(axis_vec)
    extent = (frac[:, axis].max() - frac[:, axis].min()) * length
    new_len = extent + thickness
    lattice = s.lattice.copy()
    lattice[axis] = axis_vec / length * new_len
    # re-center atoms along the vacuum axis
    positions = s.positions.copy()
    shift = (new_len / 2 - (frac[:, axis].min() + frac[:, axis].max()) / 2 * length)
    positions += (axis_vec / length) * shift
    pbc = tuple(p if i != axis else False for i, p in enumerate(s.pbc))
    return AtomicStructure(s.species, positions, lattice, pbc)  # type: ignore[arg-type]


def execute_plan(plan: BuildPlan) -> AtomicStructure:
    """Deterministic interpretation; identical plans give bitwise-identical structures."""
    structure: AtomicStructure | None = None
    for instr in plan.instructions:
        if isinstance(instr, MakeLattice):
            structure = _build_lattice(instr)
            continue
        assert structure is not None
        if isinstance(instr, MakeSupercell):
            structure = _supercell(structure, instr.na, instr.nb, instr.nc)
        elif isinstance(instr, RemoveAtoms):
            drop = set(_resolve_selector(structure, instr.selector))
            keep = [i for i in range(len(structure)) if i not in drop]
            if not keep:
                raise InstructionConflict("RemoveAtoms would delete every atom")
            structure = AtomicStructure(
                species=tuple(structure.species[i] for i in keep),
                positions=structure.positions[keep],
                lattice=structure.lattice,
                pbc=structure.pbc,
            )
        elif isinstance(instr, Substitute):
            idx = set(_resolve_selector(structure, instr.selector))
            structure = AtomicStructure(
                species=tuple(
                    instr.new_species if i in idx else sp
                    for i, sp in enumerate(structure.species)
                ),
                positions=structure.positions,
                lattice=structure.lattice,
                pbc=structure.pbc,
            )
        elif isinstance(instr, Displace):
            idx = _resolve_selector(structure, instr.selector)
            positions = structure.positions.copy()
            positions[idx] += np.asarray(instr.vector)
            structure = AtomicStructure(
                structure.species, positions, structure.lattice, structure.pbc
            )
        elif isinstance(instr, SetVacuum):
            structure = _set_vacuum(structure, instr.axis, instr.thickness)
        else:  # pragma: no cover - parser rejects unknown ops
            raise PlanError(f"unhandled instruction {instr!r}")
    assert structure is not None
    return structure.canonicalized()
