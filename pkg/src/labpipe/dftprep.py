"""VASP input generation: POSCAR/INCAR/KPOINTS emission, parsing, parameter selection."""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .core import ResearchQuestion
from .novelty import ClientUnavailable, LiteratureClient, query_literature
from .structsim.structures import AtomicStructure

K_LENGTH = 30.0  # angstrom; target k-grid linear density
VACUUM_SPAN = 8.0  # angstrom of empty span that marks an axis as a vacuum axis

#: INCAR tags a literature answer is allowed to override
LITERATURE_WHITELIST = ("ENCUT", "SIGMA", "ISMEAR")

_DEFAULTS = json.loads(
    resources.files("labpipe").joinpath("data", "incar_defaults.json").read_text()
)


class DftObjective(enum.Enum):
    DefectRelaxation = "DefectRelaxation"
    ElectronicStructure = "ElectronicStructure"
    SinglePointEnergy = "SinglePointEnergy"


class EmptySpec(ValueError):
    pass


class PoscarParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class IncarTag:
    value: object  # int | float | bool | str
    provenance: str = "default-table"  # default-table | literature-override | user-override
    citation: str = ""


@dataclass(frozen=True)
class IncarSpec:
    tags: tuple[tuple[str, IncarTag], ...]  # insertion-ordered
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        keys = [k for k, _ in self.tags]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate INCAR keys")
        for k in keys:
            if k != k.upper():
                raise ValueError(f"INCAR key {k!r} must be uppercase")

    def get(self, key: str) -> Optional[IncarTag]:
        for k, t in self.tags:
            if k == key:
                return t
        return None

    def with_override(self, key: str, value, provenance: str, citation: str = "") -> "IncarSpec":
        tag = IncarTag(value, provenance, citation)
        if self.get(key) is None:
            return IncarSpec(self.tags + ((key, tag),), self.warnings)
        return IncarSpec(
            tuple((k, tag if k == key else t) for k, t in self.tags), self.warnings
        )


@dataclass(frozen=True)
class KpointsSpec:
    grid: tuple[int, int, int]
    scheme: str = "Gamma"
    shift: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        if any(n < 1 for n in self.grid):
            raise ValueError("k-grid entries must be >= 1")


def vacuum_axes(structure: AtomicStructure) -> tuple[bool, bool, bool]:
    """An axis is a vacuum axis if non-periodic or mostly empty along its length."""
    frac = structure.fractional
    out = []
    for axis in range(3):
        length = float(np.linalg.norm(structure.lattice[axis]))
        span = (frac[:, axis].max() - frac[:, axis].min()) * length
        out.append((not structure.pbc[axis]) or (length - span) >= VACUUM_SPAN)
    return tuple(out)  # type: ignore[return-value]


def _kgrid(structure: AtomicStructure, k_length: float) -> tuple[int, int, int]:
    vac = vacuum_axes(structure)
    grid = []
    for axis in range(3):
        if vac[axis]:
            grid.append(1)
        else:
            length = float(np.linalg.norm(structure.lattice[axis]))
            grid.append(max(1, math.ceil(k_length / length)))
    return tuple(grid)  # type: ignore[return-value]


_ENCUT_RE = re.compile(r"(?:ENCUT|cutoff)\D{0,20}?(\d{3,4})(?:\s*eV)?", re.I)
_SIGMA_RE = re.compile(r"(?:SIGMA|smearing(?:\s+width)?)\D{0,20}?(\d+\.\d+)", re.I)
_ISMEAR_RE = re.compile(r"ISMEAR\D{0,10}?(-?\d)", re.I)


def select_parameters(
    structure: AtomicStructure,
    objective: DftObjective,
    literature_client: Optional[LiteratureClient] = None,
) -> tuple[IncarSpec, KpointsSpec]:
    tags = []
    for table in ("common", objective.value):
        for key, value in _DEFAULTS[table].items():
            tags.append((key, IncarTag(value, "default-table")))
    spec = IncarSpec(tuple(tags))
    kpoints = KpointsSpec(_kgrid(structure, K_LENGTH))

    if literature_client is not None:
        comp = structure.composition()
        formula = "".join(f"{sp}{n}" for sp, n in sorted(comp.items()))
        question = ResearchQuestion(
            claim_id="dft-params",
            text=(
                f"What plane-wave cutoff and smearing settings are recommended "
                f"for a {objective.value} VASP calculation of {formula}?"
            ),
        )
        try:
            report = query_literature(question, literature_client)
        except ClientUnavailable as e:
            spec = IncarSpec(
                spec.tags,
                spec.warnings + (f"literature lookup unavailable, using defaults: {e}",),
            )
            return spec, kpoints
        citation = report.citations[0][0] if report.citations else report.client_identity
        for key, regex, cast in (
            ("ENCUT", _ENCUT_RE, int),
            ("SIGMA", _SIGMA_RE, float),
            ("ISMEAR", _ISMEAR_RE, int),
        ):
            m = regex.search(report.answer_text)
            if m:
                spec = spec.with_override(key, cast(m.group(1)), "literature-override", citation)
    return spec, kpoints


# ---------------------------------------------------------------------------
# POSCAR


def _species_runs(species: tuple[str, ...]) -> list[tuple[str, int]]:
    runs: list[tuple[str, int]] = []
    for sp in species:
        if runs and runs[-1][0] == sp:
            runs[-1] = (sp, runs[-1][1] + 1)
        else:
            runs.append((sp, 1))
    return runs


def emit_poscar(structure: AtomicStructure) -> str:
    if len(structure) == 0:
        raise ValueError("cannot emit POSCAR for an empty structure")
    runs = _species_runs(structure.species)
    comp = structure.composition()
    comment = " ".join(f"{sp}{n}" for sp, n in sorted(comp.items()))
    lines = [comment, "1.0"]
    for row in structure.lattice:
        lines.append("  " + "  ".join(f"{x:.16f}" for x in row))
    lines.append(" ".join(sp for sp, _ in runs))
    lines.append(" ".join(str(n) for _, n in runs))
    lines.append("Direct")
    for f in structure.fractional:
        lines.append("  " + "  ".join(f"{x:.16f}" for x in f))
    return "\n".join(lines) + "\n"


def parse_poscar(
    text: str, pbc: tuple[bool, bool, bool] = (True, True, True)
) -> AtomicStructure:
    lines = text.splitlines()

    def need(i: int) -> str:
        if i >= len(lines):
            raise PoscarParseError("unexpected end of file", i + 1)
        return lines[i]

    try:
        scale = float(need(1).strip())
    except ValueError:
        raise PoscarParseError(f"bad scale factor {need(1)!r}", 2) from None
    lattice = []
    for i in (2, 3, 4):
        parts = need(i).split()
        if len(parts) != 3:
            raise PoscarParseError(f"lattice row needs 3 numbers, got {len(parts)}", i + 1)
        try:
            lattice.append([float(p) for p in parts])
        except ValueError:
            raise PoscarParseError(f"bad lattice number in {need(i)!r}", i + 1) from None
    lattice = np.asarray(lattice) * scale

    species_names = need(5).split()
    try:
        counts = [int(c) for c in need(6).split()]
    except ValueError:
        raise PoscarParseError(f"bad counts line {need(6)!r}", 7) from None
    if len(species_names) != len(counts):
        raise PoscarParseError("species and counts lines differ in length", 7)

    mode = need(7).strip().lower()
    if not mode.startswith(("d", "c", "k")):  # Direct or Cartesian
        raise PoscarParseError(f"unknown coordinate mode {need(7)!r}", 8)
    direct = mode.startswith("d")

    species: list[str] = []
    for sp, n in zip(species_names, counts):
        species.extend([sp] * n)
    coords = []
    for j in range(len(species)):
        i = 8 + j
        parts = need(i).split()
        if len(parts) < 3:
            raise PoscarParseError(f"coordinate line needs 3 numbers", i + 1)
        try:
            coords.append([float(p) for p in parts[:3]])
        except ValueError:
            raise PoscarParseError(f"bad coordinate in {need(i)!r}", i + 1) from None
    coords = np.asarray(coords)
    positions = coords @ lattice if direct else coords * scale
    return AtomicStructure(tuple(species), positions, lattice, pbc)


# ---------------------------------------------------------------------------
# INCAR / KPOINTS


def _render_value(v) -> str:
    if isinstance(v, bool):
        return ".TRUE." if v else ".FALSE."
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def emit_incar(spec: IncarSpec) -> str:
    if not spec.tags:
        raise EmptySpec("INCAR spec has no tags")
    lines = []
    for key, tag in spec.tags:
        line = f"{key} = {_render_value(tag.value)}  ! {tag.provenance}"
        if tag.citation:
            line += f" ({tag.citation})"
        lines.append(line)
    return "\n".join(lines) + "\n"


def emit_kpoints(spec: KpointsSpec) -> str:
    return "Automatic mesh\n0\n{}\n{} {} {}\n".format(spec.scheme, *spec.grid)
