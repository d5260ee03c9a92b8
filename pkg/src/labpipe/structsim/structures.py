"""Atomic structures and tabulated element data."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

_DATA = json.loads(
    resources.files("labpipe").joinpath("data", "elements.json").read_text()
)
COVALENT_RADII: dict[str, float] = _DATA["covalent_radii"]
SPECIES_COLORS: dict[str, list[int]] = _DATA["colors"]

# all IUPAC element symbols, for species validation
ELEMENT_SYMBOLS = set(
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La "
    "Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po "
    "At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg "
    "Cn Nh Fl Mc Lv Ts Og".split()
)


def covalent_radius(symbol: str) -> float:
    try:
        return COVALENT_RADII[symbol]
    except KeyError:
        raise KeyError(f"no tabulated covalent radius for {symbol!r}") from None


class StructureError(ValueError):
    pass


@dataclass(frozen=True)
class AtomicStructure:
    species: tuple[str, ...]
    positions: np.ndarray  # (n, 3) cartesian angstrom
    lattice: np.ndarray  # (3, 3), rows are cell vectors
    pbc: tuple[bool, bool, bool]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        lat = np.asarray(self.lattice, dtype=np.float64)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "lattice", lat)
        if pos.shape != (len(self.species), 3):
            raise StructureError(
                f"positions shape {pos.shape} does not match {len(self.species)} species"
            )
        if not np.all(np.isfinite(pos)):
            raise StructureError("non-finite positions")
        if lat.shape != (3, 3) or not np.all(np.isfinite(lat)):
            raise StructureError("lattice must be a finite 3x3 matrix")
        for s in self.species:
            if s not in ELEMENT_SYMBOLS:
                raise StructureError(f"invalid element symbol {s!r}")
        if any(self.pbc) and np.linalg.det(lat) <= 0:
            raise StructureError(
                f"lattice determinant {np.linalg.det(lat):.3g} must be > 0 under pbc"
            )

    def __len__(self) -> int:
        return len(self.species)

    @property
    def fractional(self) -> np.ndarray:
        return self.positions @ np.linalg.inv(self.lattice)

    def composition(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.species:
            out[s] = out.get(s, 0) + 1
        return out

    def canonicalized(self) -> "AtomicStructure":
        """Canonical atom ordering: lexicographic by species then fractional coords."""
        frac = np.round(self.fractional, 8)
        order = sorted(
            range(len(self)),
            key=lambda i: (self.species[i], frac[i, 0], frac[i, 1], frac[i, 2]),
        )
        return AtomicStructure(
            species=tuple(self.species[i] for i in order),
            positions=self.positions[order],
            lattice=self.lattice.copy(),
            pbc=self.pbc,
        )

    def structure_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(",".join(self.species).encode())
        h.update(np.round(self.positions, 10).tobytes())
        h.update(np.round(self.lattice, 10).tobytes())
        h.update(bytes(self.pbc))
        return h.hexdigest()


def min_image_distances(structure: AtomicStructure) -> np.ndarray:
    """Pairwise distance matrix under the minimum-image convention.

    Considers the 27 neighboring cell translations along periodic axes, which
    is exact for cells whose atoms sit within one period of each other.
    """
    n = len(structure)
    pos = structure.positions
    shifts = [np.zeros(3)]
    ranges = [(-1, 0, 1) if p else (0,) for p in structure.pbc]
    shifts = [
        i * structure.lattice[0] + j * structure.lattice[1] + k * structure.lattice[2]
        for i in ranges[0]
        for j in ranges[1]
        for k in ranges[2]
    ]
    delta = pos[:, None, :] - pos[None, :, :]
    best = np.full((n, n), np.inf)
    for s in shifts:
        d = np.linalg.norm(delta + s, axis=2)
        best = np.minimum(best, d)
    return best
