"""Restricted SMILES geometry, coordinate formatting, and energy backends.

The SMILES grammar covers unbranched chains over C, N, O; heavy atoms sit
on an idealized tetrahedral zig-zag backbone and hydrogens complete the
valences deterministically, so every structure is exactly reproducible.
"""

from __future__ import annotations

import math
import shlex
import subprocess
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

VALENCE = {"C": 4, "N": 3, "O": 2}

# Backbone single-bond lengths in Angstrom. C-C/C-O/C-N are the declared
# contract values; the homo/hetero pairs without carbon use standard
# single-bond lengths so every grammar-valid chain is constructible.
BOND_LENGTHS = {
    ("C", "C"): 1.54,
    ("C", "O"): 1.43,
    ("C", "N"): 1.47,
    ("N", "N"): 1.45,
    ("O", "O"): 1.48,
    ("N", "O"): 1.46,
}

H_BOND_LENGTHS = {"C": 1.09, "N": 1.01, "O": 0.96}

BACKBONE_ANGLE_DEG = 109.47

_TETRA_DIRS = [
    np.array(v, dtype=np.float64) / math.sqrt(3.0)
    for v in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))
]


class SmilesError(ValueError):
    """The SMILES string uses a feature outside the restricted grammar."""


class EnergyError(Exception):
    """Base class for energy backend failures."""


class MissingTableKeyError(EnergyError, KeyError):
    pass


class NotDiatomicError(EnergyError, ValueError):
    pass


class ExternalCommandError(EnergyError, RuntimeError):
    pass


class UnparseableEnergyError(EnergyError, ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    element: str
    x: float
    y: float
    z: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class MolecularStructure:
    atoms: tuple[Atom, ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ValueError("structure must contain at least one atom")
        for atom in self.atoms:
            if not all(math.isfinite(v) for v in (atom.x, atom.y, atom.z)):
                raise ValueError("coordinates must be finite")

    def __len__(self) -> int:
        return len(self.atoms)

    def element_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for atom in self.atoms:
            counts[atom.element] = counts.get(atom.element, 0) + 1
        return counts


def bond_length(a: str, b: str) -> float:
    try:
        return BOND_LENGTHS[(a, b)] if (a, b) in BOND_LENGTHS else BOND_LENGTHS[(b, a)]
    except KeyError:
        raise SmilesError(f"no bond length defined for {a}-{b}") from None


def _parse_chain(smiles: str) -> list[str]:
    if not smiles:
        raise SmilesError("empty SMILES")
    elements: list[str] = []
    for pos, ch in enumerate(smiles):
        if ch in VALENCE:
            elements.append(ch)
        else:
            raise SmilesError(f"unsupported token {ch!r} at position {pos}")
    return elements


def _perpendicular_frame(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = np.array([0.0, 0.0, 1.0])
    e1 = np.cross(u, z)
    if np.linalg.norm(e1) < 1e-8:
        e1 = np.cross(u, np.array([1.0, 0.0, 0.0]))
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    return e1, e2


def _hydrogen_directions(neighbor_dirs: list[np.ndarray], count: int) -> list[np.ndarray]:
    """Unit directions completing an atom's tetrahedral coordination."""
    if count <= 0:
        return []
    theta = math.radians(BACKBONE_ANGLE_DEG)
    if not neighbor_dirs:
        return [d.copy() for d in _TETRA_DIRS[:count]]
    if len(neighbor_dirs) == 1:
        u = neighbor_dirs[0]
        e1, e2 = _perpendicular_frame(u)
        dirs = []
        for j in range(count):
            psi = 2.0 * math.pi * j / max(count, 1)
            d = math.cos(theta) * u + math.sin(theta) * (
                math.cos(psi) * e1 + math.sin(psi) * e2
            )
            dirs.append(d / np.linalg.norm(d))
        return dirs
    u, v = neighbor_dirs[0], neighbor_dirs[1]
    bisector = -(u + v)
    bisector /= np.linalg.norm(bisector)
    w = np.cross(u, v)
    w /= np.linalg.norm(w)
    half = math.radians(BACKBONE_ANGLE_DEG) / 2.0
    dirs = [math.cos(half) * bisector + math.sin(half) * w]
    if count > 1:
        dirs.append(math.cos(half) * bisector - math.sin(half) * w)
    return [d / np.linalg.norm(d) for d in dirs[:count]]


def coords_from_smiles(smiles: str) -> MolecularStructure:
    """Build idealized 3D coordinates for a linear-chain SMILES.

    Heavy atoms go on a zig-zag backbone with tabulated bond lengths and
    109.47-degree angles; hydrogens fill the remaining valences, ordered
    after the heavy atoms and grouped by parent.
    """
    elements = _parse_chain(smiles)
    theta = math.radians(BACKBONE_ANGLE_DEG)
    gamma = theta / 2.0
    dir_a = np.array([math.sin(gamma), math.cos(gamma), 0.0])
    dir_b = np.array([math.sin(gamma), -math.cos(gamma), 0.0])

    positions = [np.zeros(3)]
    for i in range(1, len(elements)):
        step = dir_a if (i - 1) % 2 == 0 else dir_b
        length = bond_length(elements[i - 1], elements[i])
        positions.append(positions[i - 1] + length * step)

    atoms = [
        Atom(el, float(p[0]), float(p[1]), float(p[2]))
        for el, p in zip(elements, positions)
    ]
    hydrogens: list[Atom] = []
    for i, el in enumerate(elements):
        neighbor_dirs = []
        for j in (i - 1, i + 1):
            if 0 <= j < len(elements):
                d = positions[j] - positions[i]
                neighbor_dirs.append(d / np.linalg.norm(d))
        count = VALENCE[el] - len(neighbor_dirs)
        h_len = H_BOND_LENGTHS[el]
        for d in _hydrogen_directions(neighbor_dirs, count):
            p = positions[i] + h_len * d
            hydrogens.append(Atom("H", float(p[0]), float(p[1]), float(p[2])))
    return MolecularStructure(atoms=tuple(atoms) + tuple(hydrogens))


def format_coordinates(structure: MolecularStructure) -> str:
    """Render ``El x y z`` entries to 6 decimals, joined by ';'."""
    if not structure.atoms:
        raise ValueError("structure must be non-empty")
    return ";".join(
        f"{a.element} {a.x + 0.0:.6f} {a.y + 0.0:.6f} {a.z + 0.0:.6f}"
        for a in structure.atoms
    )


def parse_coordinates(text: str) -> MolecularStructure:
    """Parse coordinate text; ';' and newline separators both accepted."""
    entries = [e.strip() for e in text.replace("\n", ";").split(";") if e.strip()]
    if not entries:
        raise ValueError("no coordinate entries found")
    atoms = []
    for entry in entries:
        parts = entry.split()
        if len(parts) != 4:
            raise ValueError(f"bad coordinate entry {entry!r}")
        el = parts[0]
        try:
            x, y, z = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise ValueError(f"bad coordinate entry {entry!r}") from exc
        atoms.append(Atom(el, x, y, z))
    return MolecularStructure(atoms=tuple(atoms))


@dataclass(frozen=True)
class MorseParams:
    d_e: float
    a: float
    r_e: float
    e_0: float


# Declared testing constants for the O-O oracle, not physical claims.
DEFAULT_MORSE = MorseParams(d_e=0.19, a=2.66, r_e=1.21, e_0=-150.0)


def morse_energy(r: float, params: MorseParams = DEFAULT_MORSE) -> float:
    return params.d_e * (1.0 - math.exp(-params.a * (r - params.r_e))) ** 2 + params.e_0


@dataclass(frozen=True)
class EnergyBackend:
    """One of scripted_table, analytic_morse, or external_command.

    Exactly the fields for the chosen kind are set; use the classmethod
    constructors rather than instantiating directly.
    """

    kind: str
    table: Mapping[str, float] | None = None
    morse_params: MorseParams | None = None
    command_template: str | None = None

    def __post_init__(self) -> None:
        expected = {
            "scripted_table": ("table",),
            "analytic_morse": ("morse_params",),
            "external_command": ("command_template",),
        }
        if self.kind not in expected:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        for name in ("table", "morse_params", "command_template"):
            has = getattr(self, name) is not None
            wanted = name in expected[self.kind]
            if has != wanted:
                raise ValueError(
                    f"backend kind {self.kind!r} requires exactly its own fields"
                )

    @classmethod
    def scripted(cls, table: Mapping[str, float]) -> "EnergyBackend":
        return cls(kind="scripted_table", table=dict(table))

    @classmethod
    def morse(cls, params: MorseParams = DEFAULT_MORSE) -> "EnergyBackend":
        return cls(kind="analytic_morse", morse_params=params)

    @classmethod
    def external(cls, command_template: str) -> "EnergyBackend":
        return cls(kind="external_command", command_template=command_template)

    @property
    def label(self) -> str:
        return self.kind


def _diatomic_distance(structure: MolecularStructure) -> float:
    if len(structure) != 2:
        raise NotDiatomicError(
            f"expected a diatomic structure, got {len(structure)} atoms"
        )
    a, b = structure.atoms
    return float(np.linalg.norm(a.position - b.position))


def _smiles_candidates(keys: Sequence[str]) -> list[str]:
    return [k for k in keys if k and all(ch in VALENCE for ch in k)]


def _table_lookup(structure_or_key, table: Mapping[str, float]) -> float:
    if isinstance(structure_or_key, str):
        key = structure_or_key
        if key in table:
            return float(table[key])
        try:
            structure = parse_coordinates(key)
        except ValueError:
            raise MissingTableKeyError(f"no table entry for key {key!r}") from None
    else:
        structure = structure_or_key

    formatted = format_coordinates(structure)
    if formatted in table:
        return float(table[formatted])
    if len(structure) == 2:
        distance_key = f"{_diatomic_distance(structure):.6f}"
        if distance_key in table:
            return float(table[distance_key])
    for smiles in _smiles_candidates(list(table.keys())):
        try:
            if format_coordinates(coords_from_smiles(smiles)) == formatted:
                return float(table[smiles])
        except SmilesError:
            continue
    raise MissingTableKeyError(
        f"no table entry matching coordinates {formatted[:80]!r}..."
    )


def _run_external(structure: MolecularStructure, command_template: str) -> float:
    coord_text = format_coordinates(structure)
    try:
        proc = subprocess.run(
            shlex.split(command_template),
            input=coord_text,
            capture_output=True,
            text=True,
            check=False,
        )
    except OSError as exc:
        raise ExternalCommandError(f"failed to launch command: {exc}") from exc
    if proc.returncode != 0:
        raise ExternalCommandError(
            f"command exited {proc.returncode}: {proc.stderr.strip()[:200]}"
        )
    raw = proc.stdout.strip().replace("−", "-")
    try:
        return float(raw)
    except ValueError:
        raise UnparseableEnergyError(
            f"command output is not a single real: {raw[:200]!r}"
        ) from None


def compute_energy(
    structure_or_key: MolecularStructure | str, backend: EnergyBackend
) -> float:
    """Energy in Hartree from the configured backend.

    scripted_table looks up by label, coordinate text, 6-decimal diatomic
    distance, or a SMILES key whose generated coordinates match;
    analytic_morse evaluates the closed form for diatomics; external_command
    feeds coordinate text on stdin and parses one real from stdout.
    """
    if backend.kind == "scripted_table":
        assert backend.table is not None
        return _table_lookup(structure_or_key, backend.table)
    if isinstance(structure_or_key, str):
        structure = parse_coordinates(structure_or_key)
    else:
        structure = structure_or_key
    if backend.kind == "analytic_morse":
        assert backend.morse_params is not None
        return morse_energy(_diatomic_distance(structure), backend.morse_params)
    assert backend.command_template is not None
    return _run_external(structure, backend.command_template)


def diatomic_structure(pair: tuple[str, str], r: float) -> MolecularStructure:
    """Two atoms along the z axis at separation r Angstrom."""
    a, b = pair
    return MolecularStructure(atoms=(Atom(a, 0.0, 0.0, 0.0), Atom(b, 0.0, 0.0, float(r))))
