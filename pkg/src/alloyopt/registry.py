"""Element property registry and pairwise mixing-enthalpy table.

Every feature and cost formula pulls its per-element constants from a
:class:`Registry`. Registries are loaded from two CSV files (see
``data/elements.csv`` and ``data/enthalpy.csv`` for the bundled defaults)
and are immutable after load, so they can be shared freely between
threads and restart workers.
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateSymbolError,
    EnthalpyAsymmetryError,
    EnthalpyDiagonalError,
    EnthalpyShapeError,
    MissingColumnError,
    NonPositiveValueError,
    RegistryLoadError,
)

AVOGADRO = 6.02214076e23  # 1/mol

ELEMENT_COLUMNS = (
    "symbol",
    "atomic_number",
    "valence_electrons",
    "atomic_radius_angstrom",
    "electronegativity",
    "molar_mass_kg_per_mol",
    "density_kg_per_m3",
    "atoms_per_unit_cell",
    "cost_usd_per_kg",
)

# Which weighted mean goes in the numerator of the electron-concentration
# feature. "valence" is the conventional definition; "atomic_number" is the
# literal reading of the source formula, whose symbol labels appear swapped.
VEC_CONVENTIONS = ("valence", "atomic_number")


@dataclass(frozen=True)
class ElementRecord:
    """Physical and economic constants of one element."""

    symbol: str
    atomic_number: int
    valence_electrons: int
    atomic_radius: float  # angstrom
    electronegativity: float  # Pauling
    molar_mass: float  # kg/mol
    density: float  # kg/m3
    atoms_per_unit_cell: int
    cost: float  # $/kg


@dataclass(frozen=True)
class MixingEnthalpyTable:
    """Symmetric pairwise mixing enthalpies in kJ/mol, zero diagonal."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise EnthalpyShapeError(f"enthalpy table must be square, got {v.shape}")
        if not np.array_equal(v, v.T):
            i, j = np.argwhere(v != v.T)[0]
            raise EnthalpyAsymmetryError(
                f"enthalpy table asymmetric at ({i}, {j}): {v[i, j]} vs {v[j, i]}"
            )
        diag = np.diagonal(v)
        if np.any(diag != 0.0):
            i = int(np.argwhere(diag != 0.0)[0][0])
            raise EnthalpyDiagonalError(f"nonzero diagonal at ({i}, {i}): {diag[i]}")


@dataclass(frozen=True)
class Registry:
    """Ordered element table plus the mixing-enthalpy matrix.

    Element order defines the component index of every composition vector,
    so it is preserved exactly by save/load. Property columns are cached
    as arrays for vectorized feature evaluation.
    """

    elements: tuple[ElementRecord, ...]
    enthalpy: MixingEnthalpyTable
    avogadro: float = AVOGADRO
    vec_convention: str = "valence"

    # cached columns, derived in __post_init__
    radius: np.ndarray = field(init=False, repr=False)
    chi: np.ndarray = field(init=False, repr=False)
    valence: np.ndarray = field(init=False, repr=False)
    atomic_number: np.ndarray = field(init=False, repr=False)
    molar_mass: np.ndarray = field(init=False, repr=False)
    cost: np.ndarray = field(init=False, repr=False)
    lattice_coeff: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.vec_convention not in VEC_CONVENTIONS:
            raise RegistryLoadError(
                f"vec_convention must be one of {VEC_CONVENTIONS}, got {self.vec_convention!r}"
            )
        n = len(self.elements)
        if n == 0:
            raise RegistryLoadError("registry needs at least one element")
        if self.enthalpy.values.shape != (n, n):
            raise EnthalpyShapeError(
                f"enthalpy table is {self.enthalpy.values.shape}, registry has {n} elements"
            )
        symbols = [e.symbol for e in self.elements]
        if len(set(symbols)) != n:
            dupes = sorted({s for s in symbols if symbols.count(s) > 1})
            raise DuplicateSymbolError(f"duplicate symbols: {dupes}")

        def col(name):
            return np.array([getattr(e, name) for e in self.elements], dtype=float)

        object.__setattr__(self, "radius", col("atomic_radius"))
        object.__setattr__(self, "chi", col("electronegativity"))
        object.__setattr__(self, "valence", col("valence_electrons"))
        object.__setattr__(self, "atomic_number", col("atomic_number"))
        object.__setattr__(self, "molar_mass", col("molar_mass"))
        object.__setattr__(self, "cost", col("cost"))
        # (n_atoms * M / (rho * N_A))^(1/3): per-element cube-root atomic
        # volume in meters, the coefficient of the lattice-constant feature.
        apc = col("atoms_per_unit_cell")
        dens = col("density")
        object.__setattr__(
            self,
            "lattice_coeff",
            np.cbrt(apc * self.molar_mass / (dens * self.avogadro)),
        )
        for arr in (
            self.radius,
            self.chi,
            self.valence,
            self.atomic_number,
            self.molar_mass,
            col("density"),
            apc,
            self.cost,
        ):
            bad = np.where(~(arr > 0.0))[0]
            if bad.size:
                raise NonPositiveValueError(
                    f"non-positive quantity for element {symbols[bad[0]]}"
                )

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(e.symbol for e in self.elements)

    def index_of(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise KeyError(f"unknown element symbol {symbol!r}") from None


def pair_enthalpy(reg: Registry, i: int, j: int) -> float:
    """Mixing enthalpy of the (i, j) pair in kJ/mol, 0-based indices.

    Symmetric by construction; the diagonal is zero.
    """
    n = reg.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"element index out of range: ({i}, {j}), n={n}")
    return float(reg.enthalpy.values[i, j])


def _parse_positive(raw: str, column: str, row: int, integer: bool = False):
    try:
        value = float(raw)
    except ValueError:
        raise RegistryLoadError(f"row {row}: cannot parse {column}={raw!r}") from None
    if not value > 0 or not np.isfinite(value):
        raise NonPositiveValueError(f"row {row}: {column} must be > 0, got {raw}")
    if integer:
        if value != int(value):
            raise RegistryLoadError(f"row {row}: {column} must be an integer, got {raw}")
        return int(value)
    return value


def _read_elements(path: Path) -> list[ElementRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise RegistryLoadError(f"{path}: empty element file")
    header = [c.strip() for c in rows[0]]
    missing = [c for c in ELEMENT_COLUMNS if c not in header]
    if missing:
        raise MissingColumnError(f"{path}: missing columns {missing}")
    idx = {c: header.index(c) for c in ELEMENT_COLUMNS}
    records = []
    for rownum, row in enumerate(rows[1:], start=2):
        if len(row) < len(header):
            raise RegistryLoadError(f"{path}: row {rownum} has too few fields")
        records.append(
            ElementRecord(
                symbol=row[idx["symbol"]].strip(),
                atomic_number=_parse_positive(row[idx["atomic_number"]], "atomic_number", rownum, integer=True),
                valence_electrons=_parse_positive(row[idx["valence_electrons"]], "valence_electrons", rownum, integer=True),
                atomic_radius=_parse_positive(row[idx["atomic_radius_angstrom"]], "atomic_radius_angstrom", rownum),
                electronegativity=_parse_positive(row[idx["electronegativity"]], "electronegativity", rownum),
                molar_mass=_parse_positive(row[idx["molar_mass_kg_per_mol"]], "molar_mass_kg_per_mol", rownum),
                density=_parse_positive(row[idx["density_kg_per_m3"]], "density_kg_per_m3", rownum),
                atoms_per_unit_cell=_parse_positive(row[idx["atoms_per_unit_cell"]], "atoms_per_unit_cell", rownum, integer=True),
                cost=_parse_positive(row[idx["cost_usd_per_kg"]], "cost_usd_per_kg", rownum),
            )
        )
    return records


def _read_enthalpy(path: Path, symbols: tuple[str, ...]) -> MixingEnthalpyTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise RegistryLoadError(f"{path}: empty enthalpy file")
    header = [c.strip() for c in rows[0][1:]]
    n = len(symbols)
    if len(header) != n or len(rows) - 1 != n:
        raise EnthalpyShapeError(
            f"{path}: table is {len(rows) - 1}x{len(header)}, registry has {n} elements"
        )
    if tuple(header) != symbols:
        raise EnthalpyShapeError(f"{path}: column symbols do not match the element file")
    values = np.empty((n, n), dtype=float)
    for i, row in enumerate(rows[1:]):
        if row[0].strip() != symbols[i]:
            raise EnthalpyShapeError(f"{path}: row symbols do not match the element file")
        try:
            values[i] = [float(v) for v in row[1:]]
        except ValueError:
            raise RegistryLoadError(f"{path}: cannot parse row for {symbols[i]}") from None
    return MixingEnthalpyTable(values=values)


def load_registry(
    elements_path, enthalpy_path, vec_convention: str = "valence"
) -> Registry:
    """Load and validate a registry from the two documented CSV files.

    ``elements.csv`` carries one row per element with the columns listed in
    :data:`ELEMENT_COLUMNS`; ``enthalpy.csv`` is a symmetric matrix with
    symbol-labelled first row and column, in kJ/mol.
    """
    elements = _read_elements(Path(elements_path))
    symbols = [e.symbol for e in elements]
    if len(set(symbols)) != len(symbols):
        dupes = sorted({s for s in symbols if symbols.count(s) > 1})
        raise DuplicateSymbolError(f"{elements_path}: duplicate symbols {dupes}")
    enthalpy = _read_enthalpy(Path(enthalpy_path), tuple(symbols))
    return Registry(elements=tuple(elements), enthalpy=enthalpy, vec_convention=vec_convention)


def save_registry(reg: Registry, elements_path, enthalpy_path) -> None:
    """Write a registry back to the two-file CSV format, losslessly.

    Floats are written with ``repr`` so a load/save/load round trip is
    bit-exact and element order is preserved.
    """
    with open(elements_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ELEMENT_COLUMNS)
        for e in reg.elements:
            w.writerow(
                [
                    e.symbol,
                    e.atomic_number,
                    e.valence_electrons,
                    repr(e.atomic_radius),
                    repr(e.electronegativity),
                    repr(e.molar_mass),
                    repr(e.density),
                    e.atoms_per_unit_cell,
                    repr(e.cost),
                ]
            )
    with open(enthalpy_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["symbol", *reg.symbols])
        for i, s in enumerate(reg.symbols):
            w.writerow([s, *[repr(float(v)) for v in reg.enthalpy.values[i]]])


def default_registry(vec_convention: str = "valence") -> Registry:
    """The bundled 39-element registry (see data files for provenance)."""
    data = importlib.resources.files("alloyopt") / "data"
    return load_registry(
        data / "elements.csv", data / "enthalpy.csv", vec_convention=vec_convention
    )


def subset_registry(reg: Registry, symbols) -> Registry:
    """Registry restricted to ``symbols``, preserving their given order."""
    order = [reg.index_of(s) for s in symbols]
    elements = tuple(reg.elements[i] for i in order)
    values = reg.enthalpy.values[np.ix_(order, order)].copy()
    return Registry(
        elements=elements,
        enthalpy=MixingEnthalpyTable(values=values),
        avogadro=reg.avogadro,
        vec_convention=reg.vec_convention,
    )
