from dataclasses import dataclass
from typing import Iterable, Iterator, Tuple

import numpy as np


@dataclass(frozen=True)
class IndexSet:
    """
    Sous-ensemble d'indices (base 0) d'un univers de canaux (entrées ou sorties).

    Les indices sont stockés triés et sans doublon ; la validation des bornes est
    faite par `make_index_set`.
    """
    indices: Tuple[int, ...]
    universe: int

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, item) -> bool:
        return item in self.indices

    def complement(self) -> "IndexSet":
        members = set(self.indices)
        return IndexSet(tuple(i for i in range(self.universe) if i not in members), self.universe)

    def union(self, other: Iterable[int]) -> "IndexSet":
        return IndexSet(tuple(sorted(set(self.indices) | set(other))), self.universe)

    def one_based(self) -> list:
        return [i + 1 for i in self.indices]

    @classmethod
    def full(cls, universe: int) -> "IndexSet":
        return cls(tuple(range(universe)), universe)

    @classmethod
    def empty(cls, universe: int) -> "IndexSet":
        return cls((), universe)


@dataclass(frozen=True, eq=False)
class Quadruple:
    """
    Quadruplet (A, B, C, D) sans vérification de l'hypothèse de rang sur [B; D].

    Les sous-systèmes obtenus par restriction des entrées/sorties sont de ce type.
    """
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class LtiSystem(Quadruple):
    """Système LTI validé : dimensions cohérentes et [B; D] de rang colonne plein."""


@dataclass(frozen=True, eq=False)
class BatchMatrices:
    """
    Matrices d'observabilité `obs` (tau·|Γy| × n) et d'inversibilité `inv`
    (tau·|Γy| × tau·|Γu|) sur une fenêtre de longueur tau.
    """
    obs: np.ndarray
    inv: np.ndarray
    tau: int
    gamma_u: IndexSet
    gamma_y: IndexSet


@dataclass(frozen=True)
class BoolAssignment:
    """Hypothèse d'attaque : b[i] vrai si l'entrée i est attaquée, c[j] vrai si la sortie j l'est."""
    b: Tuple[bool, ...]
    c: Tuple[bool, ...]

    def attacked_inputs(self) -> IndexSet:
        return IndexSet(tuple(i for i, v in enumerate(self.b) if v), len(self.b))

    def attacked_outputs(self) -> IndexSet:
        return IndexSet(tuple(j for j, v in enumerate(self.c) if v), len(self.c))

    @property
    def cardinality(self) -> int:
        return sum(self.b) + sum(self.c)


@dataclass(frozen=True)
class ConflictClause:
    """Clause « au moins un » : Σ b_j (j ∈ input_lits) + Σ c_i (i ∈ output_lits) ≥ 1."""
    input_lits: IndexSet
    output_lits: IndexSet

    def __len__(self) -> int:
        return len(self.input_lits) + len(self.output_lits)
