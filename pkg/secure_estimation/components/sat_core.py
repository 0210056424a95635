"""
Cœur pseudo-booléen sur les bits d'hypothèse d'attaque (b, c) :
deux contraintes de cardinalité Σb ≤ r, Σc ≤ s et des clauses « au moins un ».

Les modèles sont énumérés par cardinalité totale croissante puis dans l'ordre
lexicographique des indices de variables (x1..xm pour b, x(m+1)..x(m+p) pour c).
Un curseur garantit qu'aucun modèle n'est émis deux fois : les clauses ne font que
retirer des modèles, donc tout ce qui précède le curseur est déjà émis ou exclu.
"""
import sys
from typing import List, Optional, Tuple

from secure_estimation.entity.model_entity import BoolAssignment, ConflictClause, IndexSet
from secure_estimation.exceptions.exception import InvalidInputError
from secure_estimation.logging.logger import logging


def _bits(mask: int) -> List[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


class SolverState:
    """
    État d'une session d'énumération (un seul propriétaire à la fois).

    Attributs:
        m, p, r, s (int): dimensions et bornes de cardinalité.
        clauses (list): clauses de conflit ajoutées, dans l'ordre d'ajout.
        emitted (list): historique des affectations émises.
    """

    def __init__(self, m: int, p: int, r: int, s: int):
        if min(m, p, r, s) < 0 or r > m or s > p:
            raise InvalidInputError(f"bornes invalides: m={m}, p={p}, r={r}, s={s}", sys)
        self.m, self.p, self.r, self.s = m, p, r, s
        self.clauses: List[ConflictClause] = []
        self.emitted: List[BoolAssignment] = []
        self._masks: List[int] = []
        self._mask_set = set()
        self._exhausted = False
        self._level = 0
        self._start: Optional[Tuple[int, ...]] = ()
        self._n_vars = m + p
        self._input_bits = (1 << m) - 1
        self._output_bits = ((1 << (m + p)) - 1) ^ self._input_bits

    # -- clauses -------------------------------------------------------------------
    def add_clause(self, clause: ConflictClause) -> None:
        if clause.input_lits.universe != self.m or clause.output_lits.universe != self.p:
            raise InvalidInputError("clause définie sur un univers incompatible", sys)
        for j in clause.input_lits:
            if not 0 <= j < self.m:
                raise InvalidInputError(f"littéral d'entrée {j} hors bornes", sys)
        for i in clause.output_lits:
            if not 0 <= i < self.p:
                raise InvalidInputError(f"littéral de sortie {i} hors bornes", sys)
        mask = 0
        for j in clause.input_lits:
            mask |= 1 << j
        for i in clause.output_lits:
            mask |= 1 << (self.m + i)
        if mask == 0:
            logging.warning("Clause vide ajoutée: le solveur est désormais épuisé")
            self._exhausted = True
        if mask in self._mask_set:
            return
        self._mask_set.add(mask)
        self._masks.append(mask)
        self.clauses.append(clause)

    # -- énumération -----------------------------------------------------------------
    def _successor(self, combo: Tuple[int, ...]) -> Optional[Tuple[int, ...]]:
        k, N = len(combo), self._n_vars
        values = list(combo)
        for i in range(k - 1, -1, -1):
            if values[i] < N - k + i:
                values[i] += 1
                for j in range(i + 1, k):
                    values[j] = values[j - 1] + 1
                return tuple(values)
        return None

    def _search(self, k: int, start: Tuple[int, ...]) -> Optional[Tuple[int, ...]]:
        """Première combinaison de taille k, ≥ start (lexicographique), satisfaisant tout."""
        N = self._n_vars
        full = (1 << N) - 1
        chosen: List[int] = []

        def available(lo: int, n_in: int, n_out: int) -> int:
            avail = full & ~((1 << lo) - 1)
            if n_in >= self.r:
                avail &= ~self._input_bits
            if n_out >= self.s:
                avail &= ~self._output_bits
            return avail

        def dfs(depth: int, lo: int, n_in: int, n_out: int,
                pending: List[int], tight: bool) -> bool:
            remaining = k - depth
            if remaining == 0:
                return not pending
            avail = available(lo, n_in, n_out)
            if bin(avail).count("1") < remaining:
                return False
            for cl in pending:
                if cl & avail == 0:
                    return False
            candidates = avail
            if remaining == 1 and pending:
                for cl in pending:
                    candidates &= cl
            floor = start[depth] if tight else lo
            for j in _bits(candidates):
                if j < floor or j > N - remaining:
                    continue
                bit = 1 << j
                is_input = j < self.m
                chosen.append(j)
                still_tight = tight and j == start[depth]
                child_pending = [cl for cl in pending if not cl & bit]
                if dfs(depth + 1, j + 1, n_in + is_input, n_out + (not is_input),
                       child_pending, still_tight):
                    return True
                chosen.pop()
            return False

        if dfs(0, 0, 0, 0, list(self._masks), k > 0):
            return tuple(chosen)
        return None

    def next_assignment(self) -> Optional[BoolAssignment]:
        if self._exhausted:
            return None
        while self._level <= self.r + self.s:
            start = self._start
            found = self._search(self._level, start) if start is not None else None
            if found is not None:
                self._start = self._successor(found)
                assignment = self._to_assignment(found)
                self.emitted.append(assignment)
                return assignment
            self._level += 1
            self._start = tuple(range(self._level)) if self._level <= self._n_vars else None
        self._exhausted = True
        return None

    def _to_assignment(self, combo: Tuple[int, ...]) -> BoolAssignment:
        b = [False] * self.m
        c = [False] * self.p
        for v in combo:
            if v < self.m:
                b[v] = True
            else:
                c[v - self.m] = True
        return BoolAssignment(tuple(b), tuple(c))

    def satisfies(self, assignment: BoolAssignment) -> bool:
        """Évaluation directe de Φ_B et de toutes les clauses courantes."""
        if sum(assignment.b) > self.r or sum(assignment.c) > self.s:
            return False
        for clause in self.clauses:
            if not (any(assignment.b[j] for j in clause.input_lits)
                    or any(assignment.c[i] for i in clause.output_lits)):
                return False
        return True

    # -- export ---------------------------------------------------------------------
    def export_opb(self) -> str:
        def term_list(variables) -> str:
            return " ".join(f"+1 x{v + 1}" for v in variables)

        # un côté vide (m = 0 ou p = 0) n'a pas de contrainte de cardinalité
        sides = [(range(self.m), self.r), (range(self.m, self._n_vars), self.s)]
        constraints = [f"{term_list(variables)} <= {bound} ;" for variables, bound in sides if len(variables)]
        for mask in self._masks:
            # clause vide : contrainte insatisfiable
            constraints.append(f"{term_list(_bits(mask)) or '+0 x1'} >= 1 ;")
        header = f"* #variable= {self._n_vars} #constraint= {len(constraints)}"
        return "\n".join([header] + constraints) + "\n"


def new_solver(m: int, p: int, r: int, s: int) -> SolverState:
    return SolverState(m, p, r, s)


def add_clause(st: SolverState, cl: ConflictClause) -> None:
    st.add_clause(cl)


def next_assignment(st: SolverState) -> Optional[BoolAssignment]:
    return st.next_assignment()


def export_opb(st: SolverState) -> str:
    return st.export_opb()


def clause_from_sets(free_inputs: IndexSet, trusted_outputs: IndexSet) -> ConflictClause:
    return ConflictClause(input_lits=free_inputs, output_lits=trusted_outputs)
