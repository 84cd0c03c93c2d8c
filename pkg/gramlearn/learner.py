import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from .trees import (
    EMPTY_CONTEXT, leaf, node, compose, compose_contexts, subtree_closure,
    one_step_extensions, context_extensions
)
from .automata import MTA, MultilinearMap
from .grammar import format_weight
from .messenger import BasisExtendedEvent, ColumnAddedEvent, RoundCompleteEvent


logger = logging.getLogger(__name__)


class ObservationTable:
    """Finite window (T, C, H, B) into the Hankel matrix of the target series.

    Values are kept for every row of T and of its one-step extensions, under every column
    of C. The basis B is a subset of T kept in canonical order.
    """

    def __init__(self, alphabet, max_rows=None):
        self.alphabet = alphabet
        self.max_rows = max_rows
        self.trees = []
        self.contexts = [EMPTY_CONTEXT]
        self.basis = []
        self.values = {}
        self._tree_set = set()
        self._extensions = []

    def add_tree(self, tree):
        if tree in self._tree_set:
            return False
        self.trees.append(tree)
        self._tree_set.add(tree)
        self._extensions = None
        return True

    def add_context(self, context):
        if context in self.contexts:
            return False
        self.contexts.append(context)
        return True

    def add_basis(self, tree):
        self.add_tree(tree)
        if tree not in self.basis:
            self.basis.append(tree)
            self.basis.sort()

    def contains_tree(self, tree):
        return tree in self._tree_set

    @property
    def extensions(self):
        if self._extensions is None:
            self._extensions = one_step_extensions(self.trees, self.alphabet)
        return self._extensions

    def rows(self):
        return self.trees + [t for t in self.extensions if t not in self._tree_set]

    def value(self, tree, context):
        try:
            return self.values[(tree, context)]
        except KeyError:
            raise TableNotClosedError(f'No value for row "{tree}" under column "{context}"')

    def row(self, tree):
        return tuple(self.value(tree, c) for c in self.contexts)

    def is_zero_row(self, tree):
        return not any(self.row(tree))

    def has_zero_row(self):
        return any(self.is_zero_row(t) for t in self.trees)

    def render(self):
        """Text dump: '*' marks basis rows, '+' other rows of T, '.' one-step extensions"""
        header = ['', ''] + [c.text for c in self.contexts]
        lines = ['\t'.join(header)]
        for tree in sorted(self.rows()):
            if tree in self.basis:
                marker = '*'
            elif tree in self._tree_set:
                marker = '+'
            else:
                marker = '.'
            cells = [format_weight(self.values[(tree, c)]) if (tree, c) in self.values else '?'
                     for c in self.contexts]
            lines.append('\t'.join([marker, tree.text] + cells))
        return '\n'.join(lines) + '\n'


@dataclass(frozen=True)
class RowDecomposition:
    index: int = None
    coefficient: Fraction = Fraction(0)

    @property
    def is_zero(self):
        return self.index is None

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def spanned(cls, index, coefficient):
        return cls(index, coefficient)


def colinear_coefficient(row_a, row_b):
    """Returns alpha with row_a = alpha * row_b, or None when the rows are not co-linear.

    Two zero rows are co-linear with alpha 1.
    """
    if len(row_a) != len(row_b) or not row_a:
        raise ValueError(f'Rows must have the same positive length, got {len(row_a)} and {len(row_b)}')

    a_zero = not any(row_a)
    b_zero = not any(row_b)
    if a_zero and b_zero:
        return Fraction(1)
    if a_zero or b_zero:
        return None

    pivot = next(j for j, x in enumerate(row_b) if x)
    alpha = Fraction(row_a[pivot]) / row_b[pivot]
    if any(a != alpha * b for a, b in zip(row_a, row_b)):
        return None
    if alpha < 0:
        raise NegativeRatioError(f'Rows {_render_row(row_a)} and {_render_row(row_b)} '
                                 f'are co-linear with negative ratio {format_weight(alpha)}')
    return alpha


def _render_row(row):
    return '(' + ', '.join(format_weight(x) for x in row) + ')'


def decompose(table, tree):
    """Writes the row of tree as a multiple of a basis row; None when no basis row spans it"""
    row = table.row(tree)
    if not any(row):
        return RowDecomposition.zero()

    for i, b in enumerate(table.basis):
        alpha = colinear_coefficient(row, table.row(b))
        if alpha is not None:
            return RowDecomposition.spanned(i, alpha)
    return None


def fill(table, teacher):
    rows = table.rows()
    if table.max_rows is not None and len(rows) > table.max_rows:
        raise TableLimitError(f'Observation table grew to {len(rows)} rows, the limit is {table.max_rows}')

    count = 0
    for tree in rows:
        for context in table.contexts:
            key = (tree, context)
            if key not in table.values:
                table.values[key] = teacher.smq(compose(context, tree))
                count += 1
    return count


def _find_unclosed(table):
    has_zero = table.has_zero_row()
    for tree in sorted(set(table.rows()) - set(table.basis)):
        if table.is_zero_row(tree):
            if not has_zero and not table.contains_tree(tree):
                return tree, True
        elif decompose(table, tree) is None:
            return tree, False
    return None


def close(table, teacher):
    changed = False
    while True:
        found = _find_unclosed(table)
        if found is None:
            return changed

        tree, is_zero = found
        if is_zero:
            logger.debug('zero row %s joins T', tree)
            table.add_tree(tree)
        else:
            logger.debug('row %s joins the basis', tree)
            table.add_basis(tree)
            teacher.messenger.publish(BasisExtendedEvent({'tree': tree, 'dimension': len(table.basis)}))
        fill(table, teacher)
        changed = True


def _add_column(table, teacher, context):
    if not table.add_context(context):
        return False
    logger.debug('context %s joins C', context)
    teacher.messenger.publish(ColumnAddedEvent({'context': context, 'columns': len(table.contexts)}))
    fill(table, teacher)
    return True


def make_consistent(table, teacher):
    """Repairs the first consistency violation found by adding one column.

    Zero rows are checked first: every extension of a zero row must stay zero. Then every
    co-linear pair of rows in T must stay co-linear, with the same ratio, under every
    one-step extension.
    """
    extensions = context_extensions(table.trees, table.alphabet)

    for tree in table.trees:
        if not table.is_zero_row(tree):
            continue
        for c in extensions:
            grown = compose(c, tree)
            for column in table.contexts:
                if table.value(grown, column) and _add_column(table, teacher, compose_contexts(column, c)):
                    return True

    for first in table.trees:
        for second in table.trees:
            if first == second:
                continue
            alpha = colinear_coefficient(table.row(first), table.row(second))
            if alpha is None:
                continue
            for c in extensions:
                grown_first = compose(c, first)
                grown_second = compose(c, second)
                for column in table.contexts:
                    if table.value(grown_first, column) == alpha * table.value(grown_second, column):
                        continue
                    if _add_column(table, teacher, compose_contexts(column, c)):
                        return True
    return False


def complete(table, teacher, new_trees):
    for tree in subtree_closure(new_trees):
        table.add_tree(tree)
    fill(table, teacher)

    while True:
        closed = close(table, teacher)
        repaired = make_consistent(table, teacher)
        if not closed and not repaired:
            return


def zero_hypothesis(alphabet):
    """One-dimensional automaton with value zero on every tree"""
    leaf_vectors = {name: [Fraction(0)] for name in alphabet.terminals}
    transitions = {k: MultilinearMap(k, 1) for k in alphabet.arities}
    return MTA(alphabet, 1, leaf_vectors, transitions, [Fraction(0)])


def extract_cmta(table):
    basis = table.basis
    if not basis:
        logger.debug('every row is zero, extracting the zero hypothesis')
        return zero_hypothesis(table.alphabet)

    d = len(basis)
    output = [table.value(b, EMPTY_CONTEXT) for b in basis]

    def decompose_or_fail(tree):
        decomposition = decompose(table, tree)
        if decomposition is None:
            raise TableNotClosedError(f'Row "{tree}" is not spanned by the basis')
        return decomposition

    leaf_vectors = {}
    for name in table.alphabet.terminals:
        vector = [Fraction(0)] * d
        decomposition = decompose_or_fail(leaf(name))
        if not decomposition.is_zero:
            vector[decomposition.index] = decomposition.coefficient
        leaf_vectors[name] = vector

    transitions = {}
    for k in table.alphabet.arities:
        m = MultilinearMap(k, d)
        for column in product(range(d), repeat=k):
            decomposition = decompose_or_fail(node(*(basis[j] for j in column)))
            if not decomposition.is_zero:
                m.set(decomposition.index, column, decomposition.coefficient)
        transitions[k] = m

    return MTA(table.alphabet, d, leaf_vectors, transitions, output)


def query_budget(n, m, sigma_size, p):
    """Upper bound on membership queries for a run with final dimension n.

    m is the largest counterexample node count, sigma_size counts terminals plus one
    internal symbol per arity, p is the maximal arity. T may hold one zero row beyond the
    basis and the counterexample subtrees.
    """
    rows = n + 1 + m * n
    return n * (rows + sigma_size * rows ** p)


@dataclass
class LearnLimits:
    max_rounds: int = 50
    max_table_rows: int = 100000


@dataclass
class LearnTranscript:
    smq_count: int = 0
    seq_count: int = 0
    counterexamples: list = field(default_factory=list)
    final_dimension: int = 0
    rounds: list = field(default_factory=list)

    @property
    def max_counterexample_size(self):
        return max((cex.tree.size for cex in self.counterexamples), default=0)

    def budget(self, alphabet):
        return query_budget(self.final_dimension, self.max_counterexample_size, alphabet.size, alphabet.max_arity)

    def render(self):
        lines = [f'smq {self.smq_count}', f'seq {self.seq_count}']
        for i, dimension in enumerate(self.rounds, start=1):
            lines.append(f'round {i} basis {dimension}')
            if i <= len(self.counterexamples):
                cex = self.counterexamples[i - 1]
                lines.append(f'cex {cex.tree.text} {format_weight(cex.true_value)}')
        return '\n'.join(lines) + '\n'


class Learner:
    def __init__(self, teacher, limits=None):
        self.teacher = teacher
        self.limits = limits or LearnLimits()
        self.table = ObservationTable(teacher.alphabet, self.limits.max_table_rows)
        self.transcript = LearnTranscript()

    def run(self):
        start_smq, start_seq = self.teacher.query_log.snapshot()
        try:
            return self._run()
        except TableLimitError as e:
            e.transcript = self.transcript
            raise
        finally:
            smq_count, seq_count = self.teacher.query_log.snapshot()
            self.transcript.smq_count = smq_count - start_smq
            self.transcript.seq_count = seq_count - start_seq

    def _run(self):
        table, teacher, transcript = self.table, self.teacher, self.transcript
        complete(table, teacher, [leaf(name) for name in table.alphabet.terminals])

        for round_no in range(1, self.limits.max_rounds + 1):
            hypothesis = extract_cmta(table)
            transcript.rounds.append(hypothesis.dimension)
            logger.info('round %d: hypothesis of dimension %d', round_no, hypothesis.dimension)
            teacher.messenger.publish(RoundCompleteEvent({
                'round': round_no, 'dimension': hypothesis.dimension, 'hypothesis': hypothesis, 'table': table
            }))

            counterexample = teacher.seq(hypothesis)
            if counterexample is None:
                transcript.final_dimension = hypothesis.dimension
                return hypothesis, transcript

            logger.info('counterexample %s', counterexample)
            transcript.counterexamples.append(counterexample)

            basis_size = len(table.basis)
            complete(table, teacher, [counterexample.tree])
            if len(table.basis) <= basis_size:
                logger.warning('counterexample %s did not extend the basis', counterexample.tree)

        raise RoundLimitError(f'No equivalent hypothesis after {self.limits.max_rounds} rounds', transcript)


def learn(teacher, limits=None):
    return Learner(teacher, limits).run()


class LearnerError(Exception):
    pass


class NegativeRatioError(LearnerError, ValueError):
    pass


class TableNotClosedError(LearnerError):
    pass


class LimitError(LearnerError):
    def __init__(self, message, transcript=None):
        super().__init__(message)
        self.transcript = transcript


class RoundLimitError(LimitError):
    pass


class TableLimitError(LimitError):
    pass
