import logging
import threading
from dataclasses import dataclass
from fractions import Fraction

from .trees import Tree, enumerate_trees
from .grammar import WeightCalculator, check_invertible, check_probabilistic, grammar_alphabet, format_weight
from .transform import partition_functions
from .messenger import MembershipQueryEvent, EquivalenceQueryEvent, messenger as default_messenger


logger = logging.getLogger(__name__)

DEFAULT_SEQ_BOUND = 13


class QueryLog:
    def __init__(self):
        self._lock = threading.Lock()
        self.smq_count = 0
        self.seq_count = 0

    def record_smq(self):
        with self._lock:
            self.smq_count += 1

    def record_seq(self):
        with self._lock:
            self.seq_count += 1

    def snapshot(self):
        with self._lock:
            return self.smq_count, self.seq_count


@dataclass
class Counterexample:
    tree: Tree
    true_value: Fraction
    hypothesis_value: Fraction = None

    def __str__(self):
        return f'{self.tree.text} {format_weight(self.true_value)}'


class Teacher:
    """Answers membership queries exactly and equivalence queries by bounded enumeration.

    The target must be structurally unambiguous. Unless weighted is set, it must also be
    a PCFG (exact rule sums of one). A weighted target must have convergent partition
    functions, otherwise DivergentGrammarError is raised.
    """

    def __init__(self, target, seq_bound=DEFAULT_SEQ_BOUND, weighted=False, arities=None, messenger=None,
                 tol=1e-12, max_iter=10**6):
        if not isinstance(seq_bound, int) or seq_bound < 1:
            raise ValueError(f'seq_bound must be a positive integer, got {seq_bound}')

        invertibility = check_invertible(target)
        if not invertibility:
            raise NotInvertibleError(invertibility.witness)

        if weighted:
            partition_functions(target, tol, max_iter)
        else:
            report = check_probabilistic(target)
            if not report:
                raise NotProbabilisticError(report)

        self.target = target
        self.seq_bound = seq_bound
        self.alphabet = grammar_alphabet(target, arities=arities)
        self.query_log = QueryLog()
        self.messenger = messenger or default_messenger
        self._weights = WeightCalculator(target)

    def smq(self, tree):
        if not isinstance(tree, Tree) or tree.hole_count or not self.alphabet.contains(tree):
            raise AlphabetMismatchError(f'"{tree}" is not a tree over {self.alphabet}')

        result = self._weights.tree_weight(tree)
        self.query_log.record_smq()
        self.messenger.publish(MembershipQueryEvent({'tree': tree, 'value': result}))
        return result

    def seq(self, hypothesis):
        if set(hypothesis.alphabet.terminals) != set(self.alphabet.terminals) or \
                hypothesis.alphabet.arities != self.alphabet.arities:
            raise AlphabetMismatchError(f'Hypothesis alphabet {hypothesis.alphabet} differs from {self.alphabet}')

        self.query_log.record_seq()

        cache = {}
        counterexample = None
        for tree in enumerate_trees(self.alphabet, self.seq_bound):
            expected = self._weights.tree_weight(tree)
            actual = hypothesis.value(tree, cache)
            if actual != expected:
                counterexample = Counterexample(tree, expected, actual)
                logger.debug('counterexample %s: target %s, hypothesis %s',
                             tree, format_weight(expected), format_weight(actual))
                break

        self.messenger.publish(EquivalenceQueryEvent({'counterexample': counterexample}))
        return counterexample


def new_teacher(target, seq_bound=DEFAULT_SEQ_BOUND, **kwargs):
    return Teacher(target, seq_bound, **kwargs)


def smq(teacher, tree):
    return teacher.smq(tree)


def seq(teacher, hypothesis):
    return teacher.seq(hypothesis)


class OracleError(Exception):
    pass


class NotInvertibleError(OracleError, ValueError):
    def __init__(self, witness):
        first, second = witness
        super().__init__(f'Target grammar is not invertible: "{first}" and "{second}" share a right-hand side')
        self.witness = witness


class NotProbabilisticError(OracleError, ValueError):
    def __init__(self, report):
        failing = ', '.join(f'{name} sums to {format_weight(report.sums[name])}' for name in report.failing)
        if not report.is_normalized(report.root_sum):
            failing = ', '.join(filter(None, [failing, f'root weights sum to {format_weight(report.root_sum)}']))
        super().__init__(f'Target grammar is not probabilistic: {failing}')
        self.report = report


class AlphabetMismatchError(OracleError, ValueError):
    pass
