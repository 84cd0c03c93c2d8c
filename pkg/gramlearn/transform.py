import logging
import math
from dataclasses import dataclass
from fractions import Fraction

from .automata import MTA, MultilinearMap, is_nonnegative
from .grammar import Rule, WCFG, grammar_alphabet, reachable_nonterminals


logger = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e12


def nonterminal_name(index, prefix='N'):
    """Name of the nonterminal for 0-based automaton coordinate index"""
    return f'{prefix}{index + 1}'


def nonterminal_prefix(terminals, d):
    """'N' followed by as many underscores as needed to avoid every terminal name"""
    prefix = 'N'
    taken = set(terminals)
    while any(nonterminal_name(i, prefix) in taken for i in range(d)):
        prefix += '_'
    return prefix


def pmta_to_wcfg(a):
    if not is_nonnegative(a):
        raise NegativeWeightError('Only automata with nonnegative weights can be turned into a grammar')

    d = a.dimension
    prefix = nonterminal_prefix(a.alphabet.terminals, d)
    names = [nonterminal_name(i, prefix) for i in range(d)]
    rules = {i: [] for i in range(d)}

    for name in a.alphabet.terminals:
        for i, weight in enumerate(a.leaf_vectors[name]):
            if weight:
                rules[i].append(Rule(names[i], (name, ), weight))

    for k in sorted(a.transitions):
        for (target, column), weight in sorted(a.transitions[k].entries.items()):
            rhs = tuple(names[j] for j in column)
            rules[target].append(Rule(names[target], rhs, weight))

    root_weights = {names[i]: w for i, w in enumerate(a.output) if w}
    if not root_weights:
        raise TransformError('The automaton has an all-zero output vector')

    ordered_rules = [rule for i in range(d) for rule in rules[i]]
    return WCFG(names, a.alphabet.terminals, ordered_rules, root_weights)


def wcfg_to_pmta(g, arities=None):
    """Builds an automaton with one coordinate per nonterminal followed by one per terminal.

    A terminal coordinate is only active when that terminal occurs inside a non-lexical
    right-hand side.
    """
    alphabet = grammar_alphabet(g, arities=arities)

    index = {}
    for name in g.nonterminals:
        index[name] = len(index)
    for name in g.terminals:
        index[name] = len(index)
    n = len(index)

    output = [Fraction(0)] * n
    for name, weight in g.root_weights.items():
        output[index[name]] = weight

    embedded = set()
    transitions = {k: MultilinearMap(k, n) for k in alphabet.arities}
    for rule in g.rules:
        if g.is_lexical(rule) or not rule.weight:
            continue
        embedded.update(symbol for symbol in rule.rhs if g.is_terminal(symbol))
        column = tuple(index[symbol] for symbol in rule.rhs)
        transitions[len(rule.rhs)].set(index[rule.lhs], column, rule.weight)

    leaf_vectors = {}
    for name in g.terminals:
        vector = [Fraction(0)] * n
        if name in embedded:
            vector[index[name]] = Fraction(1)
        for rule in g.lexical_rules.get(name, []):
            vector[index[rule.lhs]] += rule.weight
        leaf_vectors[name] = vector

    return MTA(alphabet, n, leaf_vectors, transitions, output)


@dataclass
class PartitionTable:
    values: dict
    iterations: int
    residual: float
    root_weights: dict

    @property
    def root_total(self):
        return sum(float(w) * self.values[name] for name, w in self.root_weights.items())

    def __getitem__(self, name):
        return self.values[name]


def _one_step_partition(g, f):
    result = dict.fromkeys(g.nonterminals, 0.0)
    for rule in g.rules:
        score = float(rule.weight)
        for symbol in rule.rhs:
            if not g.is_terminal(symbol):
                score *= f[symbol]
        result[rule.lhs] += score
    return result


def partition_functions(g, tol=1e-12, max_iter=10**6):
    """Fixed-point iteration for the total weight of derivations rooted at each nonterminal.

    iterations counts the updates needed to reach the returned values: the next update
    moved no value by tol or more.
    """
    if tol <= 0:
        raise ValueError(f'tol must be positive, got {tol}')
    if max_iter < 1:
        raise ValueError(f'max_iter must be at least 1, got {max_iter}')

    f = dict.fromkeys(g.nonterminals, 0.0)
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        updated = _one_step_partition(g, f)
        residual = max((abs(updated[name] - f[name]) for name in f), default=0.0)
        f = updated

        largest = max(f.values(), default=0.0)
        if not math.isfinite(largest) or largest > DIVERGENCE_BOUND:
            table = PartitionTable(f, iteration, residual, g.root_weights)
            raise DivergentGrammarError(f'Partition function exceeded {DIVERGENCE_BOUND:g} '
                                        f'after {iteration} iterations', table)

        if residual < tol:
            logger.debug('partition functions converged after %d iterations', iteration - 1)
            return PartitionTable(f, iteration - 1, residual, g.root_weights)

    table = PartitionTable(f, max_iter, residual, g.root_weights)
    raise DivergentGrammarError(f'Partition functions did not converge within {max_iter} iterations '
                                f'(residual {residual:g})', table)


def wcfg_to_pcfg(g, tol=1e-12, max_iter=10**6):
    table = partition_functions(g, tol, max_iter)
    f = table.values

    for name in reachable_nonterminals(g):
        if f[name] == 0:
            raise ZeroPartitionError(name)

    rules = []
    for rule in g.rules:
        if f[rule.lhs] == 0:
            continue
        weight = float(rule.weight)
        for symbol in rule.rhs:
            if not g.is_terminal(symbol):
                weight *= f[symbol]
        weight /= f[rule.lhs]
        if weight:
            rules.append(Rule(rule.lhs, rule.rhs, Fraction(weight)))

    live = [name for name in g.nonterminals if f[name]]
    if len(live) < len(g.nonterminals):
        logger.debug('dropping nonterminals with zero partition: %s',
                     [name for name in g.nonterminals if not f[name]])

    total = table.root_total
    root_weights = {}
    for name, w in g.root_weights.items():
        share = float(w) * f[name] / total
        if share:
            root_weights[name] = Fraction(share)

    logger.debug('renormalized %d rules, root total %g', len(rules), total)
    return WCFG(live, g.terminals, rules, root_weights)


class TransformError(Exception):
    pass


class NegativeWeightError(TransformError, ValueError):
    pass


class DivergentGrammarError(TransformError):
    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


class ZeroPartitionError(TransformError):
    def __init__(self, nonterminal):
        super().__init__(f'Partition function of reachable nonterminal "{nonterminal}" is zero')
        self.nonterminal = nonterminal
