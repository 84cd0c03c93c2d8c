import io
import logging
import os
import tempfile
import unittest
from fractions import Fraction
from itertools import product

from hypothesis import given, settings
from hypothesis import strategies as st

from gramlearn.trees import (
    HOLE, EMPTY_CONTEXT, Context, RankedAlphabet, TreeSyntaxError, leaf, node, compose,
    compose_contexts, context_extensions, enumerate_trees, extensions_containing, one_step_extensions,
    parse_structured_string, render_structured_string, subtree_closure, subtrees
)
from gramlearn.grammar import (
    GrammarSyntaxError, GrammarValidationError, UnknownSymbolError, WeightCalculator, check_invertible,
    check_probabilistic, grammar_alphabet, lint_grammar, parse_grammar, render_grammar, tree_weight,
    weight_vector
)
from gramlearn.automata import (
    MTA, AutomatonShapeError, AutomatonSyntaxError, MultilinearMap, check_colinear, is_nonnegative, mu,
    multilinear_apply, parse_automaton, render_automaton, value
)
from gramlearn.transform import (
    DivergentGrammarError, NegativeWeightError, partition_functions, pmta_to_wcfg, wcfg_to_pcfg, wcfg_to_pmta
)
from gramlearn.oracle import (
    AlphabetMismatchError, NotInvertibleError, NotProbabilisticError, Teacher, new_teacher, seq, smq
)
from gramlearn.learner import (
    LearnLimits, NegativeRatioError, ObservationTable, RoundLimitError, TableLimitError, colinear_coefficient,
    close, complete, decompose, extract_cmta, fill, learn, make_consistent, query_budget, Learner
)
from gramlearn.loaders import LoaderError, load_automaton, load_grammar
from gramlearn.config import ConfigError, CliConfig, build_config, override_dict
from gramlearn.messenger import Messenger, RoundCompleteEvent, all_event_types, messenger
from gramlearn.cli import main


FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')


def fixture(name):
    return os.path.join(FIXTURES, name)


def read_fixture(name):
    with open(fixture(name)) as f:
        return f.read()


AB = RankedAlphabet(('a', 'b'), (2,))
ABC = RankedAlphabet(('a', 'b', 'c'), (2,))
A_ONLY = RankedAlphabet(('a',), (2,))

ANBN = read_fixture('anbn.g')
LEARNED = read_fixture('learned.g')
CHAIN = read_fixture('chain.g')

COUNTEREXAMPLE = '(a ((a b) ((a b) b)))'


def t(text, alphabet=AB):
    return parse_structured_string(text, alphabet)


def right_chain(n):
    """(a (a ... (a a))) with n leaves"""
    tree = node(leaf('a'), leaf('a'))
    for _ in range(n - 2):
        tree = node(leaf('a'), tree)
    return tree


def comb(n):
    """Skeleton of a^n b^n under the right-branching grammar"""
    tree = node(leaf('a'), leaf('b'))
    for _ in range(n - 1):
        tree = node(leaf('a'), node(tree, leaf('b')))
    return tree


def brute_force_weight(grammar, tree):
    """Sums explicitly enumerated derivations, without memoization"""
    def derivations(symbol, subtree):
        if grammar.is_terminal(symbol):
            return [Fraction(1)] if subtree.is_leaf and subtree.symbol == symbol else []

        weights = []
        for rule in grammar.rules_by_lhs.get(symbol, []):
            if subtree.is_leaf:
                if grammar.is_lexical(rule) and rule.rhs[0] == subtree.symbol:
                    weights.append(rule.weight)
                continue
            if grammar.is_lexical(rule) or len(rule.rhs) != len(subtree.children):
                continue
            partial = [rule.weight]
            for child_symbol, child in zip(rule.rhs, subtree.children):
                partial = [w * x for w in partial for x in derivations(child_symbol, child)]
            weights.extend(partial)
        return weights

    return sum((w * x for name, w in grammar.root_weights.items() for x in derivations(name, tree)),
               Fraction(0))


def with_hole(tree, k):
    """Context made from tree by replacing its k-th leaf (modulo the leaf count) with the hole"""
    leaves = [n for n in tree.nodes() if n.is_leaf]
    target = k % len(leaves)
    counter = [0]

    def replace(n):
        if n.is_leaf:
            hit = counter[0] == target
            counter[0] += 1
            return leaf(HOLE) if hit else n
        return node(*[replace(child) for child in n.children])

    return Context(replace(tree))


random_trees = st.recursive(
    st.sampled_from(['a', 'b', 'c']).map(leaf),
    lambda children: st.lists(children, min_size=1, max_size=3).map(lambda cs: node(*cs)),
    max_leaves=8
)

binary_trees = st.recursive(
    st.sampled_from(['a', 'b']).map(leaf),
    lambda children: st.tuples(children, children).map(lambda cs: node(*cs)),
    max_leaves=5
)

UNARY_TO_TERNARY = RankedAlphabet(('a', 'b', 'c'), (1, 2, 3))

weights = st.sampled_from([Fraction(0), Fraction(0), Fraction(1, 2), Fraction(1, 3), Fraction(1)])


@st.composite
def sparse_pmtas(draw):
    d = draw(st.integers(min_value=1, max_value=4))
    output = [draw(st.sampled_from([Fraction(1), Fraction(1, 2)]))] + [draw(weights) for _ in range(d - 1)]
    leaf_vectors = {name: [draw(weights) for _ in range(d)] for name in AB.terminals}

    m = MultilinearMap(2, d)
    coordinates = st.integers(min_value=0, max_value=d - 1)
    for _ in range(draw(st.integers(min_value=0, max_value=2 * d))):
        m.set(draw(coordinates), (draw(coordinates), draw(coordinates)), draw(weights))
    return MTA(AB, d, leaf_vectors, {2: m}, output)


class RecordingMessenger(Messenger):
    def __init__(self):
        super().__init__()
        self.rounds = []
        self.subscribe(RoundCompleteEvent.etype, self.rounds.append)


def anbn_teacher(seq_bound=13, messenger=None):
    return Teacher(parse_grammar(ANBN), seq_bound, messenger=messenger)


class StructuredStringTests(unittest.TestCase):
    def test_parse(self):
        tree = t('((a b) c)', ABC)
        self.assertEqual(tree, node(node(leaf('a'), leaf('b')), leaf('c')))
        self.assertEqual(t('a'), leaf('a'))

        context = t('(a <>)')
        self.assertIsInstance(context, Context)
        self.assertEqual(context.tree, node(leaf('a'), leaf(HOLE)))

    def test_glued_single_character_terminals(self):
        self.assertEqual(t('((ab)c)', ABC), t('((a b) c)', ABC))

        long_names = RankedAlphabet(('x1', 'y'), (2,))
        with self.assertRaises(TreeSyntaxError):
            parse_structured_string('(x1y y)', long_names)
        self.assertEqual(parse_structured_string('(x1 y)', long_names).text, '(x1 y)')

    def test_errors(self):
        for text in ['(a b', 'a b)', '(a b))', '(a c)', '(a b a)', '()', '(<> <>)', '', '(a [b])']:
            with self.assertRaises(TreeSyntaxError, msg=text):
                t(text)

    def test_render(self):
        self.assertEqual(render_structured_string(node(leaf('a'), leaf('b'))), '(a b)')
        self.assertEqual(render_structured_string(leaf('a')), 'a')
        self.assertEqual(render_structured_string(t('((a b)   ((a b) b))')), '((a b) ((a b) b))')
        self.assertEqual(render_structured_string(t('(<> b)')), '(<> b)')

    @given(random_trees)
    @settings(max_examples=200, deadline=None)
    def test_render_parse_identity(self, tree):
        text = render_structured_string(tree)
        self.assertEqual(parse_structured_string(text, UNARY_TO_TERNARY), tree)
        self.assertEqual(parse_structured_string(text, UNARY_TO_TERNARY).text, text)

    @given(random_trees, st.integers(min_value=0, max_value=20))
    @settings(max_examples=100, deadline=None)
    def test_render_parse_identity_for_contexts(self, tree, k):
        context = with_hole(tree, k)
        self.assertEqual(parse_structured_string(context.text, UNARY_TO_TERNARY), context)


class TreeOperationTests(unittest.TestCase):
    def test_compose(self):
        q = t('((a b) b)')
        self.assertEqual(compose(EMPTY_CONTEXT, q), q)
        self.assertEqual(compose(t('(a <>)'), q).text, '(a ((a b) b))')
        self.assertEqual(compose(t('(<> b)'), t('(a b)')).text, '((a b) b)')

    def test_compose_contexts(self):
        c = t('(a <>)')
        self.assertEqual(compose_contexts(c, t('((a b) <>)')).text, '(a ((a b) <>))')
        self.assertEqual(compose_contexts(EMPTY_CONTEXT, c), c)
        self.assertEqual(compose_contexts(c, EMPTY_CONTEXT), c)

    def test_compose_node_count(self):
        c = t('(a ((a b) <>))')
        tree = t('((a b) b)')
        self.assertEqual(compose(c, tree).size, c.size - 1 + tree.size)

    @given(binary_trees, binary_trees, binary_trees, st.integers(0, 10), st.integers(0, 10))
    @settings(max_examples=100, deadline=None)
    def test_composition_is_associative(self, outer, inner, tree, i, j):
        c1 = with_hole(outer, i)
        c2 = with_hole(inner, j)
        self.assertEqual(compose(compose_contexts(c1, c2), tree), compose(c1, compose(c2, tree)))

    def test_subtrees(self):
        self.assertEqual(subtrees(leaf('a')), [leaf('a')])
        self.assertEqual([s.text for s in subtrees(t('(a b)'))], ['a', 'b', '(a b)'])
        self.assertEqual([s.text for s in subtrees(t(COUNTEREXAMPLE))],
                         ['a', 'b', '(a b)', '((a b) b)', '((a b) ((a b) b))', COUNTEREXAMPLE])

    def test_subtree_closure_is_closed(self):
        closure = set(subtree_closure([t(COUNTEREXAMPLE), t('((b b) a)')]))
        for tree in closure:
            for child in tree.children:
                self.assertIn(child, closure)

    def test_one_step_extensions(self):
        a, b = leaf('a'), leaf('b')
        self.assertEqual([x.text for x in one_step_extensions([a, b], AB)], ['(a a)', '(a b)', '(b a)', '(b b)'])
        self.assertEqual(one_step_extensions([], AB), [])
        unary_binary = RankedAlphabet(('a',), (1, 2))
        self.assertEqual([x.text for x in one_step_extensions([a], unary_binary)], ['(a)', '(a a)'])

    def test_one_step_extension_count(self):
        alphabet = RankedAlphabet(('a', 'b'), (1, 2, 3))
        trees = [leaf('a'), leaf('b'), t('(a b)', alphabet)]
        self.assertEqual(len(one_step_extensions(trees, alphabet)), 3 + 3 ** 2 + 3 ** 3)

    def test_extensions_containing(self):
        a = leaf('a')
        aa = t('(a a)', A_ONLY)
        self.assertEqual(set(extensions_containing([a, aa], a, A_ONLY)),
                         {aa, t('(a (a a))', A_ONLY), t('((a a) a)', A_ONLY)})
        self.assertEqual(extensions_containing([], a, A_ONLY), [aa])
        unary = RankedAlphabet(('a', 'b'), (1,))
        self.assertEqual([x.text for x in extensions_containing([], leaf('b'), unary)], ['(b)'])

    def test_context_extensions(self):
        trees = [leaf('a'), t('(a a)', A_ONLY)]
        self.assertEqual({c.text for c in context_extensions(trees, A_ONLY)},
                         {'(<> a)', '(<> (a a))', '(a <>)', '((a a) <>)'})
        self.assertEqual(context_extensions([], A_ONLY), [])
        unary = RankedAlphabet(('a',), (1,))
        self.assertEqual([c.text for c in context_extensions([leaf('a')], unary)], ['(<>)'])

    def test_enumerate_trees(self):
        self.assertEqual([x.text for x in enumerate_trees(AB, 1)], ['a', 'b'])
        self.assertEqual(len(list(enumerate_trees(AB, 3))), 6)
        self.assertEqual(len(list(enumerate_trees(A_ONLY, 7))), 9)
        with self.assertRaises(ValueError):
            list(enumerate_trees(AB, 0))

    def test_enumeration_is_canonical_and_exhaustive(self):
        def count(n, alphabet):
            if n == 1:
                return len(alphabet.terminals)
            total = 0
            for k in alphabet.arities:
                for sizes in product(range(1, n), repeat=k):
                    if sum(sizes) == n - 1:
                        prod = 1
                        for s in sizes:
                            prod *= count(s, alphabet)
                        total += prod
            return total

        alphabet = RankedAlphabet(('a', 'b'), (1, 2))
        trees = list(enumerate_trees(alphabet, 9))
        self.assertEqual(len(trees), len(set(trees)))
        self.assertEqual(trees, sorted(trees))
        for n in range(1, 10):
            self.assertEqual(sum(1 for x in trees if x.size == n), count(n, alphabet))


class GrammarTests(unittest.TestCase):
    def test_parse_target(self):
        g = parse_grammar(ANBN)
        self.assertEqual(g.nonterminals, ('S', 'S2'))
        self.assertEqual(g.terminals, ('a', 'b'))
        self.assertEqual(g.root_weights, {'S': 1})
        self.assertEqual([str(rule) for rule in g.rules],
                         ['S -> a S2 [1/2]', 'S -> a b [1/2]', 'S2 -> S b [1]'])

    def test_parse_learned(self):
        g = parse_grammar(LEARNED)
        self.assertEqual(g.root_weights, {'N3': Fraction(1, 2)})
        self.assertEqual(g.terminals, ('a', 'b'))
        self.assertEqual(len(g.rules), 5)

    def test_single_rule(self):
        g = parse_grammar('start S\nS -> a [1]\n')
        self.assertEqual(len(g.rules), 1)
        self.assertTrue(g.is_lexical(g.rules[0]))
        self.assertEqual(grammar_alphabet(g).arities, (2,))

    def test_weights(self):
        g = parse_grammar('start S\nS -> a S [0.25]\nS -> b\n')
        self.assertEqual(g.rules[0].weight, Fraction(1, 4))
        self.assertEqual(g.rules[1].weight, 1)

    def test_syntax_errors(self):
        with self.assertRaises(GrammarSyntaxError) as cm:
            parse_grammar('start S\nS -> a [x]\n')
        self.assertEqual(cm.exception.line, 2)

        for text in ['start S\nS -> a [-1/2]', 'start S\nS -> [1]', 'start S\nS a b', 'start S\nS -> a; b',
                     'start S [1]\nS -> a', 'root S\nS -> a', 'start S\nS -> a [1/0]']:
            with self.assertRaises(GrammarSyntaxError, msg=text):
                parse_grammar(text)

    def test_validation_errors(self):
        for text in ['S -> a [1]', 'start S\nS -> a [1]\nS -> a [1/2]', 'start S\nroot T [1]\nS -> a\nT -> b',
                     'root S [0]\nS -> a']:
            with self.assertRaises(GrammarValidationError, msg=text):
                parse_grammar(text)

    def test_render_round_trip(self):
        for name in ['anbn.g', 'learned.g', 'ambiguous.g', 'dup.g', 'single.g', 'chain.g']:
            text = read_fixture(name)
            once = render_grammar(parse_grammar(text))
            self.assertEqual(render_grammar(parse_grammar(once)), once)

        for name in ['learned.g', 'dup.g', 'single.g']:
            text = read_fixture(name)
            self.assertEqual(render_grammar(parse_grammar(text)), text)

    def test_render_floats(self):
        g = parse_grammar('root S [1]\nS -> a [1/3]\nS -> S S [2/3]')
        self.assertEqual(render_grammar(g, float_digits=12),
                         'root S [1]\nS -> a [0.333333333333]\nS -> S S [0.666666666667]\n')

    def test_check_invertible(self):
        self.assertTrue(check_invertible(parse_grammar(ANBN)))

        report = check_invertible(parse_grammar('root N1 [1]\nN1 -> a a [1]\nN2 -> a a [1]'))
        self.assertFalse(report)
        self.assertEqual([rule.lhs for rule in report.witness], ['N1', 'N2'])

        report = check_invertible(parse_grammar(CHAIN))
        self.assertFalse(report)
        self.assertEqual({rule.rhs for rule in report.witness}, {('a', 'N1')})

    def test_check_probabilistic(self):
        report = check_probabilistic(parse_grammar(ANBN))
        self.assertTrue(report)
        self.assertEqual(report.sums, {'S': 1, 'S2': 1})

        report = check_probabilistic(parse_grammar(LEARNED))
        self.assertFalse(report)
        self.assertEqual(report.sums['N3'], Fraction(3, 2))
        self.assertIn('N3', report.failing)

        report = check_probabilistic(parse_grammar('root N1 [1]\nroot N2 [0]\nN1 -> a [1]'))
        self.assertEqual(report.sums['N2'], 0)
        self.assertFalse(report)

    def test_check_probabilistic_tolerance(self):
        g = parse_grammar('start S\nS -> a [0.4999999999999]\nS -> b [0.5]')
        self.assertFalse(check_probabilistic(g))
        self.assertTrue(check_probabilistic(g, tolerance=1e-9))

    def test_lint(self):
        self.assertEqual(lint_grammar(parse_grammar(ANBN)), [])
        warnings = lint_grammar(parse_grammar('root S [1]\nroot T [0]\nS -> a [1]\nS -> b [0]\nU -> S S [1]'))
        self.assertIn('zero-weight rule: S -> b [0]', warnings)
        self.assertIn('unreachable nonterminal: T', warnings)
        self.assertIn('unreachable nonterminal: U', warnings)
        self.assertIn('nonterminal without rules: T', warnings)

    def test_weight_vector(self):
        g = parse_grammar(ANBN)
        self.assertEqual(weight_vector(g, t('(a b)')), {'S': Fraction(1, 2), 'S2': 0})
        self.assertEqual(weight_vector(g, t('((a b) b)')), {'S': 0, 'S2': Fraction(1, 2)})
        self.assertEqual(weight_vector(g, leaf('a')), {'S': 0, 'S2': 0})

        with self.assertRaises(UnknownSymbolError):
            weight_vector(g, t('(a c)', ABC))

    def test_tree_weight(self):
        g = parse_grammar(ANBN)
        self.assertEqual(tree_weight(g, t('(a ((a b) b))')), Fraction(1, 4))
        self.assertEqual(tree_weight(g, t('(a a)')), 0)
        self.assertEqual(tree_weight(parse_grammar(LEARNED), t('(a b)')), Fraction(1, 2))

    def test_invertible_grammar_has_one_tag_per_tree(self):
        calculator = WeightCalculator(parse_grammar(ANBN))
        for tree in enumerate_trees(AB, 11):
            self.assertLessEqual(sum(1 for w in calculator(tree).values() if w), 1)

    def test_series_mass_on_small_trees(self):
        g = parse_grammar(ANBN)
        calculator = WeightCalculator(g)
        total = sum(calculator.tree_weight(tree) for tree in enumerate_trees(AB, 13))
        # a^n b^n skeletons have 4n - 1 nodes, so n <= 3 here
        self.assertEqual(total, Fraction(7, 8))
        self.assertEqual(calculator.tree_weight(comb(3)), Fraction(1, 8))

    def test_weights_match_explicit_derivations(self):
        mixed = parse_grammar('start S\nS -> A b [1/2]\nS -> S S [1/4]\nS -> a [1/4]\nA -> a [1]\nA -> S a [1]')
        for text in [ANBN, LEARNED, CHAIN]:
            g = parse_grammar(text)
            alphabet = grammar_alphabet(g)
            for tree in enumerate_trees(alphabet, 9):
                self.assertEqual(tree_weight(g, tree), brute_force_weight(g, tree), msg=tree.text)
        for tree in enumerate_trees(AB, 9):
            self.assertEqual(tree_weight(mixed, tree), brute_force_weight(mixed, tree), msg=tree.text)

    def test_recurrence(self):
        g = parse_grammar(CHAIN)
        chain = {n: tree_weight(g, right_chain(n)) for n in range(2, 11)}
        self.assertEqual(chain[2], Fraction(1, 6))
        self.assertEqual(chain[3], Fraction(1, 4))
        self.assertEqual(chain[4], Fraction(13, 72))
        for n in range(4, 11):
            self.assertEqual(chain[n], Fraction(3, 4) * chain[n - 1] - Fraction(1, 24) * chain[n - 2])


def leaf_count_mta():
    return parse_automaton(read_fixture('leafcount.mta'))


class AutomatonTests(unittest.TestCase):
    def test_multilinear_apply(self):
        m = leaf_count_mta().transitions[2]
        self.assertEqual(multilinear_apply(m, [(1, 1), (1, 1)]), (2, 1))
        self.assertEqual(multilinear_apply(m, [(2, 1), (1, 1)]), (3, 1))
        self.assertEqual(multilinear_apply(m, [(0, 0), (5, 7)]), (0, 0))

        with self.assertRaises(AutomatonShapeError):
            multilinear_apply(m, [(1, 1)])
        with self.assertRaises(AutomatonShapeError):
            multilinear_apply(m, [(1, 1, 1), (1, 1)])

    def test_as_matrix(self):
        m = leaf_count_mta().transitions[2]
        self.assertEqual(m.as_matrix(), [[0, 1, 1, 0], [0, 0, 0, 1]])

    def test_leaf_count(self):
        a = leaf_count_mta()
        self.assertEqual(value(a, t('(a (a a))', A_ONLY)), 3)
        self.assertEqual(mu(a, t('(a (a a))', A_ONLY)), (3, 1))
        for tree in enumerate_trees(A_ONLY, 9):
            self.assertEqual(a.value(tree), sum(1 for n in tree.nodes() if n.is_leaf))

    def test_hypothesis_values(self):
        a1 = load_automaton(fixture('a1.mta'))
        self.assertEqual(a1.mu(t('((a b) b)')), (0, Fraction(1, 2), 0))
        self.assertEqual(a1.mu(t(COUNTEREXAMPLE)), (0, 0, Fraction(1, 4)))
        self.assertEqual(a1.mu(leaf('a')), (1, 0, 0))
        self.assertEqual(a1.value(t(COUNTEREXAMPLE)), Fraction(1, 8))
        self.assertEqual(a1.value(t('(a b)')), Fraction(1, 2))

    def test_missing_symbols(self):
        a1 = load_automaton(fixture('a1.mta'))
        with self.assertRaises(AutomatonShapeError):
            a1.mu(t('(a c)', ABC))
        with self.assertRaises(AutomatonShapeError):
            a1.mu(node(leaf('a')))

    def test_check_colinear(self):
        self.assertTrue(check_colinear(load_automaton(fixture('a3.mta'))))

        report = check_colinear(leaf_count_mta())
        self.assertFalse(report)
        self.assertEqual(report.violation.where, 'leaf "a"')

        m = MultilinearMap(2, 2, {(1, (0, 0)): -1})
        a = MTA(A_ONLY, 2, {'a': (1, 0)}, {2: m}, (1, 0))
        report = check_colinear(a)
        self.assertFalse(report)
        self.assertEqual(report.violation.column, (0, 0))
        self.assertEqual(report.violation.reason, 'negative weight')
        self.assertFalse(is_nonnegative(a))

    def test_shape_validation(self):
        with self.assertRaises(AutomatonShapeError):
            MTA(AB, 2, {'a': (1, 0)}, {2: MultilinearMap(2, 2)}, (1, 0))
        with self.assertRaises(AutomatonShapeError):
            MTA(A_ONLY, 2, {'a': (1, 0)}, {2: MultilinearMap(2, 3)}, (1, 0))
        with self.assertRaises(AutomatonShapeError):
            MTA(A_ONLY, 2, {'a': (1, 0)}, {}, (1, 0))
        with self.assertRaises(AutomatonShapeError):
            MultilinearMap(2, 2, {(2, (0, 0)): 1})

    def test_parse_errors(self):
        bad = ['dim 1\nterminals a\nlambda 1',
               'mta\nterminals a\nlambda 1',
               'mta\ndim 2\nterminals a\nlambda 1',
               'mta\ndim 1\nterminals a\nlambda 1\nentry 2 1 1 2 1',
               'mta\ndim 1\nterminals a\nlambda 1\nentry 2 1 1 1 1\nentry 2 1 1 1 1',
               'mta\ndim 1\nterminals a\nlambda 1\nleaf b 1',
               'mta\ndim 1\nterminals a\nlambda x',
               'mta\ndim 1\nterminals a\nlambda 1\nstate 1']
        for text in bad:
            with self.assertRaises(AutomatonSyntaxError, msg=text):
                parse_automaton(text)

    def test_render_round_trip(self):
        for name in ['a1.mta', 'a3.mta', 'small.mta']:
            text = read_fixture(name)
            self.assertEqual(render_automaton(parse_automaton(text)), text)

        text = read_fixture('leafcount.mta')
        once = render_automaton(parse_automaton(text))
        self.assertEqual(render_automaton(parse_automaton(once)), once)

    def test_declared_arities_survive(self):
        text = 'mta\ndim 1\nterminals a\narities 1 3\nlambda 1\nleaf a 1\n'
        a = parse_automaton(text)
        self.assertEqual(a.alphabet.arities, (1, 3))
        self.assertEqual(a.transitions[3].entries, {})
        self.assertEqual(render_automaton(a), text)

    def test_colinear_automata_have_one_active_coordinate(self):
        for name in ['a1.mta', 'a3.mta']:
            a = load_automaton(fixture(name))
            for tree in enumerate_trees(AB, 11):
                self.assertLessEqual(sum(1 for x in a.mu(tree) if x), 1)

        converted = wcfg_to_pmta(parse_grammar(LEARNED))
        for tree in enumerate_trees(AB, 9):
            self.assertLessEqual(sum(1 for x in converted.mu(tree) if x), 1)

    def test_colinearity_survives_contexts(self):
        a1 = load_automaton(fixture('a1.mta'))
        trees = list(enumerate_trees(AB, 7))
        pairs = [(x, y) for x in trees for y in trees if x != y and any(a1.mu(y))
                 and colinear_coefficient(a1.mu(x), a1.mu(y)) is not None]
        self.assertTrue(pairs)

        contexts = [with_hole(tree, k) for tree in enumerate_trees(AB, 5) for k in range(3)]
        for x, y in pairs:
            alpha = colinear_coefficient(a1.mu(x), a1.mu(y))
            for c in contexts:
                self.assertEqual(a1.mu(compose(c, x)), tuple(alpha * v for v in a1.mu(compose(c, y))))


class TransformTests(unittest.TestCase):
    def test_pmta_to_wcfg_example(self):
        g = pmta_to_wcfg(load_automaton(fixture('small.mta')))
        self.assertEqual(render_grammar(g), 'start N1\n'
                                            'N1 -> a [1/4]\n'
                                            'N1 -> b [1/4]\n'
                                            'N1 -> N1 N1 [1/4]\n'
                                            'N1 -> N1 N2 [1/4]\n'
                                            'N2 -> a [1/4]\n'
                                            'N2 -> N2 N2 [3/4]\n')

    def test_pmta_to_wcfg_learned(self):
        g = pmta_to_wcfg(load_automaton(fixture('a3.mta')))
        self.assertEqual(render_grammar(g), LEARNED)

    def test_pmta_to_wcfg_trivial(self):
        a = MTA(A_ONLY, 1, {'a': (1, )}, {2: MultilinearMap(2, 1)}, (1, ))
        self.assertEqual(render_grammar(pmta_to_wcfg(a)), 'start N1\nN1 -> a [1]\n')

    def test_pmta_to_wcfg_rejects_negative(self):
        a = MTA(A_ONLY, 1, {'a': (-1, )}, {2: MultilinearMap(2, 1)}, (1, ))
        with self.assertRaises(NegativeWeightError):
            pmta_to_wcfg(a)

    def test_pmta_to_wcfg_avoids_terminal_names(self):
        alphabet = RankedAlphabet(('N1', 'b'), (2,))
        a = MTA(alphabet, 2, {'N1': (1, 0), 'b': (0, 1)}, {2: MultilinearMap(2, 2)}, (1, 1))
        g = pmta_to_wcfg(a)
        self.assertEqual(g.nonterminals, ('N_1', 'N_2'))
        self.assertEqual(render_grammar(g), 'root N_1 [1]\nroot N_2 [1]\nN_1 -> N1 [1]\nN_2 -> b [1]\n')

    def test_wcfg_to_pcfg_drops_dead_nonterminals(self):
        pcfg = wcfg_to_pcfg(parse_grammar('start S\nS -> a [1]\nD -> D D [1]'))
        self.assertEqual(pcfg.nonterminals, ('S', ))
        self.assertEqual([(r.lhs, r.rhs) for r in pcfg.rules], [('S', ('a', ))])
        self.assertTrue(check_probabilistic(pcfg, tolerance=1e-9))

    def test_wcfg_to_pmta(self):
        a = wcfg_to_pmta(parse_grammar(ANBN))
        self.assertEqual(a.dimension, 4)
        self.assertEqual(a.output, (1, 0, 0, 0))
        self.assertEqual(a.leaf_vectors, {'a': (0, 0, 1, 0), 'b': (0, 0, 0, 1)})
        self.assertEqual(a.transitions[2].entries, {(0, (2, 3)): Fraction(1, 2),
                                                    (0, (2, 1)): Fraction(1, 2),
                                                    (1, (0, 3)): 1})
        self.assertEqual(a.value(t('(a b)')), Fraction(1, 2))
        self.assertEqual(a.value(t('(b a)')), 0)

    def test_wcfg_to_pmta_lexical_rules(self):
        a = wcfg_to_pmta(parse_grammar(LEARNED))
        # N3 is declared first by its root line
        self.assertEqual(a.dimension, 6)
        self.assertEqual(a.leaf_vectors['a'], (0, 1, 0, 0, 0, 0))
        self.assertEqual(a.leaf_vectors['b'], (0, 0, 1, 0, 0, 0))

    @given(sparse_pmtas())
    @settings(max_examples=5, deadline=None)
    def test_pmta_to_wcfg_preserves_series(self, a):
        g = pmta_to_wcfg(a)
        calculator = WeightCalculator(g)
        for tree in enumerate_trees(AB, 9):
            self.assertEqual(calculator.tree_weight(tree), a.value(tree))

    def test_pmta_to_wcfg_preserves_hypotheses(self):
        for name in ['a1.mta', 'a3.mta', 'small.mta']:
            a = load_automaton(fixture(name))
            calculator = WeightCalculator(pmta_to_wcfg(a))
            for tree in enumerate_trees(AB, 9):
                self.assertEqual(calculator.tree_weight(tree), a.value(tree))

    def test_wcfg_to_pmta_preserves_series(self):
        for text in [ANBN, LEARNED, CHAIN]:
            g = parse_grammar(text)
            a = wcfg_to_pmta(g)
            calculator = WeightCalculator(g)
            for tree in enumerate_trees(a.alphabet, 9):
                self.assertEqual(a.value(tree), calculator.tree_weight(tree))

    def test_invertible_grammars_give_colinear_automata(self):
        for text in [ANBN, LEARNED]:
            self.assertTrue(check_colinear(wcfg_to_pmta(parse_grammar(text))))

    def test_partition_functions(self):
        table = partition_functions(parse_grammar(LEARNED), tol=1e-12)
        self.assertEqual(table['N1'], 1)
        self.assertEqual(table['N2'], 1)
        self.assertAlmostEqual(table['N3'], 2, delta=1e-9)
        self.assertAlmostEqual(table['N4'], 2, delta=1e-9)
        self.assertAlmostEqual(table.root_total, 1, delta=1e-9)
        self.assertLess(table.residual, 1e-12)

    def test_partition_of_single_rule(self):
        table = partition_functions(parse_grammar('start V\nV -> a [1]'))
        self.assertEqual(table['V'], 1)
        self.assertEqual(table.iterations, 1)

    def test_divergence(self):
        with self.assertRaises(DivergentGrammarError) as cm:
            partition_functions(parse_grammar('start V\nV -> V V [1]\nV -> a [1]'))
        self.assertGreater(cm.exception.table['V'], 1e12)

        with self.assertRaises(DivergentGrammarError):
            partition_functions(parse_grammar('start V\nV -> V V [1/2]\nV -> a [1/2]'), max_iter=10)

    def test_wcfg_to_pcfg_learned(self):
        pcfg = wcfg_to_pcfg(parse_grammar(LEARNED))
        self.assertTrue(check_probabilistic(pcfg, tolerance=1e-9))

        expected = {('N1', ('a', )): 1, ('N2', ('b', )): 1, ('N3', ('N1', 'N2')): 0.5,
                    ('N3', ('N1', 'N4')): 0.5, ('N4', ('N3', 'N2')): 1}
        self.assertEqual({(r.lhs, r.rhs) for r in pcfg.rules}, set(expected))
        for rule in pcfg.rules:
            self.assertAlmostEqual(float(rule.weight), expected[(rule.lhs, rule.rhs)], delta=1e-9)
        self.assertEqual(pcfg.root_weights, {'N3': 1})

        for n in range(1, 6):
            self.assertAlmostEqual(float(tree_weight(pcfg, comb(n))), 0.5 ** n, delta=1e-9)

    def test_wcfg_to_pcfg_keeps_pcfg(self):
        g = parse_grammar(ANBN)
        pcfg = wcfg_to_pcfg(g)
        for before, after in zip(g.rules, pcfg.rules):
            self.assertEqual((before.lhs, before.rhs), (after.lhs, after.rhs))
            self.assertAlmostEqual(float(after.weight), float(before.weight), delta=1e-9)

    def test_wcfg_to_pcfg_scalars(self):
        pcfg = wcfg_to_pcfg(parse_grammar('root V [2]\nV -> a [3]'))
        self.assertEqual(pcfg.root_weights, {'V': 1})
        self.assertEqual(pcfg.rules[0].weight, 1)


class TeacherTests(unittest.TestCase):
    def test_new_teacher(self):
        teacher = anbn_teacher()
        self.assertEqual(teacher.alphabet, AB)

        with self.assertRaises(NotInvertibleError) as cm:
            Teacher(parse_grammar(CHAIN))
        self.assertEqual(len(cm.exception.witness), 2)

        with self.assertRaises(NotProbabilisticError):
            Teacher(parse_grammar(LEARNED))
        Teacher(parse_grammar(LEARNED), weighted=True)

        with self.assertRaises(DivergentGrammarError):
            Teacher(parse_grammar('start V\nV -> V V [1]\nV -> a [1]'), weighted=True)

        with self.assertRaises(ValueError):
            Teacher(parse_grammar(ANBN), seq_bound=0)

    def test_smq(self):
        teacher = anbn_teacher()
        self.assertEqual(teacher.smq(t('(a b)')), Fraction(1, 2))
        self.assertEqual(teacher.smq(t('(a ((a b) b))')), Fraction(1, 4))
        self.assertEqual(teacher.smq(t('((a a) a)')), 0)
        self.assertEqual(teacher.smq(t('(a b)')), Fraction(1, 2))
        self.assertEqual(teacher.query_log.smq_count, 4)
        self.assertEqual(teacher.query_log.seq_count, 0)

    def test_smq_alphabet(self):
        teacher = anbn_teacher()
        with self.assertRaises(AlphabetMismatchError):
            teacher.smq(t('(a c)', ABC))
        with self.assertRaises(AlphabetMismatchError):
            teacher.smq(t('(a <>)'))

    def test_seq_finds_canonical_counterexample(self):
        teacher = anbn_teacher()
        a1 = load_automaton(fixture('a1.mta'))
        counterexample = teacher.seq(a1)
        self.assertEqual(counterexample.tree.text, COUNTEREXAMPLE)
        self.assertEqual(counterexample.true_value, 0)
        self.assertEqual(counterexample.hypothesis_value, Fraction(1, 8))
        self.assertEqual(teacher.query_log.seq_count, 1)
        self.assertEqual(teacher.query_log.smq_count, 0)

        g = parse_grammar(ANBN)
        disagreements = [tree for tree in enumerate_trees(AB, 11) if a1.value(tree) != tree_weight(g, tree)]
        self.assertEqual(disagreements, [counterexample.tree])

    def test_module_functions(self):
        teacher = new_teacher(parse_grammar(ANBN), 11)
        self.assertEqual(smq(teacher, t('(a ((a b) b))')), Fraction(1, 4))
        self.assertEqual(seq(teacher, load_automaton(fixture('a1.mta'))).tree.text, COUNTEREXAMPLE)
        self.assertEqual(teacher.query_log.snapshot(), (1, 1))

    def test_seq_bound(self):
        a1 = load_automaton(fixture('a1.mta'))
        self.assertIsNone(anbn_teacher(seq_bound=10).seq(a1))

    def test_seq_accepts_equivalent(self):
        teacher = anbn_teacher()
        self.assertIsNone(teacher.seq(load_automaton(fixture('a3.mta'))))

        converted = wcfg_to_pmta(parse_grammar(ANBN))
        self.assertIsNone(teacher.seq(converted))

    def test_seq_alphabet(self):
        with self.assertRaises(AlphabetMismatchError):
            anbn_teacher().seq(leaf_count_mta())


def table_c():
    teacher = anbn_teacher()
    table = ObservationTable(teacher.alphabet)
    complete(table, teacher, [leaf('a'), leaf('b')])
    return table, teacher


class ObservationTableTests(unittest.TestCase):
    def test_colinear_coefficient(self):
        q = Fraction(1, 4)
        h = Fraction(1, 2)
        self.assertEqual(colinear_coefficient((0, q, 0), (0, h, 0)), h)
        self.assertIsNone(colinear_coefficient((0, q, 0, 0), (0, h, 0, q)))
        self.assertEqual(colinear_coefficient((0, 0), (0, 0)), 1)
        self.assertIsNone(colinear_coefficient((0, 0), (0, 1)))
        self.assertIsNone(colinear_coefficient((1, 0), (0, 0)))

        with self.assertRaises(NegativeRatioError):
            colinear_coefficient((0, -1), (0, 2))
        with self.assertRaises(ValueError):
            colinear_coefficient((1, ), (1, 2))

    def test_fill(self):
        teacher = anbn_teacher()
        table = ObservationTable(teacher.alphabet)
        table.add_tree(leaf('a'))
        table.add_tree(leaf('b'))
        self.assertEqual(fill(table, teacher), 6)
        self.assertEqual(teacher.query_log.smq_count, 6)
        self.assertEqual(fill(table, teacher), 0)
        self.assertEqual(table.value(t('(a b)'), EMPTY_CONTEXT), Fraction(1, 2))

    def test_close_adds_basis_row(self):
        teacher = anbn_teacher()
        table = ObservationTable(teacher.alphabet)
        table.add_tree(leaf('a'))
        table.add_tree(leaf('b'))
        fill(table, teacher)

        self.assertTrue(close(table, teacher))
        self.assertEqual(table.basis, [t('(a b)')])
        self.assertFalse(close(table, teacher))

    def test_make_consistent_adds_context(self):
        teacher = anbn_teacher()
        table = ObservationTable(teacher.alphabet)
        table.add_tree(leaf('a'))
        table.add_tree(leaf('b'))
        fill(table, teacher)
        close(table, teacher)

        self.assertTrue(make_consistent(table, teacher))
        self.assertEqual([c.text for c in table.contexts], ['<>', '(<> b)'])

    def test_zero_row_joins_trees_only(self):
        table, _ = table_c()
        self.assertIn(t('(a a)'), table.trees)
        self.assertNotIn(t('(a a)'), table.basis)

    def test_complete_from_terminals(self):
        table, teacher = table_c()
        self.assertEqual([x.text for x in table.trees], ['a', 'b', '(a b)', '(a a)'])
        self.assertEqual([c.text for c in table.contexts], ['<>', '(<> b)', '(a <>)'])
        self.assertEqual([x.text for x in table.basis], ['a', 'b', '(a b)'])

        smq_count = teacher.query_log.smq_count
        complete(table, teacher, [leaf('a')])
        self.assertEqual(teacher.query_log.smq_count, smq_count)
        self.assertFalse(close(table, teacher))
        self.assertFalse(make_consistent(table, teacher))

    def test_complete_with_counterexample(self):
        table, teacher = table_c()
        complete(table, teacher, [t(COUNTEREXAMPLE)])
        self.assertEqual(len(table.contexts), 4)
        self.assertEqual(table.contexts[-1].text, '(a ((a b) <>))')
        self.assertEqual([x.text for x in table.basis], ['a', 'b', '(a b)', '((a b) b)'])

    def test_extract_first_hypothesis(self):
        table, _ = table_c()
        a1 = extract_cmta(table)
        self.assertEqual(a1.dimension, 3)
        self.assertEqual(a1.output, (0, 0, Fraction(1, 2)))
        self.assertEqual(a1.leaf_vectors, {'a': (1, 0, 0), 'b': (0, 1, 0)})
        self.assertEqual(a1.transitions[2].entries, {(2, (0, 1)): 1, (1, (2, 1)): Fraction(1, 2)})
        self.assertEqual(a1.value(t(COUNTEREXAMPLE)), Fraction(1, 8))
        self.assertEqual(render_automaton(a1), read_fixture('a1.mta'))

    def test_extract_single_basis_row(self):
        table = ObservationTable(A_ONLY)
        table.add_basis(leaf('a'))
        table.values[(leaf('a'), EMPTY_CONTEXT)] = Fraction(3)
        table.values[(t('(a a)', A_ONLY), EMPTY_CONTEXT)] = Fraction(0)
        a = extract_cmta(table)
        self.assertEqual((a.dimension, a.output, a.leaf_vectors['a']), (1, (3, ), (1, )))
        self.assertEqual(a.transitions[2].entries, {})

    def test_extract_zero_hypothesis(self):
        table = ObservationTable(A_ONLY)
        table.add_tree(leaf('a'))
        table.values[(leaf('a'), EMPTY_CONTEXT)] = Fraction(0)
        table.values[(t('(a a)', A_ONLY), EMPTY_CONTEXT)] = Fraction(0)
        a = extract_cmta(table)
        self.assertEqual((a.dimension, a.output, a.leaf_vectors['a']), (1, (0, ), (0, )))
        self.assertEqual(a.transitions[2].entries, {})
        self.assertEqual(a.value(t('((a a) a)', A_ONLY)), 0)

    def test_decompose(self):
        table, _ = table_c()
        self.assertTrue(decompose(table, t('(a a)')).is_zero)
        decomposition = decompose(table, t('((a b) b)'))
        self.assertEqual((decomposition.index, decomposition.coefficient), (1, Fraction(1, 2)))

    def test_render(self):
        table, _ = table_c()
        lines = table.render().splitlines()
        self.assertEqual(lines[0].split('\t'), ['', '', '<>', '(<> b)', '(a <>)'])
        self.assertIn('*\t(a b)\t1/2\t0\t0', lines)
        self.assertIn('+\t(a a)\t0\t0\t0', lines)
        self.assertIn('.\t((a b) b)\t0\t0\t1/4', lines)


class LearnerTests(unittest.TestCase):
    def check_hypothesis(self, hypothesis, table, full=False):
        self.assertTrue(check_colinear(hypothesis))
        for j, b in enumerate(table.basis):
            self.assertEqual(hypothesis.mu(b), tuple(int(i == j) for i in range(hypothesis.dimension)))

        rows = table.rows() if full else table.trees
        for tree in rows:
            for c in table.contexts:
                self.assertEqual(hypothesis.value(compose(c, tree)), table.value(tree, c))

        for tree in enumerate_trees(table.alphabet, 11):
            self.assertLessEqual(sum(1 for x in hypothesis.mu(tree) if x), 1)

    def check_budget(self, transcript, alphabet):
        self.assertLessEqual(transcript.seq_count, transcript.final_dimension)
        self.assertLessEqual(transcript.smq_count, transcript.budget(alphabet))
        self.assertEqual(transcript.seq_count, len(transcript.counterexamples) + 1)

    def test_learns_anbn(self):
        recorder = RecordingMessenger()
        teacher = anbn_teacher(messenger=recorder)
        learner = Learner(teacher)
        cmta, transcript = learner.run()

        self.assertEqual(transcript.seq_count, 2)
        self.assertEqual([(c.tree.text, c.true_value) for c in transcript.counterexamples], [(COUNTEREXAMPLE, 0)])
        self.assertEqual(transcript.final_dimension, 4)
        self.assertEqual(transcript.rounds, [3, 4])

        self.assertEqual(cmta.output, (0, 0, Fraction(1, 2), 0))
        self.assertEqual(cmta.transitions[2].entries,
                         {(2, (0, 1)): 1, (3, (2, 1)): 1, (2, (0, 3)): Fraction(1, 2)})
        self.assertEqual(render_automaton(cmta), read_fixture('a3.mta'))

        first = recorder.rounds[0]['hypothesis']
        self.assertEqual((first.dimension, first.output), (3, (0, 0, Fraction(1, 2))))
        self.assertEqual(first.value(t(COUNTEREXAMPLE)), Fraction(1, 8))

        self.check_hypothesis(cmta, learner.table, full=True)
        self.check_budget(transcript, teacher.alphabet)

        g = parse_grammar(ANBN)
        for tree in enumerate_trees(AB, 13):
            self.assertEqual(cmta.value(tree), tree_weight(g, tree))

    def test_every_round_is_consistent(self):
        recorder = RecordingMessenger()
        learn(anbn_teacher(messenger=recorder))
        self.assertEqual([data['round'] for data in recorder.rounds], [1, 2])

        recorder = RecordingMessenger()
        teacher = anbn_teacher(messenger=recorder)

        def check_round(data):
            self.check_hypothesis(data['hypothesis'], data['table'])

        recorder.subscribe(RoundCompleteEvent.etype, check_round)
        learn(teacher)

    def test_events(self):
        events = Messenger()
        seen = {etype: [] for etype in all_event_types}
        for etype, received in seen.items():
            events.subscribe(etype, received.append)

        _, transcript = learn(anbn_teacher(messenger=events))
        self.assertEqual([data['tree'].text for data in seen['basis_extended']], ['(a b)', 'a', 'b', '((a b) b)'])
        self.assertEqual([data['context'].text for data in seen['column_added']],
                         ['(<> b)', '(a <>)', '(a ((a b) <>))'])
        self.assertEqual(len(seen['membership_query']), transcript.smq_count)
        self.assertEqual(len(seen['equivalence_query']), 2)
        self.assertIsNone(seen['equivalence_query'][-1]['counterexample'])

    def test_learned_pcfg(self):
        cmta, _ = learn(anbn_teacher())
        wcfg = pmta_to_wcfg(cmta)
        self.assertEqual(render_grammar(wcfg), LEARNED)

        table = partition_functions(wcfg)
        self.assertAlmostEqual(table['N3'], 2, delta=1e-9)
        self.assertAlmostEqual(table['N4'], 2, delta=1e-9)

        pcfg = wcfg_to_pcfg(wcfg)
        self.assertEqual(pcfg.root_weights, {'N3': 1})
        weights = {(r.lhs, r.rhs): float(r.weight) for r in pcfg.rules}
        self.assertAlmostEqual(weights[('N3', ('N1', 'N2'))], 0.5, delta=1e-9)
        self.assertAlmostEqual(weights[('N3', ('N1', 'N4'))], 0.5, delta=1e-9)
        self.assertAlmostEqual(weights[('N4', ('N3', 'N2'))], 1, delta=1e-9)

    def test_leaf_only_target(self):
        teacher = Teacher(parse_grammar(read_fixture('single.g')))
        learner = Learner(teacher)
        cmta, transcript = learner.run()
        self.assertEqual(cmta.dimension, 1)
        self.assertEqual(transcript.counterexamples, [])
        self.assertEqual(transcript.seq_count, 1)
        self.check_hypothesis(cmta, learner.table, full=True)
        self.check_budget(transcript, teacher.alphabet)

    def test_single_pair_target(self):
        g = parse_grammar('start S\nS -> a a [1]')
        teacher = Teacher(g)
        learner = Learner(teacher)
        cmta, transcript = learner.run()
        self.assertEqual(cmta.dimension, 2)
        for tree in enumerate_trees(A_ONLY, 9):
            self.assertEqual(cmta.value(tree), 1 if tree.text == '(a a)' else 0)
        self.check_hypothesis(cmta, learner.table, full=True)
        self.check_budget(transcript, teacher.alphabet)

    def test_target_zero_on_small_trees(self):
        recorder = RecordingMessenger()
        teacher = Teacher(parse_grammar(read_fixture('deep.g')), messenger=recorder)
        learner = Learner(teacher)
        cmta, transcript = learner.run()

        first = recorder.rounds[0]['hypothesis']
        self.assertEqual((first.dimension, first.output), (1, (0, )))
        self.assertEqual([c.tree.text for c in transcript.counterexamples], ['((a a) a)'])
        self.assertEqual(transcript.rounds, [1, 3])

        self.assertEqual(cmta.output, (0, 0, 1))
        self.assertEqual(cmta.transitions[2].entries, {(1, (0, 0)): 1, (2, (1, 0)): 1})
        for tree in enumerate_trees(teacher.alphabet, teacher.seq_bound):
            self.assertEqual(cmta.value(tree), 1 if tree.text == '((a a) a)' else 0)

        self.check_hypothesis(cmta, learner.table, full=True)
        self.check_budget(transcript, teacher.alphabet)

    def test_target_zero_everywhere(self):
        teacher = Teacher(parse_grammar('start S\nS -> S S [1]\nA -> a [1]'))
        learner = Learner(teacher)
        cmta, transcript = learner.run()
        self.assertEqual((cmta.dimension, cmta.output), (1, (0, )))
        self.assertEqual(transcript.counterexamples, [])
        self.assertEqual(transcript.rounds, [1])
        self.check_hypothesis(cmta, learner.table, full=True)
        self.check_budget(transcript, teacher.alphabet)

    def test_learns_converted_grammar(self):
        teacher = Teacher(parse_grammar(LEARNED), weighted=True)
        cmta, transcript = learn(teacher)
        g = parse_grammar(LEARNED)
        for tree in enumerate_trees(AB, 13):
            self.assertEqual(cmta.value(tree), tree_weight(g, tree))
        self.check_budget(transcript, teacher.alphabet)

    def test_basis_grows_every_round(self):
        _, transcript = learn(anbn_teacher())
        self.assertEqual(transcript.rounds, sorted(set(transcript.rounds)))

    def test_round_limit(self):
        with self.assertRaises(RoundLimitError) as cm:
            learn(anbn_teacher(), LearnLimits(max_rounds=1))
        transcript = cm.exception.transcript
        self.assertEqual(transcript.rounds, [3])
        self.assertEqual(transcript.seq_count, 1)
        self.assertGreater(transcript.smq_count, 0)

    def test_table_limit(self):
        with self.assertRaises(TableLimitError) as cm:
            learn(anbn_teacher(), LearnLimits(max_table_rows=5))
        self.assertIsNotNone(cm.exception.transcript)

    def test_transcript_render(self):
        _, transcript = learn(anbn_teacher())
        lines = transcript.render().splitlines()
        self.assertEqual(lines[1:], ['seq 2', 'round 1 basis 3', f'cex {COUNTEREXAMPLE} 0', 'round 2 basis 4'])
        self.assertEqual(lines[0], f'smq {transcript.smq_count}')

    def test_query_budget(self):
        self.assertEqual(query_budget(1, 0, 2, 2), 10)
        self.assertEqual(query_budget(4, 11, 3, 2), 4 * (49 + 3 * 49 ** 2))


class LoaderTests(unittest.TestCase):
    def test_load_by_extension(self):
        self.assertEqual(load_grammar(fixture('anbn.g')).root_weights, {'S': 1})
        self.assertEqual(load_automaton(fixture('a3.mta')).dimension, 4)

    def test_errors(self):
        with self.assertRaises(LoaderError):
            load_grammar(fixture('missing.g'))
        with self.assertRaises(LoaderError):
            load_grammar(fixture('a3.mta'))

        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'broken.g')
            with open(path, 'w') as f:
                f.write('start S\nS -> a [oops]\n')
            with self.assertRaises(LoaderError) as cm:
                load_grammar(path)
            self.assertIsInstance(cm.exception.__cause__, GrammarSyntaxError)


class ConfigTests(unittest.TestCase):
    def test_defaults(self):
        config = CliConfig()
        self.assertEqual((config.seq_bound, config.tol, config.max_iter, config.emit), (13, 1e-12, 10**6, 'all'))
        self.assertEqual((config.max_rounds, config.max_table_rows), (50, 100000))

    def test_yaml_with_inheritance(self):
        config = build_config(fixture('strict.yaml'))
        self.assertEqual(config.seq_bound, 11)
        self.assertEqual(config.emit, 'pcfg')
        self.assertEqual(config.max_rounds, 10)
        self.assertEqual(config.tol, 1e-10)

        config = build_config(fixture('strict.yaml'), {'seq_bound': 9, 'emit': None})
        self.assertEqual((config.seq_bound, config.emit), (9, 'pcfg'))

    def test_validation(self):
        with self.assertRaises(ConfigError):
            CliConfig(seq_bound=0)
        with self.assertRaises(ConfigError):
            CliConfig(emit='json')
        with self.assertRaises(ConfigError):
            CliConfig(tol=-1.0)
        with self.assertRaises(ConfigError):
            CliConfig.from_mapping({'seq_bund': 3})

    def test_override_dict(self):
        base = {'a': 1, 'nested': {'x': 1, 'y': [1, 2]}}
        merged = override_dict(base, {'nested': {'y': [3]}, 'b': 2})
        self.assertEqual(merged, {'a': 1, 'b': 2, 'nested': {'x': 1, 'y': [3]}})
        self.assertEqual(base['nested']['y'], [1, 2])


def run_cli(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


class CliTests(unittest.TestCase):
    def test_learn_pcfg(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, 'learned.pcfg')
            code, _, _ = run_cli('learn', '--grammar', fixture('anbn.g'), '--emit', 'pcfg', '--out', out)
            self.assertEqual(code, 0)

            pcfg = load_grammar(out)
            self.assertTrue(check_probabilistic(pcfg, tolerance=1e-9))
            self.assertEqual(set(pcfg.root_weights), {'N3'})
            for n in range(1, 5):
                self.assertAlmostEqual(float(tree_weight(pcfg, comb(n))), 0.5 ** n, delta=1e-9)

            with open(out + '.transcript') as f:
                self.assertIn('seq 2', f.read().splitlines())

    def test_learn_all(self):
        code, out, _ = run_cli('learn', '--grammar', fixture('anbn.g'))
        self.assertEqual(code, 0)
        for header in ['# cmta', '# wcfg', '# pcfg', '# transcript']:
            self.assertIn(header, out.splitlines())
        self.assertIn(LEARNED, out)

    def test_learn_single(self):
        code, out, _ = run_cli('learn', '--grammar', fixture('single.g'), '--emit', 'cmta')
        self.assertEqual(code, 0)
        self.assertIn('dim 1', out.splitlines())
        self.assertIn('seq 1', out.splitlines())

    def test_learn_rejects_ambiguous_target(self):
        code, _, err = run_cli('learn', '--grammar', fixture('ambiguous.g'))
        self.assertEqual(code, 2)
        self.assertIn('not invertible', err)
        self.assertIn('N1 -> a N1', err)

    def test_learn_limits(self):
        code, _, err = run_cli('learn', '--grammar', fixture('anbn.g'), '--max-rounds', '1')
        self.assertEqual(code, 3)
        self.assertIn('round 1 basis 3', err)

    def test_learn_with_config(self):
        code, out, _ = run_cli('learn', '--grammar', fixture('anbn.g'), '--config', fixture('learn.yaml'))
        self.assertEqual(code, 0)
        self.assertNotIn('# cmta', out)

    def test_eval(self):
        self.assertEqual(run_cli('eval', '--grammar', fixture('anbn.g'), '--tree', '(a b)')[:2], (0, '1/2\n'))
        self.assertEqual(run_cli('eval', '--cmta', fixture('a3.mta'), '--tree', '(a ((a b) b))')[:2], (0, '1/4\n'))
        self.assertEqual(run_cli('eval', '--cmta', fixture('a1.mta'), '--tree', COUNTEREXAMPLE)[:2], (0, '1/8\n'))

    def test_eval_errors(self):
        self.assertEqual(run_cli('eval', '--grammar', fixture('anbn.g'), '--tree', '(a c)')[0], 2)
        self.assertEqual(run_cli('eval', '--grammar', fixture('anbn.g'), '--tree', '(a <>)')[0], 64)
        self.assertEqual(run_cli('eval', '--grammar', fixture('missing.g'), '--tree', 'a')[0], 2)

    def test_convert(self):
        code, out, _ = run_cli('convert', '--cmta', fixture('a3.mta'), '--to', 'wcfg')
        self.assertEqual((code, out), (0, LEARNED))

        code, out, _ = run_cli('convert', '--wcfg', fixture('learned.g'), '--to', 'pcfg')
        self.assertEqual(code, 0)
        pcfg = parse_grammar(out)
        self.assertEqual(pcfg.root_weights, {'N3': 1})
        self.assertTrue(check_probabilistic(pcfg, tolerance=1e-9))

    def test_convert_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            cmta_path = os.path.join(tmp, 'anbn.mta')
            wcfg_path = os.path.join(tmp, 'anbn.wcfg')
            self.assertEqual(run_cli('convert', '--grammar', fixture('anbn.g'), '--to', 'cmta', '--out', cmta_path)[0], 0)
            self.assertEqual(run_cli('convert', '--cmta', cmta_path, '--to', 'wcfg', '--out', wcfg_path)[0], 0)

            for tree in ['(a b)', '(b a)', '(a ((a b) b))', '((a b) b)', COUNTEREXAMPLE]:
                original = run_cli('eval', '--grammar', fixture('anbn.g'), '--tree', tree)[1]
                converted = run_cli('eval', '--grammar', wcfg_path, '--tree', tree)[1]
                self.assertEqual(original, converted)

    def test_check(self):
        self.assertEqual(run_cli('check', '--grammar', fixture('anbn.g'))[:2],
                         (0, 'invertible: yes; probabilistic: yes\n'))
        self.assertEqual(run_cli('check', '--cmta', fixture('a3.mta'))[:2], (0, 'colinear: yes; nonnegative: yes\n'))

        code, out, _ = run_cli('check', '--grammar', fixture('dup.g'))
        self.assertEqual(code, 1)
        self.assertIn('witness: N1 -> a a [1] | N2 -> a a [1]', out)

        code, out, _ = run_cli('check', '--cmta', fixture('leafcount.mta'))
        self.assertEqual(code, 1)
        self.assertTrue(out.startswith('colinear: no; nonnegative: yes'))

    def test_enumerate(self):
        code, out, _ = run_cli('enumerate', '--grammar', fixture('anbn.g'), '--max-nodes', '3')
        self.assertEqual(code, 0)
        self.assertEqual(out, 'a\t0\nb\t0\n(a a)\t0\n(a b)\t1/2\n(b a)\t0\n(b b)\t0\n')

        code, out, _ = run_cli('enumerate', '--cmta', fixture('leafcount.mta'), '--max-nodes', '3')
        self.assertEqual(out, 'a\t1\n(a a)\t2\n')

        self.assertEqual(run_cli('enumerate', '--grammar', fixture('anbn.g'), '--max-nodes', '0')[0], 64)

    def test_usage_errors(self):
        self.assertEqual(run_cli('learn')[0], 64)
        self.assertEqual(run_cli('learn', '--grammar', fixture('anbn.g'), '--bogus')[0], 64)
        self.assertEqual(run_cli('frobnicate')[0], 64)
        self.assertEqual(run_cli('eval', '--grammar', fixture('anbn.g'), '--cmta', fixture('a3.mta'),
                                 '--tree', 'a')[0], 64)

    def restore_root_logger(self):
        root = logging.getLogger()
        level, handlers = root.level, list(root.handlers)

        def restore():
            for handler in root.handlers[:]:
                if handler not in handlers:
                    root.removeHandler(handler)
            root.setLevel(level)

        self.addCleanup(restore)

    def test_verbose_unsubscribes(self):
        self.restore_root_logger()
        code, out, _ = run_cli('eval', '--verbose', '--grammar', fixture('anbn.g'), '--tree', '(a b)')
        self.assertEqual((code, out), (0, '1/2\n'))
        for etype in all_event_types:
            self.assertEqual(messenger.subscribers.get(etype, []), [])

    def test_learn_target_zero_on_small_trees(self):
        code, out, _ = run_cli('learn', '--grammar', fixture('deep.g'), '--emit', 'wcfg')
        self.assertEqual(code, 0)
        self.assertTrue(out.startswith('start N3\nN1 -> a [1]\nN2 -> N1 N1 [1]\nN3 -> N2 N1 [1]\n'))

    def test_learn_rejects_divergent_weighted_target(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'divergent.g')
            with open(path, 'w') as f:
                f.write('start V\nV -> V V [1]\nV -> a [1]\n')
            code, _, err = run_cli('learn', '--grammar', path, '--weighted')
        self.assertEqual(code, 2)
        self.assertIn('Partition function exceeded', err)

    def test_deterministic_output(self):
        first = run_cli('learn', '--grammar', fixture('anbn.g'))
        second = run_cli('learn', '--grammar', fixture('anbn.g'))
        self.assertEqual(first, second)

    def test_arities_override(self):
        code, out, _ = run_cli('enumerate', '--grammar', fixture('single.g'), '--arities', '1', '--max-nodes', '2')
        self.assertEqual((code, out), (0, 'a\t1\n(a)\t0\n'))


if __name__ == '__main__':
    unittest.main()
