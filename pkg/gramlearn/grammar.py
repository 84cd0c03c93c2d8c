import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .trees import RankedAlphabet, HOLE


ARROW = '->'

_identifier = re.compile(r'[A-Za-z0-9_]+')
_line_token = re.compile(r'\s*(?:(?P<arrow>->)|(?P<weight>\[[^\]]*\])|(?P<symbol>[A-Za-z0-9_]+)|(?P<other>\S))')


def parse_weight(text):
    """Parses "p/q", an integer or a finite decimal into an exact Fraction"""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f'Invalid weight "{text}"')


def format_weight(weight, float_digits=None):
    if float_digits is not None:
        return format(float(weight), f'.{float_digits}g')

    weight = Fraction(weight)
    if weight.denominator == 1:
        return str(weight.numerator)
    return f'{weight.numerator}/{weight.denominator}'


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple
    weight: Fraction = Fraction(1)

    def render(self, float_digits=None):
        rhs = ' '.join(self.rhs)
        return f'{self.lhs} {ARROW} {rhs} [{format_weight(self.weight, float_digits)}]'

    def __str__(self):
        return self.render()


@dataclass
class WCFG:
    """Weighted CFG with a root distribution instead of a single start symbol.

    Immutable after construction. A rule with a single terminal on the right-hand side
    is lexical: it tags a leaf. Every other rule creates an internal node whose arity
    is the length of its right-hand side.
    """
    nonterminals: tuple
    terminals: tuple
    rules: tuple
    root_weights: dict

    lexical_rules: dict = field(init=False, repr=False)
    internal_rules: dict = field(init=False, repr=False)
    rules_by_lhs: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.nonterminals = tuple(self.nonterminals)
        self.terminals = tuple(self.terminals)
        self.rules = tuple(self.rules)
        self.root_weights = {name: Fraction(w) for name, w in self.root_weights.items()}
        self._validate()

        self.lexical_rules = defaultdict(list)
        self.internal_rules = defaultdict(list)
        self.rules_by_lhs = defaultdict(list)
        for rule in self.rules:
            self.rules_by_lhs[rule.lhs].append(rule)
            if self.is_lexical(rule):
                self.lexical_rules[rule.rhs[0]].append(rule)
            else:
                self.internal_rules[len(rule.rhs)].append(rule)

    def _validate(self):
        nonterminals = set(self.nonterminals)
        terminals = set(self.terminals)

        clash = nonterminals & terminals
        if clash:
            raise GrammarValidationError(f'Symbols declared both as terminal and nonterminal: {sorted(clash)}')

        for name in self.terminals:
            if name in (HOLE, '?'):
                raise GrammarValidationError(f'Terminal name "{name}" is reserved')

        seen = {}
        for rule in self.rules:
            if rule.lhs not in nonterminals:
                raise GrammarValidationError(f'Undeclared nonterminal "{rule.lhs}" in rule "{rule}"')
            if not rule.rhs:
                raise GrammarValidationError(f'Empty right-hand side for "{rule.lhs}"')
            for symbol in rule.rhs:
                if symbol not in nonterminals and symbol not in terminals:
                    raise GrammarValidationError(f'Undeclared symbol "{symbol}" in rule "{rule}"')
            if rule.weight < 0:
                raise GrammarValidationError(f'Negative weight in rule "{rule}"')

            key = (rule.lhs, rule.rhs)
            if key in seen:
                raise GrammarValidationError(f'Duplicate rule "{rule.lhs} {ARROW} {" ".join(rule.rhs)}"')
            seen[key] = rule

        if not self.root_weights:
            raise GrammarValidationError('Grammar has no root')
        for name, weight in self.root_weights.items():
            if name not in nonterminals:
                raise GrammarValidationError(f'Root "{name}" is not a nonterminal')
            if weight < 0:
                raise GrammarValidationError(f'Negative root weight for "{name}"')
        if not any(w > 0 for w in self.root_weights.values()):
            raise GrammarValidationError('At least one root weight must be positive')

    def is_lexical(self, rule):
        return len(rule.rhs) == 1 and rule.rhs[0] in self.terminals

    def is_terminal(self, symbol):
        return symbol in self.terminals

    @property
    def arities(self):
        return tuple(sorted(self.internal_rules))


def parse_grammar(text):
    root_weights = {}
    start_used = False
    rules = []
    nonterminals = []
    rhs_symbols = []

    def declare(name):
        if name not in nonterminals:
            nonterminals.append(name)

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split('#', 1)[0]
        if not line.strip():
            continue

        tokens = _tokenize_line(line, line_no)
        kinds = [kind for kind, _, _ in tokens]
        first_kind, first_value, _ = tokens[0]

        if first_kind == 'symbol' and first_value in ('start', 'root') and ARROW not in [v for _, v, _ in tokens]:
            name, weight = _parse_root_line(tokens, line_no)
            if first_value == 'start':
                if weight is not None:
                    raise GrammarSyntaxError('"start" takes no weight; use "root"', line_no, tokens[-1][2])
                weight = Fraction(1)
                start_used = True
            elif weight is None:
                raise GrammarSyntaxError('"root" requires a bracketed weight', line_no, tokens[-1][2] + 1)

            if name in root_weights:
                raise GrammarSyntaxError(f'Root "{name}" declared twice', line_no, tokens[1][2])
            root_weights[name] = weight
            declare(name)
            continue

        if len(tokens) < 2 or kinds[0] != 'symbol' or kinds[1] != 'arrow':
            raise GrammarSyntaxError(f'Expected "<nonterminal> {ARROW} ..."', line_no, tokens[0][2])

        lhs = first_value
        body = tokens[2:]
        weight = Fraction(1)
        if body and body[-1][0] == 'weight':
            weight = _weight_token(body[-1], line_no)
            body = body[:-1]

        rhs = []
        for kind, value, column in body:
            if kind != 'symbol':
                raise GrammarSyntaxError(f'Unexpected "{value}"', line_no, column)
            rhs.append(value)

        if not rhs:
            raise GrammarSyntaxError(f'Empty right-hand side for "{lhs}"', line_no, tokens[1][2])
        if weight < 0:
            raise GrammarSyntaxError(f'Negative weight {weight}', line_no, tokens[-1][2])

        declare(lhs)
        rhs_symbols.extend(rhs)
        rules.append(Rule(lhs, tuple(rhs), weight))

    if start_used and len(root_weights) > 1:
        raise GrammarValidationError('"start" cannot be combined with other root declarations')
    if not root_weights:
        raise GrammarValidationError('Grammar has no root: add "start <N>" or "root <N> [w]"')

    terminals = []
    for symbol in rhs_symbols:
        if symbol not in nonterminals and symbol not in terminals:
            terminals.append(symbol)

    return WCFG(nonterminals, terminals, rules, root_weights)


def _tokenize_line(line, line_no):
    tokens = []
    pos = 0
    while pos < len(line):
        match = _line_token.match(line, pos)
        if not match or match.end() == pos:
            break
        kind = match.lastgroup
        value = match.group(kind)
        column = match.start(kind) + 1
        if kind == 'other':
            raise GrammarSyntaxError(f'Unexpected character "{value}"', line_no, column)
        tokens.append((kind, value, column))
        pos = match.end()
    return tokens


def _parse_root_line(tokens, line_no):
    if len(tokens) < 2 or tokens[1][0] != 'symbol':
        raise GrammarSyntaxError('Expected a nonterminal name', line_no, tokens[0][2])

    name = tokens[1][1]
    rest = tokens[2:]
    if not rest:
        return name, None
    if len(rest) > 1 or rest[0][0] != 'weight':
        raise GrammarSyntaxError(f'Unexpected "{rest[0][1]}"', line_no, rest[0][2])
    return name, _weight_token(rest[0], line_no)


def _weight_token(token, line_no):
    _, value, column = token
    try:
        weight = parse_weight(value[1:-1])
    except ValueError as e:
        raise GrammarSyntaxError(str(e), line_no, column)
    if weight < 0:
        raise GrammarSyntaxError(f'Negative weight {weight}', line_no, column)
    return weight


def render_grammar(grammar, float_digits=None):
    lines = []
    roots = grammar.root_weights
    if len(roots) == 1 and list(roots.values())[0] == 1 and float_digits is None:
        lines.append(f'start {list(roots)[0]}')
    else:
        for name, weight in roots.items():
            lines.append(f'root {name} [{format_weight(weight, float_digits)}]')

    for rule in grammar.rules:
        lines.append(rule.render(float_digits))
    return '\n'.join(lines) + '\n'


class WeightCalculator:
    """Computes per-nonterminal weights of skeletal trees, memoized over subtrees"""

    def __init__(self, grammar):
        self.grammar = grammar
        self.cache = {}

    def __call__(self, tree):
        cached = self.cache.get(tree)
        if cached is not None:
            return cached

        if tree.is_leaf:
            vector = self._leaf_weights(tree.symbol)
        else:
            vector = self._node_weights(tree.children)

        self.cache[tree] = vector
        return vector

    def _leaf_weights(self, symbol):
        grammar = self.grammar
        if symbol not in grammar.terminals:
            raise UnknownSymbolError(f'Unknown terminal "{symbol}"')

        vector = dict.fromkeys(grammar.nonterminals, Fraction(0))
        for rule in grammar.lexical_rules.get(symbol, []):
            vector[rule.lhs] += rule.weight
        return vector

    def _node_weights(self, children):
        grammar = self.grammar
        vector = dict.fromkeys(grammar.nonterminals, Fraction(0))
        child_vectors = [None if child.is_leaf else self(child) for child in children]

        for rule in grammar.internal_rules.get(len(children), []):
            weight = rule.weight
            for symbol, child, child_vector in zip(rule.rhs, children, child_vectors):
                weight *= self._factor(symbol, child, child_vector)
                if not weight:
                    break
            if weight:
                vector[rule.lhs] += weight
        return vector

    def _factor(self, symbol, child, child_vector):
        if self.grammar.is_terminal(symbol):
            return 1 if child.is_leaf and child.symbol == symbol else 0
        if child_vector is None:
            child_vector = self(child)
        return child_vector[symbol]

    def tree_weight(self, tree):
        vector = self(tree)
        return sum((w * vector[name] for name, w in self.grammar.root_weights.items()), Fraction(0))


def weight_vector(grammar, tree):
    return dict(WeightCalculator(grammar)(tree))


def tree_weight(grammar, tree):
    return WeightCalculator(grammar).tree_weight(tree)


@dataclass
class InvertibilityReport:
    invertible: bool
    witness: tuple = None

    def __bool__(self):
        return self.invertible


def check_invertible(grammar):
    """A grammar is invertible when no right-hand side is shared by two distinct nonterminals"""
    by_rhs = {}
    for rule in grammar.rules:
        other = by_rhs.get(rule.rhs)
        if other is not None and other.lhs != rule.lhs:
            return InvertibilityReport(False, (other, rule))
        by_rhs.setdefault(rule.rhs, rule)
    return InvertibilityReport(True)


@dataclass
class ProbabilityReport:
    sums: dict
    root_sum: Fraction
    tolerance: float = 0

    def is_normalized(self, total):
        return abs(total - 1) <= self.tolerance

    @property
    def failing(self):
        return [name for name, total in self.sums.items() if not self.is_normalized(total)]

    @property
    def is_probabilistic(self):
        return not self.failing and self.is_normalized(self.root_sum)

    def __bool__(self):
        return self.is_probabilistic


def check_probabilistic(grammar, tolerance=0):
    sums = {name: Fraction(0) for name in grammar.nonterminals}
    for rule in grammar.rules:
        sums[rule.lhs] += rule.weight
    root_sum = sum(grammar.root_weights.values(), Fraction(0))
    return ProbabilityReport(sums, root_sum, tolerance)


def reachable_nonterminals(grammar):
    """Nonterminals reachable from a positive root through positive-weight rules"""
    stack = [name for name, w in grammar.root_weights.items() if w > 0]
    reached = set(stack)
    while stack:
        name = stack.pop()
        for rule in grammar.rules_by_lhs.get(name, []):
            if rule.weight <= 0:
                continue
            for symbol in rule.rhs:
                if symbol in grammar.terminals or symbol in reached:
                    continue
                reached.add(symbol)
                stack.append(symbol)
    return reached


def lint_grammar(grammar):
    warnings = []
    for rule in grammar.rules:
        if rule.weight == 0:
            warnings.append(f'zero-weight rule: {rule}')

    reachable = reachable_nonterminals(grammar)
    for name in grammar.nonterminals:
        if name not in reachable:
            warnings.append(f'unreachable nonterminal: {name}')
        if not grammar.rules_by_lhs.get(name):
            warnings.append(f'nonterminal without rules: {name}')
    return warnings


def grammar_alphabet(grammar, default_arities=(2,), arities=None):
    """Skeletal alphabet of a grammar: its terminals and the arities of its non-lexical rules.

    Extra arities are added to the grammar's own; the default applies only when neither
    gives any.
    """
    if not grammar.terminals:
        raise GrammarValidationError('Grammar has no terminals, so it has no skeletal alphabet')
    own = set(grammar.arities) | set(arities or ())
    return RankedAlphabet(grammar.terminals, tuple(own) or tuple(default_arities))


class GrammarError(Exception):
    pass


class GrammarValidationError(GrammarError, ValueError):
    pass


class GrammarSyntaxError(GrammarValidationError):
    def __init__(self, message, line, column):
        super().__init__(f'line {line}, column {column}: {message}')
        self.line = line
        self.column = column


class UnknownSymbolError(GrammarError, ValueError):
    pass
