import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .trees import RankedAlphabet
from .grammar import parse_weight, format_weight


class MultilinearMap:
    """Sparse d x d^k matrix of a k-linear map.

    Entries are keyed by (target, (j1, ..., jk)) with 0-based coordinates. Columns of the
    dense view are ordered row-major over the tuple, j1 most significant.
    """

    def __init__(self, arity, dimension, entries=None):
        if arity < 1:
            raise AutomatonShapeError(f'Arity must be positive, got {arity}')
        if dimension < 1:
            raise AutomatonShapeError(f'Dimension must be positive, got {dimension}')

        self.arity = arity
        self.dimension = dimension
        self.entries = {}
        for (target, column), coefficient in (entries or {}).items():
            self.set(target, column, coefficient)

    def set(self, target, column, coefficient):
        column = tuple(column)
        if len(column) != self.arity:
            raise AutomatonShapeError(f'Column {column} does not have arity {self.arity}')
        for index in (target, ) + column:
            if not 0 <= index < self.dimension:
                raise AutomatonShapeError(f'Coordinate {index + 1} is outside dimension {self.dimension}')

        coefficient = Fraction(coefficient)
        if coefficient:
            self.entries[(target, column)] = coefficient
        else:
            self.entries.pop((target, column), None)

    def get(self, target, column):
        return self.entries.get((target, tuple(column)), Fraction(0))

    def columns(self):
        """Maps each column tuple with a nonzero entry to its {target: coefficient} dict"""
        result = {}
        for (target, column), coefficient in sorted(self.entries.items(), key=lambda item: (item[0][1], item[0][0])):
            result.setdefault(column, {})[target] = coefficient
        return result

    def apply(self, args):
        if len(args) != self.arity:
            raise AutomatonShapeError(f'Expected {self.arity} arguments, got {len(args)}')
        for vector in args:
            if len(vector) != self.dimension:
                raise AutomatonShapeError(f'Vector of length {len(vector)} does not match dimension {self.dimension}')

        result = [Fraction(0)] * self.dimension
        for (target, column), coefficient in self.entries.items():
            term = coefficient
            for vector, j in zip(args, column):
                term *= vector[j]
                if not term:
                    break
            if term:
                result[target] += term
        return tuple(result)

    def as_matrix(self):
        d, k = self.dimension, self.arity
        matrix = [[Fraction(0)] * (d ** k) for _ in range(d)]
        for (target, column), coefficient in self.entries.items():
            flat = 0
            for j in column:
                flat = flat * d + j
            matrix[target][flat] = coefficient
        return matrix

    def __eq__(self, other):
        return (isinstance(other, MultilinearMap) and self.arity == other.arity
                and self.dimension == other.dimension and self.entries == other.entries)

    def __repr__(self):
        return f'MultilinearMap(arity={self.arity}, dimension={self.dimension}, entries={len(self.entries)})'


def multilinear_apply(m, args):
    return m.apply(args)


@dataclass
class MTA:
    """Multiplicity tree automaton over a skeletal alphabet with rational weights"""
    alphabet: RankedAlphabet
    dimension: int
    leaf_vectors: dict
    transitions: dict
    output: tuple

    def __post_init__(self):
        d = self.dimension
        if d < 1:
            raise AutomatonShapeError(f'Dimension must be positive, got {d}')

        self.output = _as_vector(self.output, d, 'output vector')
        self.leaf_vectors = {name: _as_vector(vector, d, f'leaf vector of "{name}"')
                             for name, vector in self.leaf_vectors.items()}

        for name in self.alphabet.terminals:
            if name not in self.leaf_vectors:
                raise AutomatonShapeError(f'Missing leaf vector for terminal "{name}"')
        for name in self.leaf_vectors:
            if name not in self.alphabet.terminals:
                raise AutomatonShapeError(f'Leaf vector for unknown terminal "{name}"')

        for k in self.alphabet.arities:
            if k not in self.transitions:
                raise AutomatonShapeError(f'Missing transition map for arity {k}')
        for k, m in self.transitions.items():
            if k not in self.alphabet.arities:
                raise AutomatonShapeError(f'Transition map for arity {k} is not in the alphabet')
            if m.arity != k or m.dimension != d:
                raise AutomatonShapeError(f'Transition map for arity {k} has shape ({m.dimension}, {m.arity})')

    def mu(self, tree, cache=None):
        if cache is not None and tree in cache:
            return cache[tree]

        if tree.is_leaf:
            vector = self.leaf_vectors.get(tree.symbol)
            if vector is None:
                raise AutomatonShapeError(f'Terminal "{tree.symbol}" has no leaf vector')
        else:
            m = self.transitions.get(len(tree.children))
            if m is None:
                raise AutomatonShapeError(f'No transition map for arity {len(tree.children)}')
            vector = m.apply([self.mu(child, cache) for child in tree.children])

        if cache is not None:
            cache[tree] = vector
        return vector

    def value(self, tree, cache=None):
        vector = self.mu(tree, cache)
        return sum((w * x for w, x in zip(self.output, vector) if w and x), Fraction(0))


def _as_vector(values, dimension, what):
    vector = tuple(Fraction(v) for v in values)
    if len(vector) != dimension:
        raise AutomatonShapeError(f'The {what} has length {len(vector)}, expected {dimension}')
    return vector


def mu(a, t):
    return a.mu(t)


def value(a, t):
    return a.value(t)


@dataclass
class ColinearityViolation:
    where: str
    column: tuple
    reason: str

    def __str__(self):
        if self.column is None:
            return f'{self.where}: {self.reason}'
        column = ' '.join(str(j + 1) for j in self.column)
        return f'{self.where}, column ({column}): {self.reason}'


@dataclass
class ColinearityReport:
    colinear: bool
    violation: ColinearityViolation = None

    def __bool__(self):
        return self.colinear


def _vector_violation(vector, where):
    if any(x < 0 for x in vector):
        return ColinearityViolation(where, None, 'negative weight')
    if sum(1 for x in vector if x) > 1:
        return ColinearityViolation(where, None, 'more than one nonzero entry')
    return None


def check_colinear(a):
    """Checks the CMTA shape, reporting the first violation.

    Scanned in order: output vector, leaf vectors by terminal, then transition columns by
    arity and column tuple.
    """
    if any(x < 0 for x in a.output):
        return ColinearityReport(False, ColinearityViolation('output vector', None, 'negative weight'))

    for name in a.alphabet.terminals:
        violation = _vector_violation(a.leaf_vectors[name], f'leaf "{name}"')
        if violation:
            return ColinearityReport(False, violation)

    for k in sorted(a.transitions):
        for column, targets in a.transitions[k].columns().items():
            where = f'arity {k}'
            if any(c < 0 for c in targets.values()):
                return ColinearityReport(False, ColinearityViolation(where, column, 'negative weight'))
            if len(targets) > 1:
                return ColinearityReport(False, ColinearityViolation(where, column, 'more than one nonzero entry'))

    return ColinearityReport(True)


def is_nonnegative(a):
    if any(x < 0 for x in a.output):
        return False
    if any(x < 0 for vector in a.leaf_vectors.values() for x in vector):
        return False
    return all(c >= 0 for m in a.transitions.values() for c in m.entries.values())


HEADER = 'mta'

_directive = re.compile(r'^(?P<name>[a-z]+)\b\s*(?P<rest>.*)$')


def parse_automaton(text):
    """Reads the line-based automaton format. Coordinates in the text are 1-based."""
    header_seen = False
    dimension = None
    terminals = None
    declared_arities = None
    output = None
    leaves = {}
    entries = []

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue

        match = _directive.match(line)
        if not match:
            raise AutomatonSyntaxError(f'Cannot parse "{line}"', line_no)
        name = match.group('name')
        fields = match.group('rest').split()

        if not header_seen:
            if name != HEADER or fields:
                raise AutomatonSyntaxError(f'Expected "{HEADER}" header', line_no)
            header_seen = True
            continue

        if name == 'dim':
            dimension = _parse_int(fields, line_no, 'dim')
            if dimension < 1:
                raise AutomatonSyntaxError('Dimension must be positive', line_no)
        elif name == 'terminals':
            if not fields:
                raise AutomatonSyntaxError('Expected at least one terminal', line_no)
            terminals = tuple(fields)
        elif name == 'arities':
            declared_arities = [_to_int(field, line_no) for field in fields]
        elif name == 'lambda':
            output = _parse_weights(fields, dimension, line_no)
        elif name == 'leaf':
            if not fields:
                raise AutomatonSyntaxError('Expected a terminal name', line_no)
            if fields[0] in leaves:
                raise AutomatonSyntaxError(f'Leaf vector for "{fields[0]}" given twice', line_no)
            leaves[fields[0]] = _parse_weights(fields[1:], dimension, line_no)
        elif name == 'entry':
            entries.append((_parse_entry(fields, dimension, line_no), line_no))
        else:
            raise AutomatonSyntaxError(f'Unknown directive "{name}"', line_no)

    if not header_seen:
        raise AutomatonSyntaxError(f'Missing "{HEADER}" header', 0)
    if dimension is None:
        raise AutomatonSyntaxError('Missing "dim" line', 0)
    if terminals is None:
        raise AutomatonSyntaxError('Missing "terminals" line', 0)
    if output is None:
        raise AutomatonSyntaxError('Missing "lambda" line', 0)

    arities = set(declared_arities or [])
    arities.update(k for (k, _, _, _), _ in entries)
    if not arities:
        arities = {2}

    try:
        alphabet = RankedAlphabet(terminals, tuple(arities))
    except ValueError as e:
        raise AutomatonSyntaxError(str(e), 0)

    transitions = {k: MultilinearMap(k, dimension) for k in alphabet.arities}
    for (k, target, column, weight), line_no in entries:
        m = transitions[k]
        if m.get(target, column):
            raise AutomatonSyntaxError('Duplicate transition entry', line_no)
        m.set(target, column, weight)

    leaf_vectors = {name: leaves.pop(name, (0, ) * dimension) for name in alphabet.terminals}
    if leaves:
        raise AutomatonSyntaxError(f'Leaf vectors for undeclared terminals: {sorted(leaves)}', 0)

    return MTA(alphabet, dimension, leaf_vectors, transitions, output)


def _to_int(field, line_no):
    try:
        return int(field)
    except ValueError:
        raise AutomatonSyntaxError(f'Expected an integer, got "{field}"', line_no)


def _parse_int(fields, line_no, name):
    if len(fields) != 1:
        raise AutomatonSyntaxError(f'"{name}" takes exactly one integer', line_no)
    return _to_int(fields[0], line_no)


def _parse_weights(fields, dimension, line_no):
    if dimension is None:
        raise AutomatonSyntaxError('"dim" must come before any vector', line_no)
    if len(fields) != dimension:
        raise AutomatonSyntaxError(f'Expected {dimension} weights, got {len(fields)}', line_no)
    try:
        return tuple(parse_weight(field) for field in fields)
    except ValueError as e:
        raise AutomatonSyntaxError(str(e), line_no)


def _parse_entry(fields, dimension, line_no):
    if dimension is None:
        raise AutomatonSyntaxError('"dim" must come before any entry', line_no)
    if len(fields) < 4:
        raise AutomatonSyntaxError('Expected "entry <k> <i> <j1> ... <jk> <w>"', line_no)

    k = _to_int(fields[0], line_no)
    if k < 1 or len(fields) != k + 3:
        raise AutomatonSyntaxError(f'Entry of arity {k} needs {k} column coordinates', line_no)

    coordinates = [_to_int(field, line_no) for field in fields[1:-1]]
    for c in coordinates:
        if not 1 <= c <= dimension:
            raise AutomatonSyntaxError(f'Coordinate {c} is outside 1..{dimension}', line_no)

    try:
        weight = parse_weight(fields[-1])
    except ValueError as e:
        raise AutomatonSyntaxError(str(e), line_no)

    target = coordinates[0] - 1
    column = tuple(c - 1 for c in coordinates[1:])
    return k, target, column, weight


def render_automaton(a):
    def weights(vector):
        return ' '.join(format_weight(x) for x in vector)

    lines = [HEADER,
             f'dim {a.dimension}',
             f'terminals {" ".join(a.alphabet.terminals)}',
             f'arities {" ".join(str(k) for k in a.alphabet.arities)}',
             f'lambda {weights(a.output)}']

    for name in a.alphabet.terminals:
        lines.append(f'leaf {name} {weights(a.leaf_vectors[name])}')

    for k in sorted(a.transitions):
        for (target, column), coefficient in sorted(a.transitions[k].entries.items()):
            coordinates = ' '.join(str(j + 1) for j in (target, ) + column)
            lines.append(f'entry {k} {coordinates} {format_weight(coefficient)}')
    return '\n'.join(lines) + '\n'


class AutomatonError(Exception):
    pass


class AutomatonShapeError(AutomatonError, ValueError):
    pass


class AutomatonSyntaxError(AutomatonError, ValueError):
    def __init__(self, message, line):
        super().__init__(f'line {line}: {message}' if line else message)
        self.line = line
