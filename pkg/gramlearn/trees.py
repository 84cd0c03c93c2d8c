import re
from dataclasses import dataclass
from functools import cached_property
from itertools import product


HOLE = '<>'
INTERNAL = '?'

_symbol_pattern = re.compile(r'^[A-Za-z0-9_]+$')
_token_pattern = re.compile(r'<>|[()]|[^\s()<>]+|\S')


@dataclass(frozen=True)
class RankedAlphabet:
    terminals: tuple
    arities: tuple

    def __post_init__(self):
        terminals = tuple(self.terminals)
        arities = tuple(sorted(set(self.arities)))
        object.__setattr__(self, 'terminals', terminals)
        object.__setattr__(self, 'arities', arities)

        if not terminals:
            raise ValueError('Alphabet must contain at least one terminal')
        if not arities:
            raise ValueError('Alphabet must contain at least one arity')
        if len(set(terminals)) != len(terminals):
            raise ValueError(f'Terminal names must be distinct: {terminals}')

        for name in terminals:
            if not _symbol_pattern.match(name):
                raise ValueError(f'Invalid terminal name "{name}"')

        for k in arities:
            if not isinstance(k, int) or k < 1:
                raise ValueError(f'Arity must be a positive integer, got {k}')

    @property
    def max_arity(self):
        return self.arities[-1]

    @property
    def size(self):
        """Number of ranked symbols: one per terminal plus one internal symbol per arity"""
        return len(self.terminals) + len(self.arities)

    def contains(self, tree):
        for node in tree.nodes():
            if node.is_leaf:
                if node.symbol != HOLE and node.symbol not in self.terminals:
                    return False
            elif len(node.children) not in self.arities:
                return False
        return True


@dataclass(frozen=True, eq=False)
class Tree:
    """Skeletal tree. Leaves carry a terminal (or the hole), internal nodes carry '?'."""
    symbol: str
    children: tuple = ()

    @cached_property
    def text(self):
        if self.is_leaf:
            return self.symbol
        return '(' + ' '.join(child.text for child in self.children) + ')'

    @cached_property
    def size(self):
        return 1 + sum(child.size for child in self.children)

    @cached_property
    def hole_count(self):
        if self.is_leaf:
            return 1 if self.symbol == HOLE else 0
        return sum(child.hole_count for child in self.children)

    @property
    def is_leaf(self):
        return not self.children

    @property
    def key(self):
        return (self.size, self.text)

    def nodes(self):
        yield self
        for child in self.children:
            yield from child.nodes()

    def __eq__(self, other):
        return isinstance(other, Tree) and self.text == other.text

    def __hash__(self):
        return hash(self.text)

    def __lt__(self, other):
        return self.key < other.key

    def __str__(self):
        return self.text

    def __repr__(self):
        return f'Tree({self.text!r})'


@dataclass(frozen=True, eq=False)
class Context:
    """A tree with exactly one hole."""
    tree: Tree

    def __post_init__(self):
        if self.tree.hole_count != 1:
            raise ValueError(f'A context must contain exactly one hole: "{self.tree.text}"')

    @property
    def text(self):
        return self.tree.text

    @property
    def size(self):
        return self.tree.size

    @property
    def key(self):
        return self.tree.key

    def __eq__(self, other):
        return isinstance(other, Context) and self.text == other.text

    def __hash__(self):
        return hash(('context', self.text))

    def __lt__(self, other):
        return self.key < other.key

    def __str__(self):
        return self.text

    def __repr__(self):
        return f'Context({self.text!r})'


def leaf(symbol):
    return Tree(symbol)


def node(*children):
    if not children:
        raise ValueError('An internal node needs at least one child')
    return Tree(INTERNAL, tuple(children))


EMPTY_CONTEXT = Context(leaf(HOLE))


def parse_structured_string(text, alphabet):
    """Parses a structured string like "((a b) c)" into a Tree, or into a Context when it holds "<>"

    Tokens are terminal names, "<>" and parentheses. When every terminal name is a single
    character, glued tokens like "ab" are split into characters.
    """
    tokens = _tokenize(text, alphabet)
    if not tokens:
        raise TreeSyntaxError('Empty structured string', 0)

    tree, pos = _parse_item(tokens, 0, alphabet)
    if pos != len(tokens):
        token, offset = tokens[pos]
        if token == ')':
            raise TreeSyntaxError('Unbalanced parentheses: unexpected ")"', offset)
        raise TreeSyntaxError(f'Unexpected token "{token}" after the end of the tree', offset)

    holes = tree.hole_count
    if holes > 1:
        raise TreeSyntaxError(f'More than one hole in "{text.strip()}"', 0)
    if holes == 1:
        return Context(tree)
    return tree


def _tokenize(text, alphabet):
    single_chars = all(len(name) == 1 for name in alphabet.terminals)
    tokens = []
    for match in _token_pattern.finditer(text):
        token = match.group(0)
        offset = match.start()
        if token in ('(', ')', HOLE) or token in alphabet.terminals:
            tokens.append((token, offset))
        elif single_chars and all(ch in alphabet.terminals for ch in token):
            tokens.extend((ch, offset + i) for i, ch in enumerate(token))
        else:
            raise TreeSyntaxError(f'Unknown token "{token}"', offset)
    return tokens


def _parse_item(tokens, pos, alphabet):
    if pos >= len(tokens):
        raise TreeSyntaxError('Unbalanced parentheses: unexpected end of input', -1)

    token, offset = tokens[pos]
    if token == ')':
        raise TreeSyntaxError('Unbalanced parentheses: unexpected ")"', offset)
    if token != '(':
        return leaf(token), pos + 1

    children = []
    pos += 1
    while True:
        if pos >= len(tokens):
            raise TreeSyntaxError('Unbalanced parentheses: missing ")"', offset)
        if tokens[pos][0] == ')':
            break
        child, pos = _parse_item(tokens, pos, alphabet)
        children.append(child)

    if not children:
        raise TreeSyntaxError('Empty group "()"', offset)
    if len(children) not in alphabet.arities:
        raise TreeSyntaxError(f'Arity {len(children)} is not in the alphabet {alphabet.arities}', offset)
    return node(*children), pos + 1


def render_structured_string(tree):
    """Works for trees and contexts alike"""
    return tree.text


def compose(context, tree):
    """Plugs tree into the hole of context"""
    return _substitute(context.tree, tree)


def compose_contexts(outer, inner):
    return Context(_substitute(outer.tree, inner.tree))


def _substitute(tree, replacement):
    if tree.is_leaf:
        return replacement if tree.symbol == HOLE else tree

    children = tuple(_substitute(child, replacement) if child.hole_count else child
                     for child in tree.children)
    return Tree(INTERNAL, children)


def subtrees(tree):
    found = set()
    for sub in tree.nodes():
        found.add(sub)
    return sorted(found)


def subtree_closure(trees):
    found = set()
    for tree in trees:
        found.update(tree.nodes())
    return sorted(found)


def one_step_extensions(trees, alphabet):
    trees = sorted(set(trees))
    if not trees:
        return []

    result = set()
    for k in alphabet.arities:
        for children in product(trees, repeat=k):
            result.add(node(*children))
    return sorted(result)


def extensions_containing(trees, tree, alphabet):
    pool = set(trees)
    pool.add(tree)
    return [t for t in one_step_extensions(pool, alphabet) if tree in t.children]


def context_extensions(trees, alphabet):
    """Depth-one contexts whose children are the hole and members of trees"""
    trees = sorted(set(trees))
    hole = leaf(HOLE)

    result = set()
    for k in alphabet.arities:
        for position in range(k):
            for fillers in product(trees, repeat=k - 1):
                children = list(fillers)
                children.insert(position, hole)
                result.add(Context(node(*children)))
    return sorted(result)


def enumerate_trees(alphabet, max_nodes):
    """Yields every skeletal tree with at most max_nodes nodes, by node count and then text"""
    if max_nodes < 1:
        raise ValueError(f'max_nodes must be positive, got {max_nodes}')

    by_size = {}
    for n in range(1, max_nodes + 1):
        by_size[n] = _trees_of_size(n, alphabet, by_size)
        yield from sorted(by_size[n], key=lambda t: t.text)


def _trees_of_size(n, alphabet, by_size):
    if n == 1:
        return [leaf(name) for name in alphabet.terminals]

    trees = []
    for k in alphabet.arities:
        for sizes in _compositions(n - 1, k):
            pools = [by_size[s] for s in sizes]
            for children in product(*pools):
                trees.append(node(*children))
    return trees


def _compositions(total, parts):
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class TreeSyntaxError(ValueError):
    def __init__(self, message, position):
        super().__init__(f'{message} (at offset {position})' if position >= 0 else message)
        self.position = position
