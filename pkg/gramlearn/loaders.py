import os

from .grammar import parse_grammar, GrammarError
from .automata import parse_automaton, AutomatonError


GRAMMAR = 'grammar'
AUTOMATON = 'automaton'


def get_default_loaders():
    loaders = {}
    for ext in ['.g', '.cfg', '.wcfg', '.pcfg']:
        loaders[ext] = GrammarLoader()

    for ext in ['.mta', '.cmta']:
        loaders[ext] = AutomatonLoader()
    return loaders


class FileLoader:
    kind = None

    def __call__(self, path):
        try:
            with open(path, encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise LoaderError(f'Failed to read "{path}": {e.strerror or e}')

        try:
            return self.parse(text)
        except (GrammarError, AutomatonError) as e:
            raise LoaderError(f'Failed to load {self.kind} "{path}": {e}') from e

    def parse(self, text):
        raise NotImplementedError


class GrammarLoader(FileLoader):
    kind = GRAMMAR

    def parse(self, text):
        return parse_grammar(text)


class AutomatonLoader(FileLoader):
    kind = AUTOMATON

    def parse(self, text):
        return parse_automaton(text)


def load_file(path, kind, loaders=None):
    """Loads path with the loader registered for its extension.

    Files with an unknown extension are read as the expected kind.
    """
    loaders = loaders or get_default_loaders()
    _, extension = os.path.splitext(path)
    loader = loaders.get(extension.lower())
    if loader is None:
        loader = GrammarLoader() if kind == GRAMMAR else AutomatonLoader()
    elif loader.kind != kind:
        raise LoaderError(f'"{path}" holds a {loader.kind}, expected a {kind}')
    return loader(path)


def load_grammar(path, loaders=None):
    return load_file(path, GRAMMAR, loaders)


def load_automaton(path, loaders=None):
    return load_file(path, AUTOMATON, loaders)


class LoaderError(Exception):
    pass
