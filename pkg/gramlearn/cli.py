import argparse
import logging
import sys
from dataclasses import fields

from .trees import Context, TreeSyntaxError, enumerate_trees, parse_structured_string
from .grammar import (
    GrammarError, WeightCalculator, check_invertible, check_probabilistic, format_weight,
    grammar_alphabet, lint_grammar, render_grammar
)
from .automata import AutomatonError, check_colinear, is_nonnegative, render_automaton
from .transform import TransformError, pmta_to_wcfg, wcfg_to_pmta, wcfg_to_pcfg
from .oracle import OracleError, Teacher
from .learner import LearnLimits, LearnerError, LimitError, learn
from .loaders import LoaderError, load_automaton, load_grammar
from .config import CliConfig, ConfigError, EMIT_CHOICES, build_config
from .messenger import all_event_types, messenger


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_LIMIT = 3
EXIT_USAGE = 64

PCFG_DIGITS = 12

command_registry = {}


def register(name=None):
    def decorator(func):
        command_registry[name or func.__name__] = func
        return func

    return decorator


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML file with default settings')
    common.add_argument('--verbose', action='store_true', help='Log learning events')
    common.add_argument('--arities', type=int, nargs='+',
                        help='Internal-node arities added to the skeletal alphabet of a grammar')
    common.add_argument('--out', help='Write output to this file instead of standard output')

    parser = ArgumentParser(prog='gramlearn',
                            description='Learns structurally unambiguous PCFGs from membership and equivalence queries')
    subparsers = parser.add_subparsers(dest='command', required=True)

    learn_parser = subparsers.add_parser('learn', parents=[common], help='Learn a grammar from a target grammar')
    learn_parser.add_argument('--grammar', required=True, help='Target grammar file')
    learn_parser.add_argument('--emit', choices=EMIT_CHOICES)
    learn_parser.add_argument('--seq-bound', type=int, dest='seq_bound',
                              help='Largest tree (in nodes) compared by equivalence queries')
    learn_parser.add_argument('--max-rounds', type=int, dest='max_rounds')
    learn_parser.add_argument('--max-table-rows', type=int, dest='max_table_rows')
    learn_parser.add_argument('--weighted', action='store_true', default=None,
                              help='Accept targets whose rule weights do not sum to one')
    _add_partition_flags(learn_parser)

    eval_parser = subparsers.add_parser('eval', parents=[common], help='Evaluate a structured string')
    _add_model_flags(eval_parser)
    eval_parser.add_argument('--tree', required=True, help='Structured string, e.g. "(a (b c))"')

    convert_parser = subparsers.add_parser('convert', parents=[common], help='Convert between grammars and automata')
    _add_model_flags(convert_parser)
    convert_parser.add_argument('--to', required=True, choices=('wcfg', 'pcfg', 'cmta'))
    _add_partition_flags(convert_parser)

    check_parser = subparsers.add_parser('check', parents=[common], help='Validate a grammar or an automaton')
    _add_model_flags(check_parser)

    enumerate_parser = subparsers.add_parser('enumerate', parents=[common], help='Tabulate the tree series')
    _add_model_flags(enumerate_parser)
    enumerate_parser.add_argument('--max-nodes', type=int, dest='max_nodes')
    return parser


def _add_model_flags(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument('--grammar', '--wcfg', dest='grammar', help='Grammar file')
    group.add_argument('--cmta', help='Automaton file')


def _add_partition_flags(parser):
    parser.add_argument('--tol', type=float, help='Convergence tolerance of partition functions')
    parser.add_argument('--max-iter', type=int, dest='max_iter')


def config_from_args(args):
    names = [f.name for f in fields(CliConfig)]
    overrides = {name: getattr(args, name, None) for name in names}
    return build_config(args.config, overrides)


def write_file(path, text):
    try:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
    except OSError as e:
        raise LoaderError(f'Failed to write "{path}": {e.strerror or e}')


def write_output(text, config, stdout):
    if config.out:
        write_file(config.out, text)
    else:
        stdout.write(text)


class Model:
    """A grammar or an automaton seen as a tree series"""

    def __init__(self, grammar=None, automaton=None, arities=None):
        self.grammar = grammar
        self.automaton = automaton
        if grammar is not None:
            self.alphabet = grammar_alphabet(grammar, arities=arities)
            self._evaluate = WeightCalculator(grammar).tree_weight
        else:
            self.alphabet = automaton.alphabet
            cache = {}
            self._evaluate = lambda tree: automaton.value(tree, cache)

    def __call__(self, tree):
        return self._evaluate(tree)


def load_model(args, config):
    if args.grammar:
        return Model(grammar=load_grammar(args.grammar), arities=config.arities)
    return Model(automaton=load_automaton(args.cmta))


@register('learn')
def cmd_learn(args, config, stdout):
    grammar = load_grammar(args.grammar)
    teacher = Teacher(grammar, config.seq_bound, weighted=config.weighted, arities=config.arities,
                      tol=config.tol, max_iter=config.max_iter)
    cmta, transcript = learn(teacher, LearnLimits(config.max_rounds, config.max_table_rows))

    sections = []
    if config.emit in ('cmta', 'all'):
        sections.append(('cmta', render_automaton(cmta)))
    if config.emit in ('wcfg', 'pcfg', 'all'):
        wcfg = pmta_to_wcfg(cmta)
        if config.emit != 'pcfg':
            sections.append(('wcfg', render_grammar(wcfg)))
        if config.emit != 'wcfg':
            pcfg = wcfg_to_pcfg(wcfg, config.tol, config.max_iter)
            sections.append(('pcfg', render_grammar(pcfg, PCFG_DIGITS)))

    if config.emit == 'all':
        text = ''.join(f'# {name}\n{body}' for name, body in sections)
    else:
        text = sections[0][1]

    if config.out:
        write_file(config.out, text)
        write_file(config.out + '.transcript', transcript.render())
    else:
        stdout.write(text)
        stdout.write('# transcript\n' + transcript.render())
    return EXIT_OK


@register('eval')
def cmd_eval(args, config, stdout):
    model = load_model(args, config)
    tree = parse_structured_string(args.tree, model.alphabet)
    if isinstance(tree, Context):
        raise UsageError(f'"{args.tree}" is a context; --tree needs a tree without a hole')

    write_output(format_weight(model(tree)) + '\n', config, stdout)
    return EXIT_OK


@register('convert')
def cmd_convert(args, config, stdout):
    model = load_model(args, config)

    if model.grammar is not None:
        grammar = model.grammar
        if args.to == 'cmta':
            write_output(render_automaton(wcfg_to_pmta(grammar, config.arities)), config, stdout)
            return EXIT_OK
    else:
        if args.to == 'cmta':
            write_output(render_automaton(model.automaton), config, stdout)
            return EXIT_OK
        grammar = pmta_to_wcfg(model.automaton)

    if args.to == 'pcfg':
        text = render_grammar(wcfg_to_pcfg(grammar, config.tol, config.max_iter), PCFG_DIGITS)
    else:
        text = render_grammar(grammar)
    write_output(text, config, stdout)
    return EXIT_OK


def _yes_no(flag):
    return 'yes' if flag else 'no'


@register('check')
def cmd_check(args, config, stdout):
    model = load_model(args, config)
    lines = []

    if model.grammar is not None:
        invertibility = check_invertible(model.grammar)
        probability = check_probabilistic(model.grammar)
        passed = bool(invertibility) and bool(probability)

        lines.append(f'invertible: {_yes_no(invertibility)}; probabilistic: {_yes_no(probability)}')
        if not invertibility:
            first, second = invertibility.witness
            lines.append(f'witness: {first} | {second}')
        for name in probability.failing:
            lines.append(f'sum {name}: {format_weight(probability.sums[name])}')
        if not probability.is_normalized(probability.root_sum):
            lines.append(f'sum of root weights: {format_weight(probability.root_sum)}')
        lines.extend(f'warning: {warning}' for warning in lint_grammar(model.grammar))
    else:
        colinearity = check_colinear(model.automaton)
        nonnegative = is_nonnegative(model.automaton)
        passed = bool(colinearity) and nonnegative

        lines.append(f'colinear: {_yes_no(colinearity)}; nonnegative: {_yes_no(nonnegative)}')
        if not colinearity:
            lines.append(f'violation: {colinearity.violation}')

    write_output('\n'.join(lines) + '\n', config, stdout)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


@register('enumerate')
def cmd_enumerate(args, config, stdout):
    model = load_model(args, config)
    lines = [f'{tree.text}\t{format_weight(model(tree))}'
             for tree in enumerate_trees(model.alphabet, config.max_nodes)]
    write_output('\n'.join(lines) + '\n', config, stdout)
    return EXIT_OK


def _log_event(etype):
    def callback(data):
        logger.debug('%s: %s', etype, data)
    return callback


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    callbacks = []

    try:
        args = build_parser().parse_args(argv)
        config = config_from_args(args)

        if args.verbose:
            logging.basicConfig(level=logging.DEBUG, format='%(name)s %(levelname)s %(message)s')
            for etype in all_event_types:
                callback = _log_event(etype)
                messenger.subscribe(etype, callback)
                callbacks.append((etype, callback))

        return command_registry[args.command](args, config, stdout)
    except (UsageError, ConfigError) as e:
        stderr.write(f'usage error: {e}\n')
        return EXIT_USAGE
    except LimitError as e:
        stderr.write(f'limit exceeded: {e}\n')
        if e.transcript is not None:
            stderr.write(e.transcript.render())
        return EXIT_LIMIT
    except (LoaderError, GrammarError, AutomatonError, TreeSyntaxError,
            OracleError, TransformError, LearnerError) as e:
        stderr.write(f'error: {e}\n')
        return EXIT_INVALID
    finally:
        for etype, callback in callbacks:
            messenger.unsubscribe(etype, callback)


class UsageError(Exception):
    pass
