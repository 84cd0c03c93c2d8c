from .trees import *
from .grammar import *
from .automata import *
from .transform import *
from .oracle import *
from .learner import *
from .loaders import LoaderError, get_default_loaders, load_grammar, load_automaton
from .config import CliConfig, ConfigError, build_config, load_yaml
from .messenger import (
    Messenger, MembershipQueryEvent, EquivalenceQueryEvent, BasisExtendedEvent, ColumnAddedEvent,
    RoundCompleteEvent, messenger
)
from .cli import main, UsageError
