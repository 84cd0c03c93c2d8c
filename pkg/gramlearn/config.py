import os
from copy import deepcopy
from dataclasses import dataclass, fields, asdict

import yaml


def override_dict(base_dict, new_dict):
    res = deepcopy(base_dict)

    for k, v in dict(new_dict).items():
        if k in res:
            res[k] = override_structure(res[k], v)
        else:
            res[k] = v

    return res


def override_structure(base_value, new_value):
    if is_primitive(new_value) or is_primitive(base_value):
        return new_value

    if type(base_value) != type(new_value):
        return new_value

    if isinstance(base_value, list):
        return new_value

    return override_dict(base_value, new_value)


def is_primitive(x):
    return not isinstance(x, (dict, list, bytes))


def finalize(x, base_dir='.'):
    """Resolves 'inherit' keys; inherited paths are relative to the including file"""
    if is_primitive(x):
        return x

    if isinstance(x, list):
        return [finalize(item, base_dir) for item in x]

    mapping = {k: finalize(v, base_dir) for k, v in x.items()}

    inheritance_path = mapping.pop('inherit', None)
    if inheritance_path:
        base_dict = load_yaml(os.path.join(base_dir, inheritance_path))
        mapping = override_structure(base_dict, mapping)
    return mapping


def load_yaml(path):
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f'Failed to load configuration "{path}": {e}')

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f'Configuration "{path}" must be a mapping')
    return finalize(data, os.path.dirname(path) or '.')


EMIT_CHOICES = ('cmta', 'wcfg', 'pcfg', 'all')


@dataclass
class CliConfig:
    seq_bound: int = 13
    tol: float = 1e-12
    max_iter: int = 10**6
    emit: str = 'all'
    max_rounds: int = 50
    max_table_rows: int = 100000
    max_nodes: int = 5
    weighted: bool = False
    arities: list = None
    out: str = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ('seq_bound', 'max_iter', 'max_rounds', 'max_table_rows', 'max_nodes'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f'"{name}" must be a positive integer, got {value!r}')

        if isinstance(self.tol, bool) or not isinstance(self.tol, (int, float)) or self.tol <= 0:
            raise ConfigError(f'"tol" must be a positive number, got {self.tol!r}')
        self.tol = float(self.tol)

        if self.emit not in EMIT_CHOICES:
            raise ConfigError(f'"emit" must be one of {EMIT_CHOICES}, got {self.emit!r}')

        if self.arities is not None:
            if not isinstance(self.arities, list) or \
                    not all(isinstance(k, int) and not isinstance(k, bool) and k > 0 for k in self.arities):
                raise ConfigError(f'"arities" must be a list of positive integers, got {self.arities!r}')

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f'Unknown configuration keys: {unknown}')
        return cls(**mapping)

    def override(self, mapping):
        """New config with the non-None values of mapping applied on top"""
        updates = {k: v for k, v in mapping.items() if v is not None}
        return self.from_mapping(override_dict(asdict(self), updates))


def build_config(path=None, overrides=None):
    config = CliConfig()
    if path:
        config = config.override(load_yaml(path))
    if overrides:
        config = config.override(overrides)
    return config


class ConfigError(ValueError):
    pass
