"""
Frostlab configuration loading

A YAML file with `seed`, `threads`, `output_dir` and a list of `experiments`.
Every experiment entry remembers the line it starts on so that validation
errors can point back into the file.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from .errors import ConfigError

EXPERIMENT_NAMES = ('gen', 'energy', 'project', 'l2', 'incidence', 'furstenberg', 'sumproduct', 'sweep')
DEFAULT_SEED = 20240601
DEFAULT_OUTPUT_DIR = 'results'


@dataclass
class ExperimentConfig:
    name: str
    params: Dict[str, Any]
    line: int

    def fail(self, message: str) -> ConfigError:
        return ConfigError(f"line {self.line}: {self.name}: {message}")


@dataclass
class FrostlabConfig:
    seed: int = DEFAULT_SEED
    threads: Optional[int] = None
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    experiments: List[ExperimentConfig] = field(default_factory=list)


def _line_of(node: Optional[yaml.Node]) -> int:
    return node.start_mark.line + 1 if node is not None else 1


def _key_nodes(root: Optional[yaml.Node]) -> Dict[str, yaml.Node]:
    if not isinstance(root, yaml.MappingNode):
        return {}
    return {key.value: value for key, value in root.value if isinstance(key, yaml.ScalarNode)}


def parse_config(text: str, base_dir: Union[str, Path] = '.') -> FrostlabConfig:
    """Parse and validate configuration text"""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else 1
        raise ConfigError(f"line {line}: invalid YAML: {getattr(e, 'problem', e)}")

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("line 1: the configuration must be a mapping")
    nodes = _key_nodes(root)

    known = {'seed', 'threads', 'output_dir', 'experiments'}
    for key in data:
        if key not in known:
            raise ConfigError(f"line {_line_of(nodes.get(key))}: unknown key {key!r}")

    seed = data.get('seed', DEFAULT_SEED)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"line {_line_of(nodes.get('seed'))}: seed must be an integer in [0, 2^64)")

    threads = data.get('threads')
    if threads is not None and (not isinstance(threads, int) or isinstance(threads, bool) or threads < 1):
        raise ConfigError(f"line {_line_of(nodes.get('threads'))}: threads must be a positive integer or null")

    output_dir = Path(base_dir) / str(data.get('output_dir') or DEFAULT_OUTPUT_DIR)

    entries = data.get('experiments') or []
    entry_node = nodes.get('experiments')
    if not isinstance(entries, list):
        raise ConfigError(f"line {_line_of(entry_node)}: experiments must be a list")
    item_nodes = entry_node.value if isinstance(entry_node, yaml.SequenceNode) else []

    experiments = []
    for index, entry in enumerate(entries):
        line = _line_of(item_nodes[index] if index < len(item_nodes) else entry_node)
        if not isinstance(entry, dict) or 'name' not in entry:
            raise ConfigError(f"line {line}: each experiment needs a `name`")
        name = entry['name']
        if name not in EXPERIMENT_NAMES:
            raise ConfigError(f"line {line}: unknown experiment {name!r}; "
                              f"expected one of {', '.join(EXPERIMENT_NAMES)}")
        params = {key: value for key, value in entry.items() if key != 'name'}
        experiments.append(ExperimentConfig(name, params, line))

    return FrostlabConfig(seed, threads, output_dir, experiments)


def load_config(path: Union[str, Path]) -> FrostlabConfig:
    """Load configuration from a YAML file"""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}")
    return parse_config(text, path.parent)
