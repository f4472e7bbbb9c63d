import dataclasses
import json
import os

from .backends import AgentBackendConfig
from .directives import DirectiveBaseConfig
from .embedding import EmbeddingProviderConfig
from .evolution import EvolutionConfig
from .exceptions import ConfigError
from .prompts import PANEL_ROLES, AgentRole
from .retrieval import RetrievalSettings
from .verdict import TERM_BINS
from .workflow import PanelConfig

BACKEND_NAMES = tuple(r.value for r in AgentRole) + ('teacher', 'expert')


@dataclasses.dataclass
class PathsConfig:
    """
    Args:
        - statutes (``str``): statute file
        - corpus (``str``): corpus file
        - memory_dir (``str``): directory of the archive, the directive base and the evolution log
        - output_dir (``str``): directory of predictions, traces and reports
        - template_dir (``str``): directory overriding the packaged prompt templates
    """
    statutes: str = ''
    corpus: str = ''
    memory_dir: str = 'memory'
    output_dir: str = 'outputs'
    template_dir: str = ''

    def resolve(self, root):
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if value and not os.path.isabs(value):
                setattr(self, field.name, os.path.normpath(os.path.join(root, value)))
        return self


@dataclasses.dataclass
class ArchiveConfig:
    tau: float = 0.85
    buffer_capacity: int = 10000

    def validate(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigError('archive tau must be in (0, 1), got {}'.format(self.tau))
        if self.buffer_capacity < 1:
            raise ConfigError('buffer_capacity must be >= 1, got {}'.format(self.buffer_capacity))
        return self


@dataclasses.dataclass
class MetricsConfig:
    average_over: str = 'gold'
    acc_mode: str = 'first'

    def validate(self):
        if self.average_over not in ('gold', 'all'):
            raise ConfigError('average_over must be gold or all, got {}'.format(self.average_over))
        if self.acc_mode not in ('first', 'set'):
            raise ConfigError('acc_mode must be first or set, got {}'.format(self.acc_mode))
        return self


@dataclasses.dataclass
class RunConfig:
    """
    Everything a run needs. One JSON file holds it; command-line flags override single fields.
    """
    paths: PathsConfig = dataclasses.field(default_factory=PathsConfig)
    panel: PanelConfig = dataclasses.field(default_factory=PanelConfig)
    retrieval: RetrievalSettings = dataclasses.field(default_factory=RetrievalSettings)
    evolution: EvolutionConfig = dataclasses.field(default_factory=EvolutionConfig)
    directives: DirectiveBaseConfig = dataclasses.field(default_factory=DirectiveBaseConfig)
    archive: ArchiveConfig = dataclasses.field(default_factory=ArchiveConfig)
    embedding: EmbeddingProviderConfig = dataclasses.field(default_factory=EmbeddingProviderConfig)
    metrics: MetricsConfig = dataclasses.field(default_factory=MetricsConfig)
    backends: dict = dataclasses.field(default_factory=dict)
    term_bins: str = 'eleven'
    seed: int = 0
    epochs: int = 1
    concurrency: int = 1
    archive_enabled: bool = True
    evolve_enabled: bool = True
    max_reflections: int = 3

    def validate(self, check_paths=False, roles=PANEL_ROLES):
        """
        This function checks every setting. With ``check_paths`` the statute file (and the
        corpus file when one is set) must exist; ``roles`` must all have a backend.
        """
        self.panel.validate()
        self.retrieval.validate()
        self.evolution.validate()
        self.directives.validate()
        self.archive.validate()
        self.embedding.validate()
        self.metrics.validate()
        if self.term_bins not in TERM_BINS:
            raise ConfigError('term_bins must be one of {}, got {}'.format(', '.join(TERM_BINS), self.term_bins))
        for name in ('epochs', 'concurrency', 'max_reflections'):
            if getattr(self, name) < 1:
                raise ConfigError('{} must be >= 1, got {}'.format(name, getattr(self, name)))
        for name, backend in self.backends.items():
            if name not in BACKEND_NAMES:
                raise ConfigError('unknown backend name {}; expected one of {}'.format(name, ', '.join(BACKEND_NAMES)))
            backend.validate()
        missing = [r.value if isinstance(r, AgentRole) else r for r in roles
                   if (r.value if isinstance(r, AgentRole) else r) not in self.backends]
        if missing:
            raise ConfigError('no backend configured for {}'.format(', '.join(missing)))
        if check_paths:
            if not os.path.exists(self.paths.statutes):
                raise ConfigError('statute file not found: {}'.format(self.paths.statutes or '(unset)'))
            if self.paths.corpus and not os.path.exists(self.paths.corpus):
                raise ConfigError('corpus file not found: {}'.format(self.paths.corpus))
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError('unknown config keys: {}'.format(', '.join(sorted(unknown))))
        try:
            sections = {
                'paths': PathsConfig(**d.pop('paths', {})),
                'panel': PanelConfig(**d.pop('panel', {})),
                'retrieval': RetrievalSettings.from_dict(d.pop('retrieval', {})),
                'evolution': EvolutionConfig(**d.pop('evolution', {})),
                'directives': DirectiveBaseConfig(**d.pop('directives', {})),
                'archive': ArchiveConfig(**d.pop('archive', {})),
                'embedding': EmbeddingProviderConfig(**d.pop('embedding', {})),
                'metrics': MetricsConfig(**d.pop('metrics', {})),
                'backends': {name: AgentBackendConfig(**b) for name, b in d.pop('backends', {}).items()},
            }
            return cls(**sections, **d)
        except TypeError as e:
            raise ConfigError('invalid config: {}'.format(e))


def load_config(file_name):
    """
    This function reads a JSON run config. Relative paths are resolved against the config
    file's directory.

    Returns:
        - ``jurispanel.config.RunConfig``
    """
    try:
        with open(file_name, encoding='utf-8') as f:
            d = json.load(f)
    except OSError as e:
        raise ConfigError('cannot read config {}: {}'.format(file_name, e))
    except json.JSONDecodeError as e:
        raise ConfigError('config {} is not valid JSON: {}'.format(file_name, e.msg))
    if not isinstance(d, dict):
        raise ConfigError('config {} must hold a JSON object'.format(file_name))
    config = RunConfig.from_dict(d)
    config.paths.resolve(os.path.dirname(os.path.abspath(file_name)))
    return config


def save_config(config, file_name):
    parent = os.path.dirname(file_name)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(file_name, 'w', encoding='utf-8') as f:
        f.write(json.dumps(config.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + '\n')


def apply_overrides(config, no_memory=False, seed=None, concurrency=None, epochs=None):
    """
    This function applies command-line overrides in place.
    """
    if no_memory:
        config.panel.memory_enabled = False
    if seed is not None:
        config.seed = seed
    if concurrency is not None:
        config.concurrency = concurrency
    if epochs is not None:
        config.epochs = epochs
    return config
