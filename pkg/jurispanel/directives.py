import dataclasses
import enum
import json
import logging
import os
import threading

import torch

from . import util
from .exceptions import ConfigError, DirectiveError, UnknownIdError
from .verdict import LabelSet

logger = logging.getLogger(__name__)


class Outcome(enum.Enum):
    SUPPORTED = 'supported'
    CONTRADICTED = 'contradicted'


@dataclasses.dataclass
class DirectiveBaseConfig:
    """
    Confidence lifecycle constants of the directive base.

    Args:
        - prune_threshold (``float``): directives strictly below it are removed by `DirectiveBase.prune`
        - tau_max (``float``): confidence cap
        - support_increment (``float``): confidence added per supporting outcome
        - decay_factor (``float``): multiplier applied per contradicting outcome, in (0, 1)
        - initial_confidence (``float``): confidence of a new directive
    """
    prune_threshold: float = 0.3
    tau_max: float = 10.0
    support_increment: float = 1.0
    decay_factor: float = 0.8
    initial_confidence: float = 1.0

    def validate(self):
        if not 0.0 < self.prune_threshold < self.tau_max:
            raise ConfigError('need 0 < prune_threshold < tau_max, got {} and {}'.format(self.prune_threshold, self.tau_max))
        if not 0.0 < self.decay_factor < 1.0:
            raise ConfigError('decay_factor must be in (0, 1), got {}'.format(self.decay_factor))
        if self.support_increment < 0.0:
            raise ConfigError('support_increment must be >= 0, got {}'.format(self.support_increment))
        if not 0.0 <= self.initial_confidence <= self.tau_max:
            raise ConfigError('initial_confidence must be in [0, tau_max], got {}'.format(self.initial_confidence))
        return self


@dataclasses.dataclass(frozen=True)
class Directive:
    """
    A micro-directive: a short rule of thumb bound to a set of law articles.

    Args:
        - directive_id (``int``): unique id
        - r_txt (``str``): directive text
        - confidence (``float``): lifecycle confidence, in [0, tau_max]
        - supporting (``frozenset``): archive node ids backing the directive
        - conflicting (``frozenset``): archive node ids contradicting it
        - anchor (``jurispanel.verdict.LabelSet``): anchor articles (charges always empty)
        - vector (``torch.tensor``): unit embedding of ``r_txt``
    """
    directive_id: int
    r_txt: str
    confidence: float
    supporting: frozenset
    conflicting: frozenset
    anchor: LabelSet
    vector: torch.Tensor = dataclasses.field(compare=False, repr=False)

    def to_dict(self):
        return {'directive_id': self.directive_id, 'r_txt': self.r_txt, 'confidence': self.confidence,
                'supporting': sorted(self.supporting), 'conflicting': sorted(self.conflicting),
                'anchor': sorted(self.anchor.articles), 'vector': self.vector.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(directive_id=d['directive_id'], r_txt=d['r_txt'], confidence=float(d['confidence']),
                   supporting=frozenset(d['supporting']), conflicting=frozenset(d['conflicting']),
                   anchor=anchor_of(d['anchor']), vector=torch.tensor(d['vector'], dtype=torch.float64))

    def render(self):
        return '[directive {} | articles {}] {}'.format(self.directive_id, ', '.join(str(a) for a in sorted(self.anchor.articles)), self.r_txt)


def anchor_of(articles):
    """
    This function builds an article-only anchor from a `LabelSet` or an iterable of article ids.
    """
    if isinstance(articles, LabelSet):
        articles = articles.articles
    return LabelSet(articles=frozenset(int(a) for a in articles))


def _split_evidence(supporting, conflicting):
    # conflicting evidence wins
    conflicting = frozenset(conflicting)
    return frozenset(supporting) - conflicting, conflicting


class DirectiveBase():
    """
    The evolving micro-directive base: directives with a confidence lifecycle
    (accumulate, decay, prune, consolidate). Mutations are serialized by a lock.

    Args:
        - provider: embedding provider
        - config (``jurispanel.directives.DirectiveBaseConfig``): lifecycle constants
    """
    def __init__(self, provider, config=None):
        self.provider = provider
        self.config = (config or DirectiveBaseConfig()).validate()
        self.lock = threading.RLock()
        self._directives = {}
        self._next_id = 0

    def __len__(self):
        return len(self._directives)

    def __contains__(self, directive_id):
        return directive_id in self._directives

    def get(self, directive_id):
        try:
            return self._directives[directive_id]
        except KeyError:
            raise UnknownIdError('unknown directive id {}'.format(directive_id))

    def directives(self):
        return [self._directives[i] for i in sorted(self._directives)]

    def with_anchor(self, anchor):
        anchor = anchor_of(anchor)
        return [d for d in self.directives() if d.anchor == anchor]

    def _embed(self, text):
        if not isinstance(text, str) or not text.strip():
            raise DirectiveError('directive text must be non-empty')
        return self.provider.embed(text)

    def _insert(self, r_txt, anchor, supporting, conflicting, confidence):
        anchor = anchor_of(anchor)
        if anchor.is_empty():
            raise DirectiveError('directive anchor must name at least one article')
        vector = self._embed(r_txt)
        supporting, conflicting = _split_evidence(supporting, conflicting)
        directive_id = self._next_id
        self._next_id += 1
        self._directives[directive_id] = Directive(directive_id=directive_id, r_txt=r_txt, confidence=confidence,
                                                   supporting=supporting, conflicting=conflicting,
                                                   anchor=anchor, vector=vector)
        return directive_id

    def add_directive(self, r_txt, anchor, supporting=(), conflicting=()):
        """
        This function stores a new directive with the initial confidence.

        Args:
            - r_txt (``str``): directive text (non-empty)
            - anchor (``jurispanel.verdict.LabelSet`` or ``iterable``): anchor articles (non-empty)
            - supporting (``iterable``): supporting node ids
            - conflicting (``iterable``): conflicting node ids

        Returns:
            - ``int``: the new directive id
        """
        with self.lock:
            directive_id = self._insert(r_txt, anchor, supporting, conflicting, self.config.initial_confidence)
        logger.info('Added directive %d anchored on %s', directive_id, sorted(anchor_of(anchor).articles))
        return directive_id

    def refine_directive(self, directive_id, new_text='', added_support=(), added_conflict=()):
        """
        This function rewrites a directive's text (an empty text keeps the old one) and merges new
        evidence. An id newly reported on one side is removed from the other; an id reported
        on both sides ends up conflicting.
        """
        with self.lock:
            d = self.get(directive_id)
            added_support = frozenset(added_support)
            added_conflict = frozenset(added_conflict)
            conflicting = (d.conflicting - added_support) | added_conflict
            supporting = (d.supporting | added_support) - conflicting
            changes = {'supporting': supporting, 'conflicting': conflicting}
            if new_text and new_text.strip():
                changes['r_txt'] = new_text
                changes['vector'] = self._embed(new_text)
            self._directives[directive_id] = dataclasses.replace(d, **changes)

    def record_outcome(self, directive_id, outcome):
        """
        This function applies one lifecycle step: a supporting outcome adds ``support_increment``
        (capped at ``tau_max``), a contradicting one multiplies by ``decay_factor``.

        Returns:
            - ``float``: the new confidence
        """
        outcome = Outcome(outcome)
        with self.lock:
            d = self.get(directive_id)
            if outcome is Outcome.SUPPORTED:
                confidence = min(d.confidence + self.config.support_increment, self.config.tau_max)
            else:
                confidence = d.confidence * self.config.decay_factor
            self._directives[directive_id] = dataclasses.replace(d, confidence=confidence)
            return confidence

    def prune(self):
        """
        This function removes every directive whose confidence is strictly below the prune threshold.

        Returns:
            - ``list``: removed directive ids
        """
        with self.lock:
            removed = [i for i in sorted(self._directives) if self._directives[i].confidence < self.config.prune_threshold]
            for i in removed:
                del self._directives[i]
        if removed:
            logger.info('Pruned directives %s', removed)
        return removed

    def consolidate(self, group, merged_text):
        """
        This function replaces a group of same-anchor directives by one merged directive whose
        confidence is the sum of the members' confidences, capped at ``tau_max``.

        Args:
            - group (``iterable``): at least two directive ids
            - merged_text (``str``): text of the merged directive

        Returns:
            - ``int``: the merged directive id
        """
        group = sorted(set(group))
        if len(group) < 2:
            raise DirectiveError('consolidation needs at least two directives, got {}'.format(len(group)))
        with self.lock:
            members = [self.get(i) for i in group]
            anchors = {m.anchor for m in members}
            if len(anchors) != 1:
                raise DirectiveError('cannot consolidate directives {} with different anchors'.format(group))
            confidence = min(sum(m.confidence for m in members), self.config.tau_max)
            supporting = frozenset().union(*(m.supporting for m in members))
            conflicting = frozenset().union(*(m.conflicting for m in members))
            merged_id = self._insert(merged_text, members[0].anchor, supporting, conflicting, confidence)
            for i in group:
                del self._directives[i]
        logger.info('Consolidated directives %s into %d', group, merged_id)
        return merged_id

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        with self.lock:
            util.write_jsonl(os.path.join(directory, 'directives.jsonl'), (d.to_dict() for d in self.directives()))
            with open(os.path.join(directory, 'directives_state.json'), 'w', encoding='utf-8') as f:
                f.write(util.dumps({'next_id': self._next_id, 'config': dataclasses.asdict(self.config)}))

    @classmethod
    def load(cls, directory, provider, config=None):
        """
        This function reloads a base saved by `save`. The lifecycle constants of ``config`` win
        over the saved ones when given.
        """
        with open(os.path.join(directory, 'directives_state.json'), encoding='utf-8') as f:
            state = json.load(f)
        base = cls(provider, config or DirectiveBaseConfig(**state['config']))
        for _, d in util.read_jsonl(os.path.join(directory, 'directives.jsonl')):
            directive = Directive.from_dict(d)
            base._directives[directive.directive_id] = directive
        base._next_id = state['next_id']
        return base

    @staticmethod
    def exists(directory):
        return os.path.exists(os.path.join(directory, 'directives_state.json'))
