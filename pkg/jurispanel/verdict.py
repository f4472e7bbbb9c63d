import dataclasses

from . import util
from .exceptions import RecordError


@dataclasses.dataclass(frozen=True)
class TermOfImprisonment:
    """
    Penalty term of a verdict. Imprisonment is counted in months.

    Args:
        - death_penalty (``bool``)
        - life_imprisonment (``bool``)
        - imprisonment_months (``int``): non-negative, 0 when death or life is set
    """
    death_penalty: bool = False
    life_imprisonment: bool = False
    imprisonment_months: int = 0

    def __post_init__(self):
        if isinstance(self.imprisonment_months, bool) or not isinstance(self.imprisonment_months, int):
            raise ValueError('imprisonment must be an integer number of months')
        if self.imprisonment_months < 0:
            raise ValueError('imprisonment must be non-negative, got {}'.format(self.imprisonment_months))
        if self.death_penalty and self.life_imprisonment:
            raise ValueError('death_penalty and life_imprisonment are mutually exclusive')
        if (self.death_penalty or self.life_imprisonment) and self.imprisonment_months != 0:
            raise ValueError('imprisonment months must be 0 with a death or life sentence')

    def to_dict(self):
        return {'death_penalty': self.death_penalty,
                'life_imprisonment': self.life_imprisonment,
                'imprisonment': self.imprisonment_months}

    @classmethod
    def from_dict(cls, d):
        flags = {}
        for key in ('death_penalty', 'life_imprisonment'):
            value = d.get(key, False)
            # 0/1 flags appear in some corpus dumps
            if not isinstance(value, bool) and value not in (0, 1):
                raise RecordError('"{}" must be a boolean, got {!r}'.format(key, value))
            flags[key] = bool(value)
        return cls(imprisonment_months=d.get('imprisonment', 0), **flags)


@dataclasses.dataclass(frozen=True, order=True)
class TermClass:
    class_index: int


@dataclasses.dataclass(frozen=True)
class TermBins:
    """
    Binning table from a penalty term to a term class. Months strictly above
    ``month_edges[i]`` fall into class ``first_month_class + i`` (edges are
    tried in order); 0 months falls into ``zero_class``.
    """
    name: str
    death_class: int
    life_class: int
    month_edges: tuple
    first_month_class: int
    zero_class: int

    @property
    def n_classes(self):
        classes = {self.death_class, self.life_class, self.zero_class}
        classes.update(self.first_month_class + i for i in range(len(self.month_edges)))
        return len(classes)


ELEVEN_CLASS_BINS = TermBins(name='eleven', death_class=0, life_class=1,
                             month_edges=(120, 84, 60, 36, 24, 12, 6, 0),
                             first_month_class=2, zero_class=10)

# death, life and more than ten years share the top interval
TEN_CLASS_BINS = TermBins(name='ten', death_class=0, life_class=0,
                          month_edges=(120, 84, 60, 36, 24, 12, 9, 6, 0),
                          first_month_class=0, zero_class=9)

TERM_BINS = {'eleven': ELEVEN_CLASS_BINS, 'ten': TEN_CLASS_BINS}


def get_term_bins(name):
    try:
        return TERM_BINS[name]
    except KeyError:
        raise ValueError('Supported term bins: {} while {} was provided'.format(', '.join(TERM_BINS), name))


def bin_term(t, bins=ELEVEN_CLASS_BINS):
    """
    This function maps a penalty term onto its term class.

    Args:
        - t (``jurispanel.verdict.TermOfImprisonment``): penalty term
        - bins (``jurispanel.verdict.TermBins``): binning table (default: the eleven-class table)

    Returns:
        - ``jurispanel.verdict.TermClass``: the term class
    """
    if t.death_penalty:
        return TermClass(bins.death_class)
    if t.life_imprisonment:
        return TermClass(bins.life_class)
    for i, edge in enumerate(bins.month_edges):
        if t.imprisonment_months > edge:
            return TermClass(bins.first_month_class + i)
    return TermClass(bins.zero_class)


@dataclasses.dataclass(frozen=True)
class LabelSet:
    articles: frozenset = frozenset()
    charges: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, 'articles', frozenset(self.articles))
        object.__setattr__(self, 'charges', frozenset(self.charges))

    def is_empty(self):
        return not self.articles and not self.charges

    def to_dict(self):
        return {'articles': sorted(self.articles), 'charges': sorted(self.charges)}

    @classmethod
    def from_dict(cls, d):
        return cls(articles=frozenset(int(a) for a in d.get('articles', [])),
                   charges=frozenset(d.get('charges', [])))

    def key(self):
        """Sortable, hashable representation (used for deterministic grouping)."""
        return (tuple(sorted(self.articles)), tuple(sorted(self.charges)))


@dataclasses.dataclass(frozen=True)
class Verdict:
    """
    Judgment result: law articles, charges and the penalty term.

    Args:
        - articles (``tuple``): article ids, in the order given by the producer
        - charges (``tuple``): charge names, in the order given by the producer
        - term (``jurispanel.verdict.TermOfImprisonment``): penalty term
    """
    articles: tuple = ()
    charges: tuple = ()
    term: TermOfImprisonment = TermOfImprisonment()

    def __post_init__(self):
        object.__setattr__(self, 'articles', tuple(self.articles))
        object.__setattr__(self, 'charges', tuple(self.charges))
        for a in self.articles:
            if isinstance(a, bool) or not isinstance(a, int) or a <= 0:
                raise ValueError('article ids must be positive integers, got {!r}'.format(a))
        for c in self.charges:
            if not isinstance(c, str):
                raise ValueError('charges must be strings, got {!r}'.format(c))

    def validate_gold(self):
        if not self.articles or not self.charges:
            raise ValueError('a gold verdict needs at least one article and one charge')
        return self

    def to_dict(self):
        return {'relevant_articles': list(self.articles),
                'accusation': list(self.charges),
                'term_of_imprisonment': self.term.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(articles=tuple(d.get('relevant_articles', [])),
                   charges=tuple(d.get('accusation', [])),
                   term=TermOfImprisonment.from_dict(d.get('term_of_imprisonment', {})))

    def serialize(self):
        return util.dumps(self.to_dict())


@dataclasses.dataclass(frozen=True)
class CaseRecord:
    id: str
    fact_text: str
    gold: Verdict = None

    def __post_init__(self):
        if not isinstance(self.fact_text, str) or not self.fact_text.strip():
            raise ValueError('case {}: fact text must be non-empty'.format(self.id))

    def to_dict(self):
        d = {'id': self.id, 'fact': self.fact_text}
        if self.gold is not None:
            d['meta'] = self.gold.to_dict()
        return d


@dataclasses.dataclass(frozen=True)
class MatchReport:
    article_correct: bool
    charge_correct: bool
    term_correct: bool

    @property
    def all_correct(self):
        return self.article_correct and self.charge_correct and self.term_correct


def label_set(v):
    """
    This function returns the deduplicated, order-insensitive label set of a verdict.

    Args:
        - v (``jurispanel.verdict.Verdict``): verdict

    Returns:
        - ``jurispanel.verdict.LabelSet``
    """
    return LabelSet(articles=frozenset(v.articles), charges=frozenset(v.charges))


def verdict_matches(pred, gold, bins=ELEVEN_CLASS_BINS):
    """
    This function compares a predicted verdict with the gold one, subtask by subtask.
    Articles and charges are compared as sets, the term by its class.

    Args:
        - pred (``jurispanel.verdict.Verdict``): predicted verdict
        - gold (``jurispanel.verdict.Verdict``): gold verdict
        - bins (``jurispanel.verdict.TermBins``): term binning table

    Returns:
        - ``jurispanel.verdict.MatchReport``
    """
    p, g = label_set(pred), label_set(gold)
    return MatchReport(article_correct=p.articles == g.articles,
                       charge_correct=p.charges == g.charges,
                       term_correct=bin_term(pred.term, bins) == bin_term(gold.term, bins))


def parse_case_record(obj, line_number=None, default_id=None):
    """
    This function builds a `CaseRecord` from a CAIL-style record
    ``{"fact": ..., "meta": {"relevant_articles": ..., "accusation": ..., "term_of_imprisonment": ...}}``.
    The ``meta`` block is optional (pure inference).

    Args:
        - obj (``dict``): decoded record
        - line_number (``int``): line of the record, for error messages
        - default_id (``str``): id used when the record carries none

    Returns:
        - ``jurispanel.verdict.CaseRecord``
    """
    fact = obj.get('fact')
    if not isinstance(fact, str) or not fact.strip():
        raise RecordError('missing or empty "fact"', line_number)
    case_id = str(obj.get('id', default_id if default_id is not None else 'case-{}'.format(line_number)))
    gold = None
    meta = obj.get('meta')
    if meta is not None:
        if not isinstance(meta, dict):
            raise RecordError('"meta" must be an object', line_number)
        try:
            gold = Verdict.from_dict(meta).validate_gold()
        except (ValueError, TypeError, AttributeError) as e:
            raise RecordError('invalid gold verdict: {}'.format(e), line_number)
    return CaseRecord(id=case_id, fact_text=fact, gold=gold)


def load_corpus(file_name):
    """
    This function reads a corpus file (one CAIL-style record per line).

    Args:
        - file_name (``str``): corpus path

    Returns:
        - ``list``: list of `jurispanel.verdict.CaseRecord`
    """
    cases = []
    seen = set()
    for line_number, obj in util.read_jsonl(file_name):
        case = parse_case_record(obj, line_number)
        if case.id in seen:
            raise RecordError('duplicate case id {}'.format(case.id), line_number)
        seen.add(case.id)
        cases.append(case)
    return cases
