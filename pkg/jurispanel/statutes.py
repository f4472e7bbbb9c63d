import dataclasses
import logging

import torch

from . import util
from .embedding import cosine
from .exceptions import DuplicateIdError, RecordError

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Statute:
    article_id: int
    title: str
    text: str
    vector: torch.Tensor = dataclasses.field(compare=False, repr=False)

    def render(self):
        return '[{}] {}: {}'.format(self.article_id, self.title, self.text)


class StatuteLibrary():
    """
    The immutable statutory library: statutes indexed by article id, searched by
    dense cosine similarity (flat scan).

    Args:
        - provider: embedding provider (anything with an ``embed(text)`` method)
    """
    def __init__(self, provider):
        self.provider = provider
        self._statutes = {}
        self._order = []

    def __len__(self):
        return len(self._order)

    def __contains__(self, article_id):
        return article_id in self._statutes

    def __getitem__(self, article_id):
        return self._statutes[article_id]

    def ids(self):
        return list(self._order)

    def add(self, article_id, title, text, line_number=None):
        """
        This function appends one statute; its vector is the embedding of title and text.

        Args:
            - article_id (``int``): unique positive article id
            - title (``str``): short title
            - text (``str``): statute text (non-empty)
            - line_number (``int``): source line, for error messages
        """
        if article_id in self._statutes:
            raise DuplicateIdError(article_id, line_number)
        vector = self.provider.embed('{} {}'.format(title, text).strip())
        self._statutes[article_id] = Statute(article_id=article_id, title=title, text=text, vector=vector)
        self._order.append(article_id)
        return self._statutes[article_id]

    def search(self, query, k):
        """
        This function returns the top-k statutes by cosine similarity with the query.
        Ties are broken by ascending article id.

        Args:
            - query (``str``): query text
            - k (``int``): number of results (at least 1)

        Returns:
            - ``list``: ``(article_id, score)`` tuples, scores non-increasing
        """
        if k < 1:
            raise ValueError('k must be >= 1, got {}'.format(k))
        if not self._order:
            return []
        q = self.provider.embed(query)
        scores = [cosine(self._statutes[a].vector, q) for a in self._order]
        ranked = sorted(zip(self._order, scores), key=lambda item: (-item[1], item[0]))
        return ranked[:k]


def search_statutes(library, query, k):
    return library.search(query, k)


def parse_statute_record(obj, line_number=None):
    article_id = obj.get('article_id')
    if isinstance(article_id, bool) or not isinstance(article_id, int) or article_id <= 0:
        raise RecordError('"article_id" must be a positive integer', line_number)
    title = obj.get('title', '')
    text = obj.get('text')
    if not isinstance(title, str):
        raise RecordError('"title" must be a string', line_number)
    if not isinstance(text, str) or not text.strip():
        raise RecordError('missing or empty "text"', line_number)
    return article_id, title, text


def load_statutes(source, provider):
    """
    This function builds a `StatuteLibrary` from a statute file or from an iterable of records
    ``{"article_id": int, "title": str, "text": str}``.

    Args:
        - source (``str`` or ``iterable``): file path (one record per line) or iterable of dictionaries
        - provider: embedding provider

    Returns:
        - ``jurispanel.statutes.StatuteLibrary``
    """
    if isinstance(source, str):
        records = util.read_jsonl(source)
    else:
        records = [(i, obj) for i, obj in enumerate(source, start=1)]
    library = StatuteLibrary(provider)
    for line_number, obj in records:
        if not isinstance(obj, dict):
            raise RecordError('expected a JSON object', line_number)
        article_id, title, text = parse_statute_record(obj, line_number)
        library.add(article_id, title, text, line_number)
    logger.info('Loaded %d statutes', len(library))
    return library
