"""
Output protocols of the panel agents. Every ``parse_*`` function is total: it
returns a value or raises `jurispanel.exceptions.ProtocolError`, whatever the input.
"""
import ast
import dataclasses
import json
import re

from .exceptions import ProtocolError
from .verdict import TermOfImprisonment, Verdict

FINISH = 'Finish['
META_ACTIONS = ('ADD', 'REFINE', 'PRUNE', 'KEEP')

_ORDINAL = re.compile(r'^\s*(?:\(?\d+\s*[.)、:]|[-*•])\s*')


@dataclasses.dataclass(frozen=True)
class Draft:
    predicted_article: int
    explanation: str = ''

    def __post_init__(self):
        if isinstance(self.predicted_article, bool) or not isinstance(self.predicted_article, int) or self.predicted_article <= 0:
            raise ValueError('predicted_article must be a positive integer, got {!r}'.format(self.predicted_article))

    def to_dict(self):
        return {'predicted_article': self.predicted_article, 'explanation': self.explanation}


@dataclasses.dataclass(frozen=True)
class ReviewDecision:
    need_rejudge: bool
    suggestions: str = ''

    def __post_init__(self):
        if self.need_rejudge and not self.suggestions.strip():
            raise ValueError('a rejection needs suggestions')

    @property
    def is_pass(self):
        return not self.need_rejudge

    def to_dict(self):
        return {'need_rejudge': self.need_rejudge, 'suggestions': self.suggestions}


@dataclasses.dataclass(frozen=True)
class PresidingOutput:
    verdict: Verdict
    ranked_articles: tuple = None

    def to_dict(self):
        d = self.verdict.to_dict()
        if self.ranked_articles is not None:
            d['ranked_articles'] = list(self.ranked_articles)
        return d


@dataclasses.dataclass(frozen=True)
class MetaReply:
    action: str
    text: str = ''

    def to_dict(self):
        return {'action': self.action, 'text': self.text}


def _as_text(raw):
    if isinstance(raw, bytes):
        return raw.decode('utf-8', errors='replace')
    if not isinstance(raw, str):
        raise ProtocolError('expected text, got {}'.format(type(raw).__name__), raw)
    return raw


def _closing_bracket(text, start, quoted):
    # index of the ']' closing the bracket opened just before ``start``, or -1
    depth, quote, escaped = 1, None, False
    for i in range(start, len(text)):
        c = text[i]
        if quote is not None:
            if escaped:
                escaped = False
            elif c == '\\':
                escaped = True
            elif c == quote:
                quote = None
        elif quoted and c in '"\'':
            quote = c
        elif c == '[':
            depth += 1
        elif c == ']':
            depth -= 1
            if depth == 0:
                return i
    return -1


def finish_body(raw, quoted=False):
    """
    This function returns the body of the last ``Finish[...]`` marker of an agent reply:
    everything between the marker and the bracket that closes it. Text after the closing
    bracket is ignored. When the brackets never balance, the body runs to the last ``]``.

    Args:
        - raw (``str``): raw reply
        - quoted (``bool``): the body is a JSON or literal object; brackets inside quoted strings do not count

    Returns:
        - ``str``: the bracketed body
    """
    text = _as_text(raw)
    start = text.rfind(FINISH)
    if start < 0:
        raise ProtocolError('no Finish[...] marker', raw)
    start += len(FINISH)
    end = _closing_bracket(text, start, quoted)
    if end < 0:
        end = text.rfind(']')
    if end < start:
        raise ProtocolError('unterminated Finish[...] marker', raw)
    return text[start:end]


def _load_object(body, raw):
    # double-quoted JSON first, then python literal syntax for single quotes
    body = body.strip()
    try:
        return json.loads(body)
    except (ValueError, RecursionError):
        pass
    try:
        return ast.literal_eval(body)
    except Exception:
        raise ProtocolError('body is neither JSON nor a literal: {!r}'.format(body[:80]), raw)


def _load_dict(body, raw):
    obj = _load_object(body, raw)
    if not isinstance(obj, dict):
        raise ProtocolError('expected an object, got {}'.format(type(obj).__name__), raw)
    return obj


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _article_list(values, field, raw):
    if not isinstance(values, (list, tuple)):
        raise ProtocolError('"{}" must be a list'.format(field), raw)
    for a in values:
        if not _is_int(a) or a <= 0:
            raise ProtocolError('"{}" must hold positive integers, got {!r}'.format(field, a), raw)
    return list(values)


def parse_clerk(raw):
    """
    This function parses the clerk reply ``Finish[1. point; 2. point; ...]`` into fact points,
    stripping ordinal markers. ``Finish[]`` yields an empty list.

    Returns:
        - ``list``: fact-point strings
    """
    body = finish_body(raw)
    points = []
    for piece in body.split(';'):
        point = _ORDINAL.sub('', piece, count=1).strip()
        if point:
            points.append(point)
    return points


def parse_assistant(raw):
    """
    This function parses the assistant reply ``Finish[[272, 384, 185]]`` into article ids,
    keeping the first occurrence of repeated ids.

    Returns:
        - ``list``: article ids
    """
    body = finish_body(raw).strip()
    if not body.startswith('['):
        body = '[' + body + ']'
    articles = _article_list(_load_object(body, raw), 'articles', raw)
    return list(dict.fromkeys(articles))


def parse_judge(raw):
    """
    This function parses the case judge reply
    ``{'predicted_article': <int>, 'explanation': <str>}`` (single or double quotes, optionally
    wrapped in ``Finish[...]``).

    Returns:
        - ``jurispanel.protocol.Draft``
    """
    text = _as_text(raw)
    if FINISH in text:
        obj = _load_dict(finish_body(text, quoted=True), raw)
    else:
        end = text.rfind('}')
        obj = None
        start = text.find('{')
        while 0 <= start < end:
            try:
                obj = _load_dict(text[start:end + 1], raw)
                break
            except ProtocolError:
                start = text.find('{', start + 1)
        if obj is None:
            raise ProtocolError('no judge object found', raw)
    if 'predicted_article' not in obj:
        raise ProtocolError('missing "predicted_article"', raw)
    if 'explanation' not in obj:
        raise ProtocolError('missing "explanation"', raw)
    article, explanation = obj['predicted_article'], obj['explanation']
    if not _is_int(article) or article <= 0:
        raise ProtocolError('"predicted_article" must be a positive integer, got {!r}'.format(article), raw)
    if not isinstance(explanation, str):
        raise ProtocolError('"explanation" must be a string', raw)
    return Draft(predicted_article=article, explanation=explanation)


def parse_supervisor(raw):
    """
    This function parses the supervisor reply ``Finish[{"need_rejudge": <bool>, "suggestions": <str>}]``.

    Returns:
        - ``jurispanel.protocol.ReviewDecision``
    """
    obj = _load_dict(finish_body(raw, quoted=True), raw)
    flag = obj.get('need_rejudge')
    if not isinstance(flag, bool):
        raise ProtocolError('"need_rejudge" must be a boolean, got {!r}'.format(flag), raw)
    suggestions = obj.get('suggestions', '')
    if not isinstance(suggestions, str):
        raise ProtocolError('"suggestions" must be a string', raw)
    if flag and not suggestions.strip():
        raise ProtocolError('a rejection needs suggestions', raw)
    return ReviewDecision(need_rejudge=flag, suggestions=suggestions)


def parse_presiding(raw):
    """
    This function parses the presiding judge reply
    ``Finish[{"relevant_articles": [...], "accusation": [...], "term_of_imprisonment": {...}}]``.
    An optional ``"ranked_articles"`` list is kept for top-2 scoring.

    Returns:
        - ``jurispanel.protocol.PresidingOutput``
    """
    obj = _load_dict(finish_body(raw, quoted=True), raw)
    for key in ('relevant_articles', 'accusation', 'term_of_imprisonment'):
        if key not in obj:
            raise ProtocolError('missing "{}"'.format(key), raw)
    articles = _article_list(obj['relevant_articles'], 'relevant_articles', raw)
    charges = obj['accusation']
    if not isinstance(charges, (list, tuple)) or not all(isinstance(c, str) for c in charges):
        raise ProtocolError('"accusation" must be a list of strings', raw)
    term = obj['term_of_imprisonment']
    if not isinstance(term, dict):
        raise ProtocolError('"term_of_imprisonment" must be an object', raw)
    for key, check in (('death_penalty', lambda x: isinstance(x, bool)),
                       ('life_imprisonment', lambda x: isinstance(x, bool)),
                       ('imprisonment', _is_int)):
        if key not in term:
            raise ProtocolError('missing "term_of_imprisonment.{}"'.format(key), raw)
        if not check(term[key]):
            raise ProtocolError('invalid "term_of_imprisonment.{}": {!r}'.format(key, term[key]), raw)
    try:
        verdict = Verdict(articles=tuple(articles), charges=tuple(charges),
                          term=TermOfImprisonment(death_penalty=term['death_penalty'],
                                                  life_imprisonment=term['life_imprisonment'],
                                                  imprisonment_months=term['imprisonment']))
    except ValueError as e:
        raise ProtocolError('invalid verdict: {}'.format(e), raw)
    ranked = None
    if 'ranked_articles' in obj:
        ranked = tuple(dict.fromkeys(_article_list(obj['ranked_articles'], 'ranked_articles', raw)))
    return PresidingOutput(verdict=verdict, ranked_articles=ranked)


def parse_meta(raw):
    """
    This function parses the evolution agent reply
    ``Finish[{"action": "ADD"|"REFINE"|"PRUNE"|"KEEP", "text": <str>}]``.
    ADD and REFINE need a non-empty text.

    Returns:
        - ``jurispanel.protocol.MetaReply``
    """
    obj = _load_dict(finish_body(raw, quoted=True), raw)
    action = obj.get('action')
    if action not in META_ACTIONS:
        raise ProtocolError('"action" must be one of {}, got {!r}'.format(', '.join(META_ACTIONS), action), raw)
    text = obj.get('text', '')
    if not isinstance(text, str):
        raise ProtocolError('"text" must be a string', raw)
    if action in ('ADD', 'REFINE') and not text.strip():
        raise ProtocolError('{} needs a non-empty text'.format(action), raw)
    return MetaReply(action=action, text=text.strip())


def parse_reflection(raw):
    """Reflection advice: the non-empty body of the last ``Finish[...]``."""
    body = finish_body(raw).strip()
    if not body:
        raise ProtocolError('empty reflection', raw)
    return body


def _dumps(obj):
    return json.dumps(obj, ensure_ascii=False)


def format_clerk(points):
    return FINISH + '; '.join('{}. {}'.format(i, p) for i, p in enumerate(points, start=1)) + ']'


def format_assistant(articles):
    return FINISH + _dumps(list(articles)) + ']'


def format_judge(draft):
    return _dumps(draft.to_dict())


def format_supervisor(decision):
    return FINISH + _dumps(decision.to_dict()) + ']'


def format_presiding(verdict, ranked_articles=None):
    return FINISH + _dumps(PresidingOutput(verdict, ranked_articles).to_dict()) + ']'


def format_meta(action, text=''):
    return FINISH + _dumps(MetaReply(action, text).to_dict()) + ']'


def format_reflection(text):
    return FINISH + text + ']'
