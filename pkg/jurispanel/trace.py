"""
Per-case event traces: recording, the trace file format and replay verification.
"""
import dataclasses
import json
import logging

from . import util
from .exceptions import JurisPanelError, ProtocolError, TraceError
from .protocol import (parse_assistant, parse_clerk, parse_judge, parse_presiding,
                       parse_supervisor)

logger = logging.getLogger(__name__)

TRACE_VERSION = 1

PARSERS = {
    'clerk': parse_clerk,
    'assistant': parse_assistant,
    'case_judge': parse_judge,
    'supervisor': parse_supervisor,
    'presiding': parse_presiding,
}


def to_jsonable(value):
    """Canonical JSON form of a parsed agent reply."""
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    if isinstance(value, tuple):
        return list(value)
    return value


@dataclasses.dataclass
class TraceEvent:
    """
    One step of a case run.

    Args:
        - kind (``str``): ``'agent'``, ``'statute_search'``, ``'fallback'``, ``'retrieval'``, ``'branch'``, ``'result'`` or ``'error'``
        - index (``int``): position in the trace
        - role (``str``): agent role (agent events)
        - template (``str``): prompt template (agent events)
        - turn (``int``): draft turn (draft loop events)
        - prompt (``dict``): system and user text (agent events)
        - prompt_sha256 (``str``): hash of the prompt text (agent events)
        - raw (``list``): raw replies, in order (agent events)
        - parsed: parsed value of the last reply (agent events)
        - data (``dict``): kind-specific payload (scores, decisions, results)
    """
    kind: str
    index: int
    role: str = None
    template: str = None
    turn: int = None
    prompt: dict = None
    prompt_sha256: str = None
    raw: list = None
    parsed: object = None
    data: dict = None

    def to_dict(self):
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d, index=None):
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - fields
        if unknown or 'kind' not in d or 'index' not in d:
            raise TraceError('malformed event record', index)
        return cls(**d)


class TraceRecorder():
    def __init__(self, case_id):
        self.case_id = case_id
        self.events = []

    def record(self, kind, **fields):
        event = TraceEvent(kind=kind, index=len(self.events), **fields)
        self.events.append(event)
        return event

    def record_agent(self, bundle, raws, parsed, turn=None):
        prompt_text = bundle.text()
        return self.record('agent', role=bundle.role.value, template=bundle.template, turn=turn,
                           prompt={'system': bundle.system_text, 'user': bundle.user_text},
                           prompt_sha256=util.sha256_text(prompt_text), raw=list(raws),
                           parsed=to_jsonable(parsed))


def write_trace(file_name, case_id, events):
    """
    This function writes a trace file: a header line, one line per event and an end marker
    carrying the event count.
    """
    records = [{'trace_version': TRACE_VERSION, 'case_id': case_id}]
    records.extend(e.to_dict() for e in events)
    records.append({'end': True, 'events': len(events)})
    return util.write_jsonl(file_name, records)


def read_trace(file_name):
    """
    This function reads a trace file written by `write_trace`.

    Returns:
        - ``tuple``: (case id, list of `TraceEvent`)
    """
    try:
        with open(file_name, encoding='utf-8') as f:
            lines = [line for line in f.read().split('\n') if line.strip()]
    except OSError as e:
        raise TraceError('cannot read trace {}: {}'.format(file_name, e))
    records = []
    for i, line in enumerate(lines):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise TraceError('malformed line ({})'.format(e.msg), i - 1 if i > 0 else None)
    if not records or records[0].get('trace_version') != TRACE_VERSION:
        raise TraceError('missing or unsupported trace header')
    if len(records) < 2 or not records[-1].get('end'):
        raise TraceError('truncated trace: missing end marker')
    events = [TraceEvent.from_dict(d, i) for i, d in enumerate(records[1:-1])]
    if records[-1].get('events') != len(events):
        raise TraceError('truncated trace: expected {} events, found {}'.format(records[-1].get('events'), len(events)))
    for i, e in enumerate(events):
        if e.index != i:
            raise TraceError('event out of order', i)
    return records[0].get('case_id'), events


@dataclasses.dataclass(frozen=True)
class ReplayReport:
    passed: bool
    events: int
    divergence_index: int = None
    message: str = ''

    def __str__(self):
        if self.passed:
            return 'PASS ({} events)'.format(self.events)
        return 'DIVERGED at event {}: {}'.format(self.divergence_index, self.message)


def _reparse(event):
    parser = PARSERS.get(event.template)
    if parser is None:
        raise TraceError('unknown template {!r}'.format(event.template), event.index)
    if not event.raw:
        raise TraceError('agent event without raw reply', event.index)
    for earlier in event.raw[:-1]:
        # only a failed reply may be followed by a repaired one
        try:
            parser(earlier)
        except ProtocolError:
            continue
        raise TraceError('a repaired reply follows a parseable one', event.index)
    return to_jsonable(parser(event.raw[-1]))


def replay_events(events):
    """
    This function re-parses every recorded raw reply and re-executes the branch logic,
    comparing each result with the recorded one.

    Args:
        - events (``list``): list of `TraceEvent`

    Returns:
        - ``jurispanel.trace.ReplayReport``
    """
    from .workflow import Branch, branch
    from .protocol import ReviewDecision

    last_decision = None
    last_ranking = None
    turns = 0
    for event in events:
        try:
            if event.kind == 'agent':
                reparsed = _reparse(event)
                if util.dumps(reparsed) != util.dumps(event.parsed):
                    return ReplayReport(False, len(events), event.index, 'parsed value differs from the recorded one')
                if event.template == 'supervisor':
                    last_decision = ReviewDecision(**reparsed)
                elif event.template == 'case_judge':
                    turns += 1
                    if event.turn != turns:
                        return ReplayReport(False, len(events), event.index, 'draft turn {} recorded as {}'.format(turns, event.turn))
            elif event.kind == 'statute_search':
                last_ranking = [a for a, _ in event.data['ranking']]
            elif event.kind == 'fallback':
                expected = last_ranking[:event.data['k']] if last_ranking is not None else None
                if expected != event.data['articles']:
                    return ReplayReport(False, len(events), event.index, 'fallback articles differ from the coarse ranking')
            elif event.kind == 'branch':
                if last_decision is None:
                    return ReplayReport(False, len(events), event.index, 'branch without a review decision')
                outcome = branch(last_decision, event.data['turn'], event.data['t_max'])
                if outcome is not Branch(event.data['outcome']) or event.data['need_rejudge'] != last_decision.need_rejudge:
                    return ReplayReport(False, len(events), event.index, 'branch decision differs from the recorded one')
        except (JurisPanelError, KeyError, TypeError, ValueError) as e:
            return ReplayReport(False, len(events), event.index, '{}: {}'.format(type(e).__name__, e))
    return ReplayReport(True, len(events))


def replay_trace(file_name):
    """
    This function verifies a trace file by replay. A file that cannot be read raises `TraceError`.

    Returns:
        - ``jurispanel.trace.ReplayReport``
    """
    _, events = read_trace(file_name)
    report = replay_events(events)
    logger.info('Replay of %s: %s', file_name, report)
    return report
