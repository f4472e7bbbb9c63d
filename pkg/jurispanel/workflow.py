import dataclasses
import enum
import logging

from .exceptions import CaseFailedError, ConfigError, JurisPanelError
from .prompts import NONE_SENTINEL, AgentRole, assemble_prompt, render_lines, render_numbered
from .protocol import (format_judge, parse_assistant, parse_clerk, parse_judge,
                       parse_presiding, parse_supervisor)
from .retrieval import RetrievalSettings, make_context, retrieve_directives, retrieve_standards
from .backends import invoke_parsed
from .trace import TraceRecorder

logger = logging.getLogger(__name__)


class Branch(enum.Enum):
    TO_VERDICT = 'to_verdict'
    REDRAFT = 'redraft'


class FinalFlag(enum.Enum):
    PASS = 'pass'
    FORCED_BY_TMAX = 'forced_by_tmax'


@dataclasses.dataclass
class PanelConfig:
    """
    Args:
        - t_max (``int``): maximum number of draft/review turns
        - coarse_k (``int``): size of the coarse statute search
        - retrieve_n (``int``): number of standards and of directives injected into the review
        - memory_enabled (``bool``): inject memory into the supervisor and presiding prompts
        - fallback_k (``int``): coarse articles kept when the assistant returns none
    """
    t_max: int = 3
    coarse_k: int = 10
    retrieve_n: int = 3
    memory_enabled: bool = True
    fallback_k: int = 5

    def validate(self):
        if self.t_max < 1:
            raise ConfigError('t_max must be >= 1, got {}'.format(self.t_max))
        for name in ('coarse_k', 'retrieve_n', 'fallback_k'):
            if getattr(self, name) < 1:
                raise ConfigError('{} must be >= 1, got {}'.format(name, getattr(self, name)))
        return self


@dataclasses.dataclass
class PanelState:
    case: object
    fact_points: list = dataclasses.field(default_factory=list)
    candidate_statutes: list = dataclasses.field(default_factory=list)
    drafts: list = dataclasses.field(default_factory=list)
    feedback_history: list = dataclasses.field(default_factory=list)
    injected_standards: list = dataclasses.field(default_factory=list)
    injected_directives: list = dataclasses.field(default_factory=list)

    @property
    def turn(self):
        return len(self.drafts)


@dataclasses.dataclass
class CaseResult:
    """
    Outcome of one panel run.

    Args:
        - case_id (``str``): case id
        - verdict (``jurispanel.verdict.Verdict``): final verdict
        - ranked_articles (``list``): articles ranked for top-2 scoring
        - ranked_charges (``list``): charges in presiding order
        - trace (``list``): list of `jurispanel.trace.TraceEvent`
        - turns_used (``int``): number of drafts
        - final_flag (``jurispanel.workflow.FinalFlag``): how the draft loop ended
        - state (``jurispanel.workflow.PanelState``): final panel state
    """
    case_id: str
    verdict: object
    ranked_articles: list
    ranked_charges: list
    trace: list
    turns_used: int
    final_flag: FinalFlag
    state: PanelState

    @property
    def reasoning(self):
        """The supervisor-validated reasoning chain archived with the verdict."""
        draft = self.state.drafts[-1]
        return 'Event points: {}\nDraft article {}: {}'.format(
            '; '.join(self.state.fact_points), draft.predicted_article, draft.explanation)

    def to_dict(self):
        return {'id': self.case_id, 'verdict': self.verdict.to_dict(),
                'ranked_articles': list(self.ranked_articles), 'ranked_charges': list(self.ranked_charges),
                'turns_used': self.turns_used, 'final_flag': self.final_flag.value}


def accumulate_feedback(history, fdbk):
    """
    This function appends one supervisor feedback to the history, oldest first.

    Returns:
        - ``list``: the new history
    """
    return list(history) + [fdbk]


def render_feedback(history):
    return render_numbered(history)


def branch(decision, turn, t_max):
    """
    This function decides what follows a review: the verdict on a pass or once ``t_max``
    turns are used, another draft otherwise.

    Returns:
        - ``jurispanel.workflow.Branch``
    """
    if turn < 1:
        raise ValueError('turn must be >= 1, got {}'.format(turn))
    if decision.is_pass or turn >= t_max:
        return Branch.TO_VERDICT
    return Branch.REDRAFT


def rank_articles(presiding, draft, assistant_articles):
    """
    This function ranks candidate articles for top-2 scoring: the presiding verdict's articles,
    then the backend's own ranking if it gave one, then the latest draft and the assistant
    ranking, without repeats.
    """
    ranked = list(presiding.verdict.articles)
    if presiding.ranked_articles:
        ranked.extend(presiding.ranked_articles)
    ranked.append(draft.predicted_article)
    ranked.extend(assistant_articles)
    return list(dict.fromkeys(ranked))


def _render_statutes(articles, library):
    lines = []
    for a in articles:
        lines.append(library[a].render() if a in library else '[{}]'.format(a))
    return render_lines(lines)


class _Panel():
    def __init__(self, case, config, backends, recorder, prompts):
        self.case = case
        self.config = config
        self.backends = backends
        self.recorder = recorder
        self.prompts = prompts

    def call(self, role, template, context, parser, turn=None):
        bundle = assemble_prompt(template, context, self.prompts)
        raws, parsed = invoke_parsed(role, bundle, self.backends[role], parser)
        self.recorder.record_agent(bundle, raws, parsed, turn=turn)
        return parsed


def run_case(case, config, backends, library, archive=None, base=None, provider=None,
             retrieval=None, prompts=None):
    """
    This function runs one case through the panel: clerk, assistant, the case judge and
    supervisor loop, then the presiding judge. The case judge only sees the facts, the
    candidate statutes and the accumulated feedback; memory reaches the supervisor and the
    presiding judge only.

    Args:
        - case (``jurispanel.verdict.CaseRecord``): case to judge (gold not needed)
        - config (``jurispanel.workflow.PanelConfig``): panel settings
        - backends (``dict``): `jurispanel.prompts.AgentRole` -> backend, for the five panel roles
        - library (``jurispanel.statutes.StatuteLibrary``): statute library
        - archive (``jurispanel.archive.StandardsArchive``): standards archive (memory)
        - base (``jurispanel.directives.DirectiveBase``): directive base (memory)
        - provider: embedding provider for the retrieval context (the library's provider if None)
        - retrieval (``jurispanel.retrieval.RetrievalSettings``): retrieval settings
        - prompts (``jurispanel.prompts.PromptLibrary``): template source

    Returns:
        - ``jurispanel.workflow.CaseResult``
    """
    config.validate()
    retrieval = retrieval or RetrievalSettings()
    provider = provider or library.provider
    recorder = TraceRecorder(case.id)
    panel = _Panel(case, config, backends, recorder, prompts)
    state = PanelState(case=case)
    fact = case.fact_text
    try:
        state.fact_points = panel.call(AgentRole.CLERK, 'clerk', {'CASE_FACT': fact}, parse_clerk)
        event_points = render_numbered(state.fact_points)

        coarse = library.search(fact, config.coarse_k)
        recorder.record('statute_search', data={'k': config.coarse_k, 'ranking': [[a, s] for a, s in coarse]})
        articles = panel.call(AgentRole.ASSISTANT, 'assistant',
                              {'CASE_FACT': fact, 'EVENT_POINTS': event_points,
                               'EXTRA_CONTEXT': _render_statutes([a for a, _ in coarse], library)},
                              parse_assistant)
        if not articles:
            articles = [a for a, _ in coarse[:config.fallback_k]]
            recorder.record('fallback', data={'k': config.fallback_k, 'articles': articles})
            logger.info('Case %s: assistant returned no article, using the coarse ranking', case.id)
        state.candidate_statutes = articles
        candidates = _render_statutes(articles, library)

        law_ctx = precedents = NONE_SENTINEL
        if config.memory_enabled and archive is not None and base is not None:
            ctx = make_context(provider.embed(fact), articles, retrieval)
            raw_topo = retrieval.topo_mode == 'raw'
            state.injected_standards = retrieve_standards(ctx, archive, config.retrieve_n, retrieval.weights, raw_topo)
            state.injected_directives = retrieve_directives(ctx, base, archive, config.retrieve_n, retrieval.weights, raw_topo)
            recorder.record('retrieval', data={'standards': [s.to_dict() for s in state.injected_standards],
                                               'directives': [s.to_dict() for s in state.injected_directives]})
            law_ctx = render_lines([s.item.render() for s in state.injected_directives])
            precedents = render_lines([s.item.txt for s in state.injected_standards])

        while True:
            turn = state.turn + 1
            draft = panel.call(AgentRole.CASE_JUDGE, 'case_judge',
                               {'CASE_FACT': fact, 'EVENT_POINTS': event_points,
                                'CANDIDATES_FOR_JUDGE': candidates,
                                'VERIFICATION_OPINION': render_feedback(state.feedback_history)},
                               parse_judge, turn=turn)
            state.drafts.append(draft)
            decision = panel.call(AgentRole.SUPERVISOR, 'supervisor',
                                  {'CASE_FACT': fact, 'JUDGMENT_OUT': format_judge(draft),
                                   'CANDIDATES_FOR_JUDGE': candidates,
                                   'LAW_CTX': law_ctx, 'PRECEDENTS_TEXT': precedents},
                                  parse_supervisor, turn=turn)
            if not decision.is_pass:
                state.feedback_history = accumulate_feedback(state.feedback_history, decision.suggestions)
            outcome = branch(decision, turn, config.t_max)
            recorder.record('branch', turn=turn, data={'turn': turn, 't_max': config.t_max,
                                                       'need_rejudge': decision.need_rejudge,
                                                       'outcome': outcome.value})
            if outcome is Branch.TO_VERDICT:
                break
        final_flag = FinalFlag.PASS if decision.is_pass else FinalFlag.FORCED_BY_TMAX

        presiding = panel.call(AgentRole.PRESIDING, 'presiding',
                               {'CASE_FACT': fact, 'EVENT_POINTS': event_points,
                                'CANDIDATES_FOR_JUDGE': candidates,
                                'JUDGMENT_OUT': format_judge(state.drafts[-1]),
                                'VERIFICATION_OPINION': render_feedback(state.feedback_history),
                                'LAW_CTX': law_ctx, 'PRECEDENTS_TEXT': precedents},
                               parse_presiding)
    except JurisPanelError as e:
        recorder.record('error', data={'type': type(e).__name__, 'message': str(e)})
        logger.warning('Case %s failed: %s', case.id, e)
        raise CaseFailedError(case.id, e, recorder.events) from e

    verdict = presiding.verdict
    ranked = rank_articles(presiding, state.drafts[-1], articles)
    recorder.record('result', data={'verdict': verdict.to_dict(), 'ranked_articles': ranked,
                                    'turns_used': state.turn, 'final_flag': final_flag.value,
                                    'draft_overridden': state.drafts[-1].predicted_article not in verdict.articles})
    return CaseResult(case_id=case.id, verdict=verdict, ranked_articles=ranked,
                      ranked_charges=list(verdict.charges), trace=recorder.events,
                      turns_used=state.turn, final_flag=final_flag, state=state)
