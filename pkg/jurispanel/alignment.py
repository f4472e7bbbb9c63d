"""
Expert-alignment data: teacher-distilled SFT samples, the teacher's error set and
reflection-derived preference pairs. Only the data files are produced here.
"""
import dataclasses
import logging
import os

from tqdm import tqdm

from . import util
from .backends import invoke_parsed
from .exceptions import JurisPanelError
from .prompts import NONE_SENTINEL, AgentRole, assemble_prompt, render_lines, render_numbered
from .protocol import format_judge, parse_judge, parse_reflection

logger = logging.getLogger(__name__)

SFT_FILE = 'sft.jsonl'
FAULT_FILE = 'faults.jsonl'
PAIR_FILE = 'dpo_pairs.jsonl'


@dataclasses.dataclass(frozen=True)
class JudgeSample:
    """
    One teacher prediction. With a correct article it is an SFT sample, otherwise a fault.

    Args:
        - case_id (``str``): case id
        - fact (``str``): case facts
        - candidates (``tuple``): candidate article ids shown to the judge
        - candidates_text (``str``): rendered candidate statutes
        - prompt (``str``): full judge prompt
        - prediction (``jurispanel.protocol.Draft``): teacher output
        - gold_article (``int``): first gold article
    """
    case_id: str
    fact: str
    candidates: tuple
    candidates_text: str
    prompt: str
    prediction: object
    gold_article: int

    @property
    def correct(self):
        return self.prediction.predicted_article == self.gold_article

    def to_dict(self):
        return {'id': self.case_id, 'fact': self.fact, 'candidates': list(self.candidates),
                'prompt': self.prompt, 'target': format_judge(self.prediction),
                'gold_article': self.gold_article}


@dataclasses.dataclass(frozen=True)
class Attempt:
    prediction: object
    reflection: str


@dataclasses.dataclass
class ReflectionTrajectory:
    sample: JudgeSample
    attempts: list = dataclasses.field(default_factory=list)
    corrected_at: int = None

    def to_dict(self):
        return {'id': self.sample.case_id, 'corrected_at': self.corrected_at,
                'attempts': [{'prediction': format_judge(a.prediction), 'reflection': a.reflection}
                             for a in self.attempts]}


@dataclasses.dataclass(frozen=True)
class PreferencePair:
    case_id: str
    prompt: str
    chosen: str
    rejected: str

    def to_dict(self):
        return {'id': self.case_id, 'prompt': self.prompt, 'chosen': self.chosen, 'rejected': self.rejected}


@dataclasses.dataclass
class AlignmentSummary:
    sft: int = 0
    faults: int = 0
    pairs: int = 0
    skipped: int = 0
    aborted: int = 0

    def __str__(self):
        return '{} SFT samples, {} faults, {} preference pairs ({} cases skipped, {} reflections aborted)'.format(
            self.sft, self.faults, self.pairs, self.skipped, self.aborted)


def _judge_context(fact, candidates_text, opinion=NONE_SENTINEL):
    return {'CASE_FACT': fact, 'EVENT_POINTS': NONE_SENTINEL,
            'CANDIDATES_FOR_JUDGE': candidates_text, 'VERIFICATION_OPINION': opinion}


def _candidates(case, library, k):
    articles = tuple(a for a, _ in library.search(case.fact_text, k))
    return articles, render_lines([library[a].render() for a in articles])


def distill_sft_set(corpus, teacher_backend, library, k=10, prompts=None):
    """
    This function asks the teacher for a draft on every case and splits the answers by their
    article: correct ones are SFT samples, wrong ones are faults. Cases whose call fails are
    skipped.

    Args:
        - corpus (``list``): list of `jurispanel.verdict.CaseRecord` with gold verdicts
        - teacher_backend: backend answering the case judge prompt
        - library (``jurispanel.statutes.StatuteLibrary``): statute library
        - k (``int``): number of candidate statutes
        - prompts (``jurispanel.prompts.PromptLibrary``): template source

    Returns:
        - ``tuple``: (list of SFT `JudgeSample`, list of fault `JudgeSample`, number of skipped cases)
    """
    sft, faults, skipped = [], [], 0
    for case in tqdm(corpus, desc='Distilling', disable=len(corpus) < 2):
        if case.gold is None:
            raise ValueError('case {} has no gold verdict'.format(case.id))
        articles, candidates_text = _candidates(case, library, k)
        bundle = assemble_prompt('case_judge', _judge_context(case.fact_text, candidates_text), prompts)
        try:
            _, draft = invoke_parsed(AgentRole.CASE_JUDGE, bundle, teacher_backend, parse_judge)
        except JurisPanelError as e:
            logger.warning('Teacher failed on case %s: %s', case.id, e)
            skipped += 1
            continue
        sample = JudgeSample(case_id=case.id, fact=case.fact_text, candidates=articles,
                             candidates_text=candidates_text, prompt=bundle.text(),
                             prediction=draft, gold_article=case.gold.articles[0])
        (sft if sample.correct else faults).append(sample)
    return sft, faults, skipped


def reflection_loop(fault, reflector_backend, expert_backend, max_iters=3, prompts=None):
    """
    This function lets a reflector, who knows the gold article, comment on the expert's latest
    prediction; the expert then predicts again with every reflection so far. It stops at the
    first correct prediction or after ``max_iters`` rounds.

    Args:
        - fault (``jurispanel.alignment.JudgeSample``): a wrong teacher prediction
        - reflector_backend: backend answering the reflection prompt
        - expert_backend: backend answering the case judge prompt
        - max_iters (``int``): maximum number of reflection rounds
        - prompts (``jurispanel.prompts.PromptLibrary``): template source

    Returns:
        - ``jurispanel.alignment.ReflectionTrajectory``: ``corrected_at`` is the 1-based round of the first correct prediction
    """
    if max_iters < 1:
        raise ValueError('max_iters must be >= 1, got {}'.format(max_iters))
    if fault.correct:
        raise ValueError('case {}: the initial prediction is already correct'.format(fault.case_id))
    trajectory = ReflectionTrajectory(sample=fault)
    latest = fault.prediction
    reflections = []
    for i in range(1, max_iters + 1):
        bundle = assemble_prompt('reflect', {'CASE_FACT': fault.fact, 'CANDIDATES_FOR_JUDGE': fault.candidates_text,
                                             'JUDGMENT_OUT': format_judge(latest), 'GOLD_LABEL': fault.gold_article,
                                             'REFLECTION_HISTORY': render_numbered(reflections)}, prompts)
        _, reflection = invoke_parsed(AgentRole.REFLECTOR, bundle, reflector_backend, parse_reflection)
        reflections.append(reflection)
        bundle = assemble_prompt('case_judge', _judge_context(fault.fact, fault.candidates_text,
                                                              render_numbered(reflections)), prompts)
        _, latest = invoke_parsed(AgentRole.CASE_JUDGE, bundle, expert_backend, parse_judge)
        trajectory.attempts.append(Attempt(prediction=latest, reflection=reflection))
        if latest.predicted_article == fault.gold_article:
            trajectory.corrected_at = i
            break
    return trajectory


def build_preference_pairs(trajectories):
    """
    This function turns every corrected trajectory into one preference pair: the corrected
    prediction is chosen, the initial (fault) prediction rejected.

    Returns:
        - ``list``: of `PreferencePair`
    """
    pairs = []
    for t in trajectories:
        if t.corrected_at is None:
            continue
        winner = t.attempts[t.corrected_at - 1].prediction
        pairs.append(PreferencePair(case_id=t.sample.case_id, prompt=t.sample.prompt,
                                    chosen=format_judge(winner), rejected=format_judge(t.sample.prediction)))
    return pairs


def build_alignment_data(corpus, teacher_backend, reflector_backend, expert_backend, library, output_dir,
                         max_iters=3, k=10, prompts=None):
    """
    This function writes ``sft.jsonl``, ``faults.jsonl`` and ``dpo_pairs.jsonl`` into ``output_dir``.

    Returns:
        - ``jurispanel.alignment.AlignmentSummary``
    """
    sft, faults, skipped = distill_sft_set(corpus, teacher_backend, library, k, prompts)
    trajectories = []
    aborted = 0
    for fault in tqdm(faults, desc='Reflecting', disable=len(faults) < 2):
        try:
            trajectories.append(reflection_loop(fault, reflector_backend, expert_backend, max_iters, prompts))
        except JurisPanelError as e:
            logger.warning('Reflection aborted for case %s: %s', fault.case_id, e)
            aborted += 1
    pairs = build_preference_pairs(trajectories)
    os.makedirs(output_dir, exist_ok=True)
    util.write_jsonl(os.path.join(output_dir, SFT_FILE), (s.to_dict() for s in sft))
    util.write_jsonl(os.path.join(output_dir, FAULT_FILE), (f.to_dict() for f in faults))
    util.write_jsonl(os.path.join(output_dir, PAIR_FILE), (p.to_dict() for p in pairs))
    summary = AlignmentSummary(sft=len(sft), faults=len(faults), pairs=len(pairs), skipped=skipped, aborted=aborted)
    logger.info('Alignment data: %s', summary)
    return summary
