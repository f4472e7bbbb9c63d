"""
A self-contained synthetic setting: a small statute file, a corpus of templated cases and a
rule-based panel that runs the whole pipeline offline.

The simulated case judge confuses unprovoked attacks on strangers (picking quarrels) with
intentional injury. The simulated supervisor only catches the confusion when a directive
anchored on the right article is injected, so accuracy improves once evolution has
produced that directive.
"""
import logging
import os
import random
import re
import shutil

from . import util
from .backends import AgentBackendConfig, SimulatedBackend
from .config import RunConfig, apply_overrides, load_config, save_config
from .evolution import EvolutionConfig
from .exceptions import ProtocolError
from .prompts import NONE_SENTINEL, AgentRole
from .protocol import (Draft, ReviewDecision, format_assistant, format_clerk,
                       format_judge, format_meta, format_presiding, format_reflection,
                       format_supervisor, parse_judge)
from .runner import run_inference
from .verdict import TermOfImprisonment, Verdict

logger = logging.getLogger(__name__)

INJURY = 234
THEFT = 264
QUARREL = 293

STATUTES = [
    {'article_id': 232, 'title': 'Intentional homicide',
     'text': 'Whoever intentionally kills another person shall be sentenced to death, life imprisonment or fixed-term imprisonment of not less than ten years.'},
    {'article_id': INJURY, 'title': 'Intentional injury',
     'text': 'Whoever intentionally injures the body of another person shall be sentenced to fixed-term imprisonment of not more than three years.'},
    {'article_id': 263, 'title': 'Robbery',
     'text': 'Whoever robs public or private property by violence, coercion or other methods shall be sentenced to fixed-term imprisonment.'},
    {'article_id': THEFT, 'title': 'Theft',
     'text': 'Whoever steals a relatively large amount of public or private property shall be sentenced to fixed-term imprisonment.'},
    {'article_id': QUARREL, 'title': 'Picking quarrels and provoking trouble',
     'text': 'Whoever wantonly assaults others, chases or intercepts others, or causes serious disorder in a public place shall be sentenced to fixed-term imprisonment of not more than five years.'},
]

CHARGES = {
    232: 'intentional homicide',
    INJURY: 'intentional injury',
    263: 'robbery',
    THEFT: 'theft',
    QUARREL: 'picking quarrels and provoking trouble',
}

SEVERITY_MONTHS = {'minor': 5, 'moderate': 18, 'serious': 40}

DIRECTIVE_TEXTS = {
    INJURY: 'Deliberate violence that grows out of a personal dispute and injures the victim is intentional injury.',
    THEFT: 'Secretly taking property that belongs to someone else is theft, graded by the value taken.',
    QUARREL: 'Gratuitous violence against a stranger in a public place is picking quarrels and provoking trouble, even when the victim is injured.',
}

SUPERVISOR_HINT = ('The victim was a stranger and the attack had no cause; '
                   'weigh whether the conduct disturbs public order.')

REFLECTION_HINT = ('The attack on a stranger had no cause at all; '
                   'the conduct disturbs public order more than it targets one person.')

# (drafted article, cue in the facts) -> article whose directive exposes the confusion
CONFUSIONS = {(INJURY, 'stranger'): QUARREL}

# keyword -> article, first match wins
JUDGE_KEYWORDS = (('disturbs public order', QUARREL), ('stole', THEFT), ('brawl', QUARREL), ('injured', INJURY))

_NAMES = ('Zhang', 'Wang', 'Li', 'Zhao', 'Chen', 'Liu', 'Yang', 'Huang', 'Zhou', 'Wu', 'Xu', 'Sun')
_PLACES = ('a night market', 'a railway station square', 'a karaoke bar', 'a bus terminal', 'a food court', 'a park')
_WEAPONS = ('a beer bottle', 'a wooden stick', 'his fists', 'a metal chair', 'a brick')
_DISPUTES = ('a parking space', 'an unpaid debt', 'noise at night', 'a broken fence', 'a family matter')
_ITEMS = ('a motorcycle', 'a laptop', 'cash and jewellery', 'copper cable', 'two mobile phones')
_LOCATIONS = ('home', 'shop', 'warehouse', 'car', 'office')

_TEMPLATES = {
    'injury': ('{name} argued with the neighbour {victim} over {dispute} and struck {victim} with {weapon}. '
               '{victim} was injured. The injury was assessed as {severity}.'),
    'theft': ('{name} entered the {location} of {victim} at night and stole {item}. '
              '{name} later sold the goods. The loss was assessed as {severity}.'),
    'brawl': ('{name} started a brawl in {place} after drinking, smashing tables and chasing customers. '
              '{victim} was pushed to the floor. The disorder was assessed as {severity}.'),
    'stranger': ('{name} was drunk in {place} and attacked a stranger, {victim}, without any provocation, hitting {victim} with {weapon}. '
                 '{victim} was injured. The injury was assessed as {severity}.'),
}
_GOLD_ARTICLE = {'injury': INJURY, 'theft': THEFT, 'brawl': QUARREL, 'stranger': QUARREL}

# one round of six cases; the corpus repeats it
_ROUND = ('injury', 'theft', 'brawl', 'injury', 'theft', 'stranger')


def make_corpus(n_cases=60, seed=0):
    """
    This function builds the synthetic corpus. Cases follow a fixed round of kinds (two
    injuries, two thefts, one brawl, one attack on a stranger); names, places and severity
    are drawn from a seeded generator.

    Args:
        - n_cases (``int``): number of cases
        - seed (``int``): generator seed

    Returns:
        - ``list``: CAIL-style case records (dictionaries)
    """
    if n_cases < 1:
        raise ValueError('n_cases must be >= 1, got {}'.format(n_cases))
    rng = random.Random(seed)
    records = []
    for i in range(n_cases):
        kind = _ROUND[i % len(_ROUND)]
        name, victim = rng.sample(_NAMES, 2)
        severity = rng.choice(sorted(SEVERITY_MONTHS))
        fact = _TEMPLATES[kind].format(name=name, victim=victim, severity=severity, place=rng.choice(_PLACES),
                                       weapon=rng.choice(_WEAPONS), dispute=rng.choice(_DISPUTES),
                                       item=rng.choice(_ITEMS), location=rng.choice(_LOCATIONS))
        article = _GOLD_ARTICLE[kind]
        gold = Verdict(articles=(article,), charges=(CHARGES[article],),
                       term=TermOfImprisonment(imprisonment_months=SEVERITY_MONTHS[severity]))
        records.append({'id': 'demo-{:03d}'.format(i + 1), 'fact': fact, 'meta': gold.to_dict()})
    return records


def make_config(simulator='demo', batch_threshold=20, epochs=2):
    """
    This function returns the run config of the demo: every backend answers with the
    simulated panel, evolution fires every ``batch_threshold`` archived nodes and
    consolidates every cycle.

    Returns:
        - ``jurispanel.config.RunConfig``
    """
    config = RunConfig()
    config.paths.statutes = 'statutes.jsonl'
    config.paths.corpus = 'corpus.jsonl'
    config.evolution = EvolutionConfig(batch_threshold=batch_threshold, min_cluster_size=3, consolidation_period=1)
    config.epochs = epochs
    names = [r.value for r in AgentRole] + ['teacher', 'expert']
    config.backends = {name: AgentBackendConfig(kind='simulated', simulator=simulator) for name in names}
    return config


def write_demo(directory, n_cases=60, seed=0, batch_threshold=20, epochs=2):
    """
    This function writes ``statutes.jsonl``, ``corpus.jsonl`` and ``config.json`` into
    ``directory``.

    Returns:
        - ``str``: path of the config file
    """
    os.makedirs(directory, exist_ok=True)
    util.write_jsonl(os.path.join(directory, 'statutes.jsonl'), STATUTES)
    util.write_jsonl(os.path.join(directory, 'corpus.jsonl'), make_corpus(n_cases, seed))
    config_file = os.path.join(directory, 'config.json')
    save_config(make_config(batch_threshold=batch_threshold, epochs=epochs), config_file)
    logger.info('Demo bundle written to %s', directory)
    return config_file


def _section(text, start, end=None):
    i = text.find(start)
    if i < 0:
        return ''
    i += len(start)
    j = text.find(end, i) if end else -1
    return (text[i:j] if j >= 0 else text[i:]).strip()


def _articles_in(text):
    return [int(a) for a in re.findall(r'\d+', text)]


def _judge(fact, opinion):
    lowered = '{}\n{}'.format(fact, opinion).lower()
    for keyword, article in JUDGE_KEYWORDS:
        if keyword in lowered:
            return article, 'The facts mention "{}".'.format(keyword)
    return INJURY, 'No decisive element found.'


def _anchored(law_ctx, article):
    return re.search(r'\| articles [\d, ]*\b{}\b\]'.format(article), law_ctx) is not None


def _directive_text(articles):
    if len(articles) == 1 and articles[0] in DIRECTIVE_TEXTS:
        return DIRECTIVE_TEXTS[articles[0]]
    return 'Apply articles {} when the facts match the archived precedents.'.format(', '.join(map(str, articles)))


def demo_rule(role, bundle):
    """
    This function is the simulated panel: it answers every role and evolution prompt from the
    prompt text alone, deterministically.
    """
    text = bundle.user_text
    template = bundle.template
    if template == 'clerk':
        fact = _section(text, 'Case facts:')
        return format_clerk([s.strip().rstrip('.') for s in fact.split('. ') if s.strip()])
    if template == 'assistant':
        context = _section(text, 'Candidate articles:')
        return format_assistant([int(a) for a in re.findall(r'^\[(\d+)\]', context, flags=re.MULTILINE)][:5])
    if template == 'case_judge':
        opinion = _section(text, 'Supervisor opinion:')
        article, explanation = _judge(_section(text, 'Facts: ', '\nEvent points:'),
                                      '' if opinion == NONE_SENTINEL else opinion)
        return format_judge(Draft(article, explanation))
    if template == 'supervisor':
        fact = _section(text, 'Facts: ', '\nJudgment output:').lower()
        draft = parse_judge(_section(text, 'Judgment output: ', '\nCandidate articles:'))
        law_ctx = _section(text, 'Reference directives:', '\nPrecedents:')
        for (article, cue), target in sorted(CONFUSIONS.items()):
            if draft.predicted_article == article and cue in fact and _anchored(law_ctx, target):
                return format_supervisor(ReviewDecision(True, SUPERVISOR_HINT))
        return format_supervisor(ReviewDecision(False, ''))
    if template == 'presiding':
        fact = _section(text, 'Facts: ', '\nEvent points:')
        draft = parse_judge(_section(text, 'Case judge draft: ', '\nSupervisor opinions:'))
        severity = re.search(r'assessed as (\w+)', fact)
        months = SEVERITY_MONTHS.get(severity.group(1) if severity else '', 12)
        article = draft.predicted_article
        verdict = Verdict(articles=(article,), charges=(CHARGES.get(article, 'article {}'.format(article)),),
                          term=TermOfImprisonment(imprisonment_months=months))
        return 'The draft is adopted.\n' + format_presiding(verdict)
    if template in ('induce', 'summarize'):
        anchor = _articles_in(_section(text, 'Anchor articles:', '\n'))
        return format_meta('ADD', _directive_text(anchor))
    if template == 'diff':
        if _section(text, 'Current directive:') != NONE_SENTINEL:
            return format_meta('KEEP')
        positive = _section(text, 'Correct trajectory:', '\nIncorrect trajectory:')
        found = re.search(r'"relevant_articles":\s*\[([^\]]*)\]', positive)
        return format_meta('ADD', _directive_text(_articles_in(found.group(1)) if found else []))
    if template == 'reflect':
        return format_reflection(REFLECTION_HINT)
    raise ProtocolError('the demo panel has no answer for template {}'.format(template))


SIMULATORS = {'demo': demo_rule}


def get_simulator(name):
    try:
        return SIMULATORS[name]
    except KeyError:
        raise ValueError('Supported simulators: {} while {} was provided'.format(', '.join(SIMULATORS), name))


def simulated_backends(name='demo'):
    """
    This function returns one shared simulated backend under every role and alignment name.

    Returns:
        - ``dict``: role or name -> `jurispanel.backends.SimulatedBackend`
    """
    backend = SimulatedBackend(get_simulator(name), name=name)
    backends = {role: backend for role in AgentRole}
    backends['teacher'] = backend
    backends['expert'] = backend
    return backends


def run_closed_loop(directory, n_cases=60, seed=0, batch_threshold=20, epochs=2):
    """
    This function writes the demo bundle and runs it twice from empty memory, once with memory
    injection and once without, each in its own memory and output directories. Earlier
    results of the two runs under ``directory`` are removed first.

    Returns:
        - ``dict``: ``'memory'`` and ``'no_memory'`` -> `jurispanel.runner.RunSummary`
    """
    config_file = write_demo(directory, n_cases, seed, batch_threshold, epochs)
    summaries = {}
    for name, no_memory in (('memory', False), ('no_memory', True)):
        shutil.rmtree(os.path.join(directory, name), ignore_errors=True)
        config = apply_overrides(load_config(config_file), no_memory=no_memory)
        config.paths.memory_dir = os.path.join(directory, name, 'memory')
        config.paths.output_dir = os.path.join(directory, name, 'outputs')
        config.validate(check_paths=True)
        summaries[name] = run_inference(config)
    return summaries
