"""
Batch driver shared by the command line and the demo: loads memory, runs the panel over a
corpus for one or more epochs, archives outcomes, fires evolution and writes every output file.
"""
import concurrent.futures
import dataclasses
import logging
import os
import random

import numpy as np
import torch
from tqdm import tqdm

from . import util
from .archive import StandardsArchive
from .backends import make_backends
from .directives import DirectiveBase
from .embedding import make_embedder
from .evolution import append_cycle_report, count_cycles, maybe_trigger, run_cycle
from .exceptions import CaseFailedError, JurisPanelError
from .metrics import evaluate, format_report, write_report
from .prompts import AgentRole, PromptLibrary
from .statutes import load_statutes
from .trace import write_trace
from .verdict import get_term_bins, load_corpus
from .workflow import run_case

logger = logging.getLogger(__name__)

EVOLUTION_LOG = 'evolution.jsonl'
PREDICTION_FILE = 'predictions.jsonl'
METRICS_FILE = 'metrics.json'
TRACE_DIR = 'traces'


def seed_everything(seed):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


@dataclasses.dataclass
class EpochSummary:
    """
    Args:
        - epoch (``int``): 1-based epoch number
        - processed (``int``): cases that produced a verdict
        - skipped (``list``): ids of failed cases
        - archived (``int``): new archive nodes
        - buffered (``int``): new failure buffer entries
        - cycles (``list``): `jurispanel.evolution.CycleReport` of the cycles fired during the epoch
        - report (``jurispanel.metrics.MetricsReport``): metrics over the cases with a gold verdict (None without any)
        - output_dir (``str``): directory of the epoch files
    """
    epoch: int
    processed: int = 0
    skipped: list = dataclasses.field(default_factory=list)
    archived: int = 0
    buffered: int = 0
    cycles: list = dataclasses.field(default_factory=list)
    report: object = None
    output_dir: str = ''

    def article_accuracy(self):
        return self.report.subtasks['article'].acc if self.report is not None else None


@dataclasses.dataclass
class RunSummary:
    epochs: list = dataclasses.field(default_factory=list)
    hard_errors: int = 0

    @property
    def ok(self):
        return self.hard_errors == 0


class Session():
    """
    Everything a run shares: the statute library, the two memory layers, the backends and the
    templates. Memory is loaded from ``config.paths.memory_dir`` when it exists there.

    Args:
        - config (``jurispanel.config.RunConfig``): run config
        - backends (``dict``): role or name -> backend (built from the config if None)
    """
    def __init__(self, config, backends=None):
        self.config = config
        self.bins = get_term_bins(config.term_bins)
        self.provider = make_embedder(config.embedding)
        self.library = load_statutes(config.paths.statutes, self.provider)
        self.backends = backends if backends is not None else make_backends(config.backends)
        self.prompts = PromptLibrary(config.paths.template_dir or None)
        memory_dir = config.paths.memory_dir
        if StandardsArchive.exists(memory_dir):
            self.archive = StandardsArchive.load(memory_dir, self.provider, self.bins, tau=config.archive.tau)
            logger.info('Loaded archive with %d nodes from %s', len(self.archive), memory_dir)
        else:
            self.archive = StandardsArchive(self.provider, tau=config.archive.tau,
                                            buffer_capacity=config.archive.buffer_capacity, bins=self.bins)
        if DirectiveBase.exists(memory_dir):
            self.base = DirectiveBase.load(memory_dir, self.provider, config.directives)
            logger.info('Loaded %d directives from %s', len(self.base), memory_dir)
        else:
            self.base = DirectiveBase(self.provider, config.directives)
        self.evolution_log = os.path.join(memory_dir, EVOLUTION_LOG)

    def run_case(self, case):
        return run_case(case, self.config.panel, self.backends, self.library, self.archive, self.base,
                        self.provider, self.config.retrieval, self.prompts)

    def evolve(self):
        """
        This function runs one evolution cycle and appends its report to the evolution log.

        Returns:
            - ``jurispanel.evolution.CycleReport``
        """
        cycle = count_cycles(self.evolution_log) + 1
        # a forced cycle restarts the trigger count like a triggered one
        self.archive.pending_batch(reset=True)
        report = run_cycle(self.archive, self.base, self.backends[AgentRole.META], self.config.evolution,
                           cycle, self.config.retrieval, self.prompts)
        append_cycle_report(self.evolution_log, report)
        return report

    def save_memory(self):
        memory_dir = self.config.paths.memory_dir
        self.archive.save(memory_dir)
        self.base.save(memory_dir)


def _run_chunk(session, chunk, concurrency):
    # memory is read-only while a chunk runs; outcomes come back in corpus order
    def attempt(case):
        try:
            return session.run_case(case)
        except CaseFailedError as e:
            return e
    if concurrency == 1 or len(chunk) == 1:
        return [attempt(case) for case in chunk]
    with concurrent.futures.ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(attempt, chunk))


def run_epoch(session, cases, epoch, output_dir):
    """
    This function runs the panel over every case once. Cases run ``concurrency`` at a time;
    after each chunk the outcomes are archived in corpus order and evolution fires whenever
    enough nodes were archived. Failed cases are skipped and counted.

    Args:
        - session (``jurispanel.runner.Session``): run session
        - cases (``list``): list of `jurispanel.verdict.CaseRecord`
        - epoch (``int``): 1-based epoch number
        - output_dir (``str``): directory of this epoch's files

    Returns:
        - ``jurispanel.runner.EpochSummary``
    """
    config = session.config
    summary = EpochSummary(epoch=epoch, output_dir=output_dir)
    trace_dir = os.path.join(output_dir, TRACE_DIR)
    os.makedirs(trace_dir, exist_ok=True)
    predictions, scored = [], []
    step = config.concurrency
    progress = tqdm(total=len(cases), desc='Epoch {}'.format(epoch), disable=len(cases) < 2)
    for start in range(0, len(cases), step):
        chunk = cases[start:start + step]
        for case, outcome in zip(chunk, _run_chunk(session, chunk, step)):
            progress.update(1)
            write_trace(os.path.join(trace_dir, '{}.jsonl'.format(case.id)), case.id, outcome.trace)
            if isinstance(outcome, CaseFailedError):
                summary.skipped.append(case.id)
                continue
            predictions.append(outcome.to_dict())
            summary.processed += 1
            if case.gold is None:
                continue
            scored.append((outcome, case.gold))
            if not config.archive_enabled:
                continue
            archived = session.archive.archive_trajectory(case, outcome.reasoning, outcome.verdict)
            if archived.archived:
                summary.archived += 1
            else:
                summary.buffered += 1
            if config.evolve_enabled and maybe_trigger(session.archive, config.evolution):
                summary.cycles.append(session.evolve())
    progress.close()
    util.write_jsonl(os.path.join(output_dir, PREDICTION_FILE), predictions)
    if scored:
        summary.report = evaluate(scored, session.bins, config.metrics.average_over, config.metrics.acc_mode,
                                  skipped=len(summary.skipped))
        write_report(os.path.join(output_dir, METRICS_FILE), summary.report)
        logger.info('Epoch %d metrics:\n%s', epoch, format_report(summary.report))
    logger.info('Epoch %d: %d cases judged, %d skipped, %d archived, %d buffered, %d evolution cycles',
                epoch, summary.processed, len(summary.skipped), summary.archived, summary.buffered,
                len(summary.cycles))
    return summary


def run_inference(config, backends=None, cases=None):
    """
    This function runs ``config.epochs`` epochs of batch inference. While archiving is
    enabled the memory directory is locked and the memory is saved after every epoch.

    Args:
        - config (``jurispanel.config.RunConfig``): validated run config
        - backends (``dict``): role -> backend (built from the config if None)
        - cases (``list``): cases to run (the config's corpus if None)

    Returns:
        - ``jurispanel.runner.RunSummary``
    """
    seed_everything(config.seed)
    if cases is None:
        cases = load_corpus(config.paths.corpus)
    session = Session(config, backends)
    summary = RunSummary()

    def run_all():
        for epoch in range(1, config.epochs + 1):
            output_dir = os.path.join(config.paths.output_dir, 'epoch-{}'.format(epoch))
            try:
                summary.epochs.append(run_epoch(session, cases, epoch, output_dir))
            except JurisPanelError as e:
                logger.error('Epoch %d aborted: %s', epoch, e)
                summary.hard_errors += 1
                break
            finally:
                if config.archive_enabled:
                    session.save_memory()

    if config.archive_enabled:
        with util.memory_lock(config.paths.memory_dir):
            run_all()
    else:
        run_all()
    return summary
