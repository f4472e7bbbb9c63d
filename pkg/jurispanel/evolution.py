import dataclasses
import logging

from . import util
from .backends import invoke_parsed
from .directives import Outcome
from .embedding import cosine
from .exceptions import ConfigError, JurisPanelError, ProtocolError
from .finch import single_linkage_groups
from .prompts import NONE_SENTINEL, AgentRole, assemble_prompt, render_numbered
from .protocol import parse_meta
from .retrieval import RetrievalContext, RetrievalSettings, score_item
from .verdict import label_set

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class EvolutionConfig:
    """
    Args:
        - batch_threshold (``int``): archived nodes that trigger a cycle
        - min_cluster_size (``int``): new nodes a cluster needs before a directive is induced from it
        - consolidation_period (``int``): consolidation runs every that many cycles
        - similarity_merge_threshold (``float``): cosine linking two directives into a merge group
        - phase_b_fallback (``bool``): induce a directive from a contrastive pair whose anchor has none
    """
    batch_threshold: int = 20
    min_cluster_size: int = 3
    consolidation_period: int = 3
    similarity_merge_threshold: float = 0.9
    phase_b_fallback: bool = True

    def validate(self):
        if self.batch_threshold < 2:
            raise ConfigError('batch_threshold must be >= 2, got {}'.format(self.batch_threshold))
        if self.min_cluster_size < 1:
            raise ConfigError('min_cluster_size must be >= 1, got {}'.format(self.min_cluster_size))
        if self.consolidation_period < 1:
            raise ConfigError('consolidation_period must be >= 1, got {}'.format(self.consolidation_period))
        if not -1.0 <= self.similarity_merge_threshold <= 1.0:
            raise ConfigError('similarity_merge_threshold must be in [-1, 1], got {}'.format(self.similarity_merge_threshold))
        return self


@dataclasses.dataclass(frozen=True)
class ContrastivePair:
    positive: object
    negative: object

    @property
    def anchor(self):
        return self.positive.labels.articles


@dataclasses.dataclass(frozen=True)
class PhaseBAction:
    kind: str
    entry_id: int
    directive_id: int = None


@dataclasses.dataclass(frozen=True)
class Merge:
    group: tuple
    directive_id: int


@dataclasses.dataclass
class CycleReport:
    cycle: int = 0
    adds: int = 0
    refines: int = 0
    prunes: int = 0
    keeps: int = 0
    merges: int = 0
    pruned: int = 0
    skipped_pairs: int = 0
    consolidated: bool = False
    errors: list = dataclasses.field(default_factory=list)

    def is_zero(self):
        return not (self.adds or self.refines or self.prunes or self.keeps or self.merges or self.pruned)

    def to_dict(self):
        return dataclasses.asdict(self)

    def __str__(self):
        return ('cycle {}: {} added, {} refined, {} prune signals, {} kept, {} merged, {} removed{}'
                .format(self.cycle, self.adds, self.refines, self.prunes, self.keeps, self.merges, self.pruned,
                        ', consolidation ran' if self.consolidated else ''))


def maybe_trigger(archive, config):
    """
    This function fires an evolution cycle once ``batch_threshold`` nodes were archived since
    the last one. Firing resets the counter.

    Returns:
        - ``bool``
    """
    with archive.lock:
        if archive.pending_batch() >= config.batch_threshold:
            archive.pending_batch(reset=True)
            return True
        return False


def _ask_meta(template, context, meta_backend, prompts):
    bundle = assemble_prompt(template, context, prompts)
    _, reply = invoke_parsed(AgentRole.META, bundle, meta_backend, parse_meta)
    return reply


def _anchor_text(articles):
    return ', '.join(str(a) for a in sorted(articles))


def split_by_labels(nodes):
    """
    This function splits nodes into sub-groups of identical label sets, ordered by label key.
    """
    groups = {}
    for node in nodes:
        groups.setdefault(node.labels.key(), []).append(node)
    return [groups[key] for key in sorted(groups)]


def phase_a_induce(archive, base, meta_backend, config, prompts=None):
    """
    This function induces one directive per cluster of newly archived nodes. Clusters are
    split by exact label set first; sub-groups smaller than ``min_cluster_size`` are skipped.
    A reply that does not parse, or is not an ADD, skips its group.

    Args:
        - archive (``jurispanel.archive.StandardsArchive``): archive with clusters assigned
        - base (``jurispanel.directives.DirectiveBase``): directive base
        - meta_backend: backend answering the induction prompt
        - config (``jurispanel.evolution.EvolutionConfig``): evolution settings
        - prompts (``jurispanel.prompts.PromptLibrary``): template source

    Returns:
        - ``list``: new directive ids
    """
    clusters = {}
    for node in archive.new_nodes():
        clusters.setdefault(node.cluster_id, []).append(node)
    added = []
    for cluster_id in sorted(clusters):
        for members in split_by_labels(clusters[cluster_id]):
            if len(members) < config.min_cluster_size:
                continue
            articles = members[0].labels.articles
            try:
                reply = _ask_meta('induce', {'ANCHOR': _anchor_text(articles),
                                             'TRAJECTORIES': render_numbered([m.txt for m in members])},
                                  meta_backend, prompts)
                if reply.action != 'ADD':
                    raise ProtocolError('induction expects ADD, got {}'.format(reply.action))
            except ProtocolError as e:
                logger.warning('Induction skipped for cluster %d (%d nodes): %s', cluster_id, len(members), e)
                continue
            added.append(base.add_directive(reply.text, articles, supporting=[m.node_id for m in members]))
    return added


def build_contrastive_pairs(archive, buffer):
    """
    This function pairs every failure with the archived node closest to it among the nodes
    whose label set equals the failure's gold label set. Failures with no such node, and
    failures whose predicted labels were right (term-only errors), are skipped.

    Returns:
        - ``list``: of `ContrastivePair`
    """
    by_labels = {}
    for node in archive.nodes():
        by_labels.setdefault(node.labels, []).append(node)
    pairs = []
    for entry in buffer:
        gold = entry.gold_labels
        if label_set(entry.pred) == gold:
            continue
        candidates = by_labels.get(gold)
        if not candidates:
            logger.info('Failure %d (case %s) has no archived counterpart', entry.entry_id, entry.case.id)
            continue
        positive = max(candidates, key=lambda n: (cosine(n.vector, entry.vector), -n.node_id))
        pairs.append(ContrastivePair(positive=positive, negative=entry))
    return pairs


def _top_directive(pair, base, archive, settings):
    candidates = base.with_anchor(pair.anchor)
    if not candidates:
        return None
    ctx = RetrievalContext(case_vector=pair.negative.vector, candidate_articles=pair.anchor,
                           seed_k=settings.seed_k, hops=settings.hops)
    scored = [score_item(d, ctx, archive, settings.weights) for d in candidates]
    return min(scored, key=lambda s: (-s.score, s.item.directive_id)).item


def phase_b_refine(pairs, base, archive, meta_backend, config, retrieval=None, prompts=None):
    """
    This function shows each contrastive pair and the best directive of its anchor to the meta
    agent and applies its answer: REFINE rewrites the directive and adds the positive node
    to its support, PRUNE decays it, KEEP reinforces it. A pair whose anchor has no directive
    induces one (when ``phase_b_fallback`` is set). Processed failures leave the buffer.

    Returns:
        - ``list``: of `PhaseBAction`
    """
    retrieval = retrieval or RetrievalSettings()
    actions = []
    processed = []
    try:
        for pair in pairs:
            entry_id = pair.negative.entry_id
            directive = _top_directive(pair, base, archive, retrieval)
            if directive is None and not config.phase_b_fallback:
                actions.append(PhaseBAction('noop', entry_id))
                continue
            try:
                reply = _ask_meta('diff', {'POSITIVE_TRAJECTORY': pair.positive.txt,
                                           'NEGATIVE_TRAJECTORY': pair.negative.txt,
                                           'DIRECTIVE_TEXT': directive.r_txt if directive else NONE_SENTINEL},
                                  meta_backend, prompts)
            except ProtocolError as e:
                logger.warning('Refinement skipped for failure %d: %s', entry_id, e)
                processed.append(entry_id)
                actions.append(PhaseBAction('noop', entry_id))
                continue
            actions.append(_apply_diff(reply, pair, directive, base))
            processed.append(entry_id)
    finally:
        # failures already acted on leave the buffer even when a later one aborts the phase
        archive.buffer.remove(processed)
    return actions


def _apply_diff(reply, pair, directive, base):
    entry_id = pair.negative.entry_id
    if directive is None:
        if reply.action in ('ADD', 'REFINE'):
            new_id = base.add_directive(reply.text, pair.anchor, supporting=[pair.positive.node_id])
            logger.info('Failure %d induced directive %d', entry_id, new_id)
            return PhaseBAction('add', entry_id, new_id)
        return PhaseBAction('noop', entry_id)
    if reply.action == 'REFINE':
        base.refine_directive(directive.directive_id, reply.text, added_support=[pair.positive.node_id])
        return PhaseBAction('refine', entry_id, directive.directive_id)
    if reply.action == 'PRUNE':
        base.record_outcome(directive.directive_id, Outcome.CONTRADICTED)
        return PhaseBAction('prune', entry_id, directive.directive_id)
    if reply.action == 'KEEP':
        base.record_outcome(directive.directive_id, Outcome.SUPPORTED)
        return PhaseBAction('keep', entry_id, directive.directive_id)
    return PhaseBAction('noop', entry_id, directive.directive_id)


def phase_c_consolidate(base, meta_backend, config, prompts=None):
    """
    This function merges near-duplicate directives: directives are grouped by exact anchor,
    then linked when their cosine similarity reaches ``similarity_merge_threshold``; each
    linked group of two or more is merged with a summarized text. Pruning runs afterwards.

    Returns:
        - ``tuple``: (list of `Merge`, list of pruned directive ids)
    """
    by_anchor = {}
    for d in base.directives():
        by_anchor.setdefault(tuple(sorted(d.anchor.articles)), []).append(d)
    merges = []
    for key in sorted(by_anchor):
        directives = by_anchor[key]
        for group in single_linkage_groups([d.vector for d in directives], config.similarity_merge_threshold):
            if len(group) < 2:
                continue
            members = [directives[i] for i in group]
            try:
                reply = _ask_meta('summarize', {'ANCHOR': _anchor_text(key),
                                                'DIRECTIVES': render_numbered([m.r_txt for m in members])},
                                  meta_backend, prompts)
                if reply.action not in ('ADD', 'REFINE'):
                    raise ProtocolError('summarization expects ADD, got {}'.format(reply.action))
            except ProtocolError as e:
                logger.warning('Consolidation skipped for anchor %s: %s', key, e)
                continue
            ids = tuple(m.directive_id for m in members)
            merges.append(Merge(group=ids, directive_id=base.consolidate(ids, reply.text)))
    return merges, base.prune()


def run_cycle(archive, base, meta_backend, config, cycle=1, retrieval=None, prompts=None):
    """
    This function runs one evolution cycle: clustering, induction, contrastive refinement,
    consolidation every ``consolidation_period`` cycles, and pruning. A failing phase is
    reported and never rolls back the phases before it.

    Args:
        - archive (``jurispanel.archive.StandardsArchive``): archive (its failure buffer feeds refinement)
        - base (``jurispanel.directives.DirectiveBase``): directive base
        - meta_backend: backend answering the evolution prompts
        - config (``jurispanel.evolution.EvolutionConfig``): evolution settings
        - cycle (``int``): 1-based cycle number
        - retrieval (``jurispanel.retrieval.RetrievalSettings``): scoring used to pick directives
        - prompts (``jurispanel.prompts.PromptLibrary``): template source

    Returns:
        - ``jurispanel.evolution.CycleReport``
    """
    config.validate()
    report = CycleReport(cycle=cycle)
    with archive.lock, base.lock:
        try:
            if len(archive):
                archive.assign_clusters()
            report.adds += len(phase_a_induce(archive, base, meta_backend, config, prompts))
        except JurisPanelError as e:
            report.errors.append('induction: {}'.format(e))
        try:
            pairs = build_contrastive_pairs(archive, archive.buffer)
            for action in phase_b_refine(pairs, base, archive, meta_backend, config, retrieval, prompts):
                if action.kind == 'add':
                    report.adds += 1
                elif action.kind == 'refine':
                    report.refines += 1
                elif action.kind == 'prune':
                    report.prunes += 1
                elif action.kind == 'keep':
                    report.keeps += 1
                else:
                    report.skipped_pairs += 1
        except JurisPanelError as e:
            report.errors.append('refinement: {}'.format(e))
        try:
            if cycle % config.consolidation_period == 0:
                merges, pruned = phase_c_consolidate(base, meta_backend, config, prompts)
                report.consolidated = True
                report.merges = len(merges)
                report.pruned = len(pruned)
            else:
                report.pruned = len(base.prune())
        except JurisPanelError as e:
            report.errors.append('consolidation: {}'.format(e))
        archive.mark_evolved()
    for error in report.errors:
        logger.warning('Evolution cycle %d: %s', cycle, error)
    logger.info('Evolution %s', report)
    return report


def append_cycle_report(file_name, report):
    util.append_jsonl(file_name, report.to_dict())


def count_cycles(file_name):
    try:
        return len(util.read_jsonl(file_name))
    except FileNotFoundError:
        return 0
