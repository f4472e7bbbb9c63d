import dataclasses

import torch

from .archive import StandardNode
from .embedding import cosine
from .exceptions import ConfigError


@dataclasses.dataclass
class RetrievalWeights:
    alpha: float = 0.4
    beta: float = 0.3
    gamma: float = 0.3

    def validate(self):
        if min(self.alpha, self.beta, self.gamma) < 0.0:
            raise ConfigError('retrieval weights must be non-negative, got {}'.format(self))
        if self.alpha + self.beta + self.gamma <= 0.0:
            raise ConfigError('retrieval weights must not all be zero')
        return self


@dataclasses.dataclass
class RetrievalSettings:
    """
    Args:
        - weights (``jurispanel.retrieval.RetrievalWeights``): score weights
        - seed_k (``int``): number of seed nodes activated by cosine similarity
        - hops (``int``): diffusion depth from the seeds
        - topo_mode (``str``): ``'normalized'`` (co-activation count over the activation size) or ``'raw'`` (count)
    """
    weights: RetrievalWeights = dataclasses.field(default_factory=RetrievalWeights)
    seed_k: int = 5
    hops: int = 2
    topo_mode: str = 'normalized'

    def validate(self):
        self.weights.validate()
        if self.seed_k < 1:
            raise ConfigError('seed_k must be >= 1, got {}'.format(self.seed_k))
        if self.hops < 0:
            raise ConfigError('hops must be >= 0, got {}'.format(self.hops))
        if self.topo_mode not in ('normalized', 'raw'):
            raise ConfigError('topo_mode must be normalized or raw, got {}'.format(self.topo_mode))
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        weights = RetrievalWeights(**d.pop('weights', {}))
        return cls(weights=weights, **d)


@dataclasses.dataclass(frozen=True)
class RetrievalContext:
    """
    Query side of a retrieval: the current case and its candidate statutes.

    Args:
        - case_vector (``torch.tensor``): unit embedding of the case
        - candidate_articles (``frozenset``): candidate article ids (may be empty)
        - seed_k (``int``): seed activation size
        - hops (``int``): diffusion depth
    """
    case_vector: torch.Tensor
    candidate_articles: frozenset = frozenset()
    seed_k: int = 5
    hops: int = 2

    def __post_init__(self):
        object.__setattr__(self, 'candidate_articles', frozenset(self.candidate_articles))
        if self.seed_k < 1:
            raise ValueError('seed_k must be >= 1, got {}'.format(self.seed_k))
        if self.hops < 0:
            raise ValueError('hops must be >= 0, got {}'.format(self.hops))


@dataclasses.dataclass(frozen=True)
class ScoredItem:
    item: object
    score: float
    iou: float
    topo: float
    sem_sim: float

    def to_dict(self):
        key = 'node_id' if isinstance(self.item, StandardNode) else 'directive_id'
        return {key: getattr(self.item, key), 'score': self.score,
                'iou': self.iou, 'topo': self.topo, 'sem_sim': self.sem_sim}


def make_context(case_vector, candidate_articles, settings):
    return RetrievalContext(case_vector=case_vector, candidate_articles=frozenset(candidate_articles),
                            seed_k=settings.seed_k, hops=settings.hops)


def iou(item_labels, candidates):
    """
    This function returns the intersection over union of two article sets (0 when both are empty).
    """
    item_labels, candidates = set(item_labels), set(candidates)
    union = item_labels | candidates
    if not union:
        return 0.0
    return len(item_labels & candidates) / len(union)


def activation_set(ctx, graph):
    """
    This function activates the ``seed_k`` archive nodes closest to the case and diffuses the
    activation ``hops`` edges out.

    Args:
        - ctx (``jurispanel.retrieval.RetrievalContext``): query context
        - graph (``jurispanel.archive.StandardsArchive``): archive

    Returns:
        - ``set``: activated node ids
    """
    nodes = graph.nodes()
    if not nodes:
        return set()
    ranked = sorted(nodes, key=lambda n: (-cosine(n.vector, ctx.case_vector), n.node_id))
    activated = set()
    for seed in ranked[:ctx.seed_k]:
        activated |= graph.neighbors(seed.node_id, ctx.hops)
    return activated


def _associated_ids(item, graph):
    if isinstance(item, StandardNode):
        return graph.adjacent(item.node_id) | {item.node_id}
    return item.supporting


def topo_score(item, ctx, graph, activated=None, raw=False):
    """
    This function returns the co-activation score of a memory item: the share of activated
    archive nodes associated with it. A directive is associated with its supporting nodes,
    an archived node with itself and its graph neighbours.

    Args:
        - item (`jurispanel.archive.StandardNode` or `jurispanel.directives.Directive`): memory item
        - ctx (``jurispanel.retrieval.RetrievalContext``): query context
        - graph (``jurispanel.archive.StandardsArchive``): archive
        - activated (``set``): precomputed activation set (computed from ``ctx`` if None)
        - raw (``bool``): return the count instead of the share

    Returns:
        - ``float``
    """
    if activated is None:
        activated = activation_set(ctx, graph)
    count = len(activated & _associated_ids(item, graph))
    if raw:
        return float(count)
    return count / max(1, len(activated))


def sem_sim(item_vector, ctx):
    return max(0.0, cosine(item_vector, ctx.case_vector))


def _item_articles(item):
    if isinstance(item, StandardNode):
        return item.labels.articles
    return item.anchor.articles


def score_item(item, ctx, graph, weights, activated=None, raw_topo=False):
    components = (iou(_item_articles(item), ctx.candidate_articles),
                  topo_score(item, ctx, graph, activated, raw_topo),
                  sem_sim(item.vector, ctx))
    total = weights.alpha * components[0] + weights.beta * components[1] + weights.gamma * components[2]
    return ScoredItem(item, total, *components)


def score(item, ctx, graph, weights, activated=None, raw_topo=False):
    """
    This function returns the relevance of a memory item to the query:
    ``alpha * iou + beta * topo + gamma * sem_sim``.
    """
    return score_item(item, ctx, graph, weights, activated, raw_topo).score


def _top_n(items, key, ctx, graph, weights, n, raw_topo):
    if n < 1:
        raise ValueError('n must be >= 1, got {}'.format(n))
    if not items:
        return []
    activated = activation_set(ctx, graph)
    scored = [score_item(item, ctx, graph, weights, activated, raw_topo) for item in items]
    scored.sort(key=lambda s: (-s.score, getattr(s.item, key)))
    return scored[:n]


def retrieve_standards(ctx, graph, n=3, weights=None, raw_topo=False):
    """
    This function scores every archived node and returns the best ``n``; ties go to the
    lower node id.

    Returns:
        - ``list``: of `ScoredItem`
    """
    with graph.lock:
        return _top_n(graph.nodes(), 'node_id', ctx, graph, weights or RetrievalWeights(), n, raw_topo)


def retrieve_directives(ctx, base, graph, n=3, weights=None, raw_topo=False):
    """
    This function scores every directive (anchor articles for the overlap term, the directive
    vector for the similarity term) and returns the best ``n``; ties go to the lower id.

    Returns:
        - ``list``: of `ScoredItem`
    """
    with graph.lock, base.lock:
        return _top_n(base.directives(), 'directive_id', ctx, graph, weights or RetrievalWeights(), n, raw_topo)
