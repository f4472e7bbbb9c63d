import collections
import dataclasses
import json
import logging
import os
import threading

import torch

from . import util
from .embedding import cosine
from .exceptions import MissingGoldError, UnknownIdError
from .finch import first_neighbor_clusters
from .verdict import (ELEVEN_CLASS_BINS, CaseRecord, LabelSet, Verdict,
                      label_set, parse_case_record, verdict_matches)

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class StandardNode:
    """
    One archived, fully verified adjudication trajectory.

    Args:
        - node_id (``int``): unique id
        - txt (``str``): serialized fact, reasoning trace and final verdict
        - vector (``torch.tensor``): unit embedding of ``txt``
        - labels (``jurispanel.verdict.LabelSet``): gold articles and charges
        - cluster_id (``int``): first-neighbour cluster (-1 until clustering ran)
        - created_seq (``int``): archive sequence number at insertion
        - case_id (``str``): source case id
        - verdict (``jurispanel.verdict.Verdict``): the archived verdict
    """
    node_id: int
    txt: str
    vector: torch.Tensor = dataclasses.field(compare=False, repr=False)
    labels: LabelSet = LabelSet()
    cluster_id: int = -1
    created_seq: int = 0
    case_id: str = ''
    verdict: Verdict = None

    def to_dict(self):
        return {'node_id': self.node_id, 'txt': self.txt, 'vector': self.vector.tolist(),
                'labels': self.labels.to_dict(), 'cluster_id': self.cluster_id,
                'created_seq': self.created_seq, 'case_id': self.case_id,
                'verdict': self.verdict.to_dict() if self.verdict is not None else None}

    @classmethod
    def from_dict(cls, d):
        return cls(node_id=d['node_id'], txt=d['txt'], vector=torch.tensor(d['vector'], dtype=torch.float64),
                   labels=LabelSet.from_dict(d['labels']), cluster_id=d.get('cluster_id', -1),
                   created_seq=d.get('created_seq', 0), case_id=d.get('case_id', ''),
                   verdict=Verdict.from_dict(d['verdict']) if d.get('verdict') else None)


@dataclasses.dataclass(frozen=True)
class FailureEntry:
    entry_id: int
    case: CaseRecord
    trace: str
    pred: Verdict
    gold: Verdict
    vector: torch.Tensor = dataclasses.field(compare=False, repr=False)

    @property
    def gold_labels(self):
        return label_set(self.gold)

    @property
    def txt(self):
        return serialize_trajectory(self.case.fact_text, self.trace, self.pred)

    def to_dict(self):
        return {'entry_id': self.entry_id, 'case': self.case.to_dict(), 'trace': self.trace,
                'pred': self.pred.to_dict(), 'gold': self.gold.to_dict(), 'vector': self.vector.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(entry_id=d['entry_id'], case=parse_case_record(d['case']), trace=d['trace'],
                   pred=Verdict.from_dict(d['pred']), gold=Verdict.from_dict(d['gold']),
                   vector=torch.tensor(d['vector'], dtype=torch.float64))


class FailureBuffer():
    """
    Bounded FIFO of trajectories whose verdict was not fully correct.

    Args:
        - capacity (``int``): maximum number of entries (oldest evicted first)
    """
    def __init__(self, capacity=10000):
        self.capacity = capacity
        self._entries = collections.deque(maxlen=capacity)
        self._next_id = 0

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(list(self._entries))

    def append(self, case, trace, pred, gold, vector):
        entry = FailureEntry(entry_id=self._next_id, case=case, trace=trace, pred=pred, gold=gold, vector=vector)
        self._next_id += 1
        self._entries.append(entry)
        return entry

    def remove(self, entry_ids):
        entry_ids = set(entry_ids)
        kept = [e for e in self._entries if e.entry_id not in entry_ids]
        self._entries.clear()
        self._entries.extend(kept)


@dataclasses.dataclass(frozen=True)
class ArchiveOutcome:
    archived: bool
    node_id: int = None
    entry_id: int = None


def serialize_trajectory(fact, trace, verdict):
    return '{}\n{}\n{}'.format(fact, trace, verdict.serialize())


class StandardsArchive():
    """
    The contextual standards archive: an undirected graph of archived trajectories.
    Two nodes are linked iff their vectors have cosine similarity >= ``tau`` and their
    label sets are identical. Only fully correct trajectories enter the graph; the
    others go to the failure buffer.

    Args:
        - provider: embedding provider
        - tau (``float``): edge similarity threshold in (0, 1)
        - buffer_capacity (``int``): failure buffer size
        - bins (``jurispanel.verdict.TermBins``): term binning table used by the purity gate
    """
    def __init__(self, provider, tau=0.85, buffer_capacity=10000, bins=ELEVEN_CLASS_BINS):
        if not 0.0 < tau < 1.0:
            raise ValueError('tau must be in (0, 1), got {}'.format(tau))
        self.provider = provider
        self.tau = tau
        self.bins = bins
        self.buffer = FailureBuffer(buffer_capacity)
        self.lock = threading.RLock()
        self._nodes = {}
        self._order = []
        self._adjacency = {}
        self._next_id = 0
        self._pending = 0
        self._evolved_seq = 0

    def __len__(self):
        return len(self._order)

    def __contains__(self, node_id):
        return node_id in self._nodes

    def node(self, node_id):
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownIdError('unknown node id {}'.format(node_id))

    def nodes(self):
        return [self._nodes[i] for i in self._order]

    @property
    def edges(self):
        return {(i, j) for i, adj in self._adjacency.items() for j in adj if i < j}

    def adjacent(self, node_id):
        return set(self._adjacency[self.node(node_id).node_id])

    def archive_trajectory(self, case, trace, pred):
        """
        This function applies the purity gate: a fully correct trajectory becomes a new node,
        anything else goes to the failure buffer.

        Args:
            - case (``jurispanel.verdict.CaseRecord``): case with its gold verdict
            - trace (``str``): supervisor-validated reasoning trace
            - pred (``jurispanel.verdict.Verdict``): final verdict

        Returns:
            - ``jurispanel.archive.ArchiveOutcome``
        """
        if case.gold is None:
            raise MissingGoldError('case {} has no gold verdict; it cannot be archived'.format(case.id))
        txt = serialize_trajectory(case.fact_text, trace, pred)
        with self.lock:
            if verdict_matches(pred, case.gold, self.bins).all_correct:
                node_id = self.insert_node(txt, self.provider.embed(txt), label_set(case.gold),
                                           case_id=case.id, verdict=pred)
                return ArchiveOutcome(archived=True, node_id=node_id)
            entry = self.buffer.append(case, trace, pred, case.gold, self.provider.embed(txt))
            logger.debug('Case %s buffered as failure %d', case.id, entry.entry_id)
            return ArchiveOutcome(archived=False, entry_id=entry.entry_id)

    def insert_node(self, txt, vector, labels, case_id='', verdict=None):
        """
        This function publishes a node and links it to the graph.

        Returns:
            - ``int``: the new node id
        """
        if labels.is_empty():
            raise ValueError('archived nodes need a non-empty label set')
        with self.lock:
            node_id = self._next_id
            self._next_id += 1
            self._nodes[node_id] = StandardNode(node_id=node_id, txt=txt, vector=vector, labels=labels,
                                                created_seq=node_id + 1, case_id=case_id, verdict=verdict)
            self._order.append(node_id)
            self._adjacency[node_id] = set()
            self.connect_node(node_id)
            self._pending += 1
            return node_id

    def connect_node(self, node_id):
        """
        This function links a node to every other node with cosine >= tau and an identical label set.

        Args:
            - node_id (``int``): node to connect

        Returns:
            - ``set``: newly added edges as ``(smaller id, larger id)`` pairs
        """
        node = self.node(node_id)
        added = set()
        with self.lock:
            for other_id in self._order:
                if other_id == node_id or other_id in self._adjacency[node_id]:
                    continue
                other = self._nodes[other_id]
                if other.labels == node.labels and cosine(node.vector, other.vector) >= self.tau:
                    self._adjacency[node_id].add(other_id)
                    self._adjacency[other_id].add(node_id)
                    added.add((min(node_id, other_id), max(node_id, other_id)))
        return added

    def assign_clusters(self):
        """
        This function runs one-pass first-neighbour clustering over all nodes and writes the
        cluster ids back.

        Returns:
            - ``dict``: node id -> cluster id
        """
        with self.lock:
            ids = list(self._order)
            assignment = first_neighbor_clusters(ids, [self._nodes[i].vector for i in ids])
            for node_id, cluster_id in assignment.items():
                self._nodes[node_id] = dataclasses.replace(self._nodes[node_id], cluster_id=cluster_id)
            return assignment

    def neighbors(self, node_id, hops):
        """
        This function returns the closed neighbourhood of a node: every node reachable within
        ``hops`` edges, the start node included.

        Args:
            - node_id (``int``): start node
            - hops (``int``): maximum number of edges (>= 0)

        Returns:
            - ``set``: node ids
        """
        if hops < 0:
            raise ValueError('hops must be >= 0, got {}'.format(hops))
        self.node(node_id)
        reached = {node_id}
        frontier = {node_id}
        for _ in range(hops):
            frontier = {j for i in frontier for j in self._adjacency[i]} - reached
            if not frontier:
                break
            reached |= frontier
        return reached

    def pending_batch(self, reset=False):
        """
        This function returns the number of nodes archived since the last evolution trigger.

        Args:
            - reset (``bool``): zero the counter after reading it
        """
        with self.lock:
            count = self._pending
            if reset:
                self._pending = 0
            return count

    def new_nodes(self):
        """Nodes archived since the last evolution cycle."""
        return [n for n in self.nodes() if n.created_seq > self._evolved_seq]

    def mark_evolved(self):
        with self.lock:
            self._evolved_seq = self._next_id

    def save(self, directory):
        """
        This function persists the archive: ``nodes.jsonl``, ``edges.jsonl``, ``buffer.jsonl``
        and ``archive_state.json``.
        """
        os.makedirs(directory, exist_ok=True)
        with self.lock:
            util.write_jsonl(os.path.join(directory, 'nodes.jsonl'), (n.to_dict() for n in self.nodes()))
            util.write_jsonl(os.path.join(directory, 'edges.jsonl'), ({'a': i, 'b': j} for i, j in sorted(self.edges)))
            util.write_jsonl(os.path.join(directory, 'buffer.jsonl'), (e.to_dict() for e in self.buffer))
            state = {'tau': self.tau, 'pending': self._pending, 'evolved_seq': self._evolved_seq,
                     'next_id': self._next_id, 'buffer_next_id': self.buffer._next_id,
                     'buffer_capacity': self.buffer.capacity}
            with open(os.path.join(directory, 'archive_state.json'), 'w', encoding='utf-8') as f:
                f.write(util.dumps(state))

    @classmethod
    def load(cls, directory, provider, bins=ELEVEN_CLASS_BINS, tau=None):
        """
        This function reloads an archive saved by `save`. A different ``tau`` than the saved one
        is rejected: edges are only rebuilt by a full re-archive.
        """
        with open(os.path.join(directory, 'archive_state.json'), encoding='utf-8') as f:
            state = json.load(f)
        if tau is not None and tau != state['tau']:
            raise ValueError('archive was built with tau={} but tau={} was requested; rebuild the archive'.format(state['tau'], tau))
        archive = cls(provider, tau=state['tau'], buffer_capacity=state['buffer_capacity'], bins=bins)
        for _, d in util.read_jsonl(os.path.join(directory, 'nodes.jsonl')):
            node = StandardNode.from_dict(d)
            archive._nodes[node.node_id] = node
            archive._order.append(node.node_id)
            archive._adjacency[node.node_id] = set()
        for _, d in util.read_jsonl(os.path.join(directory, 'edges.jsonl')):
            archive._adjacency[d['a']].add(d['b'])
            archive._adjacency[d['b']].add(d['a'])
        for _, d in util.read_jsonl(os.path.join(directory, 'buffer.jsonl')):
            archive.buffer._entries.append(FailureEntry.from_dict(d))
        archive.buffer._next_id = state['buffer_next_id']
        archive._next_id = state['next_id']
        archive._pending = state['pending']
        archive._evolved_seq = state['evolved_seq']
        return archive

    @staticmethod
    def exists(directory):
        return os.path.exists(os.path.join(directory, 'archive_state.json'))
