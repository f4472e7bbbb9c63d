import math
import os
import random
import tempfile
import unittest

import torch

from jurispanel.archive import StandardsArchive, serialize_trajectory
from jurispanel.embedding import HashEmbedder, cosine, normalize
from jurispanel.exceptions import MissingGoldError, UnknownIdError
from jurispanel.verdict import CaseRecord, LabelSet, TermOfImprisonment, Verdict

THEFT = Verdict(articles=(264,), charges=('theft',), term=TermOfImprisonment(imprisonment_months=8))
INJURY = Verdict(articles=(234,), charges=('intentional injury',), term=TermOfImprisonment(imprisonment_months=20))


def random_unit(rng, dim):
    return normalize(torch.tensor([rng.gauss(0, 1) for _ in range(dim)]))


class ArchiveTestCase(unittest.TestCase):
    def test_purity_gate(self):
        rng = random.Random(1234)
        archive = StandardsArchive(HashEmbedder(dim=32))
        correct = 0
        for i in range(1000):
            case = CaseRecord(id='c{}'.format(i), fact_text='case number {} about a stolen bicycle'.format(i), gold=THEFT)
            if rng.random() < 0.4:
                pred = THEFT
                correct += 1
            else:
                pred = rng.choice([INJURY, Verdict(articles=(264,), charges=('theft',),
                                                   term=TermOfImprisonment(imprisonment_months=40))])
            outcome = archive.archive_trajectory(case, 'reasoning {}'.format(i), pred)
            self.assertEqual(outcome.archived, pred == THEFT)
        self.assertEqual(len(archive), correct)
        self.assertEqual(len(archive.buffer), 1000 - correct)
        self.assertEqual(archive.pending_batch(), correct)

    def test_missing_gold(self):
        archive = StandardsArchive(HashEmbedder())
        self.assertRaises(MissingGoldError, archive.archive_trajectory, CaseRecord(id='x', fact_text='facts'), 'trace', THEFT)

    def test_archived_node(self):
        provider = HashEmbedder()
        archive = StandardsArchive(provider)
        case = CaseRecord(id='c1', fact_text='Li stole a phone.', gold=THEFT)
        outcome = archive.archive_trajectory(case, 'Draft article 264: theft', THEFT)
        node = archive.node(outcome.node_id)
        self.assertEqual(node.txt, serialize_trajectory(case.fact_text, 'Draft article 264: theft', THEFT))
        self.assertTrue(torch.equal(node.vector, provider.embed(node.txt)))
        self.assertEqual(node.labels, LabelSet(articles={264}, charges={'theft'}))
        self.assertEqual(node.case_id, 'c1')
        self.assertRaises(UnknownIdError, archive.node, 99)
        self.assertRaises(ValueError, archive.insert_node, 'txt', node.vector, LabelSet())
        self.assertRaises(ValueError, StandardsArchive, provider, tau=1.0)

    def test_edges_match_brute_force(self):
        rng = random.Random(7)
        labels = [LabelSet(articles={1}), LabelSet(articles={2}), LabelSet(articles={1, 2})]
        for _ in range(50):
            tau = rng.uniform(0.1, 0.9)
            archive = StandardsArchive(HashEmbedder(), tau=tau)
            n = rng.randint(1, 100)
            anchors = [random_unit(rng, 4) for _ in range(3)]
            nodes = []
            for i in range(n):
                v = normalize(anchors[rng.randrange(3)] + 0.5 * random_unit(rng, 4))
                label = rng.choice(labels)
                nodes.append((archive.insert_node('node {}'.format(i), v, label), v, label))
            expected = set()
            for a, va, la in nodes:
                for b, vb, lb in nodes:
                    if a < b and la == lb and cosine(va, vb) >= tau:
                        expected.add((a, b))
            self.assertEqual(archive.edges, expected)

    def test_neighbors_on_path(self):
        archive = StandardsArchive(HashEmbedder(), tau=0.5)
        label = LabelSet(articles={264})
        # unit vectors 45 degrees apart: consecutive ones are linked (cos 0.707), others are not
        for k in range(5):
            angle = k * math.pi / 4
            archive.insert_node('n{}'.format(k), normalize([math.cos(angle), math.sin(angle)]), label)
        self.assertEqual(archive.edges, {(0, 1), (1, 2), (2, 3), (3, 4)})
        self.assertEqual(archive.neighbors(0, 0), {0})
        self.assertEqual(archive.neighbors(0, 2), {0, 1, 2})
        self.assertEqual(archive.neighbors(2, 1), {1, 2, 3})
        self.assertEqual(archive.neighbors(0, 10), {0, 1, 2, 3, 4})
        self.assertEqual(archive.adjacent(2), {1, 3})
        self.assertRaises(ValueError, archive.neighbors, 0, -1)
        self.assertRaises(UnknownIdError, archive.neighbors, 42, 1)

    def test_pending_and_new_nodes(self):
        archive = StandardsArchive(HashEmbedder())
        for i in range(3):
            archive.insert_node('first {}'.format(i), normalize([1.0, float(i)]), LabelSet(articles={1}))
        self.assertEqual(archive.pending_batch(reset=True), 3)
        self.assertEqual(archive.pending_batch(), 0)
        self.assertEqual(len(archive.new_nodes()), 3)
        archive.mark_evolved()
        self.assertEqual(archive.new_nodes(), [])
        archive.insert_node('second', normalize([0.0, 1.0]), LabelSet(articles={1}))
        self.assertEqual([n.txt for n in archive.new_nodes()], ['second'])

    def test_assign_clusters(self):
        archive = StandardsArchive(HashEmbedder())
        for i in range(3):
            archive.insert_node('a{}'.format(i), normalize([1.0, 0.01 * i, 0.0]), LabelSet(articles={1}))
        for i in range(3):
            archive.insert_node('b{}'.format(i), normalize([0.0, 0.01 * i, 1.0]), LabelSet(articles={2}))
        assignment = archive.assign_clusters()
        self.assertEqual(len({assignment[i] for i in range(3)}), 1)
        self.assertEqual(len({assignment[i] for i in range(3, 6)}), 1)
        self.assertNotEqual(assignment[0], assignment[3])
        self.assertEqual([n.cluster_id for n in archive.nodes()], [assignment[i] for i in range(6)])

    def test_save_and_load(self):
        provider = HashEmbedder()
        archive = StandardsArchive(provider, tau=0.5)
        for i in range(4):
            case = CaseRecord(id='c{}'.format(i), fact_text='Wang stole copper cable number {}.'.format(i), gold=THEFT)
            archive.archive_trajectory(case, 'trace', THEFT if i % 2 == 0 else INJURY)
        archive.mark_evolved()
        with tempfile.TemporaryDirectory() as tmp:
            archive.save(tmp)
            self.assertTrue(StandardsArchive.exists(tmp))
            for name in ['nodes.jsonl', 'edges.jsonl', 'buffer.jsonl', 'archive_state.json']:
                self.assertTrue(os.path.exists(os.path.join(tmp, name)))
            loaded = StandardsArchive.load(tmp, provider)
            self.assertEqual(len(loaded), 2)
            self.assertEqual(len(loaded.buffer), 2)
            self.assertEqual(loaded.edges, archive.edges)
            self.assertEqual([n.txt for n in loaded.nodes()], [n.txt for n in archive.nodes()])
            self.assertEqual(loaded.new_nodes(), [])
            self.assertEqual(loaded.pending_batch(), 2)
            self.assertEqual([e.case.id for e in loaded.buffer], ['c1', 'c3'])
            self.assertRaises(ValueError, StandardsArchive.load, tmp, provider, tau=0.9)

    def test_buffer_evicts_oldest(self):
        archive = StandardsArchive(HashEmbedder(dim=16), buffer_capacity=3)
        for i in range(5):
            case = CaseRecord(id='c{}'.format(i), fact_text='facts {}'.format(i), gold=THEFT)
            archive.archive_trajectory(case, 'trace', INJURY)
        self.assertEqual([e.case.id for e in archive.buffer], ['c2', 'c3', 'c4'])
        self.assertEqual([e.entry_id for e in archive.buffer], [2, 3, 4])
        archive.buffer.remove([3])
        self.assertEqual([e.case.id for e in archive.buffer], ['c2', 'c4'])
        self.assertEqual(len(archive), 0)
