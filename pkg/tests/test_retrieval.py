import random
import unittest

import torch

from jurispanel.archive import StandardsArchive
from jurispanel.directives import DirectiveBase
from jurispanel.embedding import HashEmbedder, normalize
from jurispanel.retrieval import (RetrievalContext, RetrievalSettings, RetrievalWeights, activation_set,
                                  iou, retrieve_directives, retrieve_standards, sem_sim, topo_score)
from jurispanel.exceptions import ConfigError
from jurispanel.verdict import LabelSet

ARTICLES = [232, 234, 263, 264, 293]


def random_unit(rng, dim=32):
    return normalize([rng.gauss(0, 1) for _ in range(dim)])


def brute_force_activation(archive, case_vector, seed_k, hops):
    nodes = archive.nodes()
    ranked = sorted(nodes, key=lambda n: (-float(torch.dot(n.vector, case_vector)), n.node_id))
    adjacency = {n.node_id: set() for n in nodes}
    for a, b in archive.edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    activated = set()
    for seed in ranked[:seed_k]:
        reached = {seed.node_id}
        for _ in range(hops):
            reached |= {j for i in reached for j in adjacency[i]}
        activated |= reached
    return activated, adjacency


def brute_force_scores(items, archive, case_vector, candidates, weights, seed_k, hops, id_key):
    activated, adjacency = brute_force_activation(archive, case_vector, seed_k, hops)
    out = []
    for item in items:
        if id_key == 'node_id':
            articles = item.labels.articles
            associated = adjacency[item.node_id] | {item.node_id}
        else:
            articles = item.anchor.articles
            associated = item.supporting
        union = set(articles) | set(candidates)
        overlap = len(set(articles) & set(candidates)) / len(union) if union else 0.0
        topo = len(activated & associated) / max(1, len(activated))
        sim = max(0.0, float(torch.dot(item.vector, case_vector)))
        total = weights.alpha * overlap + weights.beta * topo + weights.gamma * sim
        out.append((total, getattr(item, id_key)))
    out.sort(key=lambda s: (-s[0], s[1]))
    return out


class RetrievalTestCase(unittest.TestCase):
    def test_iou(self):
        self.assertEqual(iou({264}, {264}), 1.0)
        self.assertEqual(iou({264}, {234, 264}), 0.5)
        self.assertEqual(iou({264}, set()), 0.0)
        self.assertEqual(iou(set(), set()), 0.0)

    def test_sem_sim_is_clamped(self):
        ctx = RetrievalContext(case_vector=normalize([1.0, 0.0]))
        self.assertEqual(sem_sim(normalize([-1.0, 0.0]), ctx), 0.0)
        self.assertAlmostEqual(sem_sim(normalize([1.0, 1.0]), ctx), 2 ** -0.5)

    def test_topo_modes(self):
        archive = StandardsArchive(HashEmbedder(), tau=0.9)
        label = LabelSet(articles={264})
        a = archive.insert_node('a', normalize([1.0, 0.0, 0.0]), label)
        b = archive.insert_node('b', normalize([1.0, 0.1, 0.0]), label)
        c = archive.insert_node('c', normalize([0.0, 0.0, 1.0]), label)
        ctx = RetrievalContext(case_vector=normalize([1.0, 0.0, 0.0]), seed_k=1, hops=1)
        self.assertEqual(activation_set(ctx, archive), {a, b})
        self.assertEqual(topo_score(archive.node(a), ctx, archive), 1.0)
        self.assertEqual(topo_score(archive.node(c), ctx, archive), 0.0)
        self.assertEqual(topo_score(archive.node(b), ctx, archive, raw=True), 2.0)
        base = DirectiveBase(HashEmbedder())
        d = base.add_directive('rule', [264], supporting=[b, c])
        self.assertEqual(topo_score(base.get(d), ctx, archive), 0.5)
        self.assertEqual(topo_score(base.get(d), ctx, archive, raw=True), 1.0)

    def test_empty_archive(self):
        archive = StandardsArchive(HashEmbedder())
        ctx = RetrievalContext(case_vector=normalize([1.0, 0.0]), candidate_articles={264})
        self.assertEqual(retrieve_standards(ctx, archive), [])
        self.assertEqual(activation_set(ctx, archive), set())
        base = DirectiveBase(HashEmbedder())
        self.assertEqual(retrieve_directives(ctx, base, archive), [])
        self.assertRaises(ValueError, retrieve_standards, ctx, archive, 0)

    def test_ties_go_to_lower_id(self):
        archive = StandardsArchive(HashEmbedder())
        v = normalize([0.0, 1.0])
        for _ in range(4):
            archive.insert_node('same', v, LabelSet(articles={264}))
        ctx = RetrievalContext(case_vector=v, candidate_articles={264}, seed_k=1, hops=0)
        # identical nodes are all linked and score the same
        self.assertEqual([s.item.node_id for s in retrieve_standards(ctx, archive, n=3)], [0, 1, 2])

    def test_matches_brute_force(self):
        rng = random.Random(2024)
        provider = HashEmbedder(dim=32)
        for trial in range(100):
            archive = StandardsArchive(provider, tau=rng.uniform(0.2, 0.8))
            for i in range(rng.randint(0, 40)):
                arts = frozenset(rng.sample(ARTICLES, rng.randint(1, 2)))
                archive.insert_node('node {}'.format(i), random_unit(rng), LabelSet(articles=arts))
            base = DirectiveBase(provider)
            node_ids = [n.node_id for n in archive.nodes()]
            for i in range(rng.randint(0, 10)):
                support = rng.sample(node_ids, min(len(node_ids), rng.randint(0, 5)))
                base.add_directive('directive {} {}'.format(trial, i), rng.sample(ARTICLES, rng.randint(1, 2)), supporting=support)
            weights = RetrievalWeights(*(rng.random() for _ in range(3)))
            seed_k, hops, n = rng.randint(1, 6), rng.randint(0, 3), rng.randint(1, 5)
            ctx = RetrievalContext(case_vector=random_unit(rng), candidate_articles=rng.sample(ARTICLES, rng.randint(0, 3)),
                                   seed_k=seed_k, hops=hops)

            got = [(s.score, s.item.node_id) for s in retrieve_standards(ctx, archive, n, weights)]
            want = brute_force_scores(archive.nodes(), archive, ctx.case_vector, ctx.candidate_articles,
                                      weights, seed_k, hops, 'node_id')[:n]
            self.assertEqual([i for _, i in got], [i for _, i in want])
            for (s, _), (w, _) in zip(got, want):
                self.assertAlmostEqual(s, w)

            got = [(s.score, s.item.directive_id) for s in retrieve_directives(ctx, base, archive, n, weights)]
            want = brute_force_scores(base.directives(), archive, ctx.case_vector, ctx.candidate_articles,
                                      weights, seed_k, hops, 'directive_id')[:n]
            self.assertEqual([i for _, i in got], [i for _, i in want])
            for (s, _), (w, _) in zip(got, want):
                self.assertAlmostEqual(s, w)

    def test_settings(self):
        settings = RetrievalSettings.from_dict({'weights': {'alpha': 1.0, 'beta': 0.0, 'gamma': 0.0}, 'seed_k': 2})
        self.assertEqual(settings.validate().seed_k, 2)
        self.assertEqual(RetrievalSettings.from_dict(settings.to_dict()), settings)
        self.assertRaises(ConfigError, RetrievalSettings(topo_mode='sum').validate)
        self.assertRaises(ConfigError, RetrievalWeights(0.0, 0.0, 0.0).validate)
        self.assertRaises(ConfigError, RetrievalWeights(-1.0, 1.0, 1.0).validate)
        self.assertRaises(ValueError, RetrievalContext, normalize([1.0]), seed_k=0)
