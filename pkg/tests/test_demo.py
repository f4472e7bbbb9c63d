import glob
import os
import shutil
import tempfile
import unittest

from jurispanel import demo, util
from jurispanel.exceptions import ProtocolError
from jurispanel.prompts import NONE_SENTINEL, PromptBundle
from jurispanel.trace import read_trace, replay_trace
from jurispanel.verdict import load_corpus


class DemoBundleTestCase(unittest.TestCase):
    def test_corpus(self):
        records = demo.make_corpus(60, seed=3)
        self.assertEqual(len(records), 60)
        self.assertEqual(records[0]['id'], 'demo-001')
        golds = [r['meta']['relevant_articles'][0] for r in records]
        self.assertEqual(golds.count(demo.INJURY), 20)
        self.assertEqual(golds.count(demo.THEFT), 20)
        self.assertEqual(golds.count(demo.QUARREL), 20)
        self.assertEqual(records, demo.make_corpus(60, seed=3))
        self.assertRaises(ValueError, demo.make_corpus, 0)

    def test_write_demo(self):
        with tempfile.TemporaryDirectory() as tmp:
            config_file = demo.write_demo(tmp, n_cases=12)
            self.assertEqual(len(load_corpus(os.path.join(tmp, 'corpus.jsonl'))), 12)
            self.assertTrue(os.path.exists(config_file))

    def test_unknown_template(self):
        bundle = PromptBundle(system_text='', user_text='', role=None, template='bailiff')
        self.assertRaises(ProtocolError, demo.demo_rule, None, bundle)
        self.assertRaises(ValueError, demo.get_simulator, 'oracle')


class ClosedLoopTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        cls.summaries = demo.run_closed_loop(cls.tmp, n_cases=60, seed=0)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def test_runs_are_clean(self):
        for summary in self.summaries.values():
            self.assertTrue(summary.ok)
            self.assertEqual(len(summary.epochs), 2)
            for epoch in summary.epochs:
                self.assertEqual((epoch.processed, epoch.skipped), (60, []))

    def test_memory_improves_accuracy(self):
        memory = self.summaries['memory'].epochs
        baseline = self.summaries['no_memory'].epochs
        self.assertAlmostEqual(baseline[0].article_accuracy(), 50 / 60)
        self.assertAlmostEqual(baseline[1].article_accuracy(), 50 / 60)
        self.assertTrue(memory[0].cycles)
        self.assertGreater(memory[1].article_accuracy(), baseline[1].article_accuracy())
        self.assertGreaterEqual(memory[1].article_accuracy(), memory[0].article_accuracy())

    def test_memory_is_persisted(self):
        memory_dir = os.path.join(self.tmp, 'memory', 'memory')
        for name in ('archive_state.json', 'directives_state.json', 'evolution.jsonl'):
            self.assertTrue(os.path.exists(os.path.join(memory_dir, name)))
        self.assertFalse(os.path.exists(os.path.join(memory_dir, '.writer.lock')))

    def test_every_trace_replays(self):
        files = glob.glob(os.path.join(self.tmp, '*', 'outputs', 'epoch-*', 'traces', '*.jsonl'))
        self.assertEqual(len(files), 2 * 2 * 60)
        for file_name in files:
            self.assertTrue(replay_trace(file_name).passed, file_name)

    def test_case_judge_never_sees_memory(self):
        memory_dir = os.path.join(self.tmp, 'memory', 'memory')
        node_txt = {d['node_id']: d['txt'] for _, d in util.read_jsonl(os.path.join(memory_dir, 'nodes.jsonl'))}
        files = glob.glob(os.path.join(self.tmp, 'memory', 'outputs', 'epoch-2', 'traces', '*.jsonl'))
        injected_directives = injected_standards = 0
        for file_name in files:
            _, events = read_trace(file_name)
            memory_texts = set()
            for e in events:
                if e.kind == 'retrieval':
                    memory_texts.update(node_txt[s['node_id']] for s in e.data['standards'])
                    injected_standards += bool(e.data['standards'])
                if e.kind == 'agent' and e.template == 'supervisor':
                    user = e.prompt['user']
                    directives = user[user.index('Reference directives:'):user.index('\nPrecedents:')]
                    texts = [line.split('] ', 1)[1] for line in directives.splitlines()[1:] if '] ' in line]
                    memory_texts.update(texts)
                    injected_directives += bool(texts)
                    precedents = user[user.index('\nPrecedents:\n') + len('\nPrecedents:\n'):]
                    if precedents.strip() != NONE_SENTINEL:
                        memory_texts.add(precedents.strip())
            for e in events:
                if e.kind == 'agent' and e.template == 'case_judge':
                    prompt = e.prompt['system'] + e.prompt['user']
                    for text in memory_texts:
                        self.assertNotIn(text, prompt)
        self.assertGreater(injected_directives, 0)
        self.assertGreater(injected_standards, 0)
