import os
import tempfile
import unittest

from jurispanel import demo, util
from jurispanel.backends import SimulatedBackend
from jurispanel.config import load_config
from jurispanel.exceptions import LockError
from jurispanel.prompts import AgentRole
from jurispanel.runner import PREDICTION_FILE, Session, run_inference
from jurispanel.trace import replay_trace
from jurispanel.verdict import load_corpus

FAULTY_FACT = demo.make_corpus(12)[2]['fact']


def flaky_rule(role, bundle):
    # the presiding judge garbles its answer on the third case of the corpus
    if bundle.template == 'presiding' and FAULTY_FACT in bundle.user_text:
        return 'no verdict'
    return demo.demo_rule(role, bundle)


class RunnerTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.config_file = demo.write_demo(self.tmp.name, n_cases=12, epochs=1)

    def tearDown(self):
        self.tmp.cleanup()

    def config(self, name, **changes):
        config = load_config(self.config_file)
        config.paths.memory_dir = os.path.join(self.tmp.name, name, 'memory')
        config.paths.output_dir = os.path.join(self.tmp.name, name, 'outputs')
        for key, value in changes.items():
            setattr(config, key, value)
        return config.validate(check_paths=True)

    def predictions(self, config):
        return [d for _, d in util.read_jsonl(os.path.join(config.paths.output_dir, 'epoch-1', PREDICTION_FILE))]

    def test_concurrency_does_not_change_results(self):
        serial = self.config('serial')
        parallel = self.config('parallel', concurrency=4)
        run_inference(serial)
        run_inference(parallel)
        self.assertEqual(self.predictions(serial), self.predictions(parallel))
        self.assertEqual(Session(serial).archive.edges, Session(parallel).archive.edges)

    def test_failed_case_is_skipped(self):
        config = self.config('flaky')
        backend = SimulatedBackend(flaky_rule, name='flaky')
        backends = {role: backend for role in AgentRole}
        summary = run_inference(config, backends=backends)
        self.assertTrue(summary.ok)
        epoch = summary.epochs[0]
        self.assertEqual((epoch.processed, epoch.skipped), (11, ['demo-003']))
        self.assertEqual(epoch.report.skipped, 1)
        self.assertEqual(len(self.predictions(config)), 11)
        trace = os.path.join(config.paths.output_dir, 'epoch-1', 'traces', 'demo-003.jsonl')
        self.assertTrue(replay_trace(trace).passed)

    def test_no_archive(self):
        config = self.config('plain', archive_enabled=False)
        summary = run_inference(config)
        self.assertEqual((summary.epochs[0].archived, summary.epochs[0].buffered), (0, 0))
        self.assertFalse(os.path.exists(os.path.join(config.paths.memory_dir, 'archive_state.json')))

    def test_memory_survives_runs(self):
        config = self.config('resume')
        first = run_inference(config)
        self.assertEqual(first.epochs[0].archived + first.epochs[0].buffered, 12)
        session = Session(config)
        self.assertEqual(len(session.archive) + len(session.archive.buffer), 12)
        run_inference(config, cases=load_corpus(config.paths.corpus)[:3])
        self.assertEqual(len(Session(config).archive) + len(Session(config).archive.buffer), 15)

    def test_locked_memory(self):
        config = self.config('locked')
        with util.memory_lock(config.paths.memory_dir):
            self.assertRaises(LockError, run_inference, config)
