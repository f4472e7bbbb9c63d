import contextlib
import glob
import io
import json
import os
import shutil
import tempfile
import unittest

import matplotlib
matplotlib.use('Agg')

from jurispanel import util
from jurispanel.cli import build_parser, main
from jurispanel.evolution import count_cycles


def run(*argv):
    out = io.StringIO()
    with contextlib.redirect_stdout(out):
        status = main(['--log-level', 'WARNING'] + list(argv))
    return status, out.getvalue()


class CliTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        status, _ = run('demo', cls.tmp, '--cases', '10')
        assert status == 0
        cls.config = os.path.join(cls.tmp, 'config.json')
        cls.infer_status, cls.infer_out = run('infer', '--config', cls.config, '--epochs', '1')

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def test_infer(self):
        self.assertEqual(self.infer_status, 0)
        self.assertIn('Epoch 1: 10 judged, 0 skipped', self.infer_out)
        epoch_dir = os.path.join(self.tmp, 'outputs', 'epoch-1')
        self.assertEqual(len(glob.glob(os.path.join(epoch_dir, 'traces', '*.jsonl'))), 10)
        self.assertEqual(len(util.read_jsonl(os.path.join(epoch_dir, 'predictions.jsonl'))), 10)
        self.assertTrue(os.path.exists(os.path.join(epoch_dir, 'metrics.json')))

    def test_replay(self):
        traces = sorted(glob.glob(os.path.join(self.tmp, 'outputs', 'epoch-1', 'traces', '*.jsonl')))
        status, out = run('replay', *traces)
        self.assertEqual(status, 0)
        self.assertEqual(out.count('PASS'), 10)
        with open(traces[0], 'a', encoding='utf-8') as f:
            f.write('{"kind": "agent", "index": 99}\n')
        self.assertEqual(run('replay', traces[0])[0], 1)

    def test_evaluate(self):
        output = os.path.join(self.tmp, 'report.json')
        status, out = run('evaluate', '--predictions', os.path.join(self.tmp, 'outputs', 'epoch-1', 'predictions.jsonl'),
                          '--corpus', os.path.join(self.tmp, 'corpus.jsonl'), '--output', output,
                          '--plot', os.path.join(self.tmp, 'report.png'))
        self.assertEqual(status, 0)
        self.assertIn('evaluated: 10  skipped: 0', out)
        self.assertTrue(os.path.exists(output))
        self.assertTrue(os.path.exists(os.path.join(self.tmp, 'report.png')))

    def test_evolve(self):
        memory_dir = os.path.join(self.tmp, 'memory')
        log = os.path.join(memory_dir, 'evolution.jsonl')
        before = count_cycles(log)
        status, out = run('evolve', '--config', self.config)
        self.assertEqual(status, 0)
        self.assertIn('use --force', out)
        self.assertEqual(count_cycles(log), before)
        chart = os.path.join(self.tmp, 'directives.png')
        status, out = run('evolve', '--config', self.config, '--force', '--plot', chart)
        self.assertEqual(status, 0)
        self.assertEqual(count_cycles(log), before + 1)
        self.assertGreater(os.path.getsize(chart), 0)
        with open(os.path.join(memory_dir, 'archive_state.json'), encoding='utf-8') as f:
            self.assertEqual(json.load(f)['pending'], 0)
        with util.memory_lock(memory_dir):
            self.assertEqual(run('evolve', '--config', self.config, '--force')[0], 1)
        self.assertEqual(count_cycles(log), before + 1)

    def test_build_alignment_data(self):
        output = os.path.join(self.tmp, 'alignment')
        status, out = run('build-alignment-data', '--config', self.config, '--output', output)
        self.assertEqual(status, 0)
        self.assertIn('9 SFT samples, 1 faults, 1 preference pairs', out)

    def test_ingest_statutes(self):
        status, out = run('ingest-statutes', '--statutes', os.path.join(self.tmp, 'statutes.jsonl'),
                          '--query', 'stole property', '-k', '2')
        self.assertEqual(status, 0)
        self.assertIn('5 statutes loaded', out)
        self.assertEqual(run('ingest-statutes')[0], 1)

    def test_bad_config(self):
        self.assertEqual(run('infer', '--config', os.path.join(self.tmp, 'missing.json'))[0], 1)

    def test_parser(self):
        args = build_parser().parse_args(['infer', '--config', 'c.json', '--no-memory', '--concurrency', '4'])
        self.assertTrue(args.no_memory)
        self.assertEqual(args.concurrency, 4)
        with contextlib.redirect_stderr(io.StringIO()):
            self.assertRaises(SystemExit, build_parser().parse_args, ['judge'])
