import os
import tempfile
import unittest

from jurispanel import util
from jurispanel.exceptions import LockError, RecordError


class UtilTestCase(unittest.TestCase):
    def test_jsonl(self):
        with tempfile.TemporaryDirectory() as tmp:
            file_name = os.path.join(tmp, 'nested', 'records.jsonl')
            self.assertEqual(util.write_jsonl(file_name, [{'b': 1, 'a': 'é'}, {'x': [1, 2]}]), 2)
            util.append_jsonl(file_name, {'z': None})
            with open(file_name, encoding='utf-8') as f:
                self.assertEqual(f.readline(), '{"a": "é", "b": 1}\n')
            self.assertEqual(util.read_jsonl(file_name), [(1, {'a': 'é', 'b': 1}), (2, {'x': [1, 2]}), (3, {'z': None})])

    def test_read_jsonl_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            file_name = os.path.join(tmp, 'bad.jsonl')
            with open(file_name, 'w', encoding='utf-8') as f:
                f.write('{"a": 1}\n\n[1, 2]\n')
            with self.assertRaises(RecordError) as cm:
                util.read_jsonl(file_name)
            self.assertEqual(cm.exception.line_number, 3)
            with open(file_name, 'w', encoding='utf-8') as f:
                f.write('{"a": 1\n')
            self.assertRaises(RecordError, util.read_jsonl, file_name)

    def test_stable_hash(self):
        self.assertEqual(util.stable_hash('abc'), util.stable_hash('abc'))
        self.assertNotEqual(util.stable_hash('abc'), util.stable_hash('abc', seed=1))
        self.assertLess(util.stable_hash('abc', digest_size=2), 2 ** 16)
        self.assertEqual(len(util.sha256_text('abc')), 64)

    def test_memory_lock(self):
        with tempfile.TemporaryDirectory() as tmp:
            memory_dir = os.path.join(tmp, 'memory')
            with util.memory_lock(memory_dir) as lock_path:
                self.assertTrue(os.path.exists(lock_path))
                with self.assertRaises(LockError):
                    with util.memory_lock(memory_dir):
                        pass
            self.assertFalse(os.path.exists(lock_path))
            with self.assertRaises(ValueError):
                with util.memory_lock(memory_dir):
                    raise ValueError('boom')
            with util.memory_lock(memory_dir):
                pass
