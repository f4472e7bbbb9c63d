import json
import os
import tempfile
import unittest

from jurispanel.backends import AgentBackendConfig
from jurispanel.config import RunConfig, apply_overrides, load_config, save_config
from jurispanel.exceptions import ConfigError
from jurispanel.prompts import PANEL_ROLES, AgentRole


def full_config(root):
    config = RunConfig()
    config.paths.statutes = os.path.join(root, 'statutes.jsonl')
    config.paths.corpus = os.path.join(root, 'corpus.jsonl')
    config.paths.memory_dir = os.path.join(root, 'memory')
    config.paths.output_dir = os.path.join(root, 'outputs')
    config.backends = {r.value: AgentBackendConfig(kind='scripted', script=['x']) for r in PANEL_ROLES}
    config.retrieval.weights.alpha = 0.5
    config.panel.t_max = 2
    return config


class ConfigTestCase(unittest.TestCase):
    def test_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = full_config(tmp)
            file_name = os.path.join(tmp, 'config.json')
            save_config(config, file_name)
            self.assertEqual(load_config(file_name), config)

    def test_relative_paths(self):
        with tempfile.TemporaryDirectory() as tmp:
            file_name = os.path.join(tmp, 'run', 'config.json')
            os.makedirs(os.path.dirname(file_name))
            with open(file_name, 'w', encoding='utf-8') as f:
                json.dump({'paths': {'statutes': 'statutes.jsonl', 'memory_dir': '../memory'}}, f)
            config = load_config(file_name)
            self.assertEqual(config.paths.statutes, os.path.join(tmp, 'run', 'statutes.jsonl'))
            self.assertEqual(config.paths.memory_dir, os.path.join(tmp, 'memory'))
            self.assertEqual(config.paths.template_dir, '')

    def test_unknown_keys(self):
        self.assertRaises(ConfigError, RunConfig.from_dict, {'panle': {}})
        self.assertRaises(ConfigError, RunConfig.from_dict, {'panel': {'t_maximum': 3}})
        with tempfile.TemporaryDirectory() as tmp:
            file_name = os.path.join(tmp, 'config.json')
            with open(file_name, 'w', encoding='utf-8') as f:
                f.write('[1, 2]')
            self.assertRaises(ConfigError, load_config, file_name)
            with open(file_name, 'w', encoding='utf-8') as f:
                f.write('{')
            self.assertRaises(ConfigError, load_config, file_name)
        self.assertRaises(ConfigError, load_config, os.path.join('no', 'such', 'config.json'))

    def test_validation(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = full_config(tmp)
            config.validate()
            self.assertRaises(ConfigError, config.validate, check_paths=True)
            self.assertRaises(ConfigError, config.validate, roles=(AgentRole.META,))
            config.backends['bailiff'] = AgentBackendConfig()
            self.assertRaises(ConfigError, config.validate)
            del config.backends['bailiff']
            config.term_bins = 'twelve'
            self.assertRaises(ConfigError, config.validate)
            config.term_bins = 'ten'
            config.epochs = 0
            self.assertRaises(ConfigError, config.validate)
            config.epochs = 1
            config.panel.t_max = 0
            self.assertRaises(ConfigError, config.validate)

    def test_overrides(self):
        config = apply_overrides(RunConfig(), no_memory=True, seed=7, concurrency=4, epochs=2)
        self.assertFalse(config.panel.memory_enabled)
        self.assertEqual((config.seed, config.concurrency, config.epochs), (7, 4, 2))
        config = apply_overrides(RunConfig())
        self.assertTrue(config.panel.memory_enabled)
        self.assertEqual((config.seed, config.concurrency, config.epochs), (0, 1, 1))
