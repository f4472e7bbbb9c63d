import os
import tempfile
import unittest

from jurispanel.exceptions import MissingPlaceholderError
from jurispanel.prompts import (NONE_SENTINEL, TEMPLATE_ROLES, AgentRole, PromptLibrary, assemble_prompt,
                                parse_template, render_lines, render_numbered)


class PromptsTestCase(unittest.TestCase):
    def test_every_packaged_template_parses(self):
        library = PromptLibrary()
        for name in TEMPLATE_ROLES:
            template = library.get(name)
            self.assertTrue(template.system_text)
            self.assertTrue(template.user_text)

    def test_assemble(self):
        bundle = assemble_prompt(AgentRole.CLERK, {'CASE_FACT': 'Li stole a phone.'})
        self.assertIn('Li stole a phone.', bundle.user_text)
        self.assertNotIn('{{', bundle.text())
        self.assertEqual(bundle.role, AgentRole.CLERK)
        self.assertEqual(bundle.template, 'clerk')
        self.assertEqual([m['role'] for m in bundle.messages()], ['system', 'user'])

    def test_missing_placeholder(self):
        with self.assertRaises(MissingPlaceholderError) as cm:
            assemble_prompt('case_judge', {'CASE_FACT': 'x', 'EVENT_POINTS': 'y', 'CANDIDATES_FOR_JUDGE': 'z'})
        self.assertEqual(cm.exception.placeholder, 'VERIFICATION_OPINION')
        self.assertEqual(cm.exception.role, 'case_judge')

    def test_values_are_inserted_verbatim(self):
        bundle = assemble_prompt('clerk', {'CASE_FACT': '{{CASE_FACT}} and {{OTHER}}'})
        self.assertIn('{{CASE_FACT}} and {{OTHER}}', bundle.user_text)

    def test_unknown_template(self):
        self.assertRaises(ValueError, assemble_prompt, 'bailiff', {})

    def test_library_override(self):
        with tempfile.TemporaryDirectory() as tmp:
            with open(os.path.join(tmp, 'clerk.txt'), 'w', encoding='utf-8') as f:
                f.write('[system]\nShort clerk.\n[user]\nFacts: {{CASE_FACT}}\n')
            library = PromptLibrary(tmp)
            bundle = assemble_prompt('clerk', {'CASE_FACT': 'abc'}, library)
            self.assertEqual((bundle.system_text, bundle.user_text), ('Short clerk.', 'Facts: abc'))
            # templates missing from the override directory fall back to the packaged ones
            self.assertEqual(library.get('supervisor'), PromptLibrary().get('supervisor'))

    def test_parse_template(self):
        template = parse_template('t', '[system]\nS {{A}}\n[user]\nU {{B}} {{A}}\n\n')
        self.assertEqual(template.placeholders, ('A', 'B'))
        self.assertEqual(template.user_text, 'U {{B}} {{A}}')
        self.assertRaises(ValueError, parse_template, 't', 'no sections')

    def test_render(self):
        self.assertEqual(render_numbered(['a', 'b']), '1. a\n2. b')
        self.assertEqual(render_numbered([]), NONE_SENTINEL)
        self.assertEqual(render_lines([264, 234]), '264\n234')
        self.assertEqual(render_lines([], empty=''), '')
