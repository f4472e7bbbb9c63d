import dataclasses
import enum
import os
import re

from .exceptions import MissingPlaceholderError

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'templates')

# filled into memory slots when memory is disabled or empty
NONE_SENTINEL = '(none)'

_PLACEHOLDER = re.compile(r'\{\{([A-Z][A-Z0-9_]*)\}\}')


class AgentRole(enum.Enum):
    CLERK = 'clerk'
    ASSISTANT = 'assistant'
    CASE_JUDGE = 'case_judge'
    SUPERVISOR = 'supervisor'
    PRESIDING = 'presiding'
    META = 'meta'
    REFLECTOR = 'reflector'


PANEL_ROLES = (AgentRole.CLERK, AgentRole.ASSISTANT, AgentRole.CASE_JUDGE,
               AgentRole.SUPERVISOR, AgentRole.PRESIDING)

# template name -> role that answers it
TEMPLATE_ROLES = {
    'clerk': AgentRole.CLERK,
    'assistant': AgentRole.ASSISTANT,
    'case_judge': AgentRole.CASE_JUDGE,
    'supervisor': AgentRole.SUPERVISOR,
    'presiding': AgentRole.PRESIDING,
    'induce': AgentRole.META,
    'diff': AgentRole.META,
    'summarize': AgentRole.META,
    'reflect': AgentRole.REFLECTOR,
}


@dataclasses.dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    role: AgentRole
    template: str = ''

    def messages(self):
        return [{'role': 'system', 'content': self.system_text},
                {'role': 'user', 'content': self.user_text}]

    def text(self):
        return self.system_text + '\n' + self.user_text


@dataclasses.dataclass(frozen=True)
class Template:
    name: str
    system_text: str
    user_text: str

    @property
    def placeholders(self):
        names = _PLACEHOLDER.findall(self.system_text) + _PLACEHOLDER.findall(self.user_text)
        return tuple(dict.fromkeys(names))


def parse_template(name, text):
    """
    This function splits a template file into its ``[system]`` and ``[user]`` sections.
    """
    match = re.match(r'\s*\[system\]\n(.*?)\n\[user\]\n(.*)\Z', text, re.DOTALL)
    if match is None:
        raise ValueError('template {} must have a [system] and a [user] section'.format(name))
    return Template(name=name, system_text=match.group(1), user_text=match.group(2).rstrip('\n'))


class PromptLibrary():
    """
    Role templates read from a directory of ``<name>.txt`` files (the packaged ones by default).

    Args:
        - template_dir (``str``): directory overriding the packaged templates, file by file
    """
    def __init__(self, template_dir=None):
        self.template_dir = template_dir
        self._cache = {}

    def _path(self, name):
        if self.template_dir:
            path = os.path.join(self.template_dir, name + '.txt')
            if os.path.exists(path):
                return path
        return os.path.join(TEMPLATE_DIR, name + '.txt')

    def get(self, name):
        if name not in TEMPLATE_ROLES:
            raise ValueError('Supported templates: {} while {} was provided'.format(', '.join(TEMPLATE_ROLES), name))
        if name not in self._cache:
            with open(self._path(name), encoding='utf-8') as f:
                self._cache[name] = parse_template(name, f.read())
        return self._cache[name]


_default_library = PromptLibrary()


def _substitute(text, context, template):
    def replace(match):
        key = match.group(1)
        if key not in context:
            raise MissingPlaceholderError(key, template.name)
        return str(context[key])
    return _PLACEHOLDER.sub(replace, text)


def assemble_prompt(template_name, context, library=None):
    """
    This function fills a role template. Substitution is a single pass, so values are
    inserted verbatim even when they contain ``{{...}}`` markers.

    Args:
        - template_name (``str`` or ``jurispanel.prompts.AgentRole``): template name (a panel role selects its own template)
        - context (``dict``): placeholder name -> value
        - library (``jurispanel.prompts.PromptLibrary``): template source (packaged templates if None)

    Returns:
        - ``jurispanel.prompts.PromptBundle``
    """
    if isinstance(template_name, AgentRole):
        template_name = template_name.value
    template = (library or _default_library).get(template_name)
    for key in template.placeholders:
        if key not in context:
            raise MissingPlaceholderError(key, template_name)
    return PromptBundle(system_text=_substitute(template.system_text, context, template),
                        user_text=_substitute(template.user_text, context, template),
                        role=TEMPLATE_ROLES[template_name],
                        template=template_name)


def render_numbered(items, empty=NONE_SENTINEL):
    """
    This function renders a list as ``1. a\\n2. b``, oldest first.
    """
    if not items:
        return empty
    return '\n'.join('{}. {}'.format(i, item) for i, item in enumerate(items, start=1))


def render_lines(items, empty=NONE_SENTINEL):
    items = [str(item) for item in items]
    return '\n'.join(items) if items else empty
