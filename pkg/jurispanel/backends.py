import collections
import dataclasses
import logging
import os
import threading
import time

import openai

from .exceptions import ConfigError, ProtocolError, ScriptExhaustedError, TransportError
from .prompts import AgentRole, PromptBundle

logger = logging.getLogger(__name__)

FORMAT_REMINDER = ('Your previous reply did not follow the required output format. '
                   'Answer again and end with the exact format given in the instructions.')


@dataclasses.dataclass
class AgentBackendConfig:
    """
    Args:
        - kind (``str``): ``'remote'``, ``'scripted'`` or ``'simulated'``
        - endpoint (``str``): base URL of an OpenAI-compatible chat service (remote)
        - model (``str``): model name (remote)
        - temperature (``float``): sampling temperature (remote)
        - top_p (``float``): nucleus sampling mass (remote)
        - api_key_env (``str``): environment variable holding the API key (remote)
        - max_retries (``int``): retries after a failed request (remote)
        - timeout (``float``): request timeout in seconds (remote)
        - script (``list``): responses popped in order (scripted)
        - simulator (``str``): name of a registered rule-based panel (simulated)
    """
    kind: str = 'scripted'
    endpoint: str = ''
    model: str = ''
    temperature: float = 0.0
    top_p: float = 0.9
    api_key_env: str = 'OPENAI_API_KEY'
    max_retries: int = 2
    timeout: float = 60.0
    script: list = dataclasses.field(default_factory=list)
    simulator: str = ''

    def validate(self):
        if self.kind not in ('remote', 'scripted', 'simulated'):
            raise ConfigError('backend kind must be remote, scripted or simulated, got {}'.format(self.kind))
        if self.kind == 'remote' and not self.model:
            raise ConfigError('remote backend needs a model name')
        if self.kind == 'simulated' and not self.simulator:
            raise ConfigError('simulated backend needs a simulator name')
        if not 0.0 < self.top_p <= 1.0:
            raise ConfigError('top_p must be in (0, 1], got {}'.format(self.top_p))
        if self.temperature < 0.0:
            raise ConfigError('temperature must be >= 0, got {}'.format(self.temperature))
        if self.max_retries < 0:
            raise ConfigError('max_retries must be >= 0, got {}'.format(self.max_retries))
        return self


class ScriptedBackend():
    """
    Deterministic backend replaying canned responses. ``script`` is either one list shared
    by every role or a mapping role -> list; each role pops its own queue in order.
    """
    repairs_format = False

    def __init__(self, script):
        self._lock = threading.Lock()
        self._turns = collections.Counter()
        if isinstance(script, dict):
            self._queues = {_role(r): collections.deque(responses) for r, responses in script.items()}
            self._shared = None
        else:
            self._queues = {}
            self._shared = collections.deque(script)

    def remaining(self, role=None):
        if role is None or self._shared is not None:
            return len(self._shared) if self._shared is not None else sum(len(q) for q in self._queues.values())
        return len(self._queues.get(_role(role), ()))

    def complete(self, role, bundle):
        role = _role(role)
        with self._lock:
            self._turns[role] += 1
            queue = self._shared if self._shared is not None else self._queues.get(role)
            if not queue:
                raise ScriptExhaustedError(role.value, self._turns[role])
            return queue.popleft()


class SimulatedBackend():
    """
    Deterministic rule-based backend: ``rule(role, bundle)`` returns the reply text.
    """
    repairs_format = False

    def __init__(self, rule, name=''):
        self.rule = rule
        self.name = name

    def complete(self, role, bundle):
        return self.rule(_role(role), bundle)


class RemoteBackend():
    """
    Backend speaking the OpenAI-compatible ``chat.completions`` API: one request per call,
    system and user messages, fixed sampling parameters. Failed requests are retried with
    exponential backoff.
    """
    repairs_format = True

    def __init__(self, model, endpoint=None, temperature=0.0, top_p=0.9, api_key_env='OPENAI_API_KEY',
                 max_retries=2, timeout=60.0, backoff=1.0, client=None):
        self.model = model
        self.temperature = temperature
        self.top_p = top_p
        self.max_retries = max_retries
        self.backoff = backoff
        if client is None:
            client = openai.OpenAI(base_url=endpoint or None,
                                   api_key=os.environ.get(api_key_env, 'unset'),
                                   timeout=timeout, max_retries=0)
        self._client = client

    def request(self, bundle):
        return {'model': self.model, 'messages': bundle.messages(),
                'temperature': self.temperature, 'top_p': self.top_p}

    def complete(self, role, bundle):
        attempts = 0
        last_error = None
        while attempts <= self.max_retries:
            attempts += 1
            try:
                response = self._client.chat.completions.create(**self.request(bundle))
                content = response.choices[0].message.content
                return content if content is not None else ''
            except (openai.APIStatusError, openai.APIConnectionError) as e:
                last_error = e
                status = getattr(e, 'status_code', None)
                if status is not None and status < 500 and status != 429:
                    raise TransportError('chat request rejected: {}'.format(e), attempts) from e
                logger.warning('%s request failed (attempt %d): %s', _role(role).value, attempts, e)
                if attempts <= self.max_retries and self.backoff > 0:
                    time.sleep(self.backoff * 2 ** (attempts - 1))
            except (AttributeError, IndexError, TypeError) as e:
                raise TransportError('malformed chat response: {}'.format(e), attempts) from e
        raise TransportError('chat request failed: {}'.format(last_error), attempts)


def _role(role):
    return role if isinstance(role, AgentRole) else AgentRole(role)


def _backend_key(name):
    # role names map to roles, other names (teacher, expert) stay strings
    if isinstance(name, AgentRole) or name in {r.value for r in AgentRole}:
        return _role(name)
    return name


def invoke(role, bundle, backend):
    """
    This function sends one prompt to a backend and returns the raw reply unmodified.

    Args:
        - role (``jurispanel.prompts.AgentRole``): answering role
        - bundle (``jurispanel.prompts.PromptBundle``): assembled prompt
        - backend: `RemoteBackend`, `ScriptedBackend` or `SimulatedBackend`

    Returns:
        - ``str``: raw reply
    """
    return backend.complete(_role(role), bundle)


def invoke_parsed(role, bundle, backend, parser):
    """
    This function invokes a backend and parses the reply. Backends that support it get one
    retry with a format reminder when the first reply does not parse.

    Returns:
        - ``tuple``: (raw replies in order, parsed value)
    """
    raw = invoke(role, bundle, backend)
    try:
        return [raw], parser(raw)
    except ProtocolError:
        if not getattr(backend, 'repairs_format', False):
            raise
    logger.info('Retrying %s with a format reminder', _role(role).value)
    repaired = PromptBundle(system_text=bundle.system_text,
                            user_text=bundle.user_text + '\n\n' + FORMAT_REMINDER,
                            role=bundle.role, template=bundle.template)
    second = invoke(role, repaired, backend)
    return [raw, second], parser(second)


def make_backend(config):
    """
    This function builds the backend described by a config.

    Args:
        - config (``jurispanel.backends.AgentBackendConfig``)
    """
    config.validate()
    if config.kind == 'scripted':
        return ScriptedBackend(list(config.script))
    if config.kind == 'simulated':
        from .demo import get_simulator
        return SimulatedBackend(get_simulator(config.simulator), name=config.simulator)
    logger.info('Using remote chat model %s at %s', config.model, config.endpoint or 'default endpoint')
    return RemoteBackend(model=config.model, endpoint=config.endpoint, temperature=config.temperature,
                         top_p=config.top_p, api_key_env=config.api_key_env,
                         max_retries=config.max_retries, timeout=config.timeout)


def make_backends(configs):
    """
    This function builds the backends of a mapping name -> config. Role names become
    `jurispanel.prompts.AgentRole` keys; other names (``teacher``, ``expert``) stay strings.
    Entries naming the same simulated panel share one backend instance.

    Returns:
        - ``dict``: role or name -> backend
    """
    backends = {}
    shared = {}
    for name, config in configs.items():
        if config.kind == 'simulated':
            if config.simulator not in shared:
                shared[config.simulator] = make_backend(config)
            backends[_backend_key(name)] = shared[config.simulator]
        else:
            backends[_backend_key(name)] = make_backend(config)
    return backends
