class JurisPanelError(Exception):
    """Base class of every error raised by `jurispanel`."""


class ConfigError(JurisPanelError, ValueError):
    pass


class RecordError(JurisPanelError, ValueError):
    """
    A corpus or statute record could not be parsed.

    Args:
        - message (``str``): what went wrong
        - line_number (``int``): 1-based line of the offending record (None if unknown)
    """
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = 'line {}: {}'.format(line_number, message)
        super().__init__(message)


class DuplicateIdError(RecordError):
    def __init__(self, article_id, line_number=None):
        self.article_id = article_id
        super().__init__('duplicate article id {}'.format(article_id), line_number)


class DimensionMismatchError(JurisPanelError, ValueError):
    pass


class RetrievalError(JurisPanelError, RuntimeError):
    pass


class MissingGoldError(JurisPanelError, ValueError):
    pass


class UnknownIdError(JurisPanelError, KeyError):
    pass


class DirectiveError(JurisPanelError, ValueError):
    pass


class MissingPlaceholderError(JurisPanelError, ValueError):
    def __init__(self, placeholder, role=None):
        self.placeholder = placeholder
        self.role = role
        super().__init__('missing placeholder {{{{{}}}}} for role {}'.format(placeholder, role))


class ProtocolError(JurisPanelError, ValueError):
    """
    An agent reply does not follow its output protocol.

    Args:
        - message (``str``): what went wrong
        - raw (``str``): the raw reply text, kept verbatim for the trace
    """
    def __init__(self, message, raw=None):
        self.raw = raw
        super().__init__(message)


class TransportError(JurisPanelError, RuntimeError):
    def __init__(self, message, attempts=1):
        self.attempts = attempts
        super().__init__('{} (after {} attempt(s))'.format(message, attempts))


class ScriptExhaustedError(JurisPanelError, RuntimeError):
    def __init__(self, role, turn):
        self.role = role
        self.turn = turn
        super().__init__('script exhausted for role {} at turn {}'.format(role, turn))


class CaseFailedError(JurisPanelError, RuntimeError):
    """
    A case aborted inside the panel workflow. The partial trace is kept so
    batch drivers can still write it out.
    """
    def __init__(self, case_id, cause, trace):
        self.case_id = case_id
        self.cause = cause
        self.trace = trace
        super().__init__('case {} failed: {}'.format(case_id, cause))


class TraceError(JurisPanelError, ValueError):
    def __init__(self, message, event_index=None):
        self.event_index = event_index
        if event_index is not None:
            message = 'event {}: {}'.format(event_index, message)
        super().__init__(message)


class LockError(JurisPanelError, RuntimeError):
    pass
