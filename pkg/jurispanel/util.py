import contextlib
import hashlib
import json
import os

from .exceptions import LockError, RecordError


def read_jsonl(file_name):
    """
    This function reads a file with one JSON object per line. Blank lines are skipped.

    Args:
        - file_name (``str``): path of the file

    Returns:
        - ``list``: list of ``(line_number, dict)`` tuples, line numbers 1-based
    """
    records = []
    with open(file_name, encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise RecordError('malformed JSON ({})'.format(e.msg), line_number)
            if not isinstance(obj, dict):
                raise RecordError('expected a JSON object', line_number)
            records.append((line_number, obj))
    return records


def dumps(obj):
    """Canonical one-line JSON used for every file the package writes."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def write_jsonl(file_name, records):
    """
    This function writes an iterable of dictionaries, one JSON object per line.

    Args:
        - file_name (``str``): output path (parent directories are created)
        - records (``iterable``): dictionaries to write

    Returns:
        - ``int``: number of written records
    """
    parent = os.path.dirname(file_name)
    if parent:
        os.makedirs(parent, exist_ok=True)
    n = 0
    with open(file_name, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(dumps(record) + '\n')
            n += 1
    return n


def append_jsonl(file_name, record):
    parent = os.path.dirname(file_name)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(file_name, 'a', encoding='utf-8') as f:
        f.write(dumps(record) + '\n')


def stable_hash(text, seed=0, digest_size=8):
    """
    Process-independent hash of a string (the builtin ``hash`` is salted per process).

    Args:
        - text (``str``): text to hash
        - seed (``int``): hash seed
        - digest_size (``int``): number of bytes of the digest

    Returns:
        - ``int``: unsigned integer hash
    """
    h = hashlib.blake2b(text.encode('utf-8'), digest_size=digest_size,
                        key=str(seed).encode('utf-8'))
    return int.from_bytes(h.digest(), 'big')


def sha256_text(text):
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


@contextlib.contextmanager
def memory_lock(directory):
    """
    Exclusive writer lock on a memory directory. A second holder gets a `LockError`
    instead of waiting.

    Args:
        - directory (``str``): memory directory
    """
    os.makedirs(directory, exist_ok=True)
    lock_path = os.path.join(directory, '.writer.lock')
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError('memory directory {} is locked by another run ({})'.format(directory, lock_path))
    try:
        os.write(fd, str(os.getpid()).encode('ascii'))
        os.close(fd)
        yield lock_path
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.remove(lock_path)
