import dataclasses
import logging
import os
import threading

import torch

from . import util
from .exceptions import ConfigError, DimensionMismatchError, RetrievalError

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class EmbeddingProviderConfig:
    """
    Args:
        - kind (``str``): ``'deterministic-hash'`` or ``'remote'``
        - dim (``int``): embedding dimension (at least 8)
        - seed (``int``): hash seed (deterministic provider)
        - ngram (``int``): character n-gram length (deterministic provider)
        - endpoint (``str``): base URL of the embeddings service (remote provider)
        - model (``str``): model name (remote provider)
        - api_key_env (``str``): environment variable holding the API key (remote provider)
        - max_in_flight (``int``): bound on concurrent remote requests
    """
    kind: str = 'deterministic-hash'
    dim: int = 256
    seed: int = 0
    ngram: int = 3
    endpoint: str = ''
    model: str = ''
    api_key_env: str = 'OPENAI_API_KEY'
    max_in_flight: int = 4

    def validate(self):
        if self.kind not in ('deterministic-hash', 'remote'):
            raise ConfigError('embedding kind must be deterministic-hash or remote, got {}'.format(self.kind))
        if self.dim < 8:
            raise ConfigError('embedding dim must be >= 8, got {}'.format(self.dim))
        if self.kind == 'remote' and not self.model:
            raise ConfigError('remote embedding provider needs a model name')
        return self


def normalize(values):
    """
    This function L2-normalizes a vector.

    Args:
        - values (``torch.tensor`` or ``list``): 1-D vector

    Returns:
        - ``torch.tensor``: unit vector (a zero vector is returned unchanged)
    """
    v = torch.as_tensor(values, dtype=torch.float64).flatten()
    norm = torch.linalg.vector_norm(v)
    if float(norm) == 0.0:
        return v
    return v / norm


def cosine(a, b):
    """
    This function returns the cosine similarity of two unit vectors (their dot product).

    Args:
        - a (``torch.tensor``): unit vector
        - b (``torch.tensor``): unit vector of the same dimension

    Returns:
        - ``float``: similarity in [-1, 1]
    """
    if a.shape != b.shape:
        raise DimensionMismatchError('cannot compare vectors of dims {} and {}'.format(tuple(a.shape), tuple(b.shape)))
    return float(torch.dot(a, b))


class HashEmbedder():
    """
    Deterministic offline provider: character n-gram feature hashing into
    ``dim`` signed buckets, then L2 normalization. A pure function of
    ``(text, dim, seed)``.
    """
    def __init__(self, dim=256, seed=0, ngram=3):
        if dim < 8:
            raise ConfigError('embedding dim must be >= 8, got {}'.format(dim))
        self.dim = dim
        self.seed = seed
        self.ngram = ngram

    def _ngrams(self, text):
        padded = ' ' * (self.ngram - 1) + ' '.join(text.lower().split()) + ' ' * (self.ngram - 1)
        return [padded[i:i + self.ngram] for i in range(len(padded) - self.ngram + 1)]

    def embed(self, text):
        if not isinstance(text, str) or not text.strip():
            raise ValueError('cannot embed empty text')
        buckets = [0.0] * self.dim
        hashes = [util.stable_hash(gram, seed=self.seed) for gram in self._ngrams(text)]
        for h in hashes:
            buckets[h % self.dim] += 1.0 if (h >> 32) & 1 else -1.0
        if not any(buckets):
            # all n-grams cancelled out; fall back on the unsigned histogram
            for h in hashes:
                buckets[h % self.dim] += 1.0
        return normalize(torch.tensor(buckets, dtype=torch.float64))

    def embed_many(self, texts):
        return [self.embed(t) for t in texts]


class RemoteEmbedder():
    """
    Remote provider speaking the OpenAI-compatible ``embeddings`` API.
    Vectors are re-normalized on receipt.
    """
    def __init__(self, model, dim, endpoint=None, api_key_env='OPENAI_API_KEY', max_in_flight=4, client=None):
        self.model = model
        self.dim = dim
        self._slots = threading.BoundedSemaphore(max_in_flight)
        if client is None:
            from openai import OpenAI
            client = OpenAI(base_url=endpoint or None,
                            api_key=os.environ.get(api_key_env, 'unset'),
                            max_retries=2)
        self._client = client

    def embed_many(self, texts):
        for t in texts:
            if not isinstance(t, str) or not t.strip():
                raise ValueError('cannot embed empty text')
        with self._slots:
            try:
                response = self._client.embeddings.create(model=self.model, input=list(texts))
            except Exception as e:
                raise RetrievalError('embedding request failed: {}'.format(e)) from e
        try:
            vectors = [normalize(item.embedding) for item in response.data]
        except (AttributeError, TypeError, ValueError) as e:
            raise RetrievalError('could not decode embedding response: {}'.format(e)) from e
        if len(vectors) != len(texts):
            raise RetrievalError('expected {} embeddings, got {}'.format(len(texts), len(vectors)))
        for v in vectors:
            if v.shape[0] != self.dim:
                raise RetrievalError('expected dim {}, got {}'.format(self.dim, v.shape[0]))
        return vectors

    def embed(self, text):
        return self.embed_many([text])[0]


def make_embedder(config):
    """
    This function builds the embedding provider described by a config.

    Args:
        - config (``jurispanel.embedding.EmbeddingProviderConfig``)

    Returns:
        - `HashEmbedder` or `RemoteEmbedder`
    """
    config.validate()
    if config.kind == 'deterministic-hash':
        return HashEmbedder(dim=config.dim, seed=config.seed, ngram=config.ngram)
    logger.info('Using remote embeddings model %s at %s', config.model, config.endpoint or 'default endpoint')
    return RemoteEmbedder(model=config.model, dim=config.dim, endpoint=config.endpoint,
                          api_key_env=config.api_key_env, max_in_flight=config.max_in_flight)
