"""Content catalog, popularity model and request streams."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ParameterError, ParseError

__all__ = [
    "Catalog",
    "RequestStream",
    "build_catalog",
    "zipf_popularity",
    "sample_requests",
    "stream_to_csv",
    "stream_from_csv",
]


@dataclass(frozen=True)
class Catalog:
    """Item sizes in bytes; item ``i`` has size ``sizes[i]``."""

    sizes: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if sizes.ndim != 1 or sizes.size < 1:
            raise ParameterError("catalog needs at least one item")
        if np.any(sizes <= 0):
            raise ParameterError("item sizes must be positive")
        sizes.setflags(write=False)
        object.__setattr__(self, "sizes", sizes)

    @property
    def n_items(self):
        return int(self.sizes.size)


def build_catalog(n_items, uniform_bytes=1, sizes=None):
    """Create a catalog of ``n_items`` items.

    Either every item gets ``uniform_bytes`` bytes, or ``sizes`` lists them
    explicitly (its length must then equal ``n_items``).
    """
    if n_items < 1:
        raise ParameterError("n_items must be >= 1")
    if sizes is None:
        if uniform_bytes <= 0:
            raise ParameterError("uniform_bytes must be positive")
        sizes = np.full(n_items, uniform_bytes, dtype=np.int64)
    elif len(sizes) != n_items:
        raise ParameterError("len(sizes) must equal n_items")
    return Catalog(np.asarray(sizes))


def zipf_popularity(n, alpha=0.8, q=0.0):
    """Zipf-Mandelbrot popularity ``p_i ∝ (i + q) ** -alpha`` over ranks 1..n.

    Returns a read-only array that sums to one and is non-increasing.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    if q < 0:
        raise ParameterError("q must be non-negative")
    w = (np.arange(1, n + 1, dtype=np.float64) + q) ** -alpha
    p = w / w.sum()
    p.setflags(write=False)
    return p


@dataclass(frozen=True)
class RequestStream:
    """Interleaved sequence of requests; request ``t`` is item ``items[t]``
    arriving at router ``clients[t]``."""

    clients: np.ndarray
    items: np.ndarray
    seed: int | None = None

    def __len__(self):
        return int(self.items.size)

    def head(self, count):
        return RequestStream(self.clients[:count], self.items[:count], self.seed)


def sample_requests(p, clients, count, seed=None):
    """Draw ``count`` i.i.d. requests: item by ``p``, client uniformly."""
    clients = np.array(sorted(set(int(c) for c in clients)), dtype=np.int64)
    if clients.size == 0:
        raise ConfigurationError("request stream needs at least one client")
    if count < 0:
        raise ParameterError("count must be non-negative")
    rng = np.random.default_rng(seed)
    items = rng.choice(len(p), size=count, p=np.asarray(p))
    who = clients[rng.integers(clients.size, size=count)]
    return RequestStream(clients=who.astype(np.int64), items=items.astype(np.int64), seed=seed)


def stream_to_csv(stream):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "client", "item"])
    for t, (c, i) in enumerate(zip(stream.clients.tolist(), stream.items.tolist())):
        w.writerow([t, c, i])
    return buf.getvalue()


def stream_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["step", "client", "item"]:
        raise ParseError("missing header 'step,client,item'", 1)
    clients, items = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            step, c, i = (int(x) for x in row)
        except ValueError:
            raise ParseError(f"bad row {row!r}", lineno) from None
        if step != lineno - 2:
            raise ParseError(f"step {step} out of sequence", lineno)
        clients.append(c)
        items.append(i)
    return RequestStream(np.asarray(clients, dtype=np.int64), np.asarray(items, dtype=np.int64))
