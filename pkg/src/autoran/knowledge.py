"""Domain knowledge: keyword extraction, scoped search, ingestion, retrieval.

The store is an exact-scan vector index over hashed-feature embeddings,
persisted as one JSONL file per category with base64 little-endian float32
embeddings. Corpus scale is small (<=1e5 items), so retrieval is a full
cosine scan with a deterministic tie-break.
"""

from __future__ import annotations

import base64
import hashlib
import json
import re
from dataclasses import dataclass
from fnmatch import fnmatch
from html.parser import HTMLParser
from pathlib import Path
from urllib.parse import urlparse

import numpy as np

from .errors import AutoranError, KeywordParseError
from .prompts import render_prompt
from .rng import fnv1a64

CATEGORIES = (
    "oran_background",
    "algorithm_principles",
    "performance_optimization",
    "coding_patterns",
)

EMBED_DIM = 256
CHUNK_TOKENS = 512
CHUNK_OVERLAP = 64
MAX_KEYWORDS = 5
MAX_KEYWORD_WORDS = 8

_WORD = re.compile(r"[a-z0-9_]+")
_DOMAIN_MARKERS = (" in ", " based on ", " for ")


@dataclass(frozen=True)
class Keyword:
    task: str
    domain: str

    def __post_init__(self):
        if not self.task.strip() or not self.domain.strip():
            raise KeywordParseError("keyword needs both a task and a domain part")

    def rendered(self) -> str:
        domain = self.domain.strip()
        if not domain.startswith(("in ", "based on", "for ")):
            domain = f"in {domain}"
        return f"{self.task.strip()} {domain}"


def _split_term(term: str, default_domain: str) -> list[Keyword]:
    term = " ".join(term.split())
    if not term:
        return []
    marker = None
    for m in _DOMAIN_MARKERS:
        if m in term:
            marker = m
            break
    if marker is None:
        kw = Keyword(task=term, domain=default_domain)
        return [kw] if len(kw.rendered().split()) <= MAX_KEYWORD_WORDS else []
    task, _, rest = term.partition(marker)
    domain = marker.strip() + " " + rest
    # Overly specific term carrying a second qualifier: split it into two
    # keywords sharing the first domain.
    if len(term.split()) > MAX_KEYWORD_WORDS and " based on " in rest:
        head, _, tail = rest.partition(" based on ")
        first = Keyword(task=task, domain=f"{marker.strip()} {head}".strip())
        second = Keyword(task=tail.strip(), domain=first.domain)
        return [k for k in (first, second) if len(k.rendered().split()) <= MAX_KEYWORD_WORDS]
    kw = Keyword(task=task.strip(), domain=domain.strip())
    return [kw] if len(kw.rendered().split()) <= MAX_KEYWORD_WORDS else []


def parse_keywords(text: str, default_domain: str = "in O-RAN") -> list[Keyword]:
    terms = [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]
    out: list[Keyword] = []
    seen = set()
    for term in terms:
        for kw in _split_term(term, default_domain):
            key = kw.rendered().lower()
            if key not in seen:
                seen.add(key)
                out.append(kw)
        if len(out) >= MAX_KEYWORDS:
            break
    if not out:
        raise KeywordParseError(f"no keywords parseable from response: {text[:120]!r}")
    return out[:MAX_KEYWORDS]


def extract_keywords(req, gateway) -> list[Keyword]:
    env = render_prompt("keywords", req)
    response = gateway.complete(env).text
    return parse_keywords(response)


# --- embedding backends ---

class HashingEmbedder:
    """Feature hashing of lowercased word counts, L2-normalized, dim 256."""

    backend_id = "hashing"

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise AutoranError("cannot embed empty text")
        vec = np.zeros(EMBED_DIM, dtype=np.float64)
        for word in _WORD.findall(text.lower()):
            vec[fnv1a64(word) % EMBED_DIM] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise AutoranError("text produced no tokens to embed")
        return vec / norm


class HttpEmbedder:
    """OpenAI-compatible embeddings endpoint; output is re-normalized."""

    backend_id = "http"

    def __init__(self, url: str, model: str, key: str = ""):
        self.url = url
        self.model = model
        self.key = key

    def embed(self, text: str) -> np.ndarray:
        import httpx

        from .errors import HttpError

        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        resp = httpx.post(
            self.url, json={"model": self.model, "input": text}, headers=headers, timeout=60.0
        )
        if resp.status_code != 200:
            raise HttpError(resp.status_code, resp.text[:200])
        vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
        return vec / float(np.linalg.norm(vec))


# --- store ---

@dataclass(frozen=True, eq=False)
class KnowledgeItem:
    id: str
    category: str
    source_url: str
    markdown: str
    embedding: np.ndarray


@dataclass(frozen=True)
class RetrievalResult:
    item_id: str
    score: float
    rank: int


def item_id_for(markdown: str, source_url: str) -> str:
    payload = markdown.encode("utf-8") + b"\x00" + source_url.encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def _encode_embedding(vec: np.ndarray) -> str:
    return base64.b64encode(vec.astype("<f4").tobytes()).decode("ascii")


def _decode_embedding(text: str) -> np.ndarray:
    vec = np.frombuffer(base64.b64decode(text), dtype="<f4").astype(np.float64)
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm else vec


class KnowledgeStore:
    """In-memory index backed by append-only kb/<category>.jsonl files."""

    def __init__(self, root: Path | str | None = None):
        self.root = Path(root) if root else None
        self._items: dict[str, KnowledgeItem] = {}
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._load()

    def _category_path(self, category: str) -> Path:
        assert self.root is not None
        return self.root / f"{category}.jsonl"

    def _load(self) -> None:
        for category in CATEGORIES:
            path = self._category_path(category)
            if not path.exists():
                continue
            for line in path.read_text().splitlines():
                if not line.strip():
                    continue
                raw = json.loads(line)
                item = KnowledgeItem(
                    id=raw["id"],
                    category=raw["category"],
                    source_url=raw["source_url"],
                    markdown=raw["markdown"],
                    embedding=_decode_embedding(raw["embedding"]),
                )
                self._items.setdefault(item.id, item)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._items

    def get(self, item_id: str) -> KnowledgeItem:
        return self._items[item_id]

    def items(self, category: str | None = None) -> list[KnowledgeItem]:
        if category is None:
            return list(self._items.values())
        return [i for i in self._items.values() if i.category == category]

    def add(self, item: KnowledgeItem) -> bool:
        """Returns False (and stores nothing) for duplicate ids."""
        if item.category not in CATEGORIES:
            raise AutoranError(f"unknown knowledge category {item.category!r}")
        if item.id in self._items:
            return False
        self._items[item.id] = item
        if self.root is not None:
            row = {
                "id": item.id,
                "category": item.category,
                "source_url": item.source_url,
                "markdown": item.markdown,
                "embedding": _encode_embedding(item.embedding),
            }
            with self._category_path(item.category).open("a") as fh:
                fh.write(json.dumps(row) + "\n")
        return True

    def retrieve(
        self, query_vec: np.ndarray, k: int, category: str | None = None
    ) -> list[RetrievalResult]:
        """Exact top-k by cosine; ties broken by ascending item id."""
        if k < 0:
            raise AutoranError("k must be >= 0")
        if k == 0:
            return []
        scored = [
            (float(np.dot(item.embedding, query_vec)), item.id)
            for item in self.items(category)
        ]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        return [
            RetrievalResult(item_id=item_id, score=score, rank=rank)
            for rank, (score, item_id) in enumerate(scored[:k], start=1)
        ]


def retrieve(store: KnowledgeStore, embedder, query: str, k: int, category: str | None = None):
    return store.retrieve(embedder.embed(query), k, category)


# --- ingestion ---

class _MarkdownExtractor(HTMLParser):
    def __init__(self):
        super().__init__()
        self.parts: list[str] = []
        self._skip = 0
        self._heading: int | None = None

    def handle_starttag(self, tag, attrs):
        if tag in ("script", "style"):
            self._skip += 1
        elif tag in ("h1", "h2", "h3", "h4", "h5", "h6"):
            self._heading = int(tag[1])
            self.parts.append("\n\n" + "#" * self._heading + " ")
        elif tag == "li":
            self.parts.append("\n- ")
        elif tag in ("p", "div", "br", "tr"):
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag in ("script", "style") and self._skip:
            self._skip -= 1
        elif tag in ("h1", "h2", "h3", "h4", "h5", "h6"):
            self._heading = None
            self.parts.append("\n")

    def handle_data(self, data):
        if not self._skip:
            self.parts.append(data)


def to_markdown(doc: str) -> str:
    """Strip HTML down to markdown-ish text; pass plain text through."""
    if "</" not in doc and "<p" not in doc.lower() and "<h" not in doc.lower():
        return doc.strip()
    parser = _MarkdownExtractor()
    parser.feed(doc)
    text = "".join(parser.parts)
    lines = [line.rstrip() for line in text.splitlines()]
    out: list[str] = []
    blank = True
    for line in lines:
        if line.strip():
            out.append(line.strip() if not line.startswith(("#", "-")) else line)
            blank = False
        elif not blank:
            out.append("")
            blank = True
    return "\n".join(out).strip()


def chunk_text(text: str, size: int = CHUNK_TOKENS, overlap: int = CHUNK_OVERLAP) -> list[str]:
    """Whitespace-token windows of `size` with `overlap` tokens of context."""
    tokens = text.split()
    if len(tokens) <= size:
        return [" ".join(tokens)] if tokens else []
    step = size - overlap
    chunks = []
    start = 0
    while True:
        window = tokens[start : start + size]
        chunks.append(" ".join(window))
        if start + size >= len(tokens):
            break
        start += step
    return chunks


def ingest(
    doc: str,
    source_url: str,
    category: str,
    store: KnowledgeStore,
    embedder,
) -> list[KnowledgeItem]:
    """Convert, chunk, embed and store a fetched document; dedup by id."""
    if not doc or not doc.strip():
        raise AutoranError("cannot ingest an empty document")
    markdown = to_markdown(doc)
    stored: list[KnowledgeItem] = []
    for chunk in chunk_text(markdown):
        item = KnowledgeItem(
            id=item_id_for(chunk, source_url),
            category=category,
            source_url=source_url,
            markdown=chunk,
            embedding=embedder.embed(chunk),
        )
        if store.add(item):
            stored.append(item)
    return stored


# --- scoped web search ---

class FixtureSearchClient:
    """Canned search results keyed by the rendered keyword."""

    def __init__(self, results: dict[str, list[str]]):
        self.results = results

    @classmethod
    def from_file(cls, path: Path | str) -> "FixtureSearchClient":
        return cls(json.loads(Path(path).read_text()))

    def search(self, query: str) -> list[str]:
        return list(self.results.get(query, []))


class LlmSearchClient:
    """Asks the model for authoritative URLs through the search-plan stage."""

    def __init__(self, gateway):
        self.gateway = gateway

    def search(self, query: str) -> list[str]:
        env = render_prompt("search_plan", query, {"terms": query})
        response = self.gateway.complete(env).text
        urls = []
        for part in response.replace("\n", ",").split(","):
            part = part.strip()
            if part.startswith(("http://", "https://")):
                urls.append(part)
        return urls


class FixtureFetcher:
    """Canned document bodies keyed by URL."""

    def __init__(self, docs_dir: Path | str, url_map: dict[str, str]):
        self.docs_dir = Path(docs_dir)
        self.url_map = url_map

    def fetch(self, url: str) -> str:
        name = self.url_map.get(url)
        if name is None:
            raise AutoranError(f"no fixture document for {url}")
        return (self.docs_dir / name).read_text()


def load_allowlist(path: Path | str) -> list[str]:
    lines = Path(path).read_text().splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith("#")]


def host_allowed(url: str, allowlist: list[str]) -> bool:
    host = urlparse(url).hostname or ""
    return any(fnmatch(host, pattern) for pattern in allowlist)


def search(kw: Keyword, allowlist: list[str], client) -> list[str]:
    """Scoped search: host-filtered, order preserving, deduplicated."""
    if not allowlist:
        raise AutoranError("allowlist must not be empty")
    seen = set()
    out = []
    for url in client.search(kw.rendered()):
        if url in seen or not host_allowed(url, allowlist):
            continue
        seen.add(url)
        out.append(url)
    return out
