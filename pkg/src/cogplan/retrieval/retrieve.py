"""Execute one retrieval action for one sub-query."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

from cogplan.core import DocKind, ImageRef, RetrievedDoc, count_tokens
from cogplan.errors import ContractError, RetrievalError
from cogplan.retrieval.backends import RawHit, SearchBackend
from cogplan.retrieval.preprocess import preprocess_content

BELOW_MINIMUM = "image-below-minimum"

ImageHook = Callable[[RawHit], RawHit]


class RetrievalLimits(Protocol):
    text_top_k: int
    text_token_cap: int
    image_min: int
    image_max: int


@dataclass(frozen=True)
class RetrievalResult:
    docs: tuple[RetrievedDoc, ...]
    flags: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs)


def truncate_tokens(text: str, cap: int) -> str:
    tokens = text.split()
    return " ".join(tokens[:cap]) if len(tokens) > cap else text


def no_postprocess(hit: RawHit) -> RawHit:
    return hit


def text_retrieve(
    backend: SearchBackend,
    query: str,
    config: RetrievalLimits,
    *,
    iteration: int = 1,
) -> RetrievalResult:
    """Top-k text hits, cleaned and cut to ``config.text_token_cap`` whitespace tokens."""
    if not query.strip():
        raise ContractError("empty text query")
    try:
        hits = backend.text_search(query, config.text_top_k)
    except RetrievalError:
        raise
    except Exception as exc:
        raise RetrievalError(f"text search failed for {query!r}: {exc}") from exc
    docs = []
    for hit in hits[: config.text_top_k]:
        content = truncate_tokens(preprocess_content(hit.body), config.text_token_cap)
        docs.append(
            RetrievedDoc(
                kind=DocKind.TEXT,
                content=content,
                source_id=hit.source_id,
                iteration=iteration,
                query=query,
                token_count=count_tokens(content),
            )
        )
    return RetrievalResult(tuple(docs))


def image_retrieve(
    backend: SearchBackend,
    image: ImageRef | None,
    query: str,
    config: RetrievalLimits,
    *,
    iteration: int = 1,
    postprocess: ImageHook = no_postprocess,
) -> RetrievalResult:
    """Up to ``config.image_max`` captioned candidates; flags a shortfall below ``image_min``.

    ``postprocess`` is applied to every hit before conversion (screenshot
    clean-up hook; identity by default).
    """
    if image is None:
        raise ContractError("image search needs an image")
    try:
        hits = backend.image_search(image, query, config.image_max)
    except RetrievalError:
        raise
    except Exception as exc:
        raise RetrievalError(f"image search failed for {query!r}: {exc}") from exc
    docs = []
    for hit in hits[: config.image_max]:
        hit = postprocess(hit)
        caption = preprocess_content(hit.caption or hit.title)
        if hit.image is None or not caption:
            continue
        docs.append(
            RetrievedDoc(
                kind=DocKind.IMAGE,
                content=caption,
                source_id=hit.source_id,
                iteration=iteration,
                query=query,
                token_count=count_tokens(caption),
                image=hit.image,
            )
        )
    flags = (BELOW_MINIMUM,) if len(docs) < config.image_min else ()
    return RetrievalResult(tuple(docs), flags)
