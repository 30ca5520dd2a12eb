"""Deterministic text normalization: tokenize, expand contractions, convert
numbers to words, drop stopwords, lemmatize.

All stages are pure functions; `preprocess` composes them in a fixed order and
stamps the output with a fingerprint of the configuration that produced it.
"""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional


def _load_default_stopwords() -> frozenset[str]:
    text = resources.files("citegraph.data").joinpath("stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def _load_default_contractions() -> dict[str, tuple[str, ...]]:
    text = resources.files("citegraph.data").joinpath("contractions.tsv").read_text(encoding="utf-8")
    table = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, expansion = line.partition("\t")
        table[key.strip()] = tuple(expansion.split())
    return table


DEFAULT_STOPWORDS = _load_default_stopwords()
DEFAULT_CONTRACTIONS = _load_default_contractions()


def load_stopwords(path: str | Path) -> frozenset[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(w.strip().lower() for w in lines if w.strip())


def load_contractions(path: str | Path) -> dict[str, tuple[str, ...]]:
    table = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, expansion = line.partition("\t")
        table[key.strip().lower()] = tuple(expansion.lower().split())
    return table


@dataclass(frozen=True)
class PipelineConfig:
    stopword_list: frozenset[str] = DEFAULT_STOPWORDS
    expand_contractions: bool = True
    numbers_to_words: bool = True
    preserve_section_refs: bool = True
    lemmatize: bool = True
    contraction_table: dict = field(default_factory=lambda: DEFAULT_CONTRACTIONS, hash=False)

    def fingerprint(self) -> str:
        payload = {
            "stopwords": sorted(self.stopword_list),
            "expand_contractions": self.expand_contractions,
            "numbers_to_words": self.numbers_to_words,
            "preserve_section_refs": self.preserve_section_refs,
            "lemmatize": self.lemmatize,
            "contractions": sorted((k, list(v)) for k, v in self.contraction_table.items()),
        }
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class TokenizedDocument:
    source_id: str
    tokens: tuple[str, ...]
    pipeline_fingerprint: str


# Section references: "§ 1983" / "§1983(b)" or the words section/article
# followed by a number. Matched spans are fused into one preserved token.
_SECTION_RE = re.compile(r"§\s*(\d+[a-z0-9().]*)|\b(section|article)\s+(\d+[a-z0-9().]*)")
_TOKEN_RE = re.compile(
    r"(?:[a-z]\.){2,}"          # dotted abbreviations: u.s.c.
    r"|[a-z]+(?:'[a-z]*)?"      # words, optionally with an apostrophe suffix
    r"|\d+(?:,\d{3})*"          # integers, possibly comma-grouped
)


def tokenize(text: str, preserve_section_refs: bool = True) -> list[str]:
    """Lowercased tokens with punctuation stripped; section references kept whole."""
    text = unicodedata.normalize("NFKC", text).lower()
    tokens: list[str] = []
    pos = 0

    def scan_plain(chunk: str):
        for m in _TOKEN_RE.finditer(chunk):
            tok = m.group(0)
            if tok[0].isdigit():
                tok = tok.replace(",", "")
            tokens.append(tok)

    if preserve_section_refs:
        for m in _SECTION_RE.finditer(text):
            scan_plain(text[pos:m.start()])
            if m.group(1) is not None:
                tokens.append("§" + m.group(1))
            else:
                tokens.append(m.group(2) + m.group(3))
            pos = m.end()
    scan_plain(text[pos:])
    return tokens


def is_section_ref(token: str) -> bool:
    return token.startswith("§") or bool(re.fullmatch(r"(?:section|article)\d+[a-z0-9().]*", token))


def expand_contractions(tokens: list[str], table: Optional[dict] = None) -> list[str]:
    """Expand table entries; strip possessive 's; unknown apostrophe words pass through."""
    if table is None:
        table = DEFAULT_CONTRACTIONS
    out: list[str] = []
    for tok in tokens:
        if "'" not in tok:
            out.append(tok)
        elif tok in table:
            out.extend(table[tok])
        elif tok.endswith("'s"):
            out.append(tok[:-2])
        elif tok.endswith("'"):
            out.append(tok[:-1])
        else:
            out.append(tok)
    return [t for t in out if t]


_ONES = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
         "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
         "seventeen", "eighteen", "nineteen"]
_TENS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"]


def _int_to_words(n: int) -> list[str]:
    if n < 20:
        return [_ONES[n]]
    if n < 100:
        tens, rem = divmod(n, 10)
        return [_TENS[tens]] + ([_ONES[rem]] if rem else [])
    if n < 1000:
        hundreds, rem = divmod(n, 100)
        return [_ONES[hundreds], "hundred"] + (_int_to_words(rem) if rem else [])
    if n < 1_000_000:
        thousands, rem = divmod(n, 1000)
        return _int_to_words(thousands) + ["thousand"] + (_int_to_words(rem) if rem else [])
    # digit-by-digit above one million to bound the table
    return [_ONES[int(d)] for d in str(n)]


def number_to_words(tokens: list[str], preserve_section_refs: bool = True) -> list[str]:
    """Spell out standalone integers; preserved section references pass untouched."""
    out: list[str] = []
    for tok in tokens:
        if preserve_section_refs and is_section_ref(tok):
            out.append(tok)
        elif tok.isdigit():
            out.extend(_int_to_words(int(tok)))
        else:
            out.append(tok)
    return out


def remove_stopwords(tokens: list[str], stopword_list) -> list[str]:
    return [t for t in tokens if t not in stopword_list]


# Irregular forms commonly hit in legal prose.
_LEMMA_EXCEPTIONS = {
    "held": "hold", "holding": "hold", "holdings": "hold",
    "was": "be", "were": "be", "been": "be", "being": "be", "is": "be", "are": "be", "am": "be",
    "had": "have", "has": "have", "having": "have",
    "did": "do", "does": "do", "done": "do", "doing": "do",
    "found": "find", "brought": "bring", "sought": "seek", "thought": "think",
    "ruled": "rule", "ruling": "rule", "rulings": "rule",
    "said": "say", "made": "make", "gave": "give", "given": "give", "taken": "take", "took": "take",
    "children": "child", "men": "man", "women": "woman", "feet": "foot",
    "judgments": "judgment", "proceedings": "proceeding",
    "parties": "party", "statutes": "statute",
}

_VOWELS = set("aeiou")


def _lemmatize_token(tok: str) -> str:
    if not tok.isalpha():
        return tok
    if tok in _LEMMA_EXCEPTIONS:
        return _LEMMA_EXCEPTIONS[tok]
    if tok.endswith("sses"):
        return tok[:-2]
    if tok.endswith("ies") and len(tok) > 4:
        return tok[:-3] + "y"
    if tok.endswith(("ss", "us", "is")):
        return tok
    if tok.endswith("s") and len(tok) > 3:
        return tok[:-1]
    for suffix in ("ing", "ed"):
        if tok.endswith(suffix) and len(tok) - len(suffix) >= 3:
            stem = tok[: -len(suffix)]
            if not _VOWELS & set(stem):
                continue
            if len(stem) > 3 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS and not stem.endswith(("ll", "ss")):
                stem = stem[:-1]
            return stem
    return tok


def _lemma_fixed_point(tok: str) -> str:
    # iterate to a fixed point so lemmatize(lemmatize(t)) == lemmatize(t)
    for _ in range(len(tok) + 1):
        nxt = _lemmatize_token(tok)
        if nxt == tok:
            return tok
        tok = nxt
    return tok


def lemmatize(tokens: list[str]) -> list[str]:
    """Dictionary lookup then deterministic suffix rules; idempotent."""
    return [_lemma_fixed_point(t) for t in tokens]


def preprocess(text: str, config: Optional[PipelineConfig] = None, source_id: str = "") -> TokenizedDocument:
    """Full pipeline: tokenize -> contractions -> numbers -> stopwords -> lemmatize."""
    if config is None:
        config = PipelineConfig()
    tokens = tokenize(text, preserve_section_refs=config.preserve_section_refs)
    if config.expand_contractions:
        tokens = expand_contractions(tokens, config.contraction_table)
    if config.numbers_to_words:
        tokens = number_to_words(tokens, preserve_section_refs=config.preserve_section_refs)
    tokens = remove_stopwords(tokens, config.stopword_list)
    if config.lemmatize:
        tokens = lemmatize(tokens)
    return TokenizedDocument(source_id=source_id, tokens=tuple(tokens),
                             pipeline_fingerprint=config.fingerprint())
