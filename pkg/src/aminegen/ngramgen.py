"""Token n-gram SMILES generator: train, sample, fine-tune, serialize.

The sampling distribution at a context is the Laplace-smoothed count table
of the longest context suffix actually observed, with the additive mass
shaped by the backed-off shorter-context distribution discounted by the
backoff factor.  This keeps conditionals exactly normalized while the
backoff avoids dead ends on unseen contexts.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

from . import chemclass, fingerprint, molgraph

__all__ = [
    "BOS",
    "EOS",
    "tokenize",
    "detokenize",
    "GeneratorModel",
    "GenMetrics",
    "TokenizeError",
    "EmptyCorpusError",
    "EmptyBufferError",
    "train",
    "sample",
    "fine_tune",
    "perplexity",
    "distribution_metrics",
    "save_model",
    "load_model",
    "model_to_bytes",
    "model_from_bytes",
    "dump_text",
    "split_corpus",
]

BOS = "^"
EOS = "$"

MODEL_MAGIC = b"SAGM1"
MODEL_VERSION = 1

_SINGLE_TOKENS = set("BCNOPSFI") | set("bcnops") | set("0123456789") | set("-=#:/\\()")


class TokenizeError(ValueError):
    pass


class EmptyCorpusError(ValueError):
    pass


class EmptyBufferError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Split SMILES text into tokens; bracket atoms, Cl/Br and %nn ring
    closures are single tokens.  Reversible via :func:`detokenize`."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            end = text.find("]", i)
            if end < 0:
                raise TokenizeError("unclosed bracket atom")
            tokens.append(text[i:end + 1])
            i = end + 1
        elif ch == "%":
            if i + 2 >= n or not text[i + 1:i + 3].isdigit():
                raise TokenizeError("bad %nn ring closure")
            tokens.append(text[i:i + 3])
            i += 3
        elif ch == "C" and i + 1 < n and text[i + 1] == "l":
            tokens.append("Cl")
            i += 2
        elif ch == "B" and i + 1 < n and text[i + 1] == "r":
            tokens.append("Br")
            i += 2
        elif ch in _SINGLE_TOKENS:
            tokens.append(ch)
            i += 1
        else:
            raise TokenizeError(f"untokenizable character {ch!r}")
    return tokens


def detokenize(tokens) -> str:
    return "".join(tokens)


@dataclass(frozen=True)
class GeneratorModel:
    """Immutable n-gram model; ``counts`` maps context tuples of every
    length 0..order to token count tables."""

    order: int
    alpha: float
    backoff: float
    vocab: tuple[str, ...]
    counts: dict = field(repr=False)
    totals: dict = field(repr=False)

    def support(self) -> tuple[str, ...]:
        return tuple(t for t in self.vocab if t != BOS)


def _collect_counts(sequences, order: int) -> dict:
    counts: dict = {}
    for tokens in sequences:
        padded = [BOS] * order + tokens + [EOS]
        for pos in range(order, len(padded)):
            tok = padded[pos]
            for ctx_len in range(order + 1):
                ctx = tuple(padded[pos - ctx_len:pos])
                table = counts.get(ctx)
                if table is None:
                    table = {}
                    counts[ctx] = table
                table[tok] = table.get(tok, 0.0) + 1.0
    return counts


def _totals(counts: dict) -> dict:
    return {ctx: sum(table.values()) for ctx, table in counts.items()}


def train(corpus, order: int = 6, alpha: float = 0.01,
          backoff: float = 0.4) -> GeneratorModel:
    """Count padded k-grams of every context length up to ``order``."""
    sequences = [tokenize(s) for s in corpus]
    if not sequences:
        raise EmptyCorpusError("training corpus is empty")
    counts = _collect_counts(sequences, order)
    vocab = {EOS, BOS}
    for tokens in sequences:
        vocab.update(tokens)
    return GeneratorModel(order, alpha, backoff, tuple(sorted(vocab)),
                          counts, _totals(counts))


def conditional(model: GeneratorModel, context) -> dict[str, float]:
    """P(token | context) over the model support; sums to 1 exactly."""
    support = model.support()
    ctx = tuple(context[-model.order:]) if model.order else ()
    while ctx and ctx not in model.counts:
        ctx = ctx[1:]

    def level_dist(c) -> dict[str, float]:
        table = model.counts.get(c, {})
        total = model.totals.get(c, 0.0)
        if not c:
            denom = total + model.alpha * len(support)
            if denom <= 0:
                u = 1.0 / len(support)
                return {t: u for t in support}
            return {t: (table.get(t, 0.0) + model.alpha) / denom
                    for t in support}
        prior = level_dist(c[1:])
        pseudo = model.alpha * model.backoff * len(support)
        denom = total + pseudo
        return {t: (table.get(t, 0.0) + pseudo * prior[t]) / denom
                for t in support}

    return level_dist(ctx)


def sample(model: GeneratorModel, n: int, rng, max_len: int = 80) -> list[str]:
    """Draw n raw SMILES strings token by token until EOS or max_len.

    Conditional distributions are memoized per context for the duration of
    the call; samples within a batch share most contexts."""
    import itertools

    out = []
    support = model.support()
    memo: dict[tuple, list[float]] = {}

    def cum_weights(ctx: tuple) -> list[float]:
        cached = memo.get(ctx)
        if cached is None:
            dist = conditional(model, ctx)
            cached = list(itertools.accumulate(dist[t] for t in support))
            memo[ctx] = cached
        return cached

    for _ in range(n):
        context = (BOS,) * model.order
        tokens: list[str] = []
        while len(tokens) < max_len:
            tok = rng.choices(support, cum_weights=cum_weights(context), k=1)[0]
            if tok == EOS:
                break
            tokens.append(tok)
            if model.order:
                context = (context + (tok,))[-model.order:]
        out.append(detokenize(tokens))
    return out


def fine_tune(model: GeneratorModel, buffer, lam: float) -> GeneratorModel:
    """counts' = counts + lam * counts(buffer); functional update."""
    entries = list(buffer)
    if not entries:
        raise EmptyBufferError("fine-tune buffer is empty")
    if lam == 0:
        return model
    smiles = [e[0] if isinstance(e, (tuple, list)) else e for e in entries]
    extra = _collect_counts([tokenize(s) for s in smiles], model.order)
    counts = {ctx: dict(table) for ctx, table in model.counts.items()}
    for ctx, table in extra.items():
        tgt = counts.setdefault(ctx, {})
        for tok, c in table.items():
            tgt[tok] = tgt.get(tok, 0.0) + lam * c
    vocab = set(model.vocab)
    for s in smiles:
        vocab.update(tokenize(s))
    return GeneratorModel(model.order, model.alpha, model.backoff,
                          tuple(sorted(vocab)), counts, _totals(counts))


def perplexity(model: GeneratorModel, corpus) -> float:
    """exp of the mean negative log-probability per token (EOS included)."""
    log_sum = 0.0
    n_tokens = 0
    for s in corpus:
        tokens = tokenize(s) + [EOS]
        context = [BOS] * model.order
        for tok in tokens:
            dist = conditional(model, tuple(context))
            p = dist.get(tok)
            if p is None or p <= 0.0:
                return math.inf
            log_sum += math.log(p)
            n_tokens += 1
            context.append(tok)
            context = context[-model.order:] if model.order else []
    if n_tokens == 0:
        raise EmptyCorpusError("perplexity over empty corpus")
    return math.exp(-log_sum / n_tokens)


@dataclass
class GenMetrics:
    n_samples: int
    validity: float
    uniqueness: float
    novelty: float
    sediv: float
    amine_ratio: float
    type_ratios: dict

    def as_row(self) -> dict:
        row = {
            "Samples": self.n_samples,
            "Validity": self.validity,
            "Uniqueness": self.uniqueness,
            "Novelty": self.novelty,
            "SEDiv": self.sediv,
            "Amine": self.amine_ratio,
        }
        for t in ("primary", "secondary", "tertiary", "cyclic", "poly"):
            row[t.capitalize()] = self.type_ratios.get(t, 0.0)
        return row


def distribution_metrics(samples, training_set, seed: int = 0,
                         sediv_threshold: float = 0.65,
                         sediv_sample: int = 1000) -> GenMetrics:
    """Validity, uniqueness, novelty, sphere-exclusion diversity, and
    amine-type ratios of a generated batch.

    ``training_set`` must contain canonical SMILES.  An all-invalid batch
    reports zeros across the board."""
    import random as _random

    samples = list(samples)
    n = len(samples)
    valid_mols = []
    for s in samples:
        try:
            mol = molgraph.parse_smiles(s)
        except molgraph.ParseError:
            continue
        valid_mols.append(mol)
    if not valid_mols:
        return GenMetrics(n, 0.0, 0.0, 0.0, 0.0, 0.0, {})
    validity = len(valid_mols) / n if n else 0.0
    canon = [molgraph.canonical_smiles(m) for m in valid_mols]
    unique = sorted(set(canon))
    uniqueness = len(unique) / len(valid_mols)
    training = set(training_set)
    novel = [c for c in unique if c not in training]
    novelty = len(novel) / len(unique) if unique else 0.0
    rng = _random.Random(seed)
    sediv = fingerprint.sphere_exclusion_diversity(
        valid_mols, threshold=sediv_threshold,
        sample=min(sediv_sample, len(valid_mols)), rng=rng)
    types = [chemclass.classify_amine(m) for m in valid_mols]
    n_valid = len(valid_mols)
    type_ratios = {}
    amine_total = 0
    for t in ("primary", "secondary", "tertiary", "cyclic", "poly"):
        count = sum(1 for x in types if x.value == t)
        amine_total += count
        type_ratios[t] = count / n_valid
    return GenMetrics(n, validity, uniqueness, novelty, sediv,
                      amine_total / n_valid, type_ratios)


def split_corpus(corpus, val_fraction: float = 0.002, seed: int = 0):
    """Random train/validation split (e.g. 0.998/0.002)."""
    import random as _random

    items = list(corpus)
    rng = _random.Random(seed)
    rng.shuffle(items)
    n_val = int(round(len(items) * val_fraction))
    return items[n_val:], items[:n_val]


# -- serialization ---------------------------------------------------------


def model_to_bytes(model: GeneratorModel) -> bytes:
    """Length-prefixed binary layout: magic, version, order, alpha,
    backoff, vocab table, then per-context token count records."""
    token_id = {tok: i for i, tok in enumerate(model.vocab)}
    parts = [MODEL_MAGIC,
             struct.pack("<IId", MODEL_VERSION, model.order, model.alpha),
             struct.pack("<d", model.backoff),
             struct.pack("<I", len(model.vocab))]
    for tok in model.vocab:
        raw = tok.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    contexts = sorted(model.counts)
    parts.append(struct.pack("<Q", len(contexts)))
    for ctx in contexts:
        parts.append(struct.pack("<H", len(ctx)))
        for tok in ctx:
            parts.append(struct.pack("<I", token_id[tok]))
        table = model.counts[ctx]
        parts.append(struct.pack("<I", len(table)))
        for tok in sorted(table):
            parts.append(struct.pack("<Id", token_id[tok], table[tok]))
    return b"".join(parts)


def save_model(model: GeneratorModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


class ModelFormatError(ValueError):
    pass


def model_from_bytes(data: bytes) -> GeneratorModel:
    view = memoryview(data)
    if bytes(view[:5]) != MODEL_MAGIC:
        raise ModelFormatError("bad magic; not a generator model file")
    pos = 5

    def unpack(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(view):
            raise ModelFormatError("truncated model file")
        vals = struct.unpack_from(fmt, view, pos)
        pos += size
        return vals

    version, order, alpha = unpack("<IId")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    (backoff,) = unpack("<d")
    (n_vocab,) = unpack("<I")
    vocab = []
    for _ in range(n_vocab):
        (tok_len,) = unpack("<H")
        if pos + tok_len > len(view):
            raise ModelFormatError("truncated model file")
        vocab.append(bytes(view[pos:pos + tok_len]).decode("utf-8"))
        pos += tok_len
    (n_contexts,) = unpack("<Q")
    counts = {}
    for _ in range(n_contexts):
        (ctx_len,) = unpack("<H")
        ctx = tuple(vocab[unpack("<I")[0]] for _ in range(ctx_len))
        (n_entries,) = unpack("<I")
        table = {}
        for _ in range(n_entries):
            tok_id, count = unpack("<Id")
            table[vocab[tok_id]] = count
        counts[ctx] = table
    if pos != len(view):
        raise ModelFormatError("trailing bytes in model file")
    return GeneratorModel(order, alpha, backoff, tuple(vocab), counts,
                          _totals(counts))


def load_model(path) -> GeneratorModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


def dump_text(model: GeneratorModel) -> str:
    """Human-readable dump of the count tables, for debugging."""
    lines = [f"order={model.order} alpha={model.alpha} backoff={model.backoff}",
             "vocab=" + " ".join(model.vocab)]
    for ctx in sorted(model.counts):
        table = model.counts[ctx]
        entries = " ".join(f"{tok}:{count:g}" for tok, count in sorted(table.items()))
        lines.append(f"[{' '.join(ctx) or '<empty>'}] {entries}")
    return "\n".join(lines)
