"""Training loops, batching, configuration profiles, and checkpoints."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import DialoguePair
from .errors import ContractError, IntegrityError
from .model import BaselineModel
from .optim import Adam, clip_grad_norm
from .tensor import Tape, backward
from .variants import VariantModel
from .vocab import EOS, NUM_EMOTION_SLOTS, Vocabulary

CKPT_MAGIC = "EMOSEQ-CKPT"
CKPT_VERSION = 1


@dataclass
class ModelConfig:
    """Dimensions and training knobs for dialogue models and the classifier.

    ``dropout_ratio`` is stored verbatim; ``dropout_means`` says whether it
    is a keep or a drop probability (the published 0.75 is read as a keep
    probability by default, since dropping 75% of a wide LSTM cripples it).
    """

    profile: str = "custom"
    d: int = 64
    d_w: int = 32
    vocab_cap: int = 2000
    padding: int = 30
    dropout_ratio: float = 0.0
    dropout_means: str = "drop"  # "drop" or "keep"
    s: int = NUM_EMOTION_SLOTS
    lr: float = 1e-3
    batch_size: int = 16
    max_steps: int | None = None
    epochs: int | None = None
    seed: int = 0
    split_ratio: float = 0.95
    min_words: int = 1
    classifier_dim: int = 32
    precision: str = "f32"  # "f32" or "f64"

    @property
    def drop_p(self) -> float:
        if self.dropout_means == "keep":
            return 1.0 - self.dropout_ratio
        if self.dropout_means == "drop":
            return self.dropout_ratio
        raise ContractError(f"dropout_means must be keep/drop, got {self.dropout_means!r}")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64


def paper_profile(**overrides) -> ModelConfig:
    """Full-scale settings: 600-wide LSTMs, 25k vocabulary, lr 1e-4,
    dropout field 0.75 (keep probability), 0.95/0.05 split, padding 30."""
    cfg = ModelConfig(
        profile="paper",
        d=600,
        d_w=300,
        vocab_cap=25_000,
        padding=30,
        dropout_ratio=0.75,
        dropout_means="keep",
        lr=1e-4,
        batch_size=64,
        split_ratio=0.95,
        min_words=6,
        classifier_dim=300,
    )
    return _apply(cfg, overrides)


def desk_profile(**overrides) -> ModelConfig:
    """Laptop-scale settings every acceptance check runs at."""
    cfg = ModelConfig(
        profile="desk",
        d=64,
        d_w=32,
        vocab_cap=2000,
        padding=30,
        dropout_ratio=0.0,
        dropout_means="drop",
        lr=2e-3,
        batch_size=16,
        split_ratio=0.95,
        min_words=1,
        classifier_dim=32,
    )
    return _apply(cfg, overrides)


def _apply(cfg: ModelConfig, overrides: dict) -> ModelConfig:
    for k, v in overrides.items():
        if not hasattr(cfg, k):
            raise ContractError(f"unknown config field {k!r}")
        setattr(cfg, k, v)
    return cfg


PROFILES = {"paper": paper_profile, "desk": desk_profile}


def config_digest(cfg: ModelConfig) -> str:
    return hashlib.sha256(json.dumps(asdict(cfg), sort_keys=True).encode()).hexdigest()[:12]


def build_dialogue_model(tag: str | None, vocab: Vocabulary, cfg: ModelConfig,
                         dtype=None):
    dtype = cfg.dtype if dtype is None else dtype
    kwargs = dict(
        d=cfg.d, d_w=cfg.d_w, drop_p=cfg.drop_p, padding=cfg.padding,
        seed=cfg.seed, dtype=dtype,
    )
    if tag is None or tag == "baseline":
        return BaselineModel(vocab, **kwargs)
    return VariantModel(tag, vocab, s=cfg.s, **kwargs)


# ---------------------------------------------------------------------------
# batching


@dataclass
class Batch:
    src: np.ndarray        # (B, ms) ids
    src_mask: np.ndarray   # (B, ms) 0/1
    tgt: np.ndarray        # (B, nt) ids, EOS appended before padding
    tgt_mask: np.ndarray
    e_ids: np.ndarray | None  # (B,)


def _pad(rows, pad_id=0):
    n = max(len(r) for r in rows)
    ids = np.full((len(rows), n), pad_id, dtype=np.int64)
    mask = np.zeros((len(rows), n), dtype=np.float64)
    for i, r in enumerate(rows):
        ids[i, : len(r)] = r
        mask[i, : len(r)] = 1.0
    return ids, mask


def make_batch(pairs: list[DialoguePair], src_transform=None) -> Batch:
    srcs = []
    for p in pairs:
        s = p.source if src_transform is None else src_transform(p.source, p.emotion)
        srcs.append(s)
    src, src_mask = _pad(srcs)
    tgt, tgt_mask = _pad([list(p.target) + [EOS] for p in pairs])
    if all(p.emotion is not None for p in pairs):
        e_ids = np.asarray([p.emotion for p in pairs], dtype=np.int64)
    else:
        e_ids = None
    return Batch(src, src_mask, tgt, tgt_mask, e_ids)


def batcher(pairs, batch_size: int, seed: int, src_transform=None, epochs=None):
    """Yield padded batches; each epoch reshuffles with the seeded generator.

    Batches cover the pair list exactly once per epoch (the last batch of
    an epoch may be short); masks mark real tokens with 1.0.
    """
    if batch_size < 1:
        raise ContractError("batch size must be >= 1")
    rng = np.random.default_rng(seed)
    epoch = 0
    while epochs is None or epoch < epochs:
        order = rng.permutation(len(pairs))
        for start in range(0, len(pairs), batch_size):
            chunk = [pairs[i] for i in order[start : start + batch_size]]
            yield make_batch(chunk, src_transform)
        epoch += 1


# ---------------------------------------------------------------------------
# dialogue training


def train_dialogue(tag: str | None, pairs: list[DialoguePair], vocab: Vocabulary,
                   cfg: ModelConfig, dev_pairs=None, eval_every: int | None = None,
                   model=None, log=None):
    """Teacher-forced training of one variant on labeled pairs.

    Every batch item conditions on its own gold emotion through the
    variant's injection hook; the loop itself never inspects the labels.
    Returns (model, history) with per-step train losses and periodic
    dev losses (dropout disabled).
    """
    for i, p in enumerate(pairs):
        if p.emotion is None:
            where = f"line {p.line_no}" if p.line_no is not None else f"index {i}"
            raise ContractError(f"unlabeled pair at {where}")
    steps_per_epoch = (len(pairs) + cfg.batch_size - 1) // cfg.batch_size
    if cfg.max_steps is not None:
        total_steps = cfg.max_steps
    elif cfg.epochs is not None:
        total_steps = cfg.epochs * steps_per_epoch
    else:
        raise ContractError("config needs max_steps or epochs")

    if model is None:
        model = build_dialogue_model(tag, vocab, cfg)
    src_transform = None
    if tag in ("enc-bef", "enc-aft"):
        src_transform = lambda X, e: model.source_ids(X, e)
    opt = Adam(model.parameters(), lr=cfg.lr)
    drop_rng = np.random.default_rng(cfg.seed + 1)
    stream = batcher(pairs, cfg.batch_size, cfg.seed, src_transform=src_transform)
    if eval_every is None:
        eval_every = max(1, total_steps // 10)
    history = {"loss": [], "dev_loss": []}
    for step in range(1, total_steps + 1):
        batch = next(stream)
        e_ids = batch.e_ids if isinstance(model, VariantModel) else None
        with Tape():
            loss = model.batch_loss(
                batch.src, batch.src_mask, batch.tgt, batch.tgt_mask,
                e_ids=e_ids, training=True, rng=drop_rng,
            )
            backward(loss)
        clip_grad_norm(opt.params, 5.0)
        opt.step()
        opt.zero_grad()
        history["loss"].append(loss.item())
        if dev_pairs and (step % eval_every == 0 or step == total_steps):
            history["dev_loss"].append((step, dev_loss(model, dev_pairs, cfg)))
        if log is not None and step % eval_every == 0:
            log(step, history["loss"][-1])
    return model, history


def dev_loss(model, dev_pairs, cfg: ModelConfig) -> float:
    """Mean teacher-forced loss with dropout disabled."""
    total, weight = 0.0, 0.0
    src_transform = model.source_ids if getattr(model, "tag", None) in ("enc-bef", "enc-aft") else None
    for start in range(0, len(dev_pairs), cfg.batch_size):
        chunk = dev_pairs[start : start + cfg.batch_size]
        batch = make_batch(chunk, src_transform)
        e_ids = batch.e_ids if isinstance(model, VariantModel) else None
        loss = model.batch_loss(batch.src, batch.src_mask, batch.tgt, batch.tgt_mask,
                                e_ids=e_ids, training=False)
        n = float(batch.tgt_mask.sum())
        total += loss.item() * n
        weight += n
    return total / max(weight, 1.0)


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    kind: str  # a variant tag, "baseline", or "classifier"
    config: dict
    vocab_tokens: list[str]
    tokenizer_digest: str
    tensors: dict[str, np.ndarray] = field(repr=False)


def save_checkpoint(path, kind: str, model, config: dict) -> None:
    """Write a manifest header plus a little-endian float32 payload.

    The manifest records every named tensor with its shape, byte offset,
    and element count, in payload order.
    """
    named = model.named_parameters()
    table = []
    blobs = []
    offset = 0
    for name, p in named.items():
        arr = np.ascontiguousarray(p.data.astype("<f4"))
        blobs.append(arr.tobytes())
        table.append({"name": name, "shape": list(arr.shape), "offset": offset, "size": arr.size})
        offset += arr.nbytes
    manifest = {
        "version": CKPT_VERSION,
        "kind": kind,
        "config": config,
        "tokenizer_digest": model.tokenizer_digest,
        "vocab": model.vocab.tokens,
        "tensors": table,
        "payload_bytes": offset,
    }
    blob = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(f"{CKPT_MAGIC} {CKPT_VERSION}\n".encode())
        fh.write(f"{len(blob)}\n".encode())
        fh.write(blob)
        fh.write(b"".join(blobs))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("utf-8", errors="replace").strip()
        parts = magic.split()
        if len(parts) != 2 or parts[0] != CKPT_MAGIC:
            raise IntegrityError(f"not a checkpoint file: {path}")
        if int(parts[1]) != CKPT_VERSION:
            raise IntegrityError(f"checkpoint version {parts[1]} != supported {CKPT_VERSION}")
        try:
            blob_len = int(fh.readline().strip())
        except ValueError:
            raise IntegrityError("corrupt manifest length")
        manifest = json.loads(fh.read(blob_len).decode("utf-8"))
        payload = fh.read()
    if len(payload) != manifest["payload_bytes"]:
        raise IntegrityError(
            f"payload is {len(payload)} bytes, manifest says {manifest['payload_bytes']}"
        )
    tensors = {}
    for entry in manifest["tensors"]:
        n = entry["size"] * 4
        raw = payload[entry["offset"] : entry["offset"] + n]
        if len(raw) != n:
            raise IntegrityError(f"tensor {entry['name']} extends past payload")
        tensors[entry["name"]] = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).copy()
    return Checkpoint(
        kind=manifest["kind"],
        config=manifest["config"],
        vocab_tokens=manifest["vocab"],
        tokenizer_digest=manifest["tokenizer_digest"],
        tensors=tensors,
    )


def _vocab_from_tokens(tokens: list[str]) -> Vocabulary:
    from .vocab import reserved_count

    return Vocabulary(tokens[reserved_count():])


def model_from_checkpoint(ckpt: Checkpoint):
    """Rebuild the model a checkpoint describes and load its parameters.

    The loaded forward pass is bitwise-identical to the saved model's
    (parameters are stored and restored as float32).
    """
    from .classifier import TextClassifier

    vocab = _vocab_from_tokens(ckpt.vocab_tokens)
    c = ckpt.config
    if ckpt.kind == "classifier":
        model = TextClassifier(
            vocab, d_c=c["d_c"], d_w=c["d_w"], drop_p=c.get("drop_p", 0.0),
            padding=c.get("padding", 30), seed=c.get("seed", 0), dtype=np.float32,
        )
    else:
        tag = None if ckpt.kind == "baseline" else ckpt.kind
        cfg = ModelConfig(
            d=c["d"], d_w=c["d_w"], padding=c.get("padding", 30),
            dropout_ratio=c.get("drop_p", 0.0), dropout_means="drop",
            s=c.get("s", NUM_EMOTION_SLOTS), seed=c.get("seed", 0), precision="f32",
        )
        model = build_dialogue_model(tag, vocab, cfg)
    expected = model.named_parameters()
    if set(expected) != set(ckpt.tensors):
        missing = set(expected) ^ set(ckpt.tensors)
        raise IntegrityError(f"checkpoint tensor names do not match the model: {sorted(missing)}")
    for name, p in expected.items():
        arr = ckpt.tensors[name]
        if tuple(arr.shape) != tuple(p.data.shape):
            raise IntegrityError(f"tensor {name} shape {arr.shape} != expected {p.data.shape}")
        p.data = arr.astype(np.float32)
    return model


def dialogue_config_dict(cfg: ModelConfig) -> dict:
    return {"d": cfg.d, "d_w": cfg.d_w, "padding": cfg.padding, "drop_p": cfg.drop_p,
            "s": cfg.s, "seed": cfg.seed, "profile": cfg.profile}


def classifier_config_dict(cfg: ModelConfig) -> dict:
    return {"d_c": cfg.classifier_dim, "d_w": cfg.d_w, "padding": cfg.padding,
            "drop_p": cfg.drop_p, "seed": cfg.seed, "profile": cfg.profile}
