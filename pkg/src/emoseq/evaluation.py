"""Estimated-accuracy evaluation: generate per instructed emotion, classify,
and score how often the detected emotion matches the instruction.

Each test source yields one greedy response per emotion (9 per source);
detection is the classifier's bare argmax over the 9 emotions, and
accuracy per emotion is the diagonal of the instructed-by-detected
confusion matrix.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .model import AttentionTrace
from .vocab import EMOTIONS, NUM_EMOTIONS

# Large-corpus reference accuracies (percent) for context in reports; these
# came from experiments on an 11.3M-utterance corpus and are not
# reproducible at desk scale.
PUBLISHED_REFERENCE = {
    "enc-bef": {"anger": 60.18, "disgust": 77.98, "fear": 86.40, "joy": 45.69,
                "sadness": 94.19, "surprise": 84.47, "love": 56.38,
                "thankfulness": 87.69, "guilt": 93.19, "average": 76.24},
    "enc-aft": {"anger": 62.30, "disgust": 76.79, "fear": 84.17, "joy": 41.15,
                "sadness": 93.98, "surprise": 85.09, "love": 54.69,
                "thankfulness": 89.31, "guilt": 92.17, "average": 75.52},
    "dec-rep": {"anger": 67.95, "disgust": 79.02, "fear": 83.52, "joy": 48.30,
                "sadness": 94.21, "surprise": 87.21, "love": 58.32,
                "thankfulness": 90.83, "guilt": 91.20, "average": 77.84},
    "dec-start": {"anger": 66.81, "disgust": 78.42, "fear": 84.10, "joy": 47.42,
                  "sadness": 94.18, "surprise": 80.55, "love": 54.25,
                  "thankfulness": 89.44, "guilt": 90.68, "average": 76.21},
    "dec-trans": {"anger": 64.27, "disgust": 78.33, "fear": 77.15, "joy": 49.69,
                  "sadness": 88.42, "surprise": 83.61, "love": 62.82,
                  "thankfulness": 82.03, "guilt": 86.64, "average": 74.77},
    "dec-proj": {"anger": 78.48, "disgust": 86.43, "fear": 73.70, "joy": 59.12,
                 "sadness": 89.83, "surprise": 80.56, "love": 85.14,
                 "thankfulness": 61.80, "guilt": 50.92, "average": 74.00},
    "enc-att": {"anger": 65.09, "disgust": 78.29, "fear": 86.00, "joy": 38.71,
                "sadness": 95.09, "surprise": 92.54, "love": 64.56,
                "thankfulness": 89.11, "guilt": 94.40, "average": 78.20},
}
REFERENCE_CLASSIFIER_F1 = {"f1": 54.33, "precision": 66.20, "recall": 51.29}


@dataclass
class EvalReport:
    variant: str
    per_emotion_accuracy: dict[str, float]
    average: float
    confusion_counts: np.ndarray      # (9, 9) instructed x detected
    confusion_normalized: np.ndarray  # rows sum to 1
    n_sources: int
    seed: int
    config_digest: str = ""
    traces: list[AttentionTrace] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = {
            "variant": self.variant,
            "per_emotion_accuracy": self.per_emotion_accuracy,
            "average": self.average,
            "confusion_counts": self.confusion_counts.astype(int).tolist(),
            "confusion_normalized": [[round(x, 9) for x in row] for row in self.confusion_normalized],
            "n_sources": self.n_sources,
            "seed": self.seed,
            "config_digest": self.config_digest,
        }
        ref = PUBLISHED_REFERENCE.get(self.variant)
        if ref is not None:
            d["published_reference"] = {
                "note": "large-corpus reference accuracies; not reproducible at desk scale",
                **ref,
            }
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def evaluate(model, classifier, sources: list[str], seed: int = 0,
             config_digest: str = "", keep_traces: int = 0) -> EvalReport:
    """Generate one greedy response per (source, emotion) and score it.

    ``model`` must expose respond(text, e) and ``classifier`` classify(text);
    both must tokenize identically (their digests are compared). Detection
    is threshold-free argmax, so non-emotion never appears here.
    """
    if not sources:
        raise ContractError("no test sources")
    if getattr(model, "tokenizer_digest", None) != getattr(classifier, "tokenizer_digest", None):
        raise ContractError("model and classifier tokenizer digests differ")
    counts = np.zeros((NUM_EMOTIONS, NUM_EMOTIONS), dtype=np.float64)
    traces: list[AttentionTrace] = []
    for si, src in enumerate(sources):
        for e in range(NUM_EMOTIONS):
            out_tokens, trace = model.respond(src, e)
            if out_tokens:
                dist = classifier.classify(" ".join(out_tokens))
                detected = dist.top_id
            else:
                detected = 0  # empty generation scores as the first class
            counts[e, detected] += 1
            if si == 0 and len(traces) < keep_traces:
                traces.append(trace)
    norm = counts / counts.sum(axis=1, keepdims=True)
    per = {EMOTIONS[e]: float(norm[e, e]) for e in range(NUM_EMOTIONS)}
    tag = getattr(model, "tag", None) or "baseline"
    return EvalReport(
        variant=tag,
        per_emotion_accuracy=per,
        average=float(np.mean(list(per.values()))),
        confusion_counts=counts,
        confusion_normalized=norm,
        n_sources=len(sources),
        seed=seed,
        config_digest=config_digest,
        traces=traces,
    )


def confusion(report: EvalReport) -> dict:
    """Counts and row-normalized confusion in the fixed 9-emotion order."""
    return {
        "emotions": list(EMOTIONS),
        "counts": report.confusion_counts.astype(int).tolist(),
        "normalized": report.confusion_normalized.tolist(),
    }


def export_heatmap(trace: AttentionTrace, path) -> None:
    """Write a trace as labeled TSV: source tokens across, output tokens down,
    attention weights to 6 decimals."""
    with open(path, "w", encoding="utf-8") as fh:
        if trace.emotion is not None:
            fh.write(f"# emotion\t{EMOTIONS[trace.emotion] if trace.emotion < NUM_EMOTIONS else 'non-emotion'}\n")
        fh.write("output\\source\t" + "\t".join(trace.source_tokens) + "\n")
        for tok, row in zip(trace.output_tokens, trace.matrix):
            fh.write(tok + "\t" + "\t".join(f"{v:.6f}" for v in row) + "\n")


def load_heatmap(path):
    """Read back an exported heatmap: (source_tokens, output_tokens, matrix)."""
    src = None
    out_tokens = []
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if src is None:
                src = fields[1:]
                continue
            out_tokens.append(fields[0])
            rows.append([float(v) for v in fields[1:]])
    matrix = np.asarray(rows) if rows else np.zeros((0, len(src or [])))
    return src or [], out_tokens, matrix
