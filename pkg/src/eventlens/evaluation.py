"""Task datasets and scoring: QA accuracy by type, answer parsing, and an
order-preserving event-matching score for dense captioning.

The captioning score pairs chronologically ordered predictions with
references one-to-one without crossings, maximizing summed tIoU times a
caption similarity (token F1 by default; the scorer is pluggable).
"""

from __future__ import annotations

import json
import math
import os
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .domain import TimeRange, tiou
from .errors import AmbiguousAnswer, DataError, IdMismatch

_ARTICLES = {"a", "an", "the"}
_PUNCT_TABLE = str.maketrans({ch: " " for ch in string.punctuation})


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    tokens = text.lower().translate(_PUNCT_TABLE).split()
    return " ".join(t for t in tokens if t not in _ARTICLES)


_LETTER_PATTERNS = (
    re.compile(r"^\(?([A-Za-z])\)?[.):]?$"),        # "B", "(C)", "A."
    re.compile(r"^\(?([A-Za-z])[.):]\s"),           # "B. The closet ..."
    re.compile(r"^\(([A-Za-z])\)\s"),               # "(B) something"
    re.compile(r"^(?:final answer|answer|option|choice)\s*[:\-]?\s*\(?([A-Za-z])\)?[.):]?$", re.IGNORECASE),
)


def _letter_index(reply: str, n_options: int) -> int | None:
    line = ""
    for candidate in reply.splitlines():
        if candidate.strip():
            line = candidate.strip()
            break
    for pattern in _LETTER_PATTERNS:
        m = pattern.match(line)
        if m:
            idx = ord(m.group(1).upper()) - ord("A")
            if 0 <= idx < n_options:
                return idx
    return None


def match_answer(reply: str, options: list[str]) -> int:
    """Map a free-form reply onto one option index.

    Rules, in order: exact match after normalization; a leading option
    letter; unique containment of exactly one normalized option. Anything
    else raises AmbiguousAnswer.
    """
    if not options:
        raise ValueError("options must be non-empty")
    norm_reply = normalize_answer(reply)

    for i, opt in enumerate(options):
        norm_opt = normalize_answer(opt)
        if norm_opt and norm_reply == norm_opt:
            return i

    idx = _letter_index(reply, len(options))
    if idx is not None:
        return idx

    padded = f" {norm_reply} "
    hits = [
        i
        for i, opt in enumerate(options)
        if normalize_answer(opt) and f" {normalize_answer(opt)} " in padded
    ]
    if len(hits) == 1:
        return hits[0]
    raise AmbiguousAnswer(f"cannot resolve reply {reply!r} to one of {len(options)} options")


# ---------------------------------------------------------------- QA data


@dataclass(frozen=True)
class QAItem:
    item_id: str
    video_id: str
    question: str
    question_type: str
    options: tuple[str, ...]
    answer_index: int


def load_qa_dataset(path: str) -> list[QAItem]:
    """Read one JSON object per line; items get ids video_id#line."""
    if not os.path.exists(path):
        raise DataError(f"qa dataset not found: {path}")
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno + 1}: not valid JSON: {exc}") from exc
            try:
                options = tuple(str(o) for o in rec["options"])
                answer_index = int(rec["answer_index"])
                item = QAItem(
                    item_id=f"{rec['video_id']}#{lineno}",
                    video_id=str(rec["video_id"]),
                    question=str(rec["question"]),
                    question_type=str(rec["question_type"]),
                    options=options,
                    answer_index=answer_index,
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno + 1}: bad record: {exc}") from exc
            if len(options) < 2:
                raise DataError(f"{path}:{lineno + 1}: fewer than two options")
            if not (0 <= answer_index < len(options)):
                raise DataError(f"{path}:{lineno + 1}: answer_index {answer_index} out of range")
            items.append(item)
    if not items:
        raise DataError(f"{path}: empty dataset")
    return items


@dataclass
class QATypeScore:
    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


@dataclass
class QAEvalResult:
    per_type: dict[str, QATypeScore]
    mean_accuracy: float
    n_items: int
    n_ambiguous: int


def eval_qa(items: list[QAItem], predictions: dict[str, int | None]) -> QAEvalResult:
    """Accuracy per question type plus the unweighted mean over types.

    Predictions align to items by id; a missing or extra id is an error.
    Unparseable replies arrive as None and score zero.
    """
    item_ids = {it.item_id for it in items}
    pred_ids = set(predictions)
    if item_ids != pred_ids:
        missing = sorted(item_ids - pred_ids)[:3]
        extra = sorted(pred_ids - item_ids)[:3]
        raise IdMismatch(f"prediction ids do not match items (missing {missing}, extra {extra})")

    per_type: dict[str, QATypeScore] = {}
    n_ambiguous = 0
    for item in items:
        score = per_type.setdefault(item.question_type, QATypeScore())
        score.total += 1
        pred = predictions[item.item_id]
        if pred is None:
            n_ambiguous += 1
        elif pred == item.answer_index:
            score.correct += 1
    accuracies = [s.accuracy for s in per_type.values() if s.total > 0]
    mean = sum(accuracies) / len(accuracies) if accuracies else 0.0
    return QAEvalResult(
        per_type=per_type, mean_accuracy=mean, n_items=len(items), n_ambiguous=n_ambiguous
    )


# ---------------------------------------------------------------- DVC data


@dataclass(frozen=True)
class DVCVideo:
    video_id: str
    duration_s: float
    spans: tuple[TimeRange, ...]
    sentences: tuple[str, ...]


def load_dvc_dataset(path: str) -> dict[str, DVCVideo]:
    if not os.path.exists(path):
        raise DataError(f"dvc dataset not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not raw:
        raise DataError(f"{path}: expected a non-empty video map")
    videos: dict[str, DVCVideo] = {}
    for vid, rec in raw.items():
        try:
            duration = float(rec["duration"])
            stamps = rec["timestamps"]
            sentences = [str(s) for s in rec["sentences"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: bad record for {vid}: {exc}") from exc
        if len(stamps) != len(sentences) or not stamps:
            raise DataError(f"{path}: {vid}: timestamps and sentences must pair up")
        spans = []
        for pair in stamps:
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise DataError(f"{path}: {vid}: timestamp must be [start, end]")
            start, end = float(pair[0]), float(pair[1])
            if not (0 <= start <= end <= duration + 1e-6):
                raise DataError(f"{path}: {vid}: span [{start}, {end}] outside 0..{duration}")
            spans.append(TimeRange(start, end))
        videos[vid] = DVCVideo(
            video_id=vid, duration_s=duration, spans=tuple(spans), sentences=tuple(sentences)
        )
    return videos


# ---------------------------------------------------------------- captions


def token_f1(pred: str, ref: str) -> float:
    """F1 over lowercased whitespace token multisets."""
    p = Counter(pred.lower().split())
    r = Counter(ref.lower().split())
    overlap = sum((p & r).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(p.values())
    recall = overlap / sum(r.values())
    return 2 * precision * recall / (precision + recall)


@dataclass
class SodaResult:
    precision: float
    recall: float
    f1: float
    total: float
    pairs: list[tuple[int, int]] = field(default_factory=list)
    empty: bool = False


def soda_style_score(
    predictions: list[tuple[TimeRange, str]],
    references: list[tuple[TimeRange, str]],
    cap_scorer: Callable[[str, str], float] = token_f1,
) -> SodaResult:
    """Order-preserving one-to-one event matching score.

    Predictions and references are sorted chronologically; dynamic
    programming finds the non-crossing matching maximizing the sum of
    tIoU times caption similarity. Precision divides by the prediction
    count, recall by the reference count.
    """
    if not references:
        raise DataError("references must be non-empty")
    if not predictions:
        return SodaResult(precision=0.0, recall=0.0, f1=0.0, total=0.0, empty=True)

    preds = sorted(predictions, key=lambda pr: (pr[0].start_s, pr[0].end_s))
    refs = sorted(references, key=lambda rf: (rf[0].start_s, rf[0].end_s))
    n_p, n_r = len(preds), len(refs)

    score = [[0.0] * n_r for _ in range(n_p)]
    for i, (p_span, p_text) in enumerate(preds):
        for j, (r_span, r_text) in enumerate(refs):
            overlap = tiou(p_span, r_span)
            score[i][j] = overlap * cap_scorer(p_text, r_text) if overlap > 0 else 0.0

    # dp[i][j]: best total using preds[:i] and refs[:j]
    dp = [[0.0] * (n_r + 1) for _ in range(n_p + 1)]
    for i in range(1, n_p + 1):
        for j in range(1, n_r + 1):
            dp[i][j] = max(
                dp[i - 1][j],
                dp[i][j - 1],
                dp[i - 1][j - 1] + score[i - 1][j - 1],
            )
    total = dp[n_p][n_r]

    pairs: list[tuple[int, int]] = []
    i, j = n_p, n_r
    while i > 0 and j > 0:
        if dp[i][j] == dp[i - 1][j]:
            i -= 1
        elif dp[i][j] == dp[i][j - 1]:
            j -= 1
        else:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
    pairs.reverse()

    precision = total / n_p
    recall = total / n_r
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return SodaResult(precision=precision, recall=recall, f1=f1, total=total, pairs=pairs)
