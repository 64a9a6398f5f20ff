"""Corpus ingestion and statistics.

Two on-disk layouts are understood:

* SQuAD 2.0 JSON (data/paragraphs/context/qas with is_impossible and
  answers[text, answer_start]);
* a line-delimited record format for essay datasets, one JSON object per
  line with fields {example_id, question, context, answerable,
  gold_answers: [{text, char_start}]}.

Every loaded answer is validated against its claimed offset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class GoldAnswer:
    text: str
    char_start: int


@dataclass(frozen=True)
class QAExample:
    example_id: str
    question: str
    context: str
    answerable: bool
    gold_answers: tuple[GoldAnswer, ...] = ()

    def validate(self) -> None:
        if self.answerable and not self.gold_answers:
            raise ValidationError(f"{self.example_id}: answerable example without gold answers")
        if not self.answerable and self.gold_answers:
            raise ValidationError(f"{self.example_id}: unanswerable example with gold answers")
        for ans in self.gold_answers:
            end = ans.char_start + len(ans.text)
            if ans.char_start < 0 or end > len(self.context):
                raise ValidationError(
                    f"{self.example_id}: answer offset {ans.char_start} outside context"
                )
            if self.context[ans.char_start: end] != ans.text:
                raise ValidationError(
                    f"{self.example_id}: answer text does not match context at "
                    f"offset {ans.char_start}"
                )


@dataclass
class CorpusStats:
    example_count: int
    answerable_count: int
    answer_length_histogram: list[tuple[int, int, int]]  # (bin_start, bin_end, count)
    mean_answer_length_chars: float | None

    @property
    def histogram_mass(self) -> int:
        return sum(count for _, _, count in self.answer_length_histogram)


def load_squad(path: str) -> list[QAExample]:
    """Flatten a SQuAD 2.0 file into one example per question."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    examples: list[QAExample] = []
    try:
        articles = payload["data"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: missing top-level 'data' field") from exc
    for article in articles:
        for para in article.get("paragraphs", []):
            context = para["context"]
            for qa in para["qas"]:
                is_impossible = bool(qa.get("is_impossible", False))
                answers = () if is_impossible else tuple(
                    GoldAnswer(text=a["text"], char_start=int(a["answer_start"]))
                    for a in qa.get("answers", [])
                )
                ex = QAExample(
                    example_id=str(qa["id"]),
                    question=qa["question"],
                    context=context,
                    answerable=not is_impossible,
                    gold_answers=answers,
                )
                ex.validate()
                examples.append(ex)
    return examples


def load_sed_format(path: str) -> list[QAExample]:
    """Load the line-delimited essay-record format, validating offsets."""
    examples: list[QAExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: bad record: {exc}") from exc
            try:
                ex = QAExample(
                    example_id=str(obj["example_id"]),
                    question=obj["question"],
                    context=obj["context"],
                    answerable=bool(obj["answerable"]),
                    gold_answers=tuple(
                        GoldAnswer(text=a["text"], char_start=int(a["char_start"]))
                        for a in obj.get("gold_answers", [])
                    ),
                )
            except KeyError as exc:
                raise ValidationError(f"{path}:{lineno}: missing field {exc}") from exc
            ex.validate()
            examples.append(ex)
    return examples


def save_sed_format(examples: list[QAExample], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({
                "example_id": ex.example_id,
                "question": ex.question,
                "context": ex.context,
                "answerable": ex.answerable,
                "gold_answers": [
                    {"text": a.text, "char_start": a.char_start} for a in ex.gold_answers
                ],
            }, ensure_ascii=False) + "\n")


def load_any(path: str) -> list[QAExample]:
    """Dispatch on extension: .json is SQuAD layout, anything else is the
    line-record layout."""
    if path.endswith(".json"):
        return load_squad(path)
    return load_sed_format(path)


def answer_length_stats(examples: list[QAExample], bin_width: int = 5) -> CorpusStats:
    """Character-level gold-answer lengths (internal whitespace counted,
    surrounding whitespace not); unanswerable examples contribute no mass."""
    if bin_width <= 0:
        raise ValidationError("bin_width must be positive")
    lengths = [
        len(ans.text.strip())
        for ex in examples if ex.answerable
        for ans in ex.gold_answers
    ]
    answerable = sum(1 for ex in examples if ex.answerable)
    if not lengths:
        return CorpusStats(len(examples), answerable, [], None)
    top = max(lengths)
    bins = [0] * (top // bin_width + 1)
    for n in lengths:
        bins[n // bin_width] += 1
    histogram = [
        (i * bin_width, (i + 1) * bin_width, count)
        for i, count in enumerate(bins)
    ]
    return CorpusStats(
        example_count=len(examples),
        answerable_count=answerable,
        answer_length_histogram=histogram,
        mean_answer_length_chars=sum(lengths) / len(lengths),
    )


def write_histogram_csv(stats: CorpusStats, fh) -> None:
    fh.write("bin_start,bin_end,count\n")
    for bin_start, bin_end, count in stats.answer_length_histogram:
        fh.write(f"{bin_start},{bin_end},{count}\n")
