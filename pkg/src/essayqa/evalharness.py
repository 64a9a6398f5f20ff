"""Metrics and the staged experiment runner.

Accuracy is the fraction of examples whose predicted answered flag matches
gold.  Answer-overlap F1 compares the predicted and gold span as token bags:
precision = overlap / predicted tokens, recall = overlap / gold tokens,
F1 = 2PR / (P + R).  Examples where both sides abstain score (1, 1, 1); where
exactly one side abstains, (0, 0, 0); with several gold answers the best F1
counts.  The corpus F1 is the plain mean of per-example F1.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import save_model
from .corpus import QAExample, load_any
from .errors import OversizedQuestionError, PlanError, ValidationError
from .locator import Verdict
from .model import ModelBundle, new_model
from .pipeline import infer_verdict
from .qnorm import split_words
from .seqbuild import Vocabulary, build_vocab, tokenize
from .synthetic import SyntheticConfig, generate_synthetic
from .train import Stage, TrainConfig, multi_stage_train


@dataclass
class PerExample:
    example_id: str
    answered_pred: bool
    answered_gold: bool
    precision: float
    recall: float
    f1: float


@dataclass
class EvalResult:
    accuracy: float
    mean_overlap_f1: float
    per_example: list[PerExample] = field(default_factory=list)


def accuracy(predictions: dict[str, bool], gold: list[QAExample]) -> float:
    """Fraction of examples whose answered flag matches; ids must align."""
    if not gold:
        raise ValidationError("empty test set")
    gold_ids = {ex.example_id for ex in gold}
    if gold_ids != set(predictions):
        missing = sorted(gold_ids - set(predictions))[:3]
        extra = sorted(set(predictions) - gold_ids)[:3]
        raise ValidationError(f"id mismatch between predictions and gold "
                              f"(missing={missing}, extra={extra})")
    correct = sum(1 for ex in gold if predictions[ex.example_id] == ex.answerable)
    return correct / len(gold)


def _span_tokens(text: str, unit: str, vocab: Vocabulary | None) -> list[str]:
    if unit == "word":
        return [w.lower() for w, _, _ in split_words(text)]
    if unit == "subword":
        if vocab is None:
            raise ValidationError("subword overlap needs a vocabulary")
        return [t.surface for t in tokenize(text, vocab)]
    raise ValidationError(f"unknown overlap unit {unit!r}")


def overlap_f1(pred_text: str | None, gold: QAExample, unit: str = "word",
               vocab: Vocabulary | None = None) -> tuple[float, float, float]:
    """(precision, recall, f1) of the token-bag overlap; pred_text None means
    the prediction abstained."""
    if pred_text is None and not gold.answerable:
        return 1.0, 1.0, 1.0
    if pred_text is None or not gold.answerable:
        return 0.0, 0.0, 0.0
    pred_tokens = _span_tokens(pred_text, unit, vocab)
    best = (0.0, 0.0, 0.0)
    for ans in gold.gold_answers:
        gold_tokens = _span_tokens(ans.text, unit, vocab)
        if not pred_tokens or not gold_tokens:
            continue
        common = Counter(pred_tokens) & Counter(gold_tokens)
        n_overlap = sum(common.values())
        if n_overlap == 0:
            continue
        p = n_overlap / len(pred_tokens)
        r = n_overlap / len(gold_tokens)
        f1 = 2 * p * r / (p + r)
        if f1 > best[2]:
            best = (p, r, f1)
    return best


def evaluate_verdicts(verdicts: dict[str, Verdict], gold: list[QAExample],
                      unit: str = "word", vocab: Vocabulary | None = None) -> EvalResult:
    """Corpus-level metrics from per-example verdicts keyed by example id."""
    per: list[PerExample] = []
    predictions = {eid: v.answered for eid, v in verdicts.items()}
    acc = accuracy(predictions, gold)
    for ex in gold:
        verdict = verdicts[ex.example_id]
        pred_text = verdict.span.text if verdict.span is not None else None
        p, r, f1 = overlap_f1(pred_text, ex, unit, vocab)
        per.append(PerExample(
            example_id=ex.example_id,
            answered_pred=verdict.answered,
            answered_gold=ex.answerable,
            precision=p,
            recall=r,
            f1=f1,
        ))
    mean_f1 = float(np.mean([x.f1 for x in per]))
    return EvalResult(accuracy=acc, mean_overlap_f1=mean_f1, per_example=per)


def predict_corpus(model: ModelBundle, examples: list[QAExample],
                   paper_literal_threshold: bool = False,
                   paper_literal_region: bool = False) -> dict[str, Verdict]:
    """Verdict per example id; an oversized question yields a not-answered
    verdict with zeroed scores rather than aborting the run."""
    from .heads import ScoreBundle

    out: dict[str, Verdict] = {}
    for ex in examples:
        try:
            out[ex.example_id] = infer_verdict(
                model, ex.question, ex.context,
                paper_literal_threshold=paper_literal_threshold,
                paper_literal_region=paper_literal_region,
            )
        except OversizedQuestionError:
            zero = ScoreBundle(0.0, 0.0, 0.0, 0.0, 0.0, answered=False)
            out[ex.example_id] = Verdict(answered=False, scores=zero)
    return out


def evaluate_model(model: ModelBundle, examples: list[QAExample], unit: str = "word",
                   paper_literal_threshold: bool = False) -> EvalResult:
    verdicts = predict_corpus(model, examples,
                              paper_literal_threshold=paper_literal_threshold)
    vocab = model.vocab if unit == "subword" else None
    return evaluate_verdicts(verdicts, examples, unit=unit, vocab=vocab)


# ------------------------------------------------------------ experiments


@dataclass
class PlanStage:
    name: str
    corpus: str | dict
    epochs: int | None = None
    learning_rate: float | None = None
    dev: str | dict | None = None
    dev_fraction: float = 0.1


@dataclass
class ExperimentPlan:
    stages: list[PlanStage]
    eval_corpus: str | dict
    seed: int = 0
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    vocab: str | dict | None = None
    overlap_unit: str = "word"

    def __post_init__(self):
        if not self.stages:
            raise PlanError("plan needs at least one stage")


def load_plan(path: str) -> ExperimentPlan:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PlanError(f"{path}: cannot read plan: {exc}") from exc
    try:
        stages = [PlanStage(**raw) for raw in obj.pop("stages")]
        return ExperimentPlan(stages=stages, **obj)
    except (KeyError, TypeError) as exc:
        raise PlanError(f"{path}: malformed plan: {exc}") from exc


def resolve_corpus(spec: str | dict, base_dir: str = ".") -> list[QAExample]:
    """A corpus reference is a file path or an inline synthetic spec
    {"synthetic": {count, answerable_ratio, seed, bank, ...}}."""
    if isinstance(spec, str):
        path = spec if os.path.isabs(spec) else os.path.join(base_dir, spec)
        return load_any(path)
    if isinstance(spec, dict) and "synthetic" in spec:
        return generate_synthetic(SyntheticConfig(**spec["synthetic"]))
    raise PlanError(f"unresolvable corpus reference: {spec!r}")


def format_with_delta(value: float, baseline: float) -> str:
    """Table-style cell: final value plus signed delta vs the baseline,
    e.g. 0.93 (+0.02)."""
    return f"{value:.2f} ({value - baseline:+.2f})"


@dataclass
class StageReport:
    name: str
    accuracy: float
    mean_overlap_f1: float
    zeta: float
    loss_curve: list[float]


@dataclass
class ExperimentReport:
    stages: list[StageReport]
    final_accuracy: float
    final_f1: float
    accuracy_cell: str   # "0.93 (+0.02)" vs the stage-1-only model
    f1_cell: str

    def lines(self) -> list[str]:
        out = ["stage        acc     f1      zeta"]
        for s in self.stages:
            out.append(f"{s.name:<12} {s.accuracy:.4f}  {s.mean_overlap_f1:.4f}  {s.zeta:+.4f}")
        out.append(f"final: Acc {self.accuracy_cell}  F1 {self.f1_cell}")
        return out

    def to_dict(self) -> dict:
        return {
            "stages": [
                {
                    "name": s.name,
                    "accuracy": s.accuracy,
                    "mean_overlap_f1": s.mean_overlap_f1,
                    "zeta": s.zeta,
                    "loss_curve": s.loss_curve,
                }
                for s in self.stages
            ],
            "final_accuracy": self.final_accuracy,
            "final_f1": self.final_f1,
            "accuracy_cell": self.accuracy_cell,
            "f1_cell": self.f1_cell,
        }


def run_experiment(plan: ExperimentPlan, base_dir: str = ".",
                   out_dir: str | None = None) -> ExperimentReport:
    """Execute a staged plan and measure each stage's model on the final
    evaluation corpus; deltas compare the final stage to the first."""
    eval_corpus = resolve_corpus(plan.eval_corpus, base_dir)
    if not eval_corpus:
        raise PlanError("evaluation corpus is empty")
    stage_corpora = [resolve_corpus(s.corpus, base_dir) for s in plan.stages]
    for stage, corpus in zip(plan.stages, stage_corpora):
        if not corpus:
            raise PlanError(f"stage {stage.name!r} corpus is empty")
    stage_devs = [
        resolve_corpus(s.dev, base_dir) if s.dev is not None else None
        for s in plan.stages
    ]

    if isinstance(plan.vocab, str):
        vocab = Vocabulary.load(plan.vocab if os.path.isabs(plan.vocab)
                                else os.path.join(base_dir, plan.vocab))
    else:
        size = (plan.vocab or {}).get("size", 8000)
        texts = [t for corpus in stage_corpora for ex in corpus
                 for t in (ex.question, ex.context)]
        vocab = build_vocab(texts, size=size)

    model_cfg = dict(plan.model)
    model_cfg.setdefault("seed", plan.seed)
    model = new_model(vocab, **model_cfg)
    base_cfg = TrainConfig(seed=plan.seed, **plan.train)

    stages = [
        Stage(name=s.name, corpus=corpus, epochs=s.epochs,
              learning_rate=s.learning_rate, dev=dev, dev_fraction=s.dev_fraction)
        for s, corpus, dev in zip(plan.stages, stage_corpora, stage_devs)
    ]

    # Drive stages one at a time (equivalent to one multi-stage run: each
    # stage carries its explicit seed) so every stage's model can be
    # measured on the evaluation corpus.
    reports: list[StageReport] = []
    for k, stage in enumerate(stages):
        if stage.seed is None:
            stage.seed = plan.seed + k
        # a failing stage aborts here; earlier stages' checkpoints stay on disk
        model, infos = multi_stage_train(model, [stage], base_cfg)
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            save_model(model, os.path.join(out_dir, f"stage{k + 1}-{stage.name}.ckpt"))
        result = evaluate_model(model, eval_corpus, unit=plan.overlap_unit)
        reports.append(StageReport(
            name=stage.name,
            accuracy=result.accuracy,
            mean_overlap_f1=result.mean_overlap_f1,
            zeta=model.zeta,
            loss_curve=infos[0].loss_curve,
        ))

    final = reports[-1]
    first = reports[0]
    report = ExperimentReport(
        stages=reports,
        final_accuracy=final.accuracy,
        final_f1=final.mean_overlap_f1,
        accuracy_cell=format_with_delta(final.accuracy, first.accuracy),
        f1_cell=format_with_delta(final.mean_overlap_f1, first.mean_overlap_f1),
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
    return report
