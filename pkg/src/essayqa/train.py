"""Supervised training of encoder + heads.

The loss per example is

    w_span * (NLL of gold start + NLL of gold end) / 2
  + w_verifier * cross-entropy of the front-verifier logits

where unanswerable examples target the [CLS] position (1, 1) for both span
ends.  Gradients are fully analytic; optimization is adaptive moment
estimation with an optional linear warmup.  Everything is seeded: shuffles,
batching, and reduction order are fixed, so identical configs produce
bit-identical parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .checkpoint import save_model
from .corpus import QAExample
from .encoder import EncoderConfig, backward_batch, forward_batch, pad_ids
from .errors import EssayQAError, OversizedQuestionError, ValidationError
from .heads import SpanDistributions, span_logits
from .model import ModelBundle
from .pipeline import infer_verdict
from .qnorm import RewriteRuleSet, normalize
from .seqbuild import MAX_INPUT_LEN, Vocabulary, assemble

logger = logging.getLogger(__name__)

_NEG = -1e30


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2
    learning_rate: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    w_span: float = 1.0
    w_verifier: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    warmup_steps: int = 0
    max_steps: int | None = None

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValidationError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")


@dataclass(frozen=True)
class TrainingExample:
    ids: tuple[int, ...]
    m: int                      # question token count
    gold_start: int             # 1-indexed positions in T; (1, 1) = [CLS]
    gold_end: int
    answerable: bool
    example_id: str = ""

    @property
    def tau(self) -> int:
        return len(self.ids)


def char_span_to_positions(seq, char_start: int, char_end: int) -> tuple[int, int] | None:
    """1-indexed (start, end) positions of the essay tokens overlapping the
    character range, or None when no essay token survives (truncation)."""
    hits = [
        pos for pos in range(seq.essay_start_pos, seq.tau + 1)
        if (tok := seq.token_at(pos)).char_start < char_end and tok.char_end > char_start
    ]
    if not hits:
        return None
    return hits[0], hits[-1]


def prepare_examples(corpus: list[QAExample], vocab: Vocabulary, rules: RewriteRuleSet,
                     max_len: int) -> tuple[list[TrainingExample], int]:
    """Convert QA examples into training rows.

    Oversized questions are skipped (counted); answers that truncation pushed
    entirely out of the window train as unanswerable.
    """
    prepared: list[TrainingExample] = []
    skipped = 0
    for ex in corpus:
        normalized = normalize(ex.question, rules)
        try:
            seq = assemble(normalized, ex.context, vocab, max_len=max_len)
        except OversizedQuestionError:
            skipped += 1
            continue
        gold_start, gold_end, answerable = 1, 1, False
        if ex.answerable and ex.gold_answers:
            ans = ex.gold_answers[0]
            span = char_span_to_positions(seq, ans.char_start, ans.char_start + len(ans.text))
            if span is not None:
                gold_start, gold_end = span
                answerable = True
        prepared.append(TrainingExample(
            ids=tuple(seq.ids),
            m=seq.m,
            gold_start=gold_start,
            gold_end=gold_end,
            answerable=answerable,
            example_id=ex.example_id,
        ))
    if skipped:
        logger.info("skipped %d oversized-question examples", skipped)
    return prepared, skipped


def compute_loss(dist: SpanDistributions, efv_logits, gold: TrainingExample,
                 w_span: float = 1.0, w_verifier: float = 1.0) -> float:
    """Loss of one example from its predicted distributions and verifier
    logits (logit_ans, logit_na)."""
    ps = float(dist.prob_start[gold.gold_start - 1])
    pe = float(dist.prob_end[gold.gold_end - 1])
    span_nll = -(np.log(max(ps, 1e-300)) + np.log(max(pe, 1e-300))) / 2.0
    logits = np.asarray(efv_logits, dtype=np.float64)
    target = 0 if gold.answerable else 1
    log_z = np.logaddexp(logits[0], logits[1])
    ce = float(log_z - logits[target])
    return float(w_span * span_nll + w_verifier * ce)


def _masked_log_softmax(logits: np.ndarray, mask: np.ndarray):
    x = np.where(mask, logits, _NEG)
    m = x.max(axis=-1, keepdims=True)
    z = np.where(mask, x - m, _NEG)
    e = np.exp(z) * mask
    s = e.sum(axis=-1, keepdims=True)
    return z - np.log(s), e / s


def loss_and_grads(params: dict[str, np.ndarray], cfg: EncoderConfig,
                   batch: list[TrainingExample], pad_id: int,
                   w_span: float = 1.0, w_verifier: float = 1.0):
    """Mean loss over the batch and analytic gradients for every tensor."""
    if not batch:
        raise ValidationError("empty batch")
    ids, mask = pad_ids([np.asarray(ex.ids, dtype=np.int64) for ex in batch], pad_id)
    b = len(batch)
    h, cache = forward_batch(ids, params, cfg, mask)

    start_logits, end_logits = span_logits(h, params)
    log_ps, prob_s = _masked_log_softmax(start_logits, mask)
    log_pe, prob_e = _masked_log_softmax(end_logits, mask)
    rows = np.arange(b)
    gs = np.array([ex.gold_start - 1 for ex in batch])
    ge = np.array([ex.gold_end - 1 for ex in batch])
    span_nll = -(log_ps[rows, gs] + log_pe[rows, ge]) / 2.0

    h_cls = h[:, 0, :]
    v_logits = h_cls @ params["verify.w"] + params["verify.b"]
    v_max = v_logits.max(axis=-1, keepdims=True)
    v_exp = np.exp(v_logits - v_max)
    v_prob = v_exp / v_exp.sum(axis=-1, keepdims=True)
    targets = np.array([0 if ex.answerable else 1 for ex in batch])
    ce = -np.log(v_prob[rows, targets])

    loss = float(np.mean(w_span * span_nll + w_verifier * ce))

    # Backward: d loss / d logits for both heads, then one encoder backward.
    d_start = prob_s.copy()
    d_start[rows, gs] -= 1.0
    d_start *= w_span / (2.0 * b)
    d_end = prob_e.copy()
    d_end[rows, ge] -= 1.0
    d_end *= w_span / (2.0 * b)
    d_v = v_prob.copy()
    d_v[rows, targets] -= 1.0
    d_v *= w_verifier / b

    grads: dict[str, np.ndarray] = {
        "span.w_start": np.einsum("bt,btd->d", d_start, h),
        "span.b_start": np.array([d_start.sum()], dtype=h.dtype),
        "span.w_end": np.einsum("bt,btd->d", d_end, h),
        "span.b_end": np.array([d_end.sum()], dtype=h.dtype),
        "verify.w": h_cls.T @ d_v,
        "verify.b": d_v.sum(axis=0),
    }
    dh = (d_start[:, :, None] * params["span.w_start"]
          + d_end[:, :, None] * params["span.w_end"])
    dh[:, 0, :] += d_v @ params["verify.w"].T
    grads.update(backward_batch(dh, cache, params, cfg))
    return loss, grads


class Adam:
    """Adaptive moment estimation with bias correction; update order follows
    the gradient dict's insertion order for a fixed reduction order."""

    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.beta1 = cfg.adam_beta1
        self.beta2 = cfg.adam_beta2
        self.eps = cfg.adam_eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name in params:
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            params[name] = params[name] - lr * (self.m[name] / bc1) / (
                np.sqrt(self.v[name] / bc2) + self.eps
            )


@dataclass
class StageResult:
    params: dict[str, np.ndarray]
    loss_curve: list[float]      # mean loss per epoch
    step_losses: list[float]
    trained_count: int
    skipped_count: int
    steps: int


def train_stage(params: dict[str, np.ndarray], corpus: list[QAExample],
                vocab: Vocabulary, rules: RewriteRuleSet,
                enc_cfg: EncoderConfig, cfg: TrainConfig) -> StageResult:
    """One training stage over a corpus; returns fresh parameters (the input
    dict is not mutated) plus the loss curve."""
    examples, skipped = prepare_examples(corpus, vocab, rules,
                                         min(enc_cfg.max_len, MAX_INPUT_LEN))
    if not examples:
        raise ValidationError("no trainable examples in corpus")
    params = {k: v.copy() for k, v in params.items()}
    opt = Adam(params, cfg)
    rng = np.random.default_rng(cfg.seed)
    step_losses: list[float] = []
    curve: list[float] = []
    step = 0
    done = False
    for _ in range(cfg.epochs):
        order = rng.permutation(len(examples))
        epoch_losses: list[float] = []
        for lo in range(0, len(examples), cfg.batch_size):
            batch = [examples[int(i)] for i in order[lo: lo + cfg.batch_size]]
            loss, grads = loss_and_grads(params, enc_cfg, batch, vocab.pad_id,
                                         cfg.w_span, cfg.w_verifier)
            if not np.isfinite(loss):
                raise EssayQAError(f"training diverged at step {step}: loss={loss}")
            step += 1
            lr = cfg.learning_rate
            if cfg.warmup_steps > 0:
                lr *= min(1.0, step / cfg.warmup_steps)
            opt.step(params, grads, lr)
            step_losses.append(loss)
            epoch_losses.append(loss)
            if cfg.max_steps is not None and step >= cfg.max_steps:
                done = True
                break
        if epoch_losses:
            curve.append(float(np.mean(epoch_losses)))
        if done:
            break
    return StageResult(
        params=params,
        loss_curve=curve,
        step_losses=step_losses,
        trained_count=len(examples),
        skipped_count=skipped,
        steps=step,
    )


def select_zeta(model: ModelBundle, dev: list[QAExample],
                paper_literal_threshold: bool = False) -> float:
    """Threshold maximizing answered/not-answered accuracy on a dev split.

    Candidates are midpoints between consecutive observed score_final values
    plus sentinels beyond both extremes; ties break toward the smallest
    threshold.  With no usable dev examples the model's current zeta wins.
    """
    finals: list[float] = []
    golds: list[bool] = []
    for ex in dev:
        try:
            verdict = infer_verdict(model, ex.question, ex.context,
                                    paper_literal_threshold=paper_literal_threshold)
        except OversizedQuestionError:
            continue
        finals.append(verdict.scores.score_final)
        golds.append(ex.answerable)
    if not finals:
        return model.zeta
    values = np.array(finals)
    gold = np.array(golds)
    uniq = np.unique(values)
    candidates = np.concatenate([
        [uniq[0] - 1.0], (uniq[:-1] + uniq[1:]) / 2.0, [uniq[-1] + 1.0]
    ])
    best_zeta, best_acc = float(candidates[0]), -1.0
    for z in candidates:
        answered = values > z if paper_literal_threshold else values <= z
        acc = float(np.mean(answered == gold))
        if acc > best_acc:
            best_acc, best_zeta = acc, float(z)
    return best_zeta


@dataclass
class Stage:
    name: str
    corpus: list[QAExample]
    epochs: int | None = None
    learning_rate: float | None = None
    dev: list[QAExample] | None = None
    dev_fraction: float = 0.0
    seed: int | None = None  # default: base seed + stage index


@dataclass
class StageRunInfo:
    name: str
    loss_curve: list[float]
    zeta: float
    skipped_count: int
    trained_count: int
    dev_size: int
    checkpoint_path: str | None = None


def multi_stage_train(model: ModelBundle, stages: list[Stage], base_cfg: TrainConfig,
                      out_dir: str | None = None,
                      paper_literal_threshold: bool = False,
                      ) -> tuple[ModelBundle, list[StageRunInfo]]:
    """Run stages sequentially, threading parameters through.

    Stage k trains with seed base_cfg.seed + k.  After each stage the
    verification threshold zeta is re-selected on that stage's dev split
    (explicit, or carved deterministically from the stage corpus when
    dev_fraction > 0), and a per-stage checkpoint is written under out_dir.
    """
    if not stages:
        raise ValidationError("at least one stage is required")
    infos: list[StageRunInfo] = []
    for k, stage in enumerate(stages):
        corpus = stage.corpus
        dev = stage.dev
        stage_seed = stage.seed if stage.seed is not None else base_cfg.seed + k
        if dev is None and stage.dev_fraction > 0:
            split_rng = np.random.default_rng(stage_seed * 7919 + 1)
            order = split_rng.permutation(len(corpus))
            n_dev = max(1, int(len(corpus) * stage.dev_fraction))
            dev = [corpus[int(i)] for i in order[:n_dev]]
            corpus = [corpus[int(i)] for i in order[n_dev:]]
        cfg = replace(
            base_cfg,
            seed=stage_seed,
            epochs=stage.epochs if stage.epochs is not None else base_cfg.epochs,
            learning_rate=(stage.learning_rate if stage.learning_rate is not None
                           else base_cfg.learning_rate),
        )
        result = train_stage(model.params, corpus, model.vocab, model.rules,
                             model.config, cfg)
        model = model.with_params(result.params)
        if dev:
            model.zeta = select_zeta(model, dev, paper_literal_threshold)
        path = None
        if out_dir is not None:
            import os

            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, f"stage{k + 1}-{stage.name}.ckpt")
            save_model(model, path)
        infos.append(StageRunInfo(
            name=stage.name,
            loss_curve=result.loss_curve,
            zeta=model.zeta,
            skipped_count=result.skipped_count,
            trained_count=result.trained_count,
            dev_size=len(dev) if dev else 0,
            checkpoint_path=path,
        ))
    return model, infos
