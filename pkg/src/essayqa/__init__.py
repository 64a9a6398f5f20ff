"""essayqa: decide which requirement questions a student essay responds to
and extract the responding spans."""

from .corpus import GoldAnswer, QAExample
from .encoder import EncoderConfig
from .errors import EssayQAError
from .heads import ScoreBundle, SpanDistributions
from .locator import ResponseSpan, Verdict
from .model import ModelBundle, new_model
from .pipeline import EvaluationRequest, evaluate, infer_verdict
from .qnorm import NormalizedQuestion, RewriteRuleSet, normalize
from .seqbuild import InputSequence, Token, Vocabulary, assemble, build_vocab, tokenize

__version__ = "0.1.0"

__all__ = [
    "EncoderConfig",
    "EssayQAError",
    "EvaluationRequest",
    "GoldAnswer",
    "InputSequence",
    "ModelBundle",
    "NormalizedQuestion",
    "QAExample",
    "ResponseSpan",
    "RewriteRuleSet",
    "ScoreBundle",
    "SpanDistributions",
    "Token",
    "Verdict",
    "Vocabulary",
    "assemble",
    "build_vocab",
    "evaluate",
    "infer_verdict",
    "new_model",
    "normalize",
    "tokenize",
    "__version__",
]
