import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from essayqa.seqbuild import build_vocab  # noqa: E402


@pytest.fixture(scope="session")
def tiny_vocab():
    """Vocabulary covering a handful of sentences, plus char fallback."""
    return build_vocab([
        "I will travel to Japan",
        "What will you do in the summer vacation ?",
        "remind Sally where you arranged to meet",
        "the quick brown fox jumps over the lazy dog",
    ], size=200)
