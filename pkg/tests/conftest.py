import hypothesis
import pytest

from semimarkov.sequences import build_alphabet

# Property tests run numerical fits inside; wall-clock deadlines only add
# flake on loaded CI boxes.
hypothesis.settings.register_profile(
    "default", deadline=None, max_examples=100, derandomize=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture
def abc():
    return build_alphabet(("A", "B", "C"))
