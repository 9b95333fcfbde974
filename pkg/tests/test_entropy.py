import math
import os
from collections import Counter

from hypothesis import given
from hypothesis import strategies as st

from guardfs.telemetry import shannon_entropy


def reference_entropy(buf: bytes) -> float:
    # textbook definition, independent of the implementation under test
    if not buf:
        return 0.0
    n = len(buf)
    return -sum(c / n * math.log2(c / n) for c in Counter(buf).values())


def test_uniform_bytes_give_eight_bits():
    assert abs(shannon_entropy(bytes(range(256)) * 16) - 8.0) <= 1e-9


def test_constant_and_empty_buffers():
    assert shannon_entropy(b"\x00" * 4096) == 0.0
    assert shannon_entropy(b"") == 0.0
    assert math.copysign(1.0, shannon_entropy(b"z" * 10)) == 1.0


def test_two_symbols():
    assert shannon_entropy(b"abab") == 1.0


def test_random_megabyte_is_near_maximal():
    assert shannon_entropy(os.urandom(1 << 20)) >= 7.99


def test_memoryview_and_bytearray_accepted():
    data = os.urandom(1000)
    assert shannon_entropy(memoryview(data)) == shannon_entropy(bytearray(data)) == shannon_entropy(data)


@given(st.binary(max_size=2048))
def test_matches_textbook_formula(buf):
    assert math.isclose(shannon_entropy(buf), reference_entropy(buf), abs_tol=1e-9)


@given(st.binary(min_size=1, max_size=512))
def test_bounds_and_permutation_invariance(buf):
    h = shannon_entropy(buf)
    assert 0.0 <= h <= 8.0
    assert math.isclose(h, shannon_entropy(bytes(sorted(buf))), abs_tol=1e-12)
