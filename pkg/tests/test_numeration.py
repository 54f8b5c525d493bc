import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rauzy_approx.errors import IndexBelowMinusFour, InadmissibleDigits
from rauzy_approx.field import BETA, FieldElement, fe_mul, isolate_roots, validate_params
from rauzy_approx.numeration import (
    DigitString,
    TSequence,
    akiyama_classify,
    count_admissible,
    decode,
    digits_from_ints,
    greedy_encode,
    is_admissible,
    renyi_expansion_of_one,
    t_value,
)


def comparison_word(params, length):
    a, b = params.a, params.b
    return ([a - 1, a + b - 1] + [a + b] * length)[:length]


def naive_admissible(digits, params):
    """Compare every suffix with the prefix of w of the same length."""
    digits = list(digits)
    if any(d < 0 or d >= params.a for d in digits):
        return False
    for i in range(len(digits)):
        window = digits[i:]
        if window > comparison_word(params, len(window)):
            return False
    return True


def naive_strict(digits, params):
    """Every suffix is < (a-1)(a+b-1)(a+b)...(a+b)(a+b+1) of the same length."""
    digits = list(digits)
    for i in range(len(digits)):
        window = digits[i:]
        u = comparison_word(params, len(window))
        u[-1] += 1
        if not window < u:
            return False
    return True


def test_t_examples(p42, seq42):
    assert [seq42[n] for n in range(5)] == [1, 4, 14, 49, 172]
    assert seq42[5] == 604
    assert [seq42[n] for n in (-1, -2, -3, -4)] == [0, 0, 1, 2]
    assert t_value(3, seq42) == 49
    with pytest.raises(IndexBelowMinusFour):
        seq42[-5]
    s = TSequence(validate_params(3, -2))
    assert [s[n] for n in range(5)] == [1, 3, 7, 16, 37]


def test_t_recurrence_backwards(seq):
    a, b = seq.params.a, seq.params.b
    for n in range(-4, 60):
        assert seq[n + 3] == a * seq[n + 2] + b * seq[n + 1] + seq[n]
    assert all(seq[n] < seq[n + 1] for n in range(60))


def test_lemma_identity(seq):
    a, b = seq.params.a, seq.params.b
    for n in range(4, 51):
        rhs = ((a - 1) * seq[n - 1] + (a + b - 1) * seq[n - 2]
               + (a + b) * sum(seq[i] for i in range(1, n - 2)) + (a + b + 1) * seq[0])
        assert seq[n] == rhs


def test_encode_decode_examples(p42, seq42):
    assert str(greedy_encode(5, seq42)) == "1,1"
    assert str(greedy_encode(48, seq42)) == "3,1,2"
    assert greedy_encode(0, seq42).digits == ()
    assert str(greedy_encode(0, seq42)) == "0"
    assert decode(DigitString.parse("3,1,2", p42), seq42) == 48
    assert decode(DigitString.parse("1,0,0", p42), seq42) == 14
    assert decode((1, 1), seq42) == 5
    with pytest.raises(InadmissibleDigits):
        decode((3, 2), seq42)
    with pytest.raises(ValueError):
        greedy_encode(-1, seq42)


def test_admissible_examples(p42):
    assert is_admissible((3, 1), p42)
    assert not is_admissible((3, 2), p42)
    assert not is_admissible((3, 1, 3), p42)
    assert is_admissible((3, 1, 2, 2, 2, 2), p42)
    assert not is_admissible((4,), p42)


def test_matcher_equals_naive_checker(params):
    for length in range(1, 7):
        for word in itertools.product(range(params.a), repeat=length):
            ok = naive_admissible(word, params)
            assert is_admissible(word, params) == ok
            assert naive_strict(word, params) == ok


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 4), max_size=25), st.sampled_from([(4, -2), (5, -3), (5, -2)]))
def test_matcher_equals_naive_long_words(word, ab):
    p = validate_params(*ab, warn=False)
    assert is_admissible(word, p) == naive_admissible(word, p)


def test_count_admissible_matches_enumeration(params):
    for length in range(0, 7):
        brute = sum(naive_admissible(w, params) for w in itertools.product(range(params.a), repeat=length))
        assert count_admissible(length, params) == brute


def test_count_admissible_is_T(seq):
    # admissible words of length n represent exactly 0 .. T_n - 1
    for n in range(0, 20):
        assert count_admissible(n, seq.params) == seq[n]


def test_roundtrip_and_partial_sums(seq):
    limit = 10**5
    N = np.arange(limit + 1, dtype=np.int64)
    digits = digits_from_ints(N, seq)
    T = np.array([seq[j] for j in range(digits.shape[1] + 1)], dtype=np.int64)
    partial = np.cumsum(digits * T[:-1], axis=1)
    assert np.all(partial < T[1:])
    assert np.array_equal(partial[:, -1], N)
    for n in range(limit + 1):
        d = greedy_encode(n, seq)
        assert decode(d, seq) == n
        assert d.lsb_first == tuple(digits[n, : len(d)])
        assert not d.digits or d.digits[0] != 0


def test_uniqueness_by_enumeration(seq):
    limit = 10**4
    params = seq.params
    length = seq.index_above(limit)
    counts = {}

    def walk(prefix, value):
        pos = length - len(prefix)
        if value > limit:
            return
        if pos == 0:
            counts[value] = counts.get(value, 0) + 1
            return
        for d in range(params.a):
            word = prefix + [d]
            if naive_admissible(word, params):
                walk(word, value + d * seq[pos - 1])

    walk([], 0)
    assert sorted(counts) == list(range(limit + 1))
    assert set(counts.values()) == {1}


def test_renyi_examples():
    for (a, b), want in {(4, -2): [3, 1, 2, 2, 2], (3, -2): [2, 0, 1, 1, 1]}.items():
        emb = isolate_roots(validate_params(a, b))
        assert renyi_expansion_of_one(5, emb) == want


def test_renyi_thirty_digits(emb):
    a, b = emb.params.a, emb.params.b
    assert renyi_expansion_of_one(30, emb) == [a - 1, a + b - 1] + [a + b] * 28


def test_renyi_tail_fixed_point(params):
    # x_2 = beta^2 - (a-1) beta - (a+b-1) is the fixed point (a+b)/(beta-1)
    a, b = params.a, params.b
    x2 = FieldElement(-(a + b - 1), -(a - 1), 1)
    assert fe_mul(BETA - 1, x2, params) == FieldElement(a + b)
    beta_x2 = fe_mul(BETA, x2, params)
    assert beta_x2 - (a + b) == x2


def test_akiyama_examples():
    assert akiyama_classify(4, 2) == ("case-i", True)
    assert akiyama_classify(2, 3) == ("case-iii", True)
    assert akiyama_classify(4, -1) == ("case-ii", True)
    assert akiyama_classify(4, -2) == ("case-iv", False)
    assert akiyama_classify(4, -7).case == "none"


def test_digit_string_parse(p42):
    d = DigitString.parse("0,0,3,1", p42)
    assert d.stripped().digits == (3, 1)
    assert DigitString.parse("", p42).digits == ()
    assert str(DigitString((12, 0), validate_params(14, -3))) == "12,0"
