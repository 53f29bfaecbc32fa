import json
import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import ArithmeticOverflowError, SpecSchemaError
from series_core import (ArithmeticMode, SeriesKind, analytic_properties,
                         builtin_spec, dump_series_spec, eval_term,
                         format_scalar, generate_prefix, is_positive,
                         load_series_spec, make_custom_blocks,
                         make_escalating_blocks, make_explicit_prefix,
                         make_square_blocks, parse_scalar, spec_from_dict,
                         spec_to_dict)


class TestScalars:
    def test_parse_rational_and_decimal(self):
        assert parse_scalar("3/1") == 3
        assert parse_scalar("-7/14") == F(-1, 2)
        assert parse_scalar("0.1") == F(1, 10)
        assert parse_scalar(0.1) == F(1, 10)
        assert parse_scalar(5) == F(5)

    def test_parse_float_mode(self):
        value = parse_scalar("1/4", ArithmeticMode.FLOAT)
        assert isinstance(value, float)
        assert value == 0.25

    @pytest.mark.parametrize("bad", ["abc", "1/0", "", True, None])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_scalar(bad)

    def test_parse_rejects_non_finite(self):
        with pytest.raises(ArithmeticOverflowError):
            parse_scalar(float("inf"))

    def test_format(self):
        assert format_scalar(F(-1, 4)) == "-1/4"
        assert format_scalar(F(6, 2)) == "3"
        assert format_scalar(0.5) == "0.5"
        assert format_scalar(0.1 + 0.2) == "0.30000000000000004"

    def test_zero_is_negative_class(self):
        assert not is_positive(F(0))
        assert not is_positive(0.0)
        assert is_positive(F(1, 10 ** 9))


class TestBuiltins:
    def test_square_blocks_prefix(self, square):
        quarter = [F(1, 4)] * 4
        expected = ([F(1), F(-1), F(1, 2), F(-1, 2), F(1, 3), F(-1, 3)]
                    + quarter + [-v for v in quarter]
                    + [F(1, 5), F(-1, 5), F(1, 6), F(-1, 6), F(1, 7), F(-1, 7)])
        assert generate_prefix(square, 20) == expected

    def test_square_blocks_nine_copies(self, square):
        terms = generate_prefix(square, 120)
        assert terms.count(F(1, 9)) == 9
        assert terms.count(F(-1, 9)) == 9

    @given(st.integers(min_value=1, max_value=3000))
    @settings(max_examples=50, deadline=None)
    def test_square_partial_sums_stay_in_unit_interval(self, n):
        total = sum(generate_prefix(make_square_blocks(), n), F(0))
        assert 0 <= total <= 1

    def test_escalating_opening(self, escalating):
        assert generate_prefix(escalating, 5) == [F(1), F(-1), F(-1, 2), F(-1, 3), F(-1, 4)]

    def test_escalating_second_positive_block_ends_at_one_over_33(self, escalating):
        terms = generate_prefix(escalating, 38)
        assert terms[5] == F(1, 2)
        assert terms[36] == F(1, 33)
        assert terms[37] == F(-1, 5)

    def test_escalating_seed_targets(self):
        spec = make_escalating_blocks(seed_targets=["1/2", 1])
        # 1 already reaches 1/2, then -1 reaches 1, then target |-1| + 1 = 2 for positives
        terms = generate_prefix(spec, 6)
        assert terms[:2] == [F(1), F(-1)]
        assert terms[2:5] == [F(1, 2), F(1, 3), F(1, 4)]

    def test_escalating_rejects_nonpositive_seed(self):
        with pytest.raises(ValueError):
            make_escalating_blocks(seed_targets=[0])

    def test_leading_zero(self):
        spec = make_square_blocks(leading_zero=True)
        assert generate_prefix(spec, 3) == [F(0), F(1), F(-1)]

    def test_float_mode_terms(self, escalating_float):
        terms = generate_prefix(escalating_float, 5)
        assert all(isinstance(t, float) for t in terms)
        assert terms[4] == -0.25

    def test_builtin_lookup(self):
        assert builtin_spec("square-blocks").kind is SeriesKind.SQUARE_BLOCKS
        spec = builtin_spec("escalating", ArithmeticMode.FLOAT, leading_zero=True)
        assert spec.arithmetic is ArithmeticMode.FLOAT
        assert spec.leading_zero
        with pytest.raises(ValueError):
            builtin_spec("harmonic")

    def test_analytic_properties(self, square, escalating):
        assert analytic_properties(square).st_p is False
        assert analytic_properties(square).fixable is True
        props = analytic_properties(escalating)
        assert props.st_p and props.st_n
        assert analytic_properties(make_explicit_prefix([1, -1])).st_p is None


class TestCustomSeries:
    def test_explicit_prefix_zero_tail(self, small_explicit):
        assert eval_term(small_explicit, 4) == -3
        assert eval_term(small_explicit, 5) == 0
        assert eval_term(small_explicit, 1000) == 0

    def test_explicit_leading_zero_resolved_from_first_term(self):
        spec = make_explicit_prefix([2, -1])
        assert spec.leading_zero
        assert generate_prefix(spec, 3) == [F(0), F(2), F(-1)]
        assert not make_explicit_prefix([-1, 2]).leading_zero

    def test_explicit_pool_bound(self):
        spec = make_explicit_prefix([1, -1, 1, -1], leading_zero=False)
        assert spec.source.pool_bound(True) == 3
        assert spec.source.pool_bound(False) is None

    def test_custom_blocks_harmonic(self):
        spec = make_custom_blocks([[1], [-1]], leading_zero=False)
        assert generate_prefix(spec, 4) == [F(1), F(-1, 2), F(1, 3), F(-1, 4)]

    def test_custom_blocks_unscaled(self):
        spec = make_custom_blocks([["1/2", "1/2"], [-1]], scale="none", leading_zero=False)
        assert generate_prefix(spec, 6) == [F(1, 2), F(1, 2), F(-1), F(1, 2), F(1, 2), F(-1)]

    @pytest.mark.parametrize("pattern", [[], [[]], [[1], []]])
    def test_custom_blocks_rejects_empty(self, pattern):
        with pytest.raises(ValueError):
            make_custom_blocks(pattern)

    def test_preconditions(self, square):
        with pytest.raises(ValueError):
            eval_term(square, -1)
        with pytest.raises(ValueError):
            generate_prefix(square, 0)


class TestSpecDocuments:
    def test_from_dict_explicit_top_level_terms(self):
        spec = spec_from_dict({"kind": "explicit_prefix", "terms": ["0"]})
        assert generate_prefix(spec, 1) == [F(0)]
        assert not spec.leading_zero

    @pytest.mark.parametrize("kind", ["square_blocks", "escalating_blocks"])
    def test_from_dict_builtin_resolves_leading_zero(self, kind):
        spec = spec_from_dict({"kind": kind})
        assert spec.leading_zero
        assert generate_prefix(spec, 2) == [F(0), F(1)]
        explicit = spec_from_dict({"kind": kind, "leading_zero": False})
        assert generate_prefix(explicit, 2) == [F(1), F(-1)]

    def test_from_dict_float(self):
        spec = spec_from_dict({"kind": "square_blocks", "arithmetic": "float"})
        assert spec.arithmetic is ArithmeticMode.FLOAT

    @pytest.mark.parametrize("document", [
        [],
        {"kind": "fibonacci"},
        {"kind": "square_blocks", "arithmetic": "double"},
        {"kind": "square_blocks", "leading_zero": "yes"},
        {"kind": "explicit_prefix"},
        {"kind": "explicit_prefix", "terms": ["x"]},
        {"kind": "custom_blocks", "params": {"pattern": [1, 2]}},
        {"kind": "custom_blocks", "params": {"pattern": [[1]], "scale": "log"}},
        {"kind": "escalating_blocks", "params": {"seed_targets": "1"}},
    ])
    def test_from_dict_schema_errors(self, document):
        with pytest.raises(SpecSchemaError):
            spec_from_dict(document)

    def test_dump_and_load(self, tmp_path):
        spec = make_custom_blocks([["1/2"], [-1, -1]], arithmetic=ArithmeticMode.FLOAT)
        path = tmp_path / "spec.json"
        dump_series_spec(spec, str(path))
        document = json.loads(path.read_text())
        assert document["params"]["pattern"] == [["1/2"], ["-1", "-1"]]
        loaded = load_series_spec(str(path))
        assert spec_to_dict(loaded) == spec_to_dict(spec)
        assert generate_prefix(loaded, 9) == generate_prefix(spec, 9)

    def test_load_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{kind: ")
        with pytest.raises(SpecSchemaError):
            load_series_spec(str(path))

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(SpecSchemaError):
            load_series_spec(str(tmp_path / "missing.json"))


def test_float_and_exact_agree_on_square_blocks(square, square_float):
    exact = generate_prefix(square, 200)
    approx = generate_prefix(square_float, 200)
    assert all(math.isclose(float(a), b) for a, b in zip(exact, approx))
