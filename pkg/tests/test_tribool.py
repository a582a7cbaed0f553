"""Three-valued truth values: parsing, rendering, and connective tables."""

from __future__ import annotations

import pytest

from carekb.tribool import TriBool

T, F, U = TriBool.TRUE, TriBool.FALSE, TriBool.UNKNOWN


@pytest.mark.parametrize(
    "text,value",
    [
        ("true", T),
        ("yes", T),
        ("false", F),
        ("no", F),
        ("unknown", U),
        ("  YES ", T),
        ("No", F),
        ("UNKNOWN", U),
    ],
)
def test_from_text(text, value):
    assert TriBool.from_text(text) is value


@pytest.mark.parametrize("bad", ["maybe", "", "1", "none", "y"])
def test_from_text_rejects_other_spellings(bad):
    with pytest.raises(ValueError):
        TriBool.from_text(bad)


def test_from_bool_and_as_answer():
    assert TriBool.from_bool(True) is T
    assert TriBool.from_bool(False) is F
    assert T.as_answer() == "yes"
    assert F.as_answer() == "no"
    assert U.as_answer() == "unknown"
    assert str(U) == "unknown"


def test_negation_table():
    assert T.negate() is F
    assert F.negate() is T
    assert U.negate() is U


def test_conjunction_table():
    # FALSE dominates, then UNKNOWN taints
    assert T.and_(T) is T
    assert T.and_(F) is F
    assert F.and_(U) is F
    assert U.and_(F) is F
    assert T.and_(U) is U
    assert U.and_(U) is U


def test_disjunction_table():
    # TRUE dominates, then UNKNOWN taints
    assert F.or_(F) is F
    assert T.or_(U) is T
    assert U.or_(T) is T
    assert F.or_(U) is U
    assert U.or_(U) is U


def test_implication_is_negated_or():
    for a in TriBool:
        for b in TriBool:
            assert a.implies(b) is a.negate().or_(b)
    assert F.implies(U) is T  # false antecedent settles it
    assert U.implies(T) is T  # true consequent settles it
    assert U.implies(U) is U


def test_connectives_commute():
    for a in TriBool:
        for b in TriBool:
            assert a.and_(b) is b.and_(a)
            assert a.or_(b) is b.or_(a)


def test_resolving_unknown_never_flips_definite_results():
    # sharpen one UNKNOWN operand and check definite outputs are stable
    for other in TriBool:
        for sharpened in (T, F):
            before_and = U.and_(other)
            after_and = sharpened.and_(other)
            if before_and is not U:
                assert after_and is before_and
            before_or = U.or_(other)
            after_or = sharpened.or_(other)
            if before_or is not U:
                assert after_or is before_or
