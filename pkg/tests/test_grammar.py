import numpy as np
import pytest

from a3kit.grammar import GRAMMAR, AnswerGrammar


@pytest.mark.parametrize(
    ("value", "text"),
    [
        (0.125, "0.13"),
        (0.005, "0.01"),
        (0.004999, "0.00"),
        (-0.004, "0.00"),
        (1.0, "1.00"),
        (0.999, "1.00"),
        (0.1, "0.10"),
    ],
)
def test_format_value_rounds_half_up(value, text) -> None:
    assert GRAMMAR.format_value(value) == text


def test_format_points() -> None:
    text = GRAMMAR.format_points([[0.1, 0.2, 0.3], [0.456, 0.5, 1.0]])
    assert text == "[(0.10,0.20,0.30), (0.46,0.50,1.00)]"
    assert GRAMMAR.format_point((0, 0, 0)) == "(0.00,0.00,0.00)"


def test_find_blocks_ignores_prose_and_whitespace() -> None:
    text = (
        "The drawer is at [ (0.10, 0.20 ,0.30) ,(0.4,0.5,0.6) ] and the axis "
        "is [(1,0,0), (0.00,1.00,0.50)]; ignore (0.1,0.2,0.3) outside brackets and [oops]."
    )
    blocks = GRAMMAR.find_blocks(text)
    assert len(blocks) == 2
    assert np.allclose(blocks[0], [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
    assert np.allclose(blocks[1], [[1, 0, 0], [0, 1, 0.5]])
    assert GRAMMAR.find_blocks("no coordinates here") == []


def test_grammar_precision_is_configurable() -> None:
    grammar = AnswerGrammar(decimals=3)
    assert grammar.format_value(0.1235) == "0.124"
    assert grammar.version == "a3-answer/1"
