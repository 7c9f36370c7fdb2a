"""Text codec for normalized coordinates in prompts and answers.

Grammar a3-answer/1: a coordinate is `(x,y,z)` with every value printed with two
decimals and no whitespace inside the tuple; a coordinate list is `[` + tuples
joined by `, ` + `]`. Boxes hold 8 tuples in the canonical vertex order, axes 2.
"""

import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .config import DECIMALS, GRAMMAR_VERSION

_NUMBER = r"[-+]?\d+(?:\.\d+)?"
TUPLE_RE = re.compile(rf"\(\s*({_NUMBER})\s*,\s*({_NUMBER})\s*,\s*({_NUMBER})\s*\)")
BLOCK_RE = re.compile(rf"\[\s*{TUPLE_RE.pattern}(?:\s*,\s*{TUPLE_RE.pattern})*\s*\]")


@dataclass(frozen=True)
class AnswerGrammar:
    version: str = GRAMMAR_VERSION
    tuple_separator: str = ", "
    value_separator: str = ","
    decimals: int = DECIMALS

    @property
    def quantum(self) -> Decimal:
        return Decimal(1).scaleb(-self.decimals)

    def format_value(self, value: float) -> str:
        """Round half away from zero at the grammar's precision."""
        rounded = Decimal(repr(float(value))).quantize(self.quantum, rounding=ROUND_HALF_UP)
        if rounded == 0:
            rounded = abs(rounded)
        return f"{rounded:.{self.decimals}f}"

    def format_point(self, point) -> str:
        return "(" + self.value_separator.join(self.format_value(v) for v in point) + ")"

    def format_points(self, points) -> str:
        rows = np.asarray(points, dtype=float).reshape(-1, 3)
        return "[" + self.tuple_separator.join(self.format_point(p) for p in rows) + "]"

    def find_blocks(self, text: str) -> list[np.ndarray]:
        """Every bracketed coordinate list in `text`, in order of appearance."""
        blocks = []
        for match in BLOCK_RE.finditer(text):
            values = [tuple(float(v) for v in t) for t in TUPLE_RE.findall(match.group(0))]
            blocks.append(np.array(values, dtype=float))
        return blocks


GRAMMAR = AnswerGrammar()
