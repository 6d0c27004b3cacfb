"""Infix polynomial expressions: parsing with sympy and a canonical printer"""

from tokenize import TokenError
from typing import Mapping, Optional
import logging

import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    rationalize,
    standard_transformations,
)

from src.exceptions import ExpressionError
from src.poly.multipoly import MultiPoly, VarSpace

logger = logging.getLogger(__name__)

# '^' is a power; float literals become exact rationals so coefficients round once
_TRANSFORMATIONS = standard_transformations + (convert_xor, rationalize)


def parse_polynomial(
    text: str,
    space: VarSpace,
    parameters: Optional[Mapping[str, float]] = None,
) -> MultiPoly:
    """
    Parse an infix polynomial expression

    Args:
        text: Expression over the space's variable names, e.g. "x1^3 + x2*u1"
        space: Variable space the polynomial lives in
        parameters: Named numeric constants usable in the expression

    Returns:
        Parsed polynomial
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("Empty expression")
    symbols = {name: sympy.Symbol(name) for name in space.names}
    local_dict = dict(symbols)
    for name, value in (parameters or {}).items():
        if name in symbols:
            raise ExpressionError(f"Parameter '{name}' shadows a variable")
        local_dict[name] = sympy.Rational(repr(float(value)))
    try:
        expr = parse_expr(text, local_dict=local_dict, transformations=_TRANSFORMATIONS)
    except (SyntaxError, TokenError, TypeError, ValueError, sympy.SympifyError) as e:
        raise ExpressionError(f"Cannot parse expression '{text}': {e}")
    if not isinstance(expr, sympy.Expr):
        raise ExpressionError(f"Expression '{text}' is not an arithmetic expression")
    unknown = expr.free_symbols - set(symbols.values())
    if unknown:
        names = ", ".join(sorted(str(s) for s in unknown))
        raise ExpressionError(f"Unknown variable(s) in '{text}': {names}")
    try:
        poly = sympy.Poly(expr, *symbols.values())
    except sympy.PolynomialError as e:
        raise ExpressionError(f"Expression '{text}' is not a polynomial: {e}")
    terms = {}
    for monomial, coef in poly.terms():
        try:
            terms[tuple(monomial)] = float(coef)
        except TypeError:
            raise ExpressionError(f"Coefficient '{coef}' in '{text}' is not a real number")
    return MultiPoly(space, terms)


def _format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _format_monomial(exponent, names) -> str:
    factors = []
    for name, power in zip(names, exponent):
        if power == 1:
            factors.append(name)
        elif power > 1:
            factors.append(f"{name}^{power}")
    return "*".join(factors)


def format_poly(p: MultiPoly) -> str:
    """Canonical text: terms by descending total degree, shortest round-trip literals"""
    if p.is_zero():
        return "0"
    pieces = []
    for exponent, coef in p.items():
        monomial = _format_monomial(exponent, p.space.names)
        magnitude = abs(coef)
        if not monomial:
            body = _format_number(magnitude)
        elif magnitude == 1.0:
            body = monomial
        else:
            body = f"{_format_number(magnitude)}*{monomial}"
        if not pieces:
            pieces.append(f"-{body}" if coef < 0 else body)
        else:
            pieces.append(f"- {body}" if coef < 0 else f"+ {body}")
    return " ".join(pieces)
