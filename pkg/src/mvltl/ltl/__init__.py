from .guards import Guard, SymbolSpace, UNSAT, eval_symbol, rho, violation_distance
from .nba import Nba
from .semantics import holds, satisfies_lasso
from .syntax import (Ltl, LtlSyntaxError, NextOperatorWarning, UndeclaredAtomError,
                     parse_ltl, to_text)
from .translate import to_nba

__all__ = [
    "Guard", "Ltl", "LtlSyntaxError", "Nba", "NextOperatorWarning", "SymbolSpace", "UNSAT",
    "UndeclaredAtomError", "eval_symbol", "holds", "parse_ltl", "rho", "satisfies_lasso",
    "to_nba", "to_text", "violation_distance",
]
