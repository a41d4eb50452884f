"""Context-free grammars, leftmost derivations, and expression evaluation.

The equation-discovery environment builds equations by applying grammar rules
to the leftmost nonterminal of a sentential form. Rule order in the source
text is the action indexing and must stay stable for a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BINARY_OPS = ("+", "-", "*", "/")
UNARY_OPS = ("sin", "cos", "exp", "log")
VARIABLE = "x"

_RETRY_BUDGET = 50


class GrammarError(ValueError):
    """Malformed grammar source or ill-formed derivation operation."""


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.lhs} -> {' '.join(self.rhs)}"


@dataclass(frozen=True)
class Grammar:
    """Ordered rule list; rule index doubles as the environment action index."""

    nonterminals: tuple[str, ...]
    terminals: tuple[str, ...]
    rules: tuple[Rule, ...]
    start: str

    @property
    def rule_count(self) -> int:
        return len(self.rules)

    def rules_for(self, symbol: str) -> list[int]:
        return [i for i, r in enumerate(self.rules) if r.lhs == symbol]

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rules)


def parse_grammar(text: str) -> Grammar:
    """Parse one rule per line, ``LHS -> sym sym ...``; ``#`` starts a comment.

    The first rule's left-hand side is the start symbol. Symbols appearing as
    a left-hand side are the nonterminals; everything else on a right-hand
    side is a terminal.
    """
    if not text.strip():
        raise GrammarError("empty grammar source")
    rules: list[Rule] = []
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise GrammarError(f"line {lineno}: missing '->' in rule: {raw!r}")
        lhs_part, rhs_part = line.split("->", 1)
        lhs = lhs_part.strip()
        if not lhs or len(lhs.split()) != 1:
            raise GrammarError(f"line {lineno}: left-hand side must be a single symbol")
        rhs = tuple(rhs_part.split())
        if not rhs:
            raise GrammarError(f"line {lineno}: empty right-hand side")
        rules.append(Rule(lhs, rhs))
    if not rules:
        raise GrammarError("grammar source contains no rules")

    nonterminals = tuple(dict.fromkeys(r.lhs for r in rules))
    seen: dict[str, None] = {}
    for r in rules:
        for s in r.rhs:
            if s not in nonterminals:
                seen.setdefault(s)
    terminals = tuple(seen)
    start = rules[0].lhs

    # Every nonterminal must be reachable from the start symbol.
    reachable = {start}
    frontier = [start]
    while frontier:
        sym = frontier.pop()
        for r in rules:
            if r.lhs != sym:
                continue
            for s in r.rhs:
                if s in nonterminals and s not in reachable:
                    reachable.add(s)
                    frontier.append(s)
    for nt in nonterminals:
        if nt not in reachable:
            lineno = next(i for i, r in enumerate(rules, 1) if r.lhs == nt)
            raise GrammarError(f"line {lineno}: nonterminal {nt!r} unreachable from start")

    return Grammar(nonterminals, terminals, tuple(rules), start)


@dataclass(frozen=True)
class Derivation:
    """Partial leftmost derivation: sentential form plus the rules applied."""

    grammar: Grammar = field(repr=False)
    sentential_form: tuple[str, ...]
    applied_rules: tuple[int, ...]

    @classmethod
    def initial(cls, grammar: Grammar) -> "Derivation":
        return cls(grammar, (grammar.start,), ())

    @property
    def complete(self) -> bool:
        return self.leftmost_nonterminal_index() < 0

    def leftmost_nonterminal_index(self) -> int:
        nts = self.grammar.nonterminals
        for i, s in enumerate(self.sentential_form):
            if s in nts:
                return i
        return -1

    def leftmost_nonterminal(self) -> str | None:
        i = self.leftmost_nonterminal_index()
        return None if i < 0 else self.sentential_form[i]


def apply_rule(derivation: Derivation, rule_index: int) -> Derivation:
    """Replace the leftmost nonterminal with the rule's right-hand side."""
    g = derivation.grammar
    if not 0 <= rule_index < g.rule_count:
        raise GrammarError(f"rule index {rule_index} out of range")
    pos = derivation.leftmost_nonterminal_index()
    if pos < 0:
        raise GrammarError("cannot apply a rule to a complete derivation")
    rule = g.rules[rule_index]
    if rule.lhs != derivation.sentential_form[pos]:
        raise GrammarError(
            f"rule {rule_index} ({rule}) does not match leftmost nonterminal "
            f"{derivation.sentential_form[pos]!r}"
        )
    form = (
        derivation.sentential_form[:pos]
        + rule.rhs
        + derivation.sentential_form[pos + 1 :]
    )
    return Derivation(g, form, derivation.applied_rules + (rule_index,))


def legal_rule_mask(derivation: Derivation) -> np.ndarray:
    """Boolean mask over rule indices applicable to the leftmost nonterminal."""
    g = derivation.grammar
    mask = np.zeros(g.rule_count, dtype=bool)
    nt = derivation.leftmost_nonterminal()
    if nt is not None:
        for i in g.rules_for(nt):
            mask[i] = True
    return mask


# Expression trees are nested tuples:
#   ("var",), ("const", v), (binop, left, right), (unop, child)
Expression = tuple


def to_expression(derivation: Derivation) -> Expression:
    """Convert a complete derivation into an expression tree.

    The tree shape follows the derivation's own nesting, never a re-parse of
    the flat symbol string, so precedence is whatever the derivation built.
    """
    if not derivation.complete:
        raise GrammarError("derivation is incomplete; expression undefined")
    g = derivation.grammar

    class _Node:
        __slots__ = ("symbol", "children")

        def __init__(self, symbol: str):
            self.symbol = symbol
            self.children: list[_Node] = []

    root = _Node(g.start)
    stack = [root]
    nts = set(g.nonterminals)
    for idx in derivation.applied_rules:
        node = stack.pop()
        rule = g.rules[idx]
        node.children = [_Node(s) for s in rule.rhs]
        stack.extend(c for c in reversed(node.children) if c.symbol in nts)
    if stack:
        raise GrammarError("derivation replay left unexpanded nonterminals")

    def convert(node: "_Node") -> Expression:
        if not node.children:
            return _terminal_to_expr(node.symbol)
        kids = [c for c in node.children if c.symbol not in ("(", ")")]
        if len(kids) == 1:
            return convert(kids[0])
        if len(kids) == 2 and kids[0].symbol in UNARY_OPS and not kids[0].children:
            return (kids[0].symbol, convert(kids[1]))
        if len(kids) == 3 and kids[1].symbol in BINARY_OPS and not kids[1].children:
            return (kids[1].symbol, convert(kids[0]), convert(kids[2]))
        raise GrammarError(f"unsupported rule shape under {node.symbol!r}")

    return convert(root)


def _terminal_to_expr(symbol: str) -> Expression:
    if symbol == VARIABLE:
        return ("var",)
    try:
        return ("const", float(symbol))
    except ValueError:
        raise GrammarError(f"terminal {symbol!r} is neither the variable nor a number")


def expression_str(expr: Expression) -> str:
    """Deterministic fully parenthesized infix form."""
    op = expr[0]
    if op == "var":
        return VARIABLE
    if op == "const":
        v = expr[1]
        return str(int(v)) if float(v).is_integer() else repr(v)
    if op in UNARY_OPS:
        return f"{op}({expression_str(expr[1])})"
    return f"({expression_str(expr[1])} {op} {expression_str(expr[2])})"


def evaluate(expr: Expression, x: float) -> float:
    """Evaluate at a scalar x; non-finite results (0-division, log of a
    non-positive, overflow) come back as nan/inf values, never exceptions."""
    return float(evaluate_array(expr, np.asarray([x], dtype=np.float64))[0])


def evaluate_array(expr: Expression, xs: np.ndarray) -> np.ndarray:
    """Vectorized evaluation; non-finite values propagate as values."""
    with np.errstate(all="ignore"):
        return _eval_rec(expr, xs)


def _eval_rec(expr: Expression, xs: np.ndarray) -> np.ndarray:
    op = expr[0]
    if op == "var":
        return xs.astype(np.float64, copy=True)
    if op == "const":
        return np.full(xs.shape, float(expr[1]))
    if op == "+":
        return _eval_rec(expr[1], xs) + _eval_rec(expr[2], xs)
    if op == "-":
        return _eval_rec(expr[1], xs) - _eval_rec(expr[2], xs)
    if op == "*":
        return _eval_rec(expr[1], xs) * _eval_rec(expr[2], xs)
    if op == "/":
        return _eval_rec(expr[1], xs) / _eval_rec(expr[2], xs)
    arg = _eval_rec(expr[1], xs)
    if op == "sin":
        return np.sin(arg)
    if op == "cos":
        return np.cos(arg)
    if op == "exp":
        return np.exp(arg)
    if op == "log":
        out = np.full(arg.shape, np.nan)
        pos = arg > 0
        out[pos] = np.log(arg[pos])
        return out
    raise GrammarError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class Dataset:
    """Point measurements: strictly increasing xs, finite ys of equal length."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys, dtype=np.float64)
        if xs.shape != ys.shape or xs.ndim != 1:
            raise ValueError("xs and ys must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("dataset values must be finite")
        if xs.size >= 2 and not np.all(np.diff(xs) > 0):
            raise ValueError("xs must be strictly increasing")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self) -> int:
        return int(self.xs.size)


def nrmse(expr: Expression, data: Dataset) -> float:
    """Root-mean-square error over the dataset, normalized by std(ys).

    Population std; denominators below 1e-12 fall back to 1. Any non-finite
    prediction makes the score +inf (never a success).
    """
    preds = evaluate_array(expr, data.xs)
    if not np.all(np.isfinite(preds)):
        return float("inf")
    rmse = float(np.sqrt(np.mean((preds - data.ys) ** 2)))
    denom = float(np.std(data.ys))
    if denom < 1e-12:
        denom = 1.0
    return rmse / denom


def sample_dataset(
    expr: Expression,
    n_points: int,
    x_range: tuple[float, float],
    rng: np.random.Generator,
    max_retries: int = _RETRY_BUDGET,
) -> Dataset:
    """Draw xs uniformly from x_range (deduplicated, sorted) and set ys = expr(xs).

    Draws are retried while any y (or duplicate-collapsed x count) is unusable;
    exhausting the retry budget raises, which signals a grammar/target
    misconfiguration rather than bad luck.
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    lo, hi = float(x_range[0]), float(x_range[1])
    if not lo < hi:
        raise ValueError("x_range must be a nonempty interval")
    for _ in range(max_retries):
        xs = np.unique(rng.uniform(lo, hi, size=n_points))
        if xs.size != n_points:
            continue
        ys = evaluate_array(expr, xs)
        if np.all(np.isfinite(ys)):
            return Dataset(xs, ys)
    raise ValueError(
        f"could not sample a finite dataset for {expression_str(expr)} "
        f"on [{lo}, {hi}] after {max_retries} attempts"
    )
