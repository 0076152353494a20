"""BNF grammar and codon-driven genotype-to-phenotype mapping.

A genotype is a fixed list of 30 integer codons in [0, 100].  Mapping
expands the grammar's start symbol depth first; at every rule offering more
than one production the next codon c picks alternative ``c mod k``.  Rules
with a single production consume nothing.  When the cursor runs off the end
of the genome it wraps to the front.  The derived terminal tokens are
assembled directly into an expression tree, so the result is structurally
well formed by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .expressions import Expr, ExpressionError, tokens_to_expr

GENOME_LENGTH = 30
CODON_MIN = 0
CODON_MAX = 100

TERMINAL = "terminal"
NONTERMINAL = "nonterminal"


class GrammarError(ValueError):
    """Malformed grammar text or a grammar that breaks structural rules."""


class MappingOverflowError(RuntimeError):
    """Mapping exceeded the wrap or expansion-depth limit; the genotype is invalid."""


@dataclass(frozen=True)
class Symbol:
    kind: str
    value: str

    @classmethod
    def t(cls, token: str) -> "Symbol":
        return cls(TERMINAL, token)

    @classmethod
    def nt(cls, name: str) -> "Symbol":
        return cls(NONTERMINAL, name)


@dataclass(frozen=True)
class Production:
    symbols: tuple[Symbol, ...]

    def __post_init__(self):
        if not self.symbols:
            raise GrammarError("empty production")


@dataclass(frozen=True)
class Rule:
    name: str
    productions: tuple[Production, ...]

    def __post_init__(self):
        if not self.productions:
            raise GrammarError(f"rule <{self.name}> has no productions")


@dataclass
class Grammar:
    rules: dict[str, Rule]
    start: str

    def __post_init__(self):
        if self.start not in self.rules:
            raise GrammarError(f"start symbol <{self.start}> has no rule")
        for rule in self.rules.values():
            for production in rule.productions:
                for symbol in production.symbols:
                    if symbol.kind == NONTERMINAL and symbol.value not in self.rules:
                        raise GrammarError(
                            f"rule <{rule.name}> references undefined nonterminal <{symbol.value}>"
                        )


@dataclass(frozen=True)
class MappingLimits:
    max_wraps: int = 10
    max_depth: int = 50

    def __post_init__(self):
        if self.max_wraps < 1 or self.max_depth < 1:
            raise ValueError("mapping limits must be at least 1")


@dataclass(frozen=True)
class Consumption:
    """One codon read: which genome position fed which rule choice."""

    position: int
    rule: str
    arity: int


@dataclass
class MappingTrace:
    codons_consumed: int
    wraps_used: int
    expr_starts: tuple[int, ...]
    consumptions: tuple[Consumption, ...]


def _production(*entries) -> Production:
    symbols = []
    for entry in entries:
        if entry.startswith("<") and entry.endswith(">"):
            symbols.append(Symbol.nt(entry[1:-1]))
        else:
            symbols.append(Symbol.t(entry))
    return Production(tuple(symbols))


def default_grammar() -> Grammar:
    """The built-in activation-function grammar.

    One start rule, three expression alternatives (with the third wrapped
    in grouping brackets), eight primitives, one input token, the four
    arithmetic operators and the four constants 0.1, 1.0, 2.0, 3.0.
    Production order is load-bearing: codon selection is index sensitive.
    """
    rules = {
        "activation_function": Rule(
            "activation_function", (_production("<acti_expr>"),)
        ),
        "acti_expr": Rule(
            "acti_expr",
            (
                _production("<acti_pre_op>"),
                _production("<acti_pre_op>", "<op>", "<acti_expr>"),
                _production("(", "<acti_pre_op>", "<op>", "<acti_expr>", ")"),
            ),
        ),
        "acti_pre_op": Rule(
            "acti_pre_op",
            (
                _production("sin", "(", "<acti_input>", ")"),
                _production("cos", "(", "<acti_input>", ")"),
                _production("tan", "(", "<acti_input>", ")"),
                _production("min", "(", "<acti_input>", ",", "<acti_var>", ")"),
                _production("max", "(", "<acti_input>", ",", "<acti_var>", ")"),
                _production("exp", "(", "<acti_input>", ")"),
                _production("tanh", "(", "<acti_input>", ")"),
                _production("pow", "(", "<acti_pre_op>", ",", "<acti_var>", ")"),
            ),
        ),
        "acti_input": Rule("acti_input", (_production("x"),)),
        "op": Rule(
            "op",
            (
                _production("+"),
                _production("/"),
                _production("*"),
                _production("-"),
            ),
        ),
        "acti_var": Rule(
            "acti_var",
            (
                _production("0.1"),
                _production("1.0"),
                _production("2.0"),
                _production("3.0"),
            ),
        ),
    }
    return Grammar(rules=rules, start="activation_function")


def validate_genotype(codons: Sequence[int]) -> tuple[int, ...]:
    """Check the fixed length and codon range, returning an immutable copy."""
    codons = tuple(int(c) for c in codons)
    if len(codons) != GENOME_LENGTH:
        raise ValueError(f"genotype must have {GENOME_LENGTH} codons, got {len(codons)}")
    for i, c in enumerate(codons):
        if not CODON_MIN <= c <= CODON_MAX:
            raise ValueError(f"codon {i} = {c} outside [{CODON_MIN}, {CODON_MAX}]")
    return codons


def random_genotype(rng) -> tuple[int, ...]:
    return tuple(int(c) for c in rng.integers(CODON_MIN, CODON_MAX + 1, GENOME_LENGTH))


def map_genotype(
    genotype: Sequence[int],
    grammar: Grammar | None = None,
    n_functions: int = 1,
    limits: MappingLimits = MappingLimits(),
) -> tuple[list[Expr], MappingTrace]:
    """Map one genome to ``n_functions`` expression trees.

    The start symbol is expanded once per function with a single codon
    cursor running across all expansions, so later functions read codons
    where the previous function stopped.  Raises MappingOverflowError when
    the wrap count would exceed ``limits.max_wraps`` or a rule nests deeper
    than ``limits.max_depth`` within itself.
    """
    genotype = validate_genotype(genotype)
    if n_functions < 1:
        raise ValueError("n_functions must be at least 1")
    grammar = grammar if grammar is not None else default_grammar()

    cursor = 0
    wraps = 0
    reads = 0
    consumptions: list[Consumption] = []
    starts: list[int] = []

    def take(rule: Rule) -> int:
        nonlocal cursor, wraps, reads
        if cursor >= len(genotype):
            wraps += 1
            if wraps > limits.max_wraps:
                raise MappingOverflowError(
                    f"mapping used more than {limits.max_wraps} wraps"
                )
            cursor = 0
        codon = genotype[cursor]
        consumptions.append(Consumption(cursor, rule.name, len(rule.productions)))
        cursor += 1
        reads += 1
        return codon

    def expand(name: str, nesting: dict[str, int]) -> list[str]:
        depth = nesting.get(name, 0) + 1
        if depth > limits.max_depth:
            raise MappingOverflowError(
                f"rule <{name}> nested deeper than {limits.max_depth}"
            )
        nesting[name] = depth
        rule = grammar.rules[name]
        if len(rule.productions) > 1:
            choice = take(rule) % len(rule.productions)
        else:
            choice = 0
        tokens: list[str] = []
        for symbol in rule.productions[choice].symbols:
            if symbol.kind == NONTERMINAL:
                tokens.extend(expand(symbol.value, nesting))
            else:
                tokens.append(symbol.value)
        nesting[name] = depth - 1
        return tokens

    exprs: list[Expr] = []
    for _ in range(n_functions):
        starts.append(reads)
        tokens = expand(grammar.start, {})
        try:
            exprs.append(tokens_to_expr(tokens, require_commas=False))
        except ExpressionError as err:
            raise GrammarError(
                f"derived tokens {' '.join(tokens)!r} do not form an expression: {err}"
            ) from err
    trace = MappingTrace(
        codons_consumed=reads,
        wraps_used=wraps,
        expr_starts=tuple(starts),
        consumptions=tuple(consumptions),
    )
    return exprs, trace


def used_codon_count(
    genotype: Sequence[int],
    grammar: Grammar | None = None,
    n_functions: int = 1,
    limits: MappingLimits = MappingLimits(),
) -> int:
    """Number of codon reads the mapping performs.

    Without wrapping, genome positions at or beyond this count never
    influence the phenotype.
    """
    _, trace = map_genotype(genotype, grammar, n_functions, limits)
    return trace.codons_consumed


# --- BNF text form ----------------------------------------------------------

_RULE_SEPARATOR = "::=="


def load_grammar(text: str) -> Grammar:
    """Parse a BNF document: ``<name> ::== alt | alt`` with ``|`` separators.

    Alternatives may continue on following lines.  Terminals can be quoted
    (quoted strings are re-tokenized, so a terminal like "pow (" becomes two
    tokens) or bare; spellings such as tensor, minimum or the unicode
    operators are normalised to the canonical tokens.  Raises GrammarError
    with a line number for syntax problems and for undefined nonterminals.
    """
    # (line_number, lhs_name, rhs_text) triples; continuations are folded in
    entries: list[tuple[int, str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if _RULE_SEPARATOR in line:
            lhs, rhs = line.split(_RULE_SEPARATOR, 1)
            lhs = lhs.strip()
            if not (lhs.startswith("<") and lhs.endswith(">") and len(lhs) > 2):
                raise GrammarError(f"line {lineno}: left-hand side {lhs!r} is not a <nonterminal>")
            entries.append((lineno, lhs[1:-1], rhs.strip()))
        else:
            if not entries:
                raise GrammarError(f"line {lineno}: expected a rule definition with {_RULE_SEPARATOR}")
            lineno0, name, rhs = entries[-1]
            entries[-1] = (lineno0, name, f"{rhs} {line}")

    if not entries:
        raise GrammarError("grammar text defines no rules")

    rules: dict[str, Rule] = {}
    for lineno, name, rhs in entries:
        if name in rules:
            raise GrammarError(f"line {lineno}: rule <{name}> defined twice")
        productions = []
        for alt in _split_alternatives(rhs, lineno):
            symbols = _parse_alternative(alt, lineno)
            if not symbols:
                raise GrammarError(f"line {lineno}: rule <{name}> has an empty alternative")
            productions.append(Production(tuple(symbols)))
        if not productions:
            raise GrammarError(f"line {lineno}: rule <{name}> has no productions")
        rules[name] = Rule(name, tuple(productions))

    return Grammar(rules=rules, start=entries[0][1])


def _split_alternatives(rhs: str, lineno: int) -> list[str]:
    """Split on | outside quotes."""
    parts = []
    current = []
    in_quote = False
    for ch in rhs:
        if ch == '"':
            in_quote = not in_quote
            current.append(ch)
        elif ch == "|" and not in_quote:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if in_quote:
        raise GrammarError(f"line {lineno}: unterminated quote")
    parts.append("".join(current))
    return parts


def _parse_alternative(alt: str, lineno: int) -> list[Symbol]:
    from .expressions import tokenize

    symbols: list[Symbol] = []
    pos = 0
    while pos < len(alt):
        ch = alt[pos]
        if ch.isspace():
            pos += 1
        elif ch == "<":
            end = alt.find(">", pos)
            if end < 0:
                raise GrammarError(f"line {lineno}: unterminated nonterminal in {alt!r}")
            symbols.append(Symbol.nt(alt[pos + 1 : end]))
            pos = end + 1
        elif ch == '"':
            end = alt.find('"', pos + 1)
            if end < 0:
                raise GrammarError(f"line {lineno}: unterminated quote in {alt!r}")
            quoted = alt[pos + 1 : end]
            try:
                for token, _ in tokenize(quoted):
                    symbols.append(Symbol.t(token))
            except ExpressionError as err:
                raise GrammarError(f"line {lineno}: bad terminal {quoted!r}: {err}") from err
            pos = end + 1
        else:
            end = pos
            while end < len(alt) and not alt[end].isspace() and alt[end] not in '<"|':
                end += 1
            try:
                for token, _ in tokenize(alt[pos:end]):
                    symbols.append(Symbol.t(token))
            except ExpressionError as err:
                raise GrammarError(f"line {lineno}: bad terminal {alt[pos:end]!r}: {err}") from err
            pos = end
    return symbols


def grammar_to_text(grammar: Grammar) -> str:
    """Serialize to the BNF form accepted by :func:`load_grammar`.

    The start rule is written first so the round trip preserves it.
    """
    names = [grammar.start] + [n for n in grammar.rules if n != grammar.start]
    lines = []
    for name in names:
        alternatives = []
        for production in grammar.rules[name].productions:
            rendered = []
            for symbol in production.symbols:
                if symbol.kind == NONTERMINAL:
                    rendered.append(f"<{symbol.value}>")
                else:
                    rendered.append(f'"{symbol.value}"')
            alternatives.append(" ".join(rendered))
        lines.append(f"<{name}> {_RULE_SEPARATOR} {' | '.join(alternatives)}")
    return "\n".join(lines) + "\n"
