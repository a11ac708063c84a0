"""Text format for reaction networks.

One statement per line (';' also separates statements):

    param d = 0.5
    species X = 1.0
    nn A1(X) {hidden=5, layers=2, constraint=nonneg}
    0 --[hill(X; v, K, n)]--> X
    X --[d]--> 0
    2X --[k_b]--> X2

Sides are '0' (nothing) or '+'-separated terms with optional integer
counts.  Rates are algebraic expressions over parameters, species, and
't' (with + - * / ^ and hill(X; v, K, n)), or a call to a declared
neural slot.  Species are declared explicitly or implicitly by appearing
in a reaction side; bare rate symbols that are not species become
parameters.  '#' starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .network import (
    Algebraic,
    BinOp,
    Constant,
    Hill,
    Neg,
    NetworkError,
    Neural,
    Num,
    Reaction,
    ReactionNetwork,
    Species,
    Sym,
    expr_symbols,
)
from .neural import Constraint, NeuralRateSpec

__all__ = ["parse_network", "DslError"]


class DslError(NetworkError):
    def __init__(self, message, line, col):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
      (?P<ws>[ \t]+)
    | (?P<comment>\#[^\n]*)
    | (?P<newline>\n)
    | (?P<arrow_open>--\[)
    | (?P<arrow_close>\]-->)
    | (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
    | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<op>[-+*/^(),;={}])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "newline":
            tokens.append(Token("sep", "\n", line, col))
            line += 1
            col = 1
        else:
            if kind not in ("ws", "comment"):
                if kind == "op" and tok == ";":
                    kind = "semi"
                tokens.append(Token(kind, tok, line, col))
            col += len(tok)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# statement-level ASTs, pre-resolution
@dataclass
class _ParamDecl:
    name: str
    value: float | None


@dataclass
class _SpeciesDecl:
    name: str
    value: float | None


@dataclass
class _NnDecl:
    name: str
    inputs: list
    hidden: int
    layers: int
    constraint: Constraint


@dataclass
class _RxnStmt:
    substrates: dict
    products: dict
    rate: object  # expression tree or _NnCall
    token: Token


@dataclass(frozen=True)
class _NnCall:
    name: str
    args: tuple


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise DslError(message, tok.line, tok.col)

    def expect(self, kind, text=None):
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            self.fail(f"expected {want!r}, got {tok.text!r}", tok)
        return tok

    def skip_seps(self):
        while self.peek().kind in ("sep", "semi"):
            self.next()

    def statements(self):
        out = []
        self.skip_seps()
        while self.peek().kind != "eof":
            out.append(self.statement())
            if self.peek().kind not in ("sep", "semi", "eof"):
                self.fail(f"unexpected {self.peek().text!r} after statement")
            self.skip_seps()
        return out

    def statement(self):
        tok = self.peek()
        if tok.kind == "name" and tok.text in ("param", "species", "nn"):
            return self.decl()
        return self.reaction()

    def decl(self):
        kw = self.next().text
        name = self.expect("name").text
        if kw in ("param", "species"):
            value = None
            if self.peek().text == "=":
                self.next()
                value = self.number()
            return (
                _ParamDecl(name, value) if kw == "param" else _SpeciesDecl(name, value)
            )
        # nn NAME(in1, in2) {hidden=.., layers=.., constraint=..}
        self.expect("op", "(")
        inputs = [self.expect("name").text]
        while self.peek().text == ",":
            self.next()
            inputs.append(self.expect("name").text)
        self.expect("op", ")")
        hidden, layers, constraint = 5, 2, Constraint.nonneg()
        if self.peek().text == "{":
            self.next()
            while self.peek().text != "}":
                key = self.expect("name").text
                self.expect("op", "=")
                if key == "hidden":
                    hidden = int(self.number())
                elif key == "layers":
                    layers = int(self.number())
                elif key == "constraint":
                    constraint = self.constraint_value()
                else:
                    self.fail(f"unknown nn attribute '{key}'")
                if self.peek().text == ",":
                    self.next()
            self.expect("op", "}")
        return _NnDecl(name, inputs, hidden, layers, constraint)

    def constraint_value(self):
        kind = self.expect("name").text
        bounds = None
        if self.peek().text == "(":
            self.next()
            lo = self.signed_number()
            self.expect("op", ",")
            hi = self.signed_number()
            self.expect("op", ")")
            bounds = (lo, hi)
        if kind == "nonneg":
            return Constraint.nonneg()
        if kind == "bounded":
            if bounds is None:
                self.fail("bounded constraint needs (lo, hi)")
            return Constraint.bounded(*bounds)
        if kind == "mono_dec":
            return Constraint.mono_dec(bounds)
        if kind == "mono_inc":
            return Constraint.mono_inc(bounds)
        self.fail(f"unknown constraint '{kind}'")

    def number(self):
        return float(self.expect("number").text)

    def signed_number(self):
        sign = 1.0
        if self.peek().text == "-":
            self.next()
            sign = -1.0
        return sign * self.number()

    def reaction(self):
        tok = self.peek()
        substrates = self.side()
        self.expect("arrow_open")
        rate = self.expression()
        self.expect("arrow_close")
        products = self.side()
        return _RxnStmt(substrates, products, rate, tok)

    def side(self):
        if (
            self.peek().kind == "number"
            and self.peek().text == "0"
            and self.tokens[self.i + 1].kind != "name"
        ):
            self.next()
            return {}
        out = {}
        while True:
            count = 1
            if self.peek().kind == "number":
                tok = self.next()
                if not tok.text.isdigit():
                    self.fail("stoichiometric counts must be integers", tok)
                count = int(tok.text)
            name = self.expect("name").text
            out[name] = out.get(name, 0) + count
            if self.peek().text != "+":
                return out
            self.next()

    # expression grammar: sum > product > unary > power (right-assoc) > atom
    def expression(self):
        left = self.product()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            left = BinOp(op, left, self.product())
        return left

    def product(self):
        left = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.peek().text == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            self.next()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.next()
        if tok.kind == "number":
            return Num(float(tok.text))
        if tok.text == "(":
            inner = self.expression()
            self.expect("op", ")")
            return inner
        if tok.kind == "name":
            if self.peek().text != "(":
                return Sym(tok.text)
            self.next()
            if tok.text == "hill":
                x = self.expression()
                self.expect("semi")
                v = self.expression()
                self.expect("op", ",")
                k = self.expression()
                self.expect("op", ",")
                n = self.expression()
                self.expect("op", ")")
                return Hill(x, v, k, n)
            args = [self.expression()]
            while self.peek().text == ",":
                self.next()
                args.append(self.expression())
            self.expect("op", ")")
            return _NnCall(tok.text, tuple(args))
        self.fail(f"unexpected {tok.text!r} in expression", tok)


def _contains_nn_call(expr):
    if isinstance(expr, _NnCall):
        return True
    if isinstance(expr, Neg):
        return _contains_nn_call(expr.operand)
    if isinstance(expr, BinOp):
        return _contains_nn_call(expr.left) or _contains_nn_call(expr.right)
    if isinstance(expr, Hill):
        return any(_contains_nn_call(e) for e in (expr.x, expr.v, expr.k, expr.n))
    return False


def parse_network(text: str) -> ReactionNetwork:
    """Parse DSL source into a validated-shape ReactionNetwork.

    Raises DslError (with line/col) on syntax errors, undeclared slot
    calls, or duplicate declarations.
    """
    stmts = _Parser(_tokenize(text)).statements()

    species_order = []
    initial = {}
    params = []
    defaults = {}
    neural = {}
    neural_order = []

    def add_species(name, value=None):
        if name not in species_order:
            species_order.append(name)
        if value is not None:
            initial[name] = value

    for stmt in stmts:
        if isinstance(stmt, _SpeciesDecl):
            if stmt.name in species_order:
                raise NetworkError(f"duplicate species '{stmt.name}'")
            add_species(stmt.name, stmt.value)
        elif isinstance(stmt, _ParamDecl):
            if stmt.name in params:
                raise NetworkError(f"duplicate parameter '{stmt.name}'")
            params.append(stmt.name)
            if stmt.value is not None:
                defaults[stmt.name] = stmt.value
        elif isinstance(stmt, _NnDecl):
            if stmt.name in neural:
                raise NetworkError(f"duplicate neural slot '{stmt.name}'")
            neural[stmt.name] = NeuralRateSpec(
                input_dim=len(stmt.inputs),
                hidden_layers=stmt.layers,
                hidden_width=stmt.hidden,
                constraint=stmt.constraint,
            )
            neural_order.append(stmt.name)

    for stmt in stmts:
        if isinstance(stmt, _RxnStmt):
            for name in list(stmt.substrates) + list(stmt.products):
                add_species(name)

    reactions = []
    for stmt in stmts:
        if not isinstance(stmt, _RxnStmt):
            continue
        rate = _resolve_rate(stmt, species_order, params, neural)
        reactions.append(Reaction(stmt.substrates, stmt.products, rate))

    species = [Species(name, i) for i, name in enumerate(species_order)]
    return ReactionNetwork(
        species=species,
        reactions=reactions,
        parameters=params,
        neural=neural,
        neural_order=neural_order,
        initial=initial,
        defaults=defaults,
    )


def _resolve_rate(stmt, species_order, params, neural):
    expr = stmt.rate
    tok = stmt.token
    if isinstance(expr, _NnCall):
        if expr.name not in neural:
            raise DslError(f"undeclared neural slot '{expr.name}'", tok.line, tok.col)
        inputs = []
        for arg in expr.args:
            if not isinstance(arg, Sym) or arg.name not in species_order:
                raise DslError(
                    f"neural slot '{expr.name}' takes species arguments only",
                    tok.line,
                    tok.col,
                )
            inputs.append(arg.name)
        return Neural(expr.name, tuple(inputs))
    if _contains_nn_call(expr):
        raise DslError(
            "a neural slot call must be the whole rate expression", tok.line, tok.col
        )
    # implicitly declare unknown bare symbols as parameters
    for sym in expr_symbols(expr):
        if sym == "t" or sym in species_order or sym in params:
            continue
        if sym in neural:
            raise DslError(
                f"neural slot '{sym}' used without call arguments", tok.line, tok.col
            )
        params.append(sym)
    if isinstance(expr, Sym) and expr.name in params:
        return Constant(expr.name)
    return Algebraic(expr)
