"""Lexer and recursive-descent parser for the `.aool` surface syntax."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    UNIT,
    Call,
    Cast,
    ClassDecl,
    Expr,
    FieldDecl,
    FinishAsync,
    InterfaceDecl,
    InterfaceMethod,
    Let,
    MethodDecl,
    MethodSig,
    New,
    NewAtomic,
    Null,
    Program,
    Qualifier,
    Select,
    SourceSpan,
    Update,
    Var,
)

KEYWORDS = frozenset(
    "interface extends class implements def let in new atomic non_atomic finish async null".split()
    + [UNIT]
)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: SourceSpan | None = None
    severity: str = "error"

    def format(self) -> str:
        where = f"{self.span}: " if self.span is not None else ""
        return f"{where}{self.severity}[{self.code}]: {self.message}"

    def __str__(self) -> str:
        return self.format()


class DiagnosticError(Exception):
    """Raised by any stage that rejects its input; carries one or more diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(d.format() for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "kw", "punct", "eof"
    text: str
    line: int
    col: int

    @property
    def end_col(self) -> int:
        return self.col + len(self.text)


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_$]*)|(?P<punct>->|[{}()\[\]:,;.=])"
)


def tokenize(src: str, file: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            span = SourceSpan(file, line, col, line, col + 1)
            raise DiagnosticError([Diagnostic("E-LEX", f"unexpected character {src[pos]!r}", span)])
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind == "ident":
                tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
            elif kind == "punct":
                tokens.append(Token("punct", text, line, col))
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


_EXPR_START = {"let", "finish", "new", "null", "("}


MAX_NESTING = 2000


class Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.toks = tokens
        self.i = 0
        self.file = file
        self.seq_counter = 0
        self.depth = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("kw", "punct") and self.tok.text == text

    def span_from(self, start: Token) -> SourceSpan:
        last = self.toks[max(self.i - 1, 0)]
        return SourceSpan(self.file, start.line, start.col, last.line, last.end_col)

    def error(self, message: str, tok: Token | None = None, code: str = "E-PARSE"):
        t = tok or self.tok
        span = SourceSpan(self.file, t.line, t.col, t.line, t.end_col)
        return DiagnosticError([Diagnostic(code, message, span)])

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected '{text}', found '{found}'")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            raise self.error(f"expected {what}, found '{found}'")
        t = self.tok
        self.i += 1
        return t.text

    def type_name(self) -> str:
        if self.at(UNIT):
            self.i += 1
            return UNIT
        return self.ident("type name")

    def qualifier(self) -> Qualifier:
        for q in Qualifier:
            if self.at(q.value):
                self.i += 1
                return q
        raise self.error(f"expected 'atomic' or 'non_atomic', found '{self.tok.text}'")

    # declarations
    def program(self) -> Program:
        interfaces: list[InterfaceDecl] = []
        classes: list[ClassDecl] = []
        names: set[str] = set()
        while self.at("interface") or self.at("class"):
            start = self.tok
            decl = self.interface() if self.at("interface") else self.class_decl()
            if decl.name in names:
                raise self.error(f"duplicate declaration of '{decl.name}'", start, "E-DUP")
            names.add(decl.name)
            (interfaces if isinstance(decl, InterfaceDecl) else classes).append(decl)
        main = self.seq()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected '{self.tok.text}' after main expression")
        return Program(tuple(interfaces), tuple(classes), main)

    def interface(self) -> InterfaceDecl:
        start = self.expect("interface")
        name = self.ident("interface name")
        if self.at("extends"):
            self.i += 1
            first = self.ident("interface name")
            self.expect(",")
            second = self.ident("interface name")
            return InterfaceDecl(name, (), (first, second), span=self.span_from(start))
        self.expect("{")
        methods: list[InterfaceMethod] = []
        seen: set[str] = set()
        while not self.at("}"):
            mstart = self.tok
            sig = self.signature()
            annotations = None
            if self.at("["):
                self.i += 1
                anns = []
                while not self.at("]"):
                    if anns:
                        self.expect(",")
                    self.expect("(")
                    q1 = self.qualifier()
                    self.expect("->")
                    q2 = self.qualifier()
                    self.expect(")")
                    anns.append((q1, q2))
                self.expect("]")
                annotations = tuple(anns)
            if sig.name in seen:
                raise self.error(f"duplicate method '{sig.name}' in interface {name}", mstart, "E-DUP")
            seen.add(sig.name)
            methods.append(InterfaceMethod(sig, annotations, span=self.span_from(mstart)))
        self.expect("}")
        return InterfaceDecl(name, tuple(methods), None, span=self.span_from(start))

    def signature(self) -> MethodSig:
        name = self.ident("method name")
        self.expect("(")
        param = self.ident("parameter name")
        self.expect(":")
        ptype = self.type_name()
        self.expect(")")
        self.expect(":")
        rtype = self.type_name()
        return MethodSig(name, param, ptype, rtype)

    def class_decl(self) -> ClassDecl:
        start = self.expect("class")
        name = self.ident("class name")
        self.expect("implements")
        iface = self.ident("interface name")
        self.expect("{")
        fields: list[FieldDecl] = []
        methods: list[MethodDecl] = []
        seen_f: set[str] = set()
        seen_m: set[str] = set()
        while not self.at("}"):
            mstart = self.tok
            if self.at("def"):
                self.i += 1
                sig = self.signature()
                self.expect("{")
                body = self.seq()
                self.expect("}")
                if sig.name in seen_m:
                    raise self.error(f"duplicate method '{sig.name}' in class {name}", mstart, "E-DUP")
                seen_m.add(sig.name)
                methods.append(
                    MethodDecl(sig.name, sig.param, sig.param_type, sig.ret_type, body, span=self.span_from(mstart))
                )
            else:
                fname = self.ident("field name or 'def'")
                self.expect(":")
                atomic = False
                if self.at("atomic"):
                    self.i += 1
                    atomic = True
                ftype = self.type_name()
                if fname in seen_f:
                    raise self.error(f"duplicate field '{fname}' in class {name}", mstart, "E-DUP")
                seen_f.add(fname)
                fields.append(FieldDecl(fname, ftype, atomic, span=self.span_from(mstart)))
        self.expect("}")
        return ClassDecl(name, iface, tuple(fields), tuple(methods), span=self.span_from(start))

    # expressions
    def seq(self) -> Expr:
        start = self.tok
        first = self.expr()
        if not self.at(";"):
            return first
        self.i += 1
        name = f"_${self.seq_counter}"
        self.seq_counter += 1
        rest = self.seq()
        return Let(name, None, first, rest, span=self.span_from(start))

    def expr(self) -> Expr:
        # an explicit bound, so the verdict does not depend on the interpreter's stack
        if self.depth >= MAX_NESTING:
            raise self.error("expression nesting too deep")
        self.depth += 1
        try:
            return self._expr()
        finally:
            self.depth -= 1

    def _expr(self) -> Expr:
        start = self.tok
        if self.at("let"):
            self.i += 1
            name = self.ident("variable name")
            decl = None
            if self.at(":"):
                self.i += 1
                decl = self.type_name()
            self.expect("=")
            init = self.seq()
            self.expect("in")
            body = self.seq()
            return Let(name, decl, init, body, span=self.span_from(start))
        if self.at("finish"):
            self.i += 1
            self.expect("{")
            parts = []
            for _ in range(2):
                self.expect("async")
                self.expect("{")
                parts.append(self.seq())
                self.expect("}")
            self.expect("}")
            self.expect(";")
            cont = self.seq()
            return FinishAsync(parts[0], parts[1], cont, span=self.span_from(start))
        if self.at("new"):
            self.i += 1
            if self.at("atomic"):
                self.i += 1
                cls = self.ident("class name")
                return NewAtomic(cls, span=self.span_from(start))
            cls = self.ident("class name")
            return New(cls, span=self.span_from(start))
        if self.at("null"):
            self.i += 1
            return Null(span=self.span_from(start))
        if self.at("("):
            if self._looks_like_cast():
                self.i += 1
                target = self.type_name()
                self.expect(")")
                inner = self.expr()
                return Cast(target, inner, span=self.span_from(start))
            self.i += 1
            inner = self.seq()
            self.expect(")")
            return inner
        if self.tok.kind == "ident":
            name = self.ident()
            if not self.at("."):
                return Var(name, span=self.span_from(start))
            self.i += 1
            member = self.ident("field or method name")
            if self.at("("):
                self.i += 1
                arg = self.seq()
                self.expect(")")
                return Call(name, member, arg, span=self.span_from(start))
            if self.at("="):
                self.i += 1
                value = self.expr()
                return Update(name, member, value, span=self.span_from(start))
            return Select(name, member, span=self.span_from(start))
        found = self.tok.text or "end of input"
        raise self.error(f"expected an expression, found '{found}'")

    def _looks_like_cast(self) -> bool:
        t1, t2, t3 = self.peek(1), self.peek(2), self.peek(3)
        if not (t1.kind == "ident" or (t1.kind == "kw" and t1.text == UNIT)):
            return False
        if not (t2.kind == "punct" and t2.text == ")"):
            return False
        return t3.kind == "ident" or (t3.kind in ("kw", "punct") and t3.text in _EXPR_START)


def parse_program(src: str, file: str = "<input>") -> Program:
    """Parse a whole program; raises DiagnosticError on any lexical or syntax error."""
    try:
        tokens = tokenize(src, file)
        return Parser(tokens, file).program()
    except RecursionError:
        span = SourceSpan(file, 1, 1, 1, 1)
        raise DiagnosticError([Diagnostic("E-PARSE", "expression nesting too deep", span)]) from None


def parse_expr(src: str, file: str = "<input>") -> Expr:
    tokens = tokenize(src, file)
    parser = Parser(tokens, file)
    e = parser.seq()
    if parser.tok.kind != "eof":
        raise parser.error(f"unexpected '{parser.tok.text}'")
    return e


def try_parse(src: str, file: str = "<input>") -> Program | list[Diagnostic]:
    try:
        return parse_program(src, file)
    except DiagnosticError as err:
        return err.diagnostics
