"""Tokenizer and recursive-descent parser for the SQL subset.

The parser resolves table aliases at parse time (a qualified column whose
qualifier names no FROM/JOIN table raises UnresolvedIdentifier) and rejects
out-of-subset constructs with a diagnostic naming the construct. Keywords
are reserved words and cannot be used as identifiers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import SqlSyntaxError, UnresolvedIdentifier, UnsupportedFeature
from .nodes import (
    AGGREGATE_FUNCS,
    INTERVAL_UNITS,
    AggregateExpr,
    Arithmetic,
    BoolExpr,
    BoolOp,
    ColumnExpr,
    Comparison,
    FuncCall,
    InPredicate,
    IntervalLiteral,
    Join,
    Literal,
    NotExpr,
    OrderItem,
    SelectItem,
    SelectStmt,
    TableRef,
    ValueExpr,
)

KEYWORDS = {
    "SELECT", "DISTINCT", "FROM", "JOIN", "INNER", "ON", "WHERE", "AND", "OR",
    "NOT", "IN", "GROUP", "BY", "ORDER", "ASC", "DESC", "LIMIT", "AS", "NULL",
    "INTERVAL", "COUNT", "SUM", "AVG", "MIN", "MAX",
    "DATE_SUB", "DATE_ADD", "CURDATE", "CURRENT_DATE", "DAY", "MONTH", "YEAR",
}

# Recognized so we can name the unsupported construct in the diagnostic.
UNSUPPORTED_KEYWORDS = {
    "LEFT": "LEFT JOIN", "RIGHT": "RIGHT JOIN", "FULL": "FULL JOIN",
    "OUTER": "OUTER JOIN", "CROSS": "CROSS JOIN", "UNION": "UNION",
    "INTERSECT": "INTERSECT", "EXCEPT": "EXCEPT", "HAVING": "HAVING",
    "OVER": "window functions", "LIKE": "LIKE", "BETWEEN": "BETWEEN",
    "EXISTS": "EXISTS", "CASE": "CASE expressions", "INSERT": "INSERT",
    "UPDATE": "UPDATE", "DELETE": "DELETE", "CREATE": "DDL", "WITH": "CTEs",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+\.\d+|\d+)
  | (?P<string>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|!=|<>|[=<>(),.;*+\-/])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD | IDENT | NUMBER | STRING | OP | EOF
    value: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise SqlSyntaxError(f"unexpected character {text[pos]!r} at offset {pos}")
        if match.lastgroup != "ws":
            value = match.group()
            if match.lastgroup == "ident":
                upper = value.upper()
                if upper in KEYWORDS or upper in UNSUPPORTED_KEYWORDS:
                    tokens.append(Token("KEYWORD", upper, pos))
                else:
                    tokens.append(Token("IDENT", value, pos))
            elif match.lastgroup == "number":
                tokens.append(Token("NUMBER", value, pos))
            elif match.lastgroup == "string":
                tokens.append(Token("STRING", value, pos))
            else:
                tokens.append(Token("OP", value, pos))
        pos = match.end()
    tokens.append(Token("EOF", "", pos))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.depth = 0  # subquery nesting

    # -- token plumbing ------------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "KEYWORD" and tok.value in words

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.value in ops

    def accept_keyword(self, word: str) -> bool:
        if self.at_keyword(word):
            self.advance()
            return True
        return False

    def accept_op(self, op: str) -> bool:
        if self.at_op(op):
            self.advance()
            return True
        return False

    def expect_keyword(self, word: str) -> None:
        if not self.accept_keyword(word):
            self.fail(f"expected {word}")

    def expect_op(self, op: str) -> None:
        if not self.accept_op(op):
            self.fail(f"expected {op!r}")

    def fail(self, message: str) -> None:
        tok = self.peek()
        got = tok.value or "end of input"
        if tok.kind == "KEYWORD" and tok.value in UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeature(
                f"{UNSUPPORTED_KEYWORDS[tok.value]} is not supported")
        raise SqlSyntaxError(f"{message}, got {got!r} at offset {tok.pos}")

    def expect_ident(self, what: str) -> str:
        tok = self.peek()
        if tok.kind != "IDENT":
            self.fail(f"expected {what}")
        return self.advance().value

    # -- grammar ---------------------------------------------------------------

    def parse_statement(self) -> SelectStmt:
        stmt = self.parse_select()
        self.accept_op(";")
        tok = self.peek()
        if tok.kind != "EOF":
            if tok.kind == "KEYWORD" and tok.value == "SELECT":
                raise UnsupportedFeature("multiple statements are not supported")
            self.fail("expected end of statement")
        return stmt

    def parse_select(self) -> SelectStmt:
        if not self.accept_keyword("SELECT"):
            self.fail("expected SELECT")
        distinct = self.accept_keyword("DISTINCT")

        star = False
        items: list[SelectItem] = []
        if self.accept_op("*"):
            star = True
            if self.at_op(","):
                raise UnsupportedFeature("mixing * with other select items")
        else:
            items.append(self.parse_select_item())
            while self.accept_op(","):
                items.append(self.parse_select_item())

        self.expect_keyword("FROM")
        from_table = self.parse_table_ref()

        joins: list[Join] = []
        while self.at_keyword("JOIN", "INNER"):
            self.accept_keyword("INNER")
            self.expect_keyword("JOIN")
            table = self.parse_table_ref()
            self.expect_keyword("ON")
            left = self.parse_column_ref()
            self.expect_op("=")
            right = self.parse_column_ref()
            joins.append(Join(table=table, left=left, right=right))

        where = None
        if self.accept_keyword("WHERE"):
            where = self.parse_bool_expr()

        group_by: list[ColumnExpr] = []
        if self.accept_keyword("GROUP"):
            self.expect_keyword("BY")
            group_by.append(self.parse_column_ref())
            while self.accept_op(","):
                group_by.append(self.parse_column_ref())

        order_by: list[OrderItem] = []
        if self.accept_keyword("ORDER"):
            self.expect_keyword("BY")
            order_by.append(self.parse_order_item())
            while self.accept_op(","):
                order_by.append(self.parse_order_item())

        limit = None
        if self.accept_keyword("LIMIT"):
            tok = self.peek()
            if tok.kind != "NUMBER" or "." in tok.value:
                self.fail("expected integer after LIMIT")
            limit = int(self.advance().value)

        stmt = SelectStmt(
            from_table=from_table,
            items=tuple(items),
            star=star,
            distinct=distinct,
            joins=tuple(joins),
            where=where,
            group_by=tuple(group_by),
            order_by=tuple(order_by),
            limit=limit,
        )
        self.check_scope(stmt)
        return stmt

    def parse_select_item(self) -> SelectItem:
        if self.at_keyword(*AGGREGATE_FUNCS):
            expr: ColumnExpr | AggregateExpr | ValueExpr = self.parse_aggregate()
        else:
            expr = self.parse_value_expr()
        alias = None
        if self.accept_keyword("AS"):
            alias = self.expect_ident("alias after AS")
        elif self.peek().kind == "IDENT":
            alias = self.advance().value
        return SelectItem(expr=expr, alias=alias)

    def parse_aggregate(self) -> AggregateExpr:
        func = self.advance().value
        self.expect_op("(")
        if self.accept_op("*"):
            if func != "COUNT":
                raise UnsupportedFeature(f"{func}(*) is not supported")
            arg = None
        else:
            if self.at_keyword("DISTINCT"):
                raise UnsupportedFeature("DISTINCT inside aggregates")
            arg = self.parse_column_ref()
        self.expect_op(")")
        return AggregateExpr(func=func, arg=arg)

    def parse_table_ref(self) -> TableRef:
        name = self.expect_ident("table name")
        alias = None
        if self.accept_keyword("AS"):
            alias = self.expect_ident("alias after AS")
        elif self.peek().kind == "IDENT":
            alias = self.advance().value
        return TableRef(name=name, alias=alias)

    def parse_column_ref(self) -> ColumnExpr:
        first = self.expect_ident("column reference")
        if self.accept_op("."):
            name = self.expect_ident("column name after '.'")
            return ColumnExpr(table=first, name=name)
        return ColumnExpr(table=None, name=first)

    # Boolean expressions: OR < AND < NOT < predicate.

    def parse_bool_expr(self) -> BoolExpr:
        left = self.parse_and_expr()
        while self.accept_keyword("OR"):
            right = self.parse_and_expr()
            left = BoolOp(op="OR", left=left, right=right)
        return left

    def parse_and_expr(self) -> BoolExpr:
        left = self.parse_not_expr()
        while self.accept_keyword("AND"):
            right = self.parse_not_expr()
            left = BoolOp(op="AND", left=left, right=right)
        return left

    def parse_not_expr(self) -> BoolExpr:
        if self.accept_keyword("NOT"):
            return NotExpr(operand=self.parse_not_expr())
        return self.parse_predicate()

    def parse_predicate(self) -> BoolExpr:
        # '(' may open either a grouped boolean expression or a parenthesized
        # value expression that starts a comparison; try the boolean reading
        # first and backtrack if it fails or is followed by a comparison op.
        if self.at_op("("):
            snapshot = self.i
            self.advance()
            try:
                inner = self.parse_bool_expr()
                self.expect_op(")")
            except SqlSyntaxError:
                self.i = snapshot
            else:
                if not self.at_op("=", "!=", "<>", "<", "<=", ">", ">="):
                    return inner
                self.i = snapshot
        return self.parse_comparison()

    def parse_comparison(self) -> BoolExpr:
        left = self.parse_value_expr()
        if self.at_keyword("IN", "NOT"):
            if not isinstance(left, ColumnExpr):
                self.fail("IN requires a column on the left")
            negated = self.accept_keyword("NOT")
            self.expect_keyword("IN")
            return self.parse_in_tail(left, negated)
        if not self.at_op("=", "!=", "<>", "<", "<=", ">", ">="):
            self.fail("expected comparison operator")
        op = self.advance().value
        if op == "<>":
            op = "!="
        right = self.parse_value_expr()
        return Comparison(op=op, left=left, right=right)

    def parse_in_tail(self, subject: ColumnExpr, negated: bool) -> InPredicate:
        self.expect_op("(")
        if self.at_keyword("SELECT"):
            if self.depth >= 1:
                raise UnsupportedFeature("nested subqueries (only one level of IN-subquery)")
            self.depth += 1
            try:
                sub = self.parse_select()
            finally:
                self.depth -= 1
            self.expect_op(")")
            return InPredicate(subject=subject, negated=negated, subquery=sub)
        values = [self.parse_literal()]
        while self.accept_op(","):
            values.append(self.parse_literal())
        self.expect_op(")")
        return InPredicate(subject=subject, negated=negated, values=tuple(values))

    # Value expressions: additive < multiplicative < factor.

    def parse_value_expr(self) -> ValueExpr:
        left = self.parse_term()
        while self.at_op("+", "-"):
            op = self.advance().value
            right = self.parse_term()
            left = Arithmetic(op=op, left=left, right=right)
        return left

    def parse_term(self) -> ValueExpr:
        left = self.parse_factor()
        while self.at_op("*", "/"):
            op = self.advance().value
            right = self.parse_factor()
            left = Arithmetic(op=op, left=left, right=right)
        return left

    def parse_factor(self) -> ValueExpr:
        tok = self.peek()
        if self.accept_op("("):
            inner = self.parse_value_expr()
            self.expect_op(")")
            return inner
        if self.accept_op("-"):
            operand = self.parse_factor()
            if isinstance(operand, Literal) and isinstance(operand.value, (int, float)):
                return Literal(value=-operand.value)
            return Arithmetic(op="-", left=Literal(value=0), right=operand)
        if tok.kind in ("NUMBER", "STRING") or self.at_keyword("NULL"):
            return self.parse_literal()
        if self.at_keyword("CURRENT_DATE"):
            self.advance()
            return FuncCall(name="CURRENT_DATE")
        if self.at_keyword("CURDATE"):
            self.advance()
            self.expect_op("(")
            self.expect_op(")")
            return FuncCall(name="CURDATE")
        if self.at_keyword("DATE_SUB", "DATE_ADD"):
            name = self.advance().value
            self.expect_op("(")
            base = self.parse_value_expr()
            self.expect_op(",")
            interval = self.parse_interval()
            self.expect_op(")")
            return FuncCall(name=name, args=(base, interval))
        if tok.kind == "IDENT":
            return self.parse_column_ref()
        self.fail("expected value expression")
        raise AssertionError("unreachable")

    def parse_interval(self) -> IntervalLiteral:
        self.expect_keyword("INTERVAL")
        sign = -1 if self.accept_op("-") else 1
        tok = self.peek()
        if tok.kind != "NUMBER" or "." in tok.value:
            self.fail("expected integer interval amount")
        amount = sign * int(self.advance().value)
        unit_tok = self.peek()
        if unit_tok.kind != "KEYWORD" or unit_tok.value not in INTERVAL_UNITS:
            raise UnsupportedFeature(
                f"interval unit {unit_tok.value!r} (supported: {', '.join(INTERVAL_UNITS)})")
        self.advance()
        return IntervalLiteral(amount=amount, unit=unit_tok.value)

    def parse_literal(self) -> Literal:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return Literal(value=float(tok.value) if "." in tok.value else int(tok.value))
        if tok.kind == "STRING":
            self.advance()
            return Literal(value=tok.value[1:-1].replace("''", "'"))
        if self.accept_keyword("NULL"):
            return Literal(value=None)
        if self.accept_op("-"):
            inner = self.parse_literal()
            if not isinstance(inner.value, (int, float)):
                self.fail("expected number after '-'")
            return Literal(value=-inner.value)
        self.fail("expected literal")
        raise AssertionError("unreachable")

    def parse_order_item(self) -> OrderItem:
        if self.at_keyword(*AGGREGATE_FUNCS):
            expr: ColumnExpr | AggregateExpr = self.parse_aggregate()
        else:
            expr = self.parse_column_ref()
        descending = False
        if self.accept_keyword("DESC"):
            descending = True
        else:
            self.accept_keyword("ASC")
        return OrderItem(expr=expr, descending=descending)

    # -- alias resolution ------------------------------------------------------

    def check_scope(self, stmt: SelectStmt) -> None:
        """Qualified refs must name a FROM/JOIN table or alias; aliases unique."""
        keys: set[str] = set()
        for ref in stmt.scope_tables():
            key = ref.key()
            if key in keys:
                raise UnresolvedIdentifier(f"duplicate table name or alias {key!r}")
            keys.add(key)
            # A table's own name stays addressable unless shadowed by an alias.
            if ref.alias is not None:
                keys.add(ref.name.lower())

        def check_col(col: ColumnExpr) -> None:
            if col.table is not None and col.table.lower() not in keys:
                raise UnresolvedIdentifier(
                    f"qualifier {col.table!r} names no table in scope")

        def walk_value(expr: ValueExpr) -> None:
            if isinstance(expr, ColumnExpr):
                check_col(expr)
            elif isinstance(expr, Arithmetic):
                walk_value(expr.left)
                walk_value(expr.right)
            elif isinstance(expr, FuncCall):
                for arg in expr.args:
                    if not isinstance(arg, IntervalLiteral):
                        walk_value(arg)

        def walk_bool(expr: BoolExpr) -> None:
            if isinstance(expr, Comparison):
                walk_value(expr.left)
                walk_value(expr.right)
            elif isinstance(expr, InPredicate):
                check_col(expr.subject)
                # Subquery scope is checked when the subquery is parsed.
            elif isinstance(expr, BoolOp):
                walk_bool(expr.left)
                walk_bool(expr.right)
            elif isinstance(expr, NotExpr):
                walk_bool(expr.operand)

        for item in stmt.items:
            if isinstance(item.expr, AggregateExpr):
                if item.expr.arg is not None:
                    check_col(item.expr.arg)
            else:
                walk_value(item.expr)
        for join in stmt.joins:
            check_col(join.left)
            check_col(join.right)
        if stmt.where is not None:
            walk_bool(stmt.where)
        for col in stmt.group_by:
            check_col(col)
        for order in stmt.order_by:
            if isinstance(order.expr, AggregateExpr):
                if order.expr.arg is not None:
                    check_col(order.expr.arg)
            else:
                check_col(order.expr)


def parse_sql(text: str) -> SelectStmt:
    """Parse one SELECT statement of the supported subset into an AST."""
    if not text or not text.strip():
        raise SqlSyntaxError("empty SQL text")
    return _Parser(tokenize(text)).parse_statement()


def render_sql(stmt: SelectStmt) -> str:
    """Canonical text for an AST; parse(render(ast)) == ast."""
    return stmt.render()
