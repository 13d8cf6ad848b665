"""Column reference extraction: which schema columns a query touches.

Every reference anywhere in the statement counts: projection, join
conditions, WHERE predicates, GROUP BY, ORDER BY, and IN-subqueries.
Aliases are resolved to base tables and ``*`` expands to all columns of the
tables in scope.
"""

from __future__ import annotations

from ..errors import UnresolvedIdentifier
from ..model import ColumnRef, Schema
from .nodes import (
    AggregateExpr,
    Arithmetic,
    BoolExpr,
    BoolOp,
    ColumnExpr,
    Comparison,
    FuncCall,
    InPredicate,
    IntervalLiteral,
    NotExpr,
    SelectStmt,
    ValueExpr,
)


class _Scope:
    """Alias/table bindings for one statement level."""

    def __init__(self, stmt: SelectStmt, schema: Schema):
        self.bindings: dict[str, str] = {}  # addressable key -> schema table name
        self.order: list[str] = []  # schema table names, FROM first
        for ref in stmt.scope_tables():
            table = schema.table(ref.name)
            if table is None:
                raise UnresolvedIdentifier(
                    f"table {ref.name!r} not found in schema {schema.db_id!r}")
            self.bindings[ref.key()] = table.name
            if ref.alias is not None:
                self.bindings.setdefault(ref.name.lower(), table.name)
            self.order.append(table.name)
        self.schema = schema

    def resolve(self, col: ColumnExpr) -> ColumnRef:
        if col.table is not None:
            table_name = self.bindings.get(col.table.lower())
            if table_name is None:
                raise UnresolvedIdentifier(
                    f"qualifier {col.table!r} names no table in scope")
            table = self.schema.table(table_name)
            assert table is not None
            if table.column(col.name) is None:
                raise UnresolvedIdentifier(
                    f"no column {col.name!r} in table {table.name!r}")
            return self.schema.resolve(ColumnRef(table.name, col.name))
        hits = []
        for table_name in dict.fromkeys(self.order):
            table = self.schema.table(table_name)
            assert table is not None
            if table.column(col.name) is not None:
                hits.append(table.name)
        if not hits:
            raise UnresolvedIdentifier(f"no table in scope has column {col.name!r}")
        if len(set(h.lower() for h in hits)) > 1:
            raise UnresolvedIdentifier(
                f"column {col.name!r} is ambiguous across tables {hits}")
        return self.schema.resolve(ColumnRef(hits[0], col.name))

    def all_columns(self) -> list[ColumnRef]:
        refs: list[ColumnRef] = []
        for table_name in dict.fromkeys(self.order):
            table = self.schema.table(table_name)
            assert table is not None
            refs.extend(ColumnRef(table.name, c.name) for c in table.columns)
        return refs


def columns_used_ordered(stmt: SelectStmt, schema: Schema) -> list[ColumnRef]:
    """Referenced columns in first-reference order (textual clause order)."""
    scope = _Scope(stmt, schema)
    out: list[ColumnRef] = []
    seen: set[ColumnRef] = set()

    def add(ref: ColumnRef) -> None:
        if ref not in seen:
            seen.add(ref)
            out.append(ref)

    def add_all_in_scope() -> None:
        for ref in scope.all_columns():
            add(ref)

    def walk_value(expr: ValueExpr) -> None:
        if isinstance(expr, ColumnExpr):
            add(scope.resolve(expr))
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
            add(scope.resolve(expr.subject))
            if expr.subquery is not None:
                for ref in columns_used_ordered(expr.subquery, schema):
                    add(ref)
        elif isinstance(expr, BoolOp):
            walk_bool(expr.left)
            walk_bool(expr.right)
        elif isinstance(expr, NotExpr):
            walk_bool(expr.operand)

    aliases = {item.alias.lower() for item in stmt.items if item.alias}

    if stmt.star:
        add_all_in_scope()
    for item in stmt.items:
        if isinstance(item.expr, AggregateExpr):
            if item.expr.arg is None:
                add_all_in_scope()  # COUNT(*) touches every column in scope
            else:
                add(scope.resolve(item.expr.arg))
        else:
            walk_value(item.expr)
    for join in stmt.joins:
        add(scope.resolve(join.left))
        add(scope.resolve(join.right))
    if stmt.where is not None:
        walk_bool(stmt.where)
    for col in stmt.group_by:
        add(scope.resolve(col))
    for order in stmt.order_by:
        if isinstance(order.expr, AggregateExpr):
            if order.expr.arg is not None:
                add(scope.resolve(order.expr.arg))
        elif order.expr.table is None and order.expr.name.lower() in aliases:
            continue  # references a projected expression, already collected
        else:
            add(scope.resolve(order.expr))
    return out


def columns_used(stmt: SelectStmt, schema: Schema) -> set[ColumnRef]:
    """Set of schema columns referenced anywhere in the statement."""
    return set(columns_used_ordered(stmt, schema))
