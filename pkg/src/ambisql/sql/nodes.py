"""AST node types for the supported SQL subset.

Single SELECT statements with inner equi-joins, WHERE (comparisons,
AND/OR/NOT, IN with value lists or a one-level subquery), GROUP BY, the five
aggregates, ORDER BY, LIMIT and DISTINCT. Value expressions allow basic
arithmetic and the date helpers needed for relative-date predicates.

Nodes are frozen dataclasses; AST equality is structural, which is what the
parse -> render -> parse fixpoint tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

AGGREGATE_FUNCS = ("COUNT", "SUM", "AVG", "MIN", "MAX")
DATE_FUNCS = ("DATE_SUB", "DATE_ADD", "CURDATE", "CURRENT_DATE")
INTERVAL_UNITS = ("DAY", "MONTH", "YEAR")


@dataclass(frozen=True)
class ColumnExpr:
    table: str | None
    name: str

    def render(self) -> str:
        return f"{self.table}.{self.name}" if self.table else self.name


@dataclass(frozen=True)
class Literal:
    value: int | float | str | None

    def render(self) -> str:
        if self.value is None:
            return "NULL"
        if isinstance(self.value, str):
            escaped = self.value.replace("'", "''")
            return f"'{escaped}'"
        return repr(self.value)


@dataclass(frozen=True)
class IntervalLiteral:
    amount: int
    unit: str  # DAY | MONTH | YEAR

    def render(self) -> str:
        return f"INTERVAL {self.amount} {self.unit}"


@dataclass(frozen=True)
class FuncCall:
    name: str  # DATE_SUB | DATE_ADD | CURDATE | CURRENT_DATE
    args: tuple["ValueExpr | IntervalLiteral", ...] = ()

    def render(self) -> str:
        if self.name == "CURRENT_DATE":
            return "CURRENT_DATE"
        inner = ", ".join(a.render() for a in self.args)
        return f"{self.name}({inner})"


@dataclass(frozen=True)
class Arithmetic:
    op: str  # + - * /
    left: "ValueExpr"
    right: "ValueExpr"

    def render(self) -> str:
        return f"({self.left.render()} {self.op} {self.right.render()})"


ValueExpr = Union[ColumnExpr, Literal, FuncCall, Arithmetic]


@dataclass(frozen=True)
class Comparison:
    op: str  # = != < <= > >=
    left: ValueExpr
    right: ValueExpr

    def render(self) -> str:
        return f"{self.left.render()} {self.op} {self.right.render()}"


@dataclass(frozen=True)
class InPredicate:
    subject: ColumnExpr
    negated: bool = False
    values: tuple[Literal, ...] | None = None
    subquery: "SelectStmt | None" = None

    def render(self) -> str:
        kw = "NOT IN" if self.negated else "IN"
        if self.subquery is not None:
            return f"{self.subject.render()} {kw} ({self.subquery.render()})"
        inner = ", ".join(v.render() for v in self.values or ())
        return f"{self.subject.render()} {kw} ({inner})"


@dataclass(frozen=True)
class BoolOp:
    op: str  # AND | OR
    left: "BoolExpr"
    right: "BoolExpr"

    def render(self) -> str:
        return f"({self.left.render()} {self.op} {self.right.render()})"


@dataclass(frozen=True)
class NotExpr:
    operand: "BoolExpr"

    def render(self) -> str:
        return f"NOT ({self.operand.render()})"


BoolExpr = Union[Comparison, InPredicate, BoolOp, NotExpr]


@dataclass(frozen=True)
class AggregateExpr:
    func: str  # COUNT | SUM | AVG | MIN | MAX
    arg: ColumnExpr | None = None  # None means COUNT(*)

    def render(self) -> str:
        inner = "*" if self.arg is None else self.arg.render()
        return f"{self.func}({inner})"


@dataclass(frozen=True)
class SelectItem:
    expr: ColumnExpr | AggregateExpr | ValueExpr
    alias: str | None = None

    def render(self) -> str:
        base = self.expr.render()
        return f"{base} AS {self.alias}" if self.alias else base


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: str | None = None

    def key(self) -> str:
        """The name this table is addressable by inside the query."""
        return (self.alias or self.name).lower()

    def render(self) -> str:
        return f"{self.name} AS {self.alias}" if self.alias else self.name


@dataclass(frozen=True)
class Join:
    table: TableRef
    left: ColumnExpr
    right: ColumnExpr

    def render(self) -> str:
        return (f"JOIN {self.table.render()} "
                f"ON {self.left.render()} = {self.right.render()}")


@dataclass(frozen=True)
class OrderItem:
    expr: ColumnExpr | AggregateExpr
    descending: bool = False

    def render(self) -> str:
        return f"{self.expr.render()} DESC" if self.descending else self.expr.render()


@dataclass(frozen=True)
class SelectStmt:
    from_table: TableRef
    items: tuple[SelectItem, ...] = ()
    star: bool = False  # SELECT *
    distinct: bool = False
    joins: tuple[Join, ...] = ()
    where: BoolExpr | None = None
    group_by: tuple[ColumnExpr, ...] = ()
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None

    def scope_tables(self) -> list[TableRef]:
        return [self.from_table, *(j.table for j in self.joins)]

    def has_aggregates(self) -> bool:
        return any(isinstance(item.expr, AggregateExpr) for item in self.items)

    def render(self) -> str:
        parts = ["SELECT"]
        if self.distinct:
            parts.append("DISTINCT")
        parts.append("*" if self.star else ", ".join(i.render() for i in self.items))
        parts.append(f"FROM {self.from_table.render()}")
        parts.extend(j.render() for j in self.joins)
        if self.where is not None:
            parts.append(f"WHERE {self.where.render()}")
        if self.group_by:
            parts.append("GROUP BY " + ", ".join(c.render() for c in self.group_by))
        if self.order_by:
            parts.append("ORDER BY " + ", ".join(o.render() for o in self.order_by))
        if self.limit is not None:
            parts.append(f"LIMIT {self.limit}")
        return " ".join(parts)


SqlAst = SelectStmt
