"""In-memory evaluator for the SQL subset.

Semantics:
  * inner equi-joins, WHERE filtering, grouping, the five aggregates,
    projection, DISTINCT, ORDER BY, LIMIT;
  * NULLs are excluded from aggregates except COUNT(*);
  * three-valued logic is collapsed: a predicate over NULL is false;
  * result equality is multiset equality of row tuples, positions only —
    column names never matter. Row order is compared only when both sides
    carry ORDER BY.

The Database is read-only during execution, so concurrent executions over
the same fixture are safe.
"""

from __future__ import annotations

import calendar
import json
from collections import Counter
from dataclasses import dataclass
from datetime import date
from typing import Any, Mapping, Sequence

from ..errors import (
    DivisionByZero,
    FormatError,
    GoldQueryInvalid,
    SqlError,
    TypeMismatch,
    UnresolvedIdentifier,
    UnsupportedFeature,
)
from ..model import Column, Schema, Table
from .columns import _Scope
from .nodes import (
    AggregateExpr,
    Arithmetic,
    BoolExpr,
    BoolOp,
    ColumnExpr,
    Comparison,
    FuncCall,
    InPredicate,
    Literal,
    NotExpr,
    SelectStmt,
    ValueExpr,
)
from .parser import parse_sql

Value = int | float | str | None
Row = tuple[Value, ...]


@dataclass(frozen=True)
class Database:
    """A schema plus per-table rows; optionally pins CURDATE() for determinism."""

    schema: Schema
    rows: Mapping[str, tuple[Row, ...]]  # lowercase table name -> rows
    current_date: str | None = None

    def __post_init__(self):
        for table in self.schema.tables:
            for row in self.rows.get(table.name.lower(), ()):
                if len(row) != len(table.columns):
                    raise ValueError(
                        f"row arity {len(row)} != {len(table.columns)} columns "
                        f"in table {table.name!r}")

    def table_rows(self, name: str) -> tuple[Row, ...]:
        return self.rows.get(name.lower(), ())

    def today(self) -> str:
        return self.current_date or date.today().isoformat()

    @classmethod
    def build(cls, schema: Schema, rows: Mapping[str, Sequence[Sequence[Value]]],
              current_date: str | None = None) -> "Database":
        frozen = {name.lower(): tuple(tuple(r) for r in table_rows)
                  for name, table_rows in rows.items()}
        return cls(schema=schema, rows=frozen, current_date=current_date)

    # Fixture format: {db_id, tables: [{name, columns, column_types, rows}]}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "Database":
        try:
            tables = []
            rows: dict[str, tuple[Row, ...]] = {}
            for spec in doc["tables"]:
                names = spec["columns"]
                types = spec.get("column_types", ["text"] * len(names))
                if len(types) != len(names):
                    raise FormatError(
                        f"table {spec['name']!r}: column_types/columns length mismatch")
                tables.append(Table(
                    name=spec["name"],
                    columns=tuple(Column(n, t) for n, t in zip(names, types)),
                ))
                rows[spec["name"].lower()] = tuple(
                    tuple(v for v in row) for row in spec.get("rows", []))
            schema = Schema(db_id=doc["db_id"], tables=tuple(tables))
            return cls(schema=schema, rows=rows,
                       current_date=doc.get("current_date"))
        except FormatError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad database fixture: {exc}") from exc

    @classmethod
    def load(cls, path: str) -> "Database":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class ResultTable:
    arity: int
    rows: tuple[Row, ...]
    ordered: bool = False

    def __post_init__(self):
        for row in self.rows:
            if len(row) != self.arity:
                raise ValueError("all rows must have the stated arity")


# --- value evaluation -------------------------------------------------------


def _add_months(iso: str, months: int) -> str:
    try:
        base = date.fromisoformat(iso)
    except ValueError as exc:
        raise TypeMismatch(f"{iso!r} is not an ISO date") from exc
    month_index = base.year * 12 + (base.month - 1) + months
    year, month = divmod(month_index, 12)
    day = min(base.day, calendar.monthrange(year, month + 1)[1])
    return date(year, month + 1, day).isoformat()


def _shift_date(iso: str, amount: int, unit: str) -> str:
    if unit == "MONTH":
        return _add_months(iso, amount)
    if unit == "YEAR":
        return _add_months(iso, 12 * amount)
    try:
        base = date.fromisoformat(iso)
    except ValueError as exc:
        raise TypeMismatch(f"{iso!r} is not an ISO date") from exc
    return date.fromordinal(base.toordinal() + amount).isoformat()


class _Evaluator:
    def __init__(self, stmt: SelectStmt, db: Database):
        self.stmt = stmt
        self.db = db
        self.scope = _Scope(stmt, db.schema)
        # Map addressable key -> positional slot in the row environment.
        self.slots: dict[str, int] = {}
        self.slot_tables: list[Table] = []
        for ref in stmt.scope_tables():
            table = db.schema.table(ref.name)
            assert table is not None
            self.slots[ref.key()] = len(self.slot_tables)
            if ref.alias is not None:
                self.slots.setdefault(ref.name.lower(), len(self.slot_tables))
            self.slot_tables.append(table)

    # Environment: one row tuple per scope table, positionally.

    def locate(self, col: ColumnExpr) -> tuple[int, int]:
        if col.table is not None:
            slot = self.slots.get(col.table.lower())
            if slot is None:
                raise UnresolvedIdentifier(
                    f"qualifier {col.table!r} names no table in scope")
            table = self.slot_tables[slot]
            for idx, c in enumerate(table.columns):
                if c.name.lower() == col.name.lower():
                    return slot, idx
            raise UnresolvedIdentifier(
                f"no column {col.name!r} in table {table.name!r}")
        hits = []
        for slot, table in enumerate(self.slot_tables):
            for idx, c in enumerate(table.columns):
                if c.name.lower() == col.name.lower():
                    hits.append((slot, idx))
        if not hits:
            raise UnresolvedIdentifier(f"no table in scope has column {col.name!r}")
        if len(hits) > 1:
            raise UnresolvedIdentifier(f"column {col.name!r} is ambiguous")
        return hits[0]

    def value(self, expr: ValueExpr, env: tuple[Row, ...]) -> Value:
        if isinstance(expr, ColumnExpr):
            slot, idx = self.locate(expr)
            return env[slot][idx]
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, FuncCall):
            if expr.name in ("CURDATE", "CURRENT_DATE"):
                return self.db.today()
            base = self.value(expr.args[0], env)  # type: ignore[arg-type]
            interval = expr.args[1]
            if base is None:
                return None
            if not isinstance(base, str):
                raise TypeMismatch(f"{expr.name} expects a date string")
            amount = interval.amount if expr.name == "DATE_ADD" else -interval.amount
            return _shift_date(base, amount, interval.unit)
        if isinstance(expr, Arithmetic):
            left = self.value(expr.left, env)
            right = self.value(expr.right, env)
            if left is None or right is None:
                return None
            if not isinstance(left, (int, float)) or not isinstance(right, (int, float)):
                raise TypeMismatch(f"arithmetic over non-numeric value")
            if expr.op == "+":
                return left + right
            if expr.op == "-":
                return left - right
            if expr.op == "*":
                return left * right
            if right == 0:
                raise DivisionByZero("division by zero")
            return left / right
        raise UnsupportedFeature(f"cannot evaluate {type(expr).__name__}")

    def compare(self, op: str, left: Value, right: Value) -> bool:
        if left is None or right is None:
            return False  # collapsed three-valued logic
        numeric = isinstance(left, (int, float)) and isinstance(right, (int, float))
        textual = isinstance(left, str) and isinstance(right, str)
        if not numeric and not textual:
            raise TypeMismatch(
                f"cannot compare {type(left).__name__} with {type(right).__name__}")
        if op == "=":
            return left == right
        if op == "!=":
            return left != right
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        return left >= right

    def predicate(self, expr: BoolExpr, env: tuple[Row, ...]) -> bool:
        if isinstance(expr, Comparison):
            return self.compare(expr.op, self.value(expr.left, env),
                                self.value(expr.right, env))
        if isinstance(expr, InPredicate):
            subject = self.value(expr.subject, env)
            if subject is None:
                return False
            if expr.subquery is not None:
                result = execute(expr.subquery, self.db)
                if result.arity != 1:
                    raise TypeMismatch("IN subquery must return exactly one column")
                members = [row[0] for row in result.rows]
            else:
                members = [lit.value for lit in expr.values or ()]
            hit = any(m is not None and self.compare("=", subject, m) for m in members)
            return not hit if expr.negated else hit
        if isinstance(expr, BoolOp):
            left = self.predicate(expr.left, env)
            if expr.op == "AND":
                return left and self.predicate(expr.right, env)
            return left or self.predicate(expr.right, env)
        if isinstance(expr, NotExpr):
            return not self.predicate(expr.operand, env)
        raise UnsupportedFeature(f"cannot evaluate {type(expr).__name__}")

    # -- aggregates ------------------------------------------------------------

    def aggregate(self, agg: AggregateExpr, group: list[tuple[Row, ...]]) -> Value:
        if agg.arg is None:  # COUNT(*)
            return len(group)
        values = []
        for env in group:
            v = self.value(agg.arg, env)
            if v is not None:
                values.append(v)
        if agg.func == "COUNT":
            return len(values)
        if not values:
            return None
        if agg.func in ("SUM", "AVG"):
            if not all(isinstance(v, (int, float)) for v in values):
                raise TypeMismatch(f"{agg.func} over non-numeric values")
            total = sum(values)
            return total if agg.func == "SUM" else total / len(values)
        # MIN/MAX: values must be mutually comparable.
        if all(isinstance(v, (int, float)) for v in values):
            pass
        elif all(isinstance(v, str) for v in values):
            pass
        else:
            raise TypeMismatch(f"{agg.func} over mixed value types")
        return min(values) if agg.func == "MIN" else max(values)

    # -- pipeline ----------------------------------------------------------------

    def source_rows(self) -> list[tuple[Row, ...]]:
        base = self.db.table_rows(self.stmt.from_table.name)
        envs: list[tuple[Row, ...]] = [(row,) for row in base]
        for join in self.stmt.joins:
            joined: list[tuple[Row, ...]] = []
            new_rows = self.db.table_rows(join.table.name)
            for env in envs:
                for row in new_rows:
                    candidate = env + (row,)
                    left = self.value(join.left, candidate)
                    right = self.value(join.right, candidate)
                    if left is None or right is None:
                        continue
                    if self.compare("=", left, right):
                        joined.append(candidate)
            envs = joined
        # Tables joined later occupy later slots, matching self.slots.
        if self.stmt.where is not None:
            envs = [env for env in envs if self.predicate(self.stmt.where, env)]
        return envs

    def projection_exprs(self) -> list[tuple[ColumnExpr | AggregateExpr | ValueExpr, str | None]]:
        if self.stmt.star:
            items = []
            for slot, table in enumerate(self.slot_tables):
                key = self.stmt.scope_tables()[slot].alias or table.name
                for col in table.columns:
                    items.append((ColumnExpr(table=key, name=col.name), None))
            return items
        return [(item.expr, item.alias) for item in self.stmt.items]

    def run(self) -> ResultTable:
        stmt = self.stmt
        envs = self.source_rows()
        exprs = self.projection_exprs()
        aggregated = stmt.has_aggregates() or bool(stmt.group_by)

        output: list[Row] = []
        order_keys: list[tuple] = []

        if aggregated:
            group_refs = [self.locate(col) for col in stmt.group_by]
            groups: dict[tuple, list[tuple[Row, ...]]] = {}
            for env in envs:
                key = tuple(env[slot][idx] for slot, idx in group_refs)
                groups.setdefault(key, []).append(env)
            if not stmt.group_by and not groups:
                groups[()] = []  # aggregate over the empty input
            for key, members in groups.items():
                row = []
                for expr, _alias in exprs:
                    if isinstance(expr, AggregateExpr):
                        row.append(self.aggregate(expr, members))
                    elif isinstance(expr, ColumnExpr):
                        loc = self.locate(expr)
                        if loc not in group_refs:
                            raise UnsupportedFeature(
                                f"column {expr.render()} is neither aggregated "
                                f"nor in GROUP BY")
                        row.append(key[group_refs.index(loc)])
                    else:
                        raise UnsupportedFeature(
                            "only columns and aggregates may be projected "
                            "in an aggregate query")
                output.append(tuple(row))
                order_keys.append(self.order_key_for_group(members, tuple(row)))
        else:
            for env in envs:
                row = tuple(self.value(expr, env) for expr, _alias in exprs)
                output.append(row)
                order_keys.append(self.order_key_for_row(env, row))

        if stmt.distinct:
            seen: set[Row] = set()
            deduped, deduped_keys = [], []
            for row, keys in zip(output, order_keys):
                if row not in seen:
                    seen.add(row)
                    deduped.append(row)
                    deduped_keys.append(keys)
            output, order_keys = deduped, deduped_keys

        if stmt.order_by:
            indexed = list(range(len(output)))
            for pos in range(len(stmt.order_by) - 1, -1, -1):
                reverse = stmt.order_by[pos].descending
                indexed.sort(key=lambda i: order_keys[i][pos], reverse=reverse)
            output = [output[i] for i in indexed]

        if stmt.limit is not None:
            output = output[: stmt.limit]

        return ResultTable(arity=len(exprs), rows=tuple(output),
                           ordered=bool(stmt.order_by))

    # ORDER BY keys are computed alongside projection so that sorting can use
    # aliases, group keys, or aggregates uniformly. None sorts first, then
    # numbers, then text (a deterministic total order across types).

    @staticmethod
    def sortable(value: Value) -> tuple:
        if value is None:
            return (0, 0.0)
        if isinstance(value, (int, float)):
            return (1, float(value))
        return (2, value)

    def order_key_for_row(self, env: tuple[Row, ...], projected: Row) -> tuple:
        keys = []
        for item in self.stmt.order_by:
            if isinstance(item.expr, AggregateExpr):
                raise UnsupportedFeature("aggregate in ORDER BY without GROUP BY")
            alias_idx = self.alias_index(item.expr)
            if alias_idx is not None:
                keys.append(self.sortable(projected[alias_idx]))
            else:
                keys.append(self.sortable(self.value(item.expr, env)))
        return tuple(keys)

    def order_key_for_group(self, members: list[tuple[Row, ...]], projected: Row) -> tuple:
        keys = []
        for item in self.stmt.order_by:
            if isinstance(item.expr, AggregateExpr):
                keys.append(self.sortable(self.aggregate(item.expr, members)))
                continue
            alias_idx = self.alias_index(item.expr)
            if alias_idx is not None:
                keys.append(self.sortable(projected[alias_idx]))
            elif members:
                keys.append(self.sortable(self.value(item.expr, members[0])))
            else:
                keys.append(self.sortable(None))
        return tuple(keys)

    def alias_index(self, expr: ColumnExpr) -> int | None:
        if expr.table is not None:
            return None
        for idx, item in enumerate(self.stmt.items):
            if item.alias and item.alias.lower() == expr.name.lower():
                return idx
        return None


def execute(stmt: SelectStmt, db: Database) -> ResultTable:
    """Evaluate a parsed statement against an in-memory database."""
    return _Evaluator(stmt, db).run()


def execute_sql(text: str, db: Database) -> ResultTable:
    return execute(parse_sql(text), db)


def results_equal(a: ResultTable, b: ResultTable) -> bool:
    """Same arity and same multiset of rows; order matters only if both ordered."""
    if a.arity != b.arity:
        return False
    if a.ordered and b.ordered:
        return list(a.rows) == list(b.rows)
    return Counter(a.rows) == Counter(b.rows)


def execution_match(candidates: Sequence, gold: str, db: Database) -> bool:
    """True iff any candidate's execution result equals the gold query's.

    Candidates that fail to parse or execute count as non-matching. The gold
    query itself must be valid; otherwise GoldQueryInvalid is raised.
    """
    try:
        gold_result = execute_sql(gold, db)
    except SqlError as exc:
        raise GoldQueryInvalid(f"gold query failed: {exc}") from exc
    for cand in candidates:
        text = getattr(cand, "sql_text", cand)
        try:
            result = execute_sql(text, db)
        except SqlError:
            continue
        if results_equal(result, gold_result):
            return True
    return False
