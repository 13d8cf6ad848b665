"""SQL subset: parser, column extraction, and in-memory execution."""

from .columns import columns_used, columns_used_ordered
from .executor import (
    Database,
    ResultTable,
    execute,
    execute_sql,
    execution_match,
    results_equal,
)
from .nodes import SelectStmt, SqlAst
from .parser import parse_sql, render_sql

__all__ = [
    "Database",
    "ResultTable",
    "SelectStmt",
    "SqlAst",
    "columns_used",
    "columns_used_ordered",
    "execute",
    "execute_sql",
    "execution_match",
    "parse_sql",
    "render_sql",
    "results_equal",
]
