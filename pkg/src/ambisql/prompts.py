"""Versioned prompt templates for the HTTP language-model backend.

Placeholders: {question}, {schema}, {hints}, {sql}, {prior_sqls}. The schema
block always renders visible columns only, so a masked column can never leak
into a prompt.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import MaskedSchema, visible_columns

PROMPT_VERSION = "1"


@dataclass(frozen=True)
class PromptBundle:
    """Everything one generation/scoring prompt is assembled from.

    The schema text comes from :func:`render_schema` over the masked schema,
    so by construction it contains no masked column.
    """

    question: str
    schema_text: str
    hint_texts: tuple[str, ...] = ()
    prior_sqls: tuple[str, ...] = ()
    sql: str = ""

    @classmethod
    def build(cls, masked: MaskedSchema, question: str,
              hint_texts: tuple[str, ...] = (),
              prior_sqls: tuple[str, ...] = (), sql: str = "") -> "PromptBundle":
        return cls(question=question, schema_text=render_schema(masked),
                   hint_texts=hint_texts, prior_sqls=prior_sqls, sql=sql)

    def generation_prompt(self) -> str:
        return GENERATE_SQL.format(schema=self.schema_text,
                                   hints=render_hint_block(list(self.hint_texts)),
                                   question=self.question)

    def forced_diversity_prompt(self) -> str:
        listed = "\n".join(f"- {p}" for p in self.prior_sqls) or "- (none)"
        return FORCED_DIVERSITY.format(
            schema=self.schema_text,
            hints=render_hint_block(list(self.hint_texts)),
            question=self.question, prior_sqls=listed)

    def scoring_prompt(self) -> str:
        return SCORE_YES_NO.format(
            question=self.question, sql=self.sql,
            hints=render_hint_block(list(self.hint_texts)))

    def extraction_prompt(self) -> str:
        return EXTRACT_ENTITIES.format(question=self.question)

GENERATE_SQL = """\
You translate questions into SQL for the schema below. Use only the listed
tables and columns. Answer with a single SQL query and nothing else.

Schema:
{schema}
{hints}
Question: {question}
SQL:"""

FORCED_DIVERSITY = """\
You translate questions into SQL for the schema below. The following SQL
queries were already generated for this question:
{prior_sqls}

Write one new SQL query whose execution result differs from all of the
queries above. Use only the listed tables and columns. Answer with a single
SQL query and nothing else.

Schema:
{schema}
{hints}
Question: {question}
SQL:"""

EXTRACT_ENTITIES = """\
List the entities in the question below. An entity is a phrase that must be
answered from a database column, such as "hometown" or "roll number".
Answer with one entity per line and nothing else.

Question: {question}
Entities:"""

SCORE_YES_NO = """\
Does the SQL query below answer the question? Reply with exactly one letter.
{hints}
Question: {question}
SQL: {sql}

A. Yes
B. No

Answer:"""

HINT_BLOCK = """\
User preferences to respect:
{hints}
"""


def render_schema(masked: MaskedSchema) -> str:
    """One line per table listing only the visible columns."""
    by_table: dict[str, list[str]] = {}
    for ref in visible_columns(masked):
        by_table.setdefault(ref.table, []).append(ref.column)
    return "\n".join(f"{table}({', '.join(cols)})" for table, cols in by_table.items())


def render_hint_block(hint_texts: list[str]) -> str:
    if not hint_texts:
        return ""
    return HINT_BLOCK.format(hints="\n".join(f"- {text}" for text in hint_texts))
