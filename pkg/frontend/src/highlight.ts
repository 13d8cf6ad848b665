/**
 * Dependency-free SQL syntax highlighting: tokenize and wrap in spans.
 * Output is HTML-escaped, so candidate SQL can be injected via innerHTML.
 */

const KEYWORDS = new Set([
  "SELECT", "DISTINCT", "FROM", "JOIN", "INNER", "ON", "WHERE", "AND", "OR",
  "NOT", "IN", "GROUP", "BY", "ORDER", "ASC", "DESC", "LIMIT", "AS", "NULL",
  "INTERVAL", "COUNT", "SUM", "AVG", "MIN", "MAX", "DATE_SUB", "DATE_ADD",
  "CURDATE", "CURRENT_DATE", "DAY", "MONTH", "YEAR",
]);

const TOKEN_RE =
  /('(?:[^']|'')*')|(\b\d+(?:\.\d+)?\b)|([A-Za-z_][A-Za-z0-9_]*)|(\s+)|(.)/g;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** SQL text to highlighted HTML (span.kw / span.str / span.num / span.id). */
export function highlightSql(sql: string): string {
  let out = "";
  for (const match of sql.matchAll(TOKEN_RE)) {
    const [, str, num, word, space, other] = match;
    if (str !== undefined) {
      out += `<span class="str">${escapeHtml(str)}</span>`;
    } else if (num !== undefined) {
      out += `<span class="num">${num}</span>`;
    } else if (word !== undefined) {
      out += KEYWORDS.has(word.toUpperCase())
        ? `<span class="kw">${escapeHtml(word)}</span>`
        : `<span class="id">${escapeHtml(word)}</span>`;
    } else if (space !== undefined) {
      out += space;
    } else if (other !== undefined) {
      out += escapeHtml(other);
    }
  }
  return out;
}
