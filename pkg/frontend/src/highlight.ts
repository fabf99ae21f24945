/** Minimal syntax highlighter for generated scripts, keyed by dialect. */

const CPP_KEYWORDS = new Set([
  "auto", "bool", "break", "case", "char", "class", "const", "continue",
  "default", "delete", "double", "else", "enum", "false", "float", "for",
  "if", "int", "long", "namespace", "new", "nullptr", "return", "short",
  "signed", "sizeof", "static", "struct", "switch", "template", "true",
  "typedef", "typename", "uint8_t", "uint16_t", "uint32_t", "unsigned",
  "using", "void", "while",
]);

const PY_KEYWORDS = new Set([
  "and", "as", "assert", "break", "class", "continue", "def", "del",
  "elif", "else", "except", "finally", "for", "from", "global", "if",
  "import", "in", "is", "lambda", "None", "not", "or", "pass", "raise",
  "return", "True", "False", "try", "while", "with", "yield",
]);

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

const TOKEN_RE =
  /(\/\/[^\n]*|#[^\n]*|"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*'|\b\d+(?:\.\d+)?(?:e\d+)?\b|\b[A-Za-z_][A-Za-z0-9_]*\b)/g;

/** Render source to HTML with span-wrapped tokens. */
export function highlight(source: string, dialect: "cpp" | "python"): string {
  const keywords = dialect === "cpp" ? CPP_KEYWORDS : PY_KEYWORDS;
  const commentLead = dialect === "cpp" ? "//" : "#";
  let html = "";
  let last = 0;
  for (const match of source.matchAll(TOKEN_RE)) {
    const token = match[0];
    const start = match.index ?? 0;
    html += escapeHtml(source.slice(last, start));
    last = start + token.length;
    if (token.startsWith(commentLead)) {
      html += `<span class="tok-comment">${escapeHtml(token)}</span>`;
    } else if (token.startsWith('"') || token.startsWith("'")) {
      html += `<span class="tok-string">${escapeHtml(token)}</span>`;
    } else if (/^\d/.test(token)) {
      html += `<span class="tok-number">${escapeHtml(token)}</span>`;
    } else if (keywords.has(token)) {
      html += `<span class="tok-keyword">${escapeHtml(token)}</span>`;
    } else {
      html += escapeHtml(token);
    }
  }
  html += escapeHtml(source.slice(last));
  return html;
}
