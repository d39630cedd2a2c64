/** Inline error panel; syntax errors get a caret at the reported column. */

import { ApiRequestError } from "../api.js";

export function renderQueryError(
  container: HTMLElement,
  queryText: string,
  error: unknown,
): void {
  container.textContent = "";
  container.classList.add("query-error");

  const message = document.createElement("p");
  message.className = "error-message";

  if (error instanceof ApiRequestError) {
    message.textContent = `${error.code}: ${error.message}`;
    container.appendChild(message);
    if (error.code === "SYNTAX_ERROR" && error.position) {
      const lines = queryText.split("\n");
      const line = lines[error.position.line - 1] ?? "";
      const pre = document.createElement("pre");
      pre.className = "error-caret";
      pre.textContent = `${line}\n${" ".repeat(Math.max(error.position.col - 1, 0))}^`;
      container.appendChild(pre);
    }
  } else {
    message.textContent = error instanceof Error ? error.message : String(error);
    container.appendChild(message);
  }
}
