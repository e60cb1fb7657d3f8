export function el(
  tag: string,
  className?: string,
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

// Pane text as the snapshot tests read it: one string per row,
// newline-joined, regardless of row markup.
export function paneText(pane: HTMLElement): string {
  const rows = pane.querySelectorAll(".row");
  if (rows.length === 0) return pane.textContent ?? "";
  return Array.from(rows)
    .map((r) => r.textContent ?? "")
    .join("\n");
}
