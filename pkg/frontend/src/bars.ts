// LED-bar rendering: the physical device has two segmented light bars,
// so the dashboard quantizes each probability into 10 segments.

export const SEGMENT_COUNT = 10;

/** Lit-segment count for a bar value in [0, 1]; round half up. */
export function segments(bar: number): number {
  const clamped = Math.min(1, Math.max(0, bar));
  return Math.round(clamped * SEGMENT_COUNT);
}

export interface BarElements {
  root: HTMLElement;
  cells: HTMLElement[];
  value: HTMLElement;
}

export function buildBar(root: HTMLElement, label: string, tone: "open" | "close"): BarElements {
  root.classList.add("led-bar", tone);
  const title = document.createElement("div");
  title.className = "bar-label";
  title.textContent = label;
  const column = document.createElement("div");
  column.className = "bar-column";
  const cells: HTMLElement[] = [];
  for (let i = 0; i < SEGMENT_COUNT; i++) {
    const cell = document.createElement("div");
    cell.className = "bar-cell";
    column.appendChild(cell);
    cells.push(cell);
  }
  const value = document.createElement("div");
  value.className = "bar-value";
  value.textContent = "0%";
  root.append(title, column, value);
  // cells render top-down; cells[0] is the topmost segment
  return { root, cells, value };
}

export function renderBar(bar: BarElements, level: number, greyed: boolean): void {
  const lit = segments(level);
  bar.root.classList.toggle("greyed", greyed);
  bar.cells.forEach((cell, index) => {
    const fromBottom = SEGMENT_COUNT - index;
    cell.classList.toggle("lit", !greyed && fromBottom <= lit);
  });
  bar.value.textContent = `${Math.round(level * 100)}%`;
}
