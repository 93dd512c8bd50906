/**
 * Attention heatmap model: source tokens as columns, generated tokens as
 * rows, one cell per attention weight. Values are display-rounded to four
 * decimals but never rescaled.
 */

export interface HeatmapCell {
  row: number;
  col: number;
  value: number;
  /** value to 4 decimals, shown on hover */
  label: string;
  /** 0..1 color intensity, scaled within the whole matrix */
  intensity: number;
}

export interface HeatmapModel {
  rowTokens: string[];
  colTokens: string[];
  cells: HeatmapCell[];
  error: string | null;
}

export function formatCellValue(value: number): string {
  return value.toFixed(4);
}

export function buildHeatmap(
  matrix: number[][],
  sourceTokens: string[],
  outputTokens: string[],
): HeatmapModel {
  if (matrix.length !== outputTokens.length ||
      matrix.some((row) => row.length !== sourceTokens.length)) {
    return {
      rowTokens: outputTokens,
      colTokens: sourceTokens,
      cells: [],
      error: `matrix ${matrix.length}x${matrix[0]?.length ?? 0} does not match ` +
        `${outputTokens.length} output x ${sourceTokens.length} source tokens`,
    };
  }
  let max = 0;
  for (const row of matrix) {
    for (const v of row) {
      if (v > max) max = v;
    }
  }
  const cells: HeatmapCell[] = [];
  matrix.forEach((row, r) => {
    row.forEach((value, c) => {
      cells.push({
        row: r,
        col: c,
        value,
        label: formatCellValue(value),
        intensity: max > 0 ? value / max : 0,
      });
    });
  });
  return { rowTokens: outputTokens, colTokens: sourceTokens, cells, error: null };
}

/** Single-hue scale: intensity 0 is near-white, 1 is saturated. */
export function cellColor(intensity: number): string {
  const clamped = Math.max(0, Math.min(1, intensity));
  const light = 97 - clamped * 55;
  return `hsl(16 85% ${light.toFixed(1)}%)`;
}

export function renderHeatmap(model: HeatmapModel): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "heatmap";
  if (model.error) {
    wrap.classList.add("heatmap-error");
    wrap.textContent = `attention unavailable: ${model.error}`;
    return wrap;
  }
  const table = document.createElement("table");
  const head = document.createElement("tr");
  head.appendChild(document.createElement("th"));
  for (const tok of model.colTokens) {
    const th = document.createElement("th");
    th.textContent = tok;
    head.appendChild(th);
  }
  table.appendChild(head);
  const rows: HTMLTableRowElement[] = model.rowTokens.map((tok) => {
    const tr = document.createElement("tr");
    const th = document.createElement("th");
    th.textContent = tok;
    tr.appendChild(th);
    table.appendChild(tr);
    return tr;
  });
  for (const cell of model.cells) {
    const td = document.createElement("td");
    td.style.backgroundColor = cellColor(cell.intensity);
    td.title = cell.label;
    td.className = "heatmap-cell";
    rows[cell.row].appendChild(td);
  }
  wrap.appendChild(table);
  return wrap;
}
