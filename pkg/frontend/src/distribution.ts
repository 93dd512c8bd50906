/** Horizontal bar data for the classifier's 9-way verdict on a response. */

export interface DistributionBar {
  name: string;
  fraction: number;
  percentLabel: string;
  top: boolean;
}

export function buildDistributionBars(
  distribution: number[],
  emotionNames: readonly string[],
): DistributionBar[] {
  if (distribution.length !== emotionNames.length) {
    throw new Error(
      `distribution has ${distribution.length} entries for ${emotionNames.length} emotions`,
    );
  }
  const top = distribution.indexOf(Math.max(...distribution));
  return distribution.map((p, i) => ({
    name: emotionNames[i],
    fraction: p,
    percentLabel: `${(p * 100).toFixed(1)}%`,
    top: i === top,
  }));
}

export function renderDistribution(bars: DistributionBar[]): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "distribution";
  for (const bar of bars) {
    const row = document.createElement("div");
    row.className = "dist-row" + (bar.top ? " dist-top" : "");
    const label = document.createElement("span");
    label.className = "dist-label";
    label.textContent = bar.name;
    const track = document.createElement("div");
    track.className = "dist-track";
    const fill = document.createElement("div");
    fill.className = "dist-fill";
    fill.style.width = `${(bar.fraction * 100).toFixed(2)}%`;
    track.appendChild(fill);
    const pct = document.createElement("span");
    pct.className = "dist-pct";
    pct.textContent = bar.percentLabel;
    row.append(label, track, pct);
    wrap.appendChild(row);
  }
  return wrap;
}
