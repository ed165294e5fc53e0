import { boxToCanvasRect, type ViewTransform } from "./coords";
import type { HistoryEntry, Overlay } from "./types";

const PALETTE = [
  "#e4572e",
  "#17bebb",
  "#ffc914",
  "#76b041",
  "#9b5de5",
  "#f15bb5",
  "#00bbf9",
  "#fee440",
];

/** Stable model -> color assignment in first-seen order. */
export function colorAssignment(entries: readonly HistoryEntry[]): Map<string, string> {
  const colors = new Map<string, string>();
  for (const entry of entries) {
    if (!colors.has(entry.modelId)) {
      colors.set(entry.modelId, PALETTE[colors.size % PALETTE.length]);
    }
  }
  return colors;
}

export function buildOverlays(
  entries: readonly HistoryEntry[],
  view: ViewTransform,
): Overlay[] {
  const colors = colorAssignment(entries);
  return entries.map((entry) => ({
    rect: boxToCanvasRect(view, entry.box),
    color: colors.get(entry.modelId) as string,
    label: `${entry.modelId} (${entry.stage})`,
    entry,
  }));
}

export interface LegendEntry {
  color: string;
  label: string;
}

export function buildLegend(overlays: readonly Overlay[]): LegendEntry[] {
  const seen = new Map<string, LegendEntry>();
  for (const overlay of overlays) {
    if (!seen.has(overlay.entry.modelId)) {
      seen.set(overlay.entry.modelId, { color: overlay.color, label: overlay.label });
    }
  }
  return [...seen.values()];
}
