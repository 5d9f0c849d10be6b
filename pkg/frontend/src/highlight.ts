// Note rendering: the server is the single sentence-splitting authority,
// so highlighting is purely a mapping from verdict sentence indexes onto
// the server-provided sentence list.

import type { PendingPair, VerdictOut } from "./types.js";

export interface NoteSegment {
  index: number;
  text: string;
  highlighted: boolean;
}

export function relevantIndexes(verdicts: VerdictOut[]): Set<number> {
  const indexes = new Set<number>();
  for (const verdict of verdicts) {
    for (const index of verdict.relevant_sentences) {
      indexes.add(index);
    }
  }
  return indexes;
}

export function noteSegments(pair: PendingPair, selected?: VerdictOut | null): NoteSegment[] {
  const highlighted = selected ? new Set(selected.relevant_sentences) : relevantIndexes(pair.verdicts);
  return pair.note_sentences.map((text, index) => ({
    index,
    text,
    highlighted: highlighted.has(index),
  }));
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function segmentsToHtml(segments: NoteSegment[]): string {
  return segments
    .map((segment) => {
      const text = escapeHtml(segment.text);
      return segment.highlighted
        ? `<mark data-sentence="${segment.index}">${text}</mark>`
        : `<span data-sentence="${segment.index}">${text}</span>`;
    })
    .join(" ");
}
