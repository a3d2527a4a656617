// Presenter-view state derived purely from service responses: the UI never
// invents a highlight, candidate, or cue on its own.

import type { ChunkView, RegionView, SessionView } from './types.js';

export interface Highlight {
  regionId: string;
  start: number;
  end: number;
  text: string;
}

export interface CarouselState {
  regionId: string;
  candidates: { entryId: string; clipUri: string | null; rank: number }[];
  selectedRank: number;
}

export type CuePane =
  | { status: 'idle' }
  | { status: 'playing'; regionId: string; clipUri: string };

/** Word-accurate highlight spans for the non-deleted regions, in span order. */
export function buildHighlights(chunk: ChunkView): Highlight[] {
  return chunk.regions
    .filter((r) => !r.deleted)
    .map((r) => ({
      regionId: r.region.region_id,
      start: r.region.start,
      end: r.region.end,
      text: r.text,
    }))
    .sort((a, b) => a.start - b.start);
}

/** Hover carousel: exactly the candidates the service returned, rank order. */
export function carouselFor(chunk: ChunkView, regionId: string): CarouselState | null {
  const region = chunk.regions.find((r) => r.region.region_id === regionId);
  if (!region || !region.recommendation) return null;
  return {
    regionId,
    candidates: region.recommendation.candidates.map((c) => ({
      entryId: c.entry_id,
      clipUri: c.clip_uri,
      rank: c.rank,
    })),
    selectedRank: region.recommendation.selected_rank,
  };
}

/** Clip URI of the currently selected candidate for a region. */
export function selectedClip(region: RegionView): string | null {
  const rec = region.recommendation;
  if (!rec) return null;
  const candidate = rec.candidates.find((c) => c.rank === rec.selected_rank);
  return candidate ? candidate.clip_uri : null;
}

/** Replace one region's view after a PATCH response, without a full reload. */
export function applyRegionPatch(session: SessionView, updated: RegionView): SessionView {
  return {
    ...session,
    slides: session.slides.map((slide) => ({
      ...slide,
      chunks: slide.chunks.map((chunk) => ({
        ...chunk,
        regions: chunk.regions.map((r) =>
          r.region.region_id === updated.region.region_id ? updated : r,
        ),
      })),
    })),
  };
}

export function findChunk(session: SessionView, chunkId: string): ChunkView {
  for (const slide of session.slides) {
    for (const chunk of slide.chunks) {
      if (chunk.chunk_id === chunkId) return chunk;
    }
  }
  throw new Error(`unknown chunk ${chunkId}`);
}
