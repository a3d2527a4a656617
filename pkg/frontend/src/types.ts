// Wire types for the rehearsal service HTTP + WebSocket contract.

export interface TokenView {
  surface: string;
  norm: string;
  word_index: number;
  char_start: number;
  char_end: number;
}

export interface CandidateView {
  entry_id: string;
  similarity: number;
  rank: number;
  region_text: string | null;
  clip_uri: string | null;
}

export interface RecommendationView {
  candidates: CandidateView[];
  selected_rank: number;
  selection_source: string;
}

export interface RegionView {
  region: {
    region_id: string;
    chunk_id: string;
    start: number;
    end: number;
    source: string;
    match_similarity: number;
    status: string;
  };
  text: string;
  deleted: boolean;
  recommendation: RecommendationView | null;
}

export interface ChunkView {
  chunk_id: string;
  raw_text: string;
  tokens: TokenView[];
  regions: RegionView[];
  error: string | null;
}

export interface SlideView {
  slide_id: string;
  asset_ref: string | null;
  chunks: ChunkView[];
}

export interface SessionView {
  session_id: string;
  created_at: number;
  config: Record<string, unknown>;
  slides: SlideView[];
}

export type RegionPatch =
  | { action: 'select_rank'; rank: number }
  | { action: 'delete' }
  | { action: 'restore' };

export type ClientMessage =
  | { type: 'start' }
  | { type: 'word'; text: string; ts: number };

export type ServerMessage =
  | { type: 'cue'; region_id: string; clip_uri: string; flow_index: number }
  | { type: 'flow'; flow_index: number }
  | { type: 'error'; code: string };
