/** Wire-format types for the compositing service API. */

/** [x, y, w, h] in background pixel coordinates. */
export type BoxXYWH = [number, number, number, number];

export interface GridCellInfo {
  col: number;
  row: number;
  index: number;
}

export interface PredictedBox {
  index: number;
  box: BoxXYWH;
  cell: GridCellInfo;
  size_cell: GridCellInfo;
}

export interface PredictResponse {
  boxes: PredictedBox[];
  heatmap_url: string;
}

export interface CandidateInfo {
  segment_id: string;
  thumbnail_url: string;
  distance: number | null;
}

export interface CandidatesResponse {
  box: number;
  candidates: CandidateInfo[];
  padded: boolean;
  short: boolean;
}

export interface ProvenanceRow {
  segment_id: string;
  box: BoxXYWH;
  scale: number;
}

export interface PlacementResponse {
  composite_url: string;
  provenance: ProvenanceRow[];
  box: { index: number; box: BoxXYWH };
}

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
  placements: { index: number; segment_id: string | null; box: BoxXYWH }[];
  provenance: ProvenanceRow[];
}

export interface CreateSessionResponse {
  session_id: string;
  width: number;
  height: number;
}

export function boxesEqual(a: BoxXYWH, b: BoxXYWH): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}
