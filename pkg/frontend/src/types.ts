// Wire shapes of the sketchedit HTTP service, field names verbatim.
// Rectangles travel as integer frame pixels; ids are opaque strings
// qualified with the project id ("p1.e3").

export interface PixelRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface FrameDims {
  width_px: number;
  height_px: number;
}

export interface SpanView {
  char_start: number;
  char_end: number;
  surface: string;
}

export interface RefView {
  span: SpanView;
  category: string;
}

export interface ParseView {
  resolved_text: string;
  original_text: string;
  operations: string[];
  temporal_refs: RefView[];
  spatial_refs: RefView[];
  param_refs: Record<string, SpanView[]>;
  low_confidence: boolean;
}

export interface ProvenanceView {
  command_id: string;
  temporal_explanation: string;
  spatial_method: string;
}

export interface EditView {
  id: string;
  layer_id: string;
  operation: string;
  start_s: number;
  end_s: number;
  rect_px: PixelRect;
  params: Record<string, unknown>;
  status: string;
  superseded: boolean;
  provenance: ProvenanceView;
}

/** Mutation responses are an edit view plus the project revision. */
export interface EditMutationResult extends EditView {
  revision: number;
}

export interface LayerView {
  id: string;
  operation: string | null;
  edits: EditView[];
}

export interface ProjectView {
  id: string;
  revision: number;
  video_id: string;
  duration_s: number;
  frame_dims: FrameDims;
  playhead_t: number;
  layers: LayerView[];
  command_ids: string[];
  undo_available: boolean;
  redo_available: boolean;
}

export interface CommandInput {
  text: string;
  playhead_t: number;
  layer_id?: string;
  sketch_px?: PixelRect;
  sketch_frame_t?: number;
  parent_command_id?: string;
  expected_revision?: number;
}

export interface CommandView {
  id: string;
  project_id: string;
  command: {
    text: string;
    playhead_t: number;
    layer_id: string;
    sketch_px: PixelRect | null;
    sketch_frame_t: number | null;
  };
  parse: ParseView;
  suggestions: EditView[];
  summary: string;
  diagnostics: string[];
  parent_command_id: string | null;
}

export interface JobView {
  job_id: string;
  project_id: string;
  state: "pending" | "running" | "done" | "failed";
  command_id: string | null;
  diagnostics: string[];
}

export interface EditPatchInput {
  start_s?: number;
  end_s?: number;
  rect_px?: PixelRect;
  operation?: string;
  params?: Record<string, unknown>;
  expected_revision?: number;
}

export interface SearchMoreResult {
  command_id: string;
  revision: number;
  new_edits: EditView[];
}

export interface TimelineEditView {
  id: string;
  operation: string;
  start_s: number;
  end_s: number;
  status: string;
  superseded: boolean;
}

export interface TimelineLayerView {
  id: string;
  operation: string | null;
  edits: TimelineEditView[];
}

export interface TimelineView {
  project_id: string;
  revision: number;
  duration_s: number;
  playhead_t: number;
  layers: TimelineLayerView[];
}

export interface TranscriptSegmentView {
  start_s: number;
  end_s: number;
  text: string;
}

export interface TranscriptView {
  project_id: string;
  video_id: string;
  segments: TranscriptSegmentView[];
}

export interface ErrorBody {
  error: {
    code: string;
    message: string;
    details: Record<string, unknown>;
  };
}

export const EDIT_STATUS = {
  suggested: "suggested",
  accepted: "accepted",
  rejected: "rejected"
} as const;
