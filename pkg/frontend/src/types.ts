/** Payload shapes of the review/cluster API. */

export type DecisionValue = "same" | "different" | "incomparable";

export const DECISIONS: readonly DecisionValue[] = ["same", "different", "incomparable"];

export interface AnnotationCard {
  annotation_id: string;
  camera_id: string;
  timestamp: string;
  viewpoint: string;
  species: string;
  ca_score: number;
  crop_uri: string | null;
}

export interface RunCounters {
  algorithmic_reviews: number;
  human_reviews: number;
  total_reviews: number;
  automation_rate: number;
  pending_reviews: number;
}

export interface RunHandle {
  run_id: string;
  status: string;
  state_version: number;
  mode?: string;
  counters: RunCounters;
  cluster_count: number;
  converged: boolean;
  error?: string | null;
}

export interface ReviewRequest {
  run_id: string;
  run_status: string;
  state_version: number;
  request_id: string;
  attempt: number;
  pair: [AnnotationCard, AnnotationCard];
  counters: RunCounters;
}

export interface SubmitResult {
  run_id: string;
  run_status: string;
  state_version: number;
  request_id: string;
  recorded: string;
  duplicate: boolean;
}

export interface ReviewLogEntry {
  seq: number;
  kind: string;
  a?: string;
  b?: string;
  decision?: string;
  source?: string;
}

export interface ClusterRow {
  cluster_id: string;
  size: number;
  members: string[];
}

export interface ClusterPage {
  run_id: string;
  run_status: string;
  state_version: number;
  total: number;
  page: number;
  page_size: number;
  clusters: ClusterRow[];
}

export interface GeoFeature {
  type: "Feature";
  geometry: { type: "Point"; coordinates: [number, number] };
  properties: Record<string, unknown>;
}

export interface EncounterRecord {
  encounter_id: string;
  camera_id: string;
  minute_buckets: number[];
  member_ids: string[];
  representative_id: string;
}

export interface ClusterDetail {
  run_id: string;
  run_status: string;
  state_version: number;
  cluster_id: string;
  members: AnnotationCard[];
  encounters: EncounterRecord[];
  cameras: string[];
  geojson: { type: string; features: GeoFeature[] };
}
