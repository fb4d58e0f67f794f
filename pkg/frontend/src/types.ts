export type Box = [number, number, number, number]; // x_min, y_min, x_max, y_max

export type Status = 'pending' | 'accepted' | 'rejected';

export interface CandidateView {
  candidateId: string;
  imageId: string;
  model: string;
  classId: string;
  box: Box;
  confidence: number;
  agreement: number;
  status: Status;
  originalUrl: string;
  enhancedUrl: string;
}

export interface QueuePage {
  candidates: CandidateView[];
  page: number;
  pageSize: number;
  total: number;
  totalPages: number;
}

export interface VerdictPayload {
  candidate_id: string;
  decision: 'accepted' | 'rejected';
  annotator: string;
  annotation?: { class_id: string; box: Box };
  supersede?: boolean;
}

export interface Progress {
  pending: number;
  accepted: number;
  rejected: number;
  total: number;
  by_model: Record<string, { pending: number; accepted: number; rejected: number }>;
}

export interface PostResult {
  ok: boolean;
  status: number; // 201 created, 200 duplicate, 409 conflict, 0 network failure
}
