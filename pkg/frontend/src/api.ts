import type {
  CandidateView,
  PostResult,
  Progress,
  QueuePage,
  Status,
  VerdictPayload,
} from './types.js';

export interface ReviewApi {
  loadQueue(filter: Status | null, page: number, pageSize: number): Promise<QueuePage>;
  postVerdict(payload: VerdictPayload): Promise<PostResult>;
  progress(): Promise<Progress>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

interface RawCandidate {
  candidate_id: string;
  image_id: string;
  model: string;
  class_id: string;
  box: [number, number, number, number];
  confidence: number;
  agreement: number;
  status: Status;
}

export function toCandidateView(raw: RawCandidate, base = ''): CandidateView {
  return {
    candidateId: raw.candidate_id,
    imageId: raw.image_id,
    model: raw.model,
    classId: raw.class_id,
    box: raw.box,
    confidence: raw.confidence,
    agreement: raw.agreement,
    status: raw.status,
    originalUrl: `${base}/api/images/original/${encodeURIComponent(raw.image_id)}`,
    enhancedUrl: `${base}/api/images/${encodeURIComponent(raw.model)}/${encodeURIComponent(raw.image_id)}`,
  };
}

/** The only network surface of the UI: the review service's JSON API. */
export class HttpReviewApi implements ReviewApi {
  constructor(
    private base = '',
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async loadQueue(filter: Status | null, page: number, pageSize: number): Promise<QueuePage> {
    const params = new URLSearchParams({ page: String(page), page_size: String(pageSize) });
    if (filter) params.set('status', filter);
    const resp = await this.fetchFn(`${this.base}/api/candidates?${params}`);
    if (!resp.ok) throw new Error(`queue load failed: HTTP ${resp.status}`);
    const body = await resp.json();
    return {
      candidates: body.candidates.map((c: RawCandidate) => toCandidateView(c, this.base)),
      page: body.page,
      pageSize: body.page_size,
      total: body.total,
      totalPages: body.total_pages,
    };
  }

  async postVerdict(payload: VerdictPayload): Promise<PostResult> {
    const resp = await this.fetchFn(`${this.base}/api/verdicts`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    return { ok: resp.ok, status: resp.status };
  }

  async progress(): Promise<Progress> {
    const resp = await this.fetchFn(`${this.base}/api/progress`);
    if (!resp.ok) throw new Error(`progress failed: HTTP ${resp.status}`);
    return resp.json();
  }
}
