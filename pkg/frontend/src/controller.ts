import type { ReviewApi } from './api.js';
import { hasPositiveArea, translateBox } from './geometry.js';
import type { Box, CandidateView, Progress, Status, VerdictPayload } from './types.js';

export interface ReviewState {
  queue: CandidateView[];
  index: number;
  filter: Status | null;
  page: number;
  totalPages: number;
  total: number;
  adjustedBox: Box | null;
  classId: string | null;
  classLocked: boolean;
  progress: Progress | null;
  progressStale: boolean;
  conflict: CandidateView | null;
  pendingRetries: number;
  error: string | null;
  done: boolean;
}

export interface View {
  render(state: ReviewState): void;
}

const PAGE_SIZE = 20;

/**
 * Queue state machine behind the review screen. All mutation funnels
 * through the verdict endpoint; everything else is re-fetched from the
 * service after each action so the screen always reflects service truth.
 */
export class ReviewController {
  state: ReviewState = {
    queue: [],
    index: 0,
    filter: 'pending',
    page: 1,
    totalPages: 1,
    total: 0,
    adjustedBox: null,
    classId: null,
    classLocked: true,
    progress: null,
    progressStale: false,
    conflict: null,
    pendingRetries: 0,
    error: null,
    done: false,
  };

  private retryQueue: VerdictPayload[] = [];

  constructor(
    private api: ReviewApi,
    private annotator: string,
    private view: View,
  ) {}

  current(): CandidateView | null {
    return this.state.queue[this.state.index] ?? null;
  }

  /** The box that would be posted on accept: adjusted if dragged. */
  effectiveBox(): Box | null {
    const cand = this.current();
    if (!cand) return null;
    return this.state.adjustedBox ?? cand.box;
  }

  effectiveClass(): string | null {
    const cand = this.current();
    if (!cand) return null;
    return this.state.classId ?? cand.classId;
  }

  private emit() {
    this.view.render(this.state);
  }

  async loadQueue(filter: Status | null = this.state.filter, page = 1): Promise<void> {
    this.state.filter = filter;
    this.state.error = null;
    try {
      const result = await this.api.loadQueue(filter, page, PAGE_SIZE);
      this.state.queue = result.candidates;
      this.state.page = result.page;
      this.state.totalPages = result.totalPages;
      this.state.total = result.total;
      this.state.index = 0;
      this.state.done = result.candidates.length === 0;
      this.resetAdjustment();
    } catch (err) {
      this.state.error = `cannot reach review service: ${String(err)}`;
    }
    this.emit();
  }

  async refreshProgress(): Promise<void> {
    try {
      this.state.progress = await this.api.progress();
      this.state.progressStale = false;
    } catch {
      this.state.progressStale = true;
    }
    this.emit();
  }

  private resetAdjustment() {
    this.state.adjustedBox = null;
    this.state.classId = null;
    this.state.classLocked = true;
  }

  /** Drag the proposed box; rejected when the area would collapse. */
  adjustBox(dx: number, dy: number): void {
    const base = this.effectiveBox();
    if (!base) return;
    const moved = translateBox(base, dx, dy);
    if (!hasPositiveArea(moved)) return;
    this.state.adjustedBox = moved;
    this.emit();
  }

  unlockClass(): void {
    this.state.classLocked = false;
    this.emit();
  }

  setClass(classId: string): void {
    if (this.state.classLocked) return;
    this.state.classId = classId;
    this.emit();
  }

  async handleKey(key: string): Promise<void> {
    const k = key.toLowerCase();
    if (k === 'a') await this.accept();
    else if (k === 'r') await this.reject();
    else if (k === 'n') this.advance();
  }

  async accept(supersede = false): Promise<void> {
    const cand = this.current();
    if (!cand) return;
    const payload: VerdictPayload = {
      candidate_id: cand.candidateId,
      decision: 'accepted',
      annotator: this.annotator,
      annotation: { class_id: this.effectiveClass()!, box: this.effectiveBox()! },
    };
    if (supersede) payload.supersede = true;
    await this.post(payload, cand);
  }

  async reject(supersede = false): Promise<void> {
    const cand = this.current();
    if (!cand) return;
    const payload: VerdictPayload = {
      candidate_id: cand.candidateId,
      decision: 'rejected',
      annotator: this.annotator,
    };
    if (supersede) payload.supersede = true;
    await this.post(payload, cand);
  }

  async resolveConflict(confirm: boolean): Promise<void> {
    const cand = this.state.conflict;
    this.state.conflict = null;
    if (!cand || !confirm) {
      this.emit();
      return;
    }
    // re-issue the last intent with the supersede flag
    const intent = this.lastIntent;
    if (intent) {
      intent.supersede = true;
      await this.post(intent, cand);
    }
  }

  private lastIntent: VerdictPayload | null = null;

  private async post(payload: VerdictPayload, cand: CandidateView): Promise<void> {
    this.lastIntent = payload;
    let result;
    try {
      result = await this.api.postVerdict(payload);
    } catch {
      result = { ok: false, status: 0 };
    }
    if (result.status === 409) {
      this.state.conflict = cand;
      this.emit();
      return;
    }
    if (result.status === 0) {
      // network failure: keep the verdict queued with a visible badge
      this.retryQueue.push(payload);
      this.state.pendingRetries = this.retryQueue.length;
      this.emit();
      return;
    }
    if (!result.ok) {
      this.state.error = `verdict rejected: HTTP ${result.status}`;
      this.emit();
      return;
    }
    cand.status = payload.decision;
    this.advance();
    await this.refreshProgress();
  }

  /** Re-send verdicts that failed on the network; keeps order. */
  async flushRetries(): Promise<void> {
    const pending = this.retryQueue;
    this.retryQueue = [];
    for (const payload of pending) {
      try {
        const result = await this.api.postVerdict(payload);
        if (!result.ok && result.status === 0) this.retryQueue.push(payload);
      } catch {
        this.retryQueue.push(payload);
      }
    }
    this.state.pendingRetries = this.retryQueue.length;
    await this.refreshProgress();
  }

  advance(): void {
    this.resetAdjustment();
    if (this.state.index + 1 < this.state.queue.length) {
      this.state.index += 1;
      this.emit();
      return;
    }
    if (this.state.page < this.state.totalPages) {
      // decided candidates leave a pending-filtered list, shifting later
      // pages down, so that filter restarts from page 1
      const next = this.state.filter === 'pending' ? 1 : this.state.page + 1;
      void this.loadQueue(this.state.filter, next);
      return;
    }
    this.state.done = true;
    this.emit();
  }
}
