import type { ReviewController, ReviewState } from './controller.js';
import type { Box, CandidateView } from './types.js';

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

/** Renders the side-by-side review screen and wires pointer dragging. */
export class DomView {
  private dragStart: { x: number; y: number } | null = null;
  private classOptions: string[] = [];

  bind(controller: ReviewController, classOptions: string[]) {
    this.classOptions = classOptions;

    document.addEventListener('keydown', (ev) => {
      if (ev.target instanceof HTMLSelectElement) return;
      if (['a', 'r', 'n'].includes(ev.key.toLowerCase())) {
        ev.preventDefault();
        void controller.handleKey(ev.key);
      }
    });

    for (const paneId of ['pane-original', 'pane-enhanced']) {
      const pane = $(paneId);
      pane.addEventListener('pointerdown', (ev) => {
        this.dragStart = { x: ev.clientX, y: ev.clientY };
        pane.setPointerCapture(ev.pointerId);
      });
      pane.addEventListener('pointermove', (ev) => {
        if (!this.dragStart) return;
        const scale = this.paneScale(pane);
        controller.adjustBox(
          (ev.clientX - this.dragStart.x) / scale,
          (ev.clientY - this.dragStart.y) / scale,
        );
        this.dragStart = { x: ev.clientX, y: ev.clientY };
      });
      pane.addEventListener('pointerup', () => (this.dragStart = null));
    }

    $('btn-accept').addEventListener('click', () => void controller.accept());
    $('btn-reject').addEventListener('click', () => void controller.reject());
    $('btn-next').addEventListener('click', () => controller.advance());
    $('btn-retry').addEventListener('click', () => void controller.flushRetries());
    $('class-unlock').addEventListener('change', (ev) => {
      if ((ev.target as HTMLInputElement).checked) controller.unlockClass();
    });
    $('class-select').addEventListener('change', (ev) => {
      controller.setClass((ev.target as HTMLSelectElement).value);
    });
    $('filter-select').addEventListener('change', (ev) => {
      const v = (ev.target as HTMLSelectElement).value;
      void controller.loadQueue(v === 'all' ? null : (v as never), 1);
    });
    $('supersede-yes').addEventListener('click', () =>
      void controller.resolveConflict(true));
    $('supersede-no').addEventListener('click', () =>
      void controller.resolveConflict(false));
  }

  private paneScale(pane: HTMLElement): number {
    const img = pane.querySelector('img');
    if (!img || !img.naturalWidth) return 1;
    return img.clientWidth / img.naturalWidth;
  }

  render(state: ReviewState) {
    const cand = state.queue[state.index] ?? null;
    $('queue-position').textContent = state.done
      ? 'queue complete'
      : cand
        ? `candidate ${state.index + 1} / ${state.queue.length} (page ${state.page} of ${state.totalPages}, ${state.total} total)`
        : 'empty queue';
    $('empty-state').style.display = cand || state.error ? 'none' : 'block';
    $('error-state').style.display = state.error ? 'block' : 'none';
    if (state.error) $('error-state').textContent = state.error;

    this.renderCandidate(cand, state);
    this.renderProgress(state);

    $('retry-badge').style.display = state.pendingRetries ? 'inline-block' : 'none';
    $('retry-badge').textContent = `${state.pendingRetries} verdict(s) queued`;
    ($('supersede-dialog') as HTMLDialogElement).style.display =
      state.conflict ? 'flex' : 'none';
  }

  private renderCandidate(cand: CandidateView | null, state: ReviewState) {
    const detail = $('candidate-detail');
    detail.style.display = cand ? 'grid' : 'none';
    if (!cand) return;
    ($('img-original') as HTMLImageElement).src = cand.originalUrl;
    ($('img-enhanced') as HTMLImageElement).src = cand.enhancedUrl;
    const box = state.adjustedBox ?? cand.box;
    for (const paneId of ['pane-original', 'pane-enhanced']) {
      const pane = $(paneId);
      const overlay = pane.querySelector('.box-overlay') as HTMLElement;
      this.placeOverlay(overlay, box, this.paneScale(pane));
    }
    $('cand-meta').textContent =
      `${cand.candidateId} · ${cand.model} on ${cand.imageId} · ` +
      `conf ${cand.confidence.toFixed(2)} · agreement ${cand.agreement}`;
    const select = $('class-select') as HTMLSelectElement;
    select.innerHTML = '';
    for (const cls of this.classOptions.length ? this.classOptions : [cand.classId]) {
      const opt = document.createElement('option');
      opt.value = cls;
      opt.textContent = cls;
      opt.selected = cls === (state.classId ?? cand.classId);
      select.appendChild(opt);
    }
    select.disabled = state.classLocked;
  }

  private placeOverlay(overlay: HTMLElement, box: Box, scale: number) {
    overlay.style.left = `${box[0] * scale}px`;
    overlay.style.top = `${box[1] * scale}px`;
    overlay.style.width = `${(box[2] - box[0]) * scale}px`;
    overlay.style.height = `${(box[3] - box[1]) * scale}px`;
  }

  private renderProgress(state: ReviewState) {
    const p = state.progress;
    $('progress-counts').textContent = p
      ? `${p.pending} pending · ${p.accepted} accepted · ${p.rejected} rejected`
      : 'progress unavailable';
    $('progress-stale').style.display = state.progressStale ? 'inline' : 'none';
    const list = $('progress-models');
    list.innerHTML = '';
    if (!p) return;
    for (const [model, counts] of Object.entries(p.by_model)) {
      const li = document.createElement('li');
      li.textContent =
        `${model}: ${counts.pending}/${counts.accepted}/${counts.rejected}`;
      list.appendChild(li);
    }
    const bar = $('progress-bar-fill');
    const doneCount = p.accepted + p.rejected;
    bar.style.width = p.total ? `${(100 * doneCount) / p.total}%` : '0%';
  }
}
