import { HttpReviewApi } from './api.js';
import { ReviewController } from './controller.js';
import { DomView } from './view.js';

function annotatorId(): string {
  const stored = localStorage.getItem('uwqa-annotator');
  if (stored) return stored;
  const fresh = `annotator-${Math.random().toString(36).slice(2, 8)}`;
  localStorage.setItem('uwqa-annotator', fresh);
  return fresh;
}

async function classOptions(): Promise<string[]> {
  try {
    const resp = await fetch('/api/export/corrected-gt');
    if (!resp.ok) return [];
    const doc = await resp.json();
    return doc.classes ?? [];
  } catch {
    return [];
  }
}

async function start() {
  const view = new DomView();
  const controller = new ReviewController(new HttpReviewApi(), annotatorId(), view);
  view.bind(controller, await classOptions());
  await controller.loadQueue('pending', 1);
  await controller.refreshProgress();
}

void start();
