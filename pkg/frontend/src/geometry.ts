import type { Box } from './types.js';

export function translateBox(box: Box, dx: number, dy: number): Box {
  return [box[0] + dx, box[1] + dy, box[2] + dx, box[3] + dy];
}

export function hasPositiveArea(box: Box): boolean {
  return box[0] < box[2] && box[1] < box[3];
}

/** Resize one edge; returns null when the result would collapse the box. */
export function resizeEdge(
  box: Box,
  edge: 'left' | 'top' | 'right' | 'bottom',
  delta: number,
): Box | null {
  const next: Box = [...box];
  if (edge === 'left') next[0] += delta;
  if (edge === 'top') next[1] += delta;
  if (edge === 'right') next[2] += delta;
  if (edge === 'bottom') next[3] += delta;
  return hasPositiveArea(next) ? next : null;
}
