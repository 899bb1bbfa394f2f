// DOM wiring: one canvas, one task at a time, submit advances the queue.

import { ApiClient } from './api.js';
import type { AnnotationTask } from './api.js';
import { eventToImagePoint, nearFirstVertex } from './geometry.js';
import { CanvasSession } from './session.js';

export interface App {
  session: CanvasSession;
  api: ApiClient;
  root: HTMLElement;
  refresh(): Promise<void>;
  submit(): Promise<void>;
  render(): void;
}

function modeLabel(task: AnnotationTask): string {
  return task.mode === 'fine' ? 'draw from scratch (fine)' : 'coarse outline';
}

const SHELL = `
  <div id="banner" class="banner">loading...</div>
  <div id="stage"><canvas id="canvas" width="1" height="1"></canvas></div>
  <div class="toolbar">
    <button id="btn-close" type="button">close polygon</button>
    <button id="btn-undo" type="button">undo vertex</button>
    <button id="btn-clear" type="button">clear</button>
    <button id="btn-submit" type="button">submit</button>
    <button id="btn-retry" type="button" hidden>retry</button>
  </div>
  <div class="toolbar">
    <button id="btn-zoom-in" type="button">zoom +</button>
    <button id="btn-zoom-out" type="button">zoom -</button>
    <button id="btn-pan-left" type="button">pan left</button>
    <button id="btn-pan-right" type="button">pan right</button>
    <button id="btn-pan-up" type="button">pan up</button>
    <button id="btn-pan-down" type="button">pan down</button>
    <button id="btn-view-reset" type="button">reset view</button>
  </div>
  <div id="confirm" class="confirm"></div>
  <div id="status" class="status"></div>
`;

export function mountApp(root: HTMLElement, baseUrl = ''): App {
  root.innerHTML = SHELL;
  const api = new ApiClient(baseUrl);
  const session = new CanvasSession();

  const pick = <T extends HTMLElement>(id: string): T => {
    const el = root.querySelector<T>(`#${id}`);
    if (!el) throw new Error(`missing element #${id}`);
    return el;
  };
  const banner = pick<HTMLDivElement>('banner');
  const canvas = pick<HTMLCanvasElement>('canvas');
  const statusEl = pick<HTMLDivElement>('status');
  const confirmEl = pick<HTMLDivElement>('confirm');
  const buttons = {
    close: pick<HTMLButtonElement>('btn-close'),
    undo: pick<HTMLButtonElement>('btn-undo'),
    clear: pick<HTMLButtonElement>('btn-clear'),
    submit: pick<HTMLButtonElement>('btn-submit'),
    retry: pick<HTMLButtonElement>('btn-retry'),
  };

  const image = document.createElement('img');
  image.addEventListener('load', () => render());

  // Canvas 2D is unavailable in DOM emulators; state still works without it.
  function context(): CanvasRenderingContext2D | null {
    return canvas.getContext ? canvas.getContext('2d') : null;
  }

  function render(): void {
    const t = session.task;
    const { zoom, panX, panY } = session.view;
    if (t) {
      canvas.width = Math.max(1, Math.round(t.width * zoom));
      canvas.height = Math.max(1, Math.round(t.height * zoom));
    }
    const ctx = context();
    if (!ctx) return;
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (!t) return;
    ctx.setTransform(zoom, 0, 0, zoom, panX * zoom, panY * zoom);
    if (image.complete && image.naturalWidth > 0) {
      ctx.drawImage(image, 0, 0, t.width, t.height);
    } else {
      ctx.fillStyle = '#222';
      ctx.fillRect(0, 0, t.width, t.height);
    }
    const vs = session.vertices;
    if (vs.length > 0) {
      ctx.strokeStyle = '#ff5252';
      ctx.lineWidth = 2 / zoom;
      ctx.beginPath();
      ctx.moveTo(vs[0][0], vs[0][1]);
      for (const [x, y] of vs.slice(1)) ctx.lineTo(x, y);
      if (session.closed) ctx.closePath();
      ctx.stroke();
      ctx.fillStyle = '#ffd740';
      for (const [x, y] of vs) {
        ctx.fillRect(x - 3 / zoom, y - 3 / zoom, 6 / zoom, 6 / zoom);
      }
    }
  }

  function renderText(): void {
    const t = session.task;
    if (session.phase === 'empty') {
      banner.textContent = 'no tasks pending';
    } else if (session.phase === 'error') {
      banner.textContent = 'service unreachable';
    } else if (session.phase === 'loading' || t === null) {
      banner.textContent = 'loading...';
    } else {
      banner.textContent =
        `${t.image_id} / ${modeLabel(t)} / ` +
        `predicted quality ${t.predicted_score.toFixed(2)}`;
    }
    statusEl.textContent = session.message;
  }

  function updateControls(): void {
    const drawing = session.phase === 'drawing';
    buttons.close.disabled = !drawing || session.closed || session.vertices.length < 3;
    buttons.undo.disabled = !drawing || session.vertices.length === 0;
    buttons.clear.disabled = !drawing || session.vertices.length === 0;
    buttons.submit.disabled = !session.canSubmit();
    buttons.retry.hidden = session.phase !== 'error';
  }

  function renderAll(): void {
    renderText();
    updateControls();
    render();
  }

  async function refresh(): Promise<void> {
    session.phase = 'loading';
    session.message = '';
    renderAll();
    let task: AnnotationTask | null;
    try {
      task = await api.fetchNextTask();
    } catch (err) {
      session.markError(`${err instanceof Error ? err.message : err}; retry below`);
      renderAll();
      return;
    }
    if (task === null) {
      session.markEmpty();
    } else {
      session.beginTask(task);
      image.src = api.imageUrl(task);
    }
    renderAll();
  }

  async function submit(): Promise<void> {
    if (!session.canSubmit() || session.task === null) return;
    const t = session.task;
    const vertices = session.vertices.slice() as Array<[number, number]>;
    session.beginSubmit();
    renderAll();
    try {
      const result = await api.submitAnnotation(t.task_id, vertices);
      if (result.kind === 'accepted') {
        confirmEl.textContent =
          `saved ${result.body.image_id}: mask area ${result.body.mask_area} px`;
        await refresh();
        return;
      }
      session.rejected(result.reason);
    } catch (err) {
      session.rejected(`${err instanceof Error ? err.message : err}`);
    }
    renderAll();
  }

  canvas.addEventListener('click', (ev) => {
    if (session.phase !== 'drawing') return;
    const p = eventToImagePoint(ev, canvas, session.view);
    if (!session.closed && session.vertices.length >= 3 &&
        nearFirstVertex(p, session.vertices)) {
      session.closePolygon();
    } else {
      session.addVertex(p);
    }
    renderAll();
  });

  buttons.close.addEventListener('click', () => { session.closePolygon(); renderAll(); });
  buttons.undo.addEventListener('click', () => { session.undoVertex(); renderAll(); });
  buttons.clear.addEventListener('click', () => { session.clearVertices(); renderAll(); });
  buttons.submit.addEventListener('click', () => { void submit(); });
  buttons.retry.addEventListener('click', () => { void refresh(); });
  pick<HTMLButtonElement>('btn-zoom-in').addEventListener('click', () => {
    session.zoomBy(1.25); renderAll();
  });
  pick<HTMLButtonElement>('btn-zoom-out').addEventListener('click', () => {
    session.zoomBy(0.8); renderAll();
  });
  pick<HTMLButtonElement>('btn-pan-left').addEventListener('click', () => {
    session.panBy(16, 0); renderAll();
  });
  pick<HTMLButtonElement>('btn-pan-right').addEventListener('click', () => {
    session.panBy(-16, 0); renderAll();
  });
  pick<HTMLButtonElement>('btn-pan-up').addEventListener('click', () => {
    session.panBy(0, 16); renderAll();
  });
  pick<HTMLButtonElement>('btn-pan-down').addEventListener('click', () => {
    session.panBy(0, -16); renderAll();
  });
  pick<HTMLButtonElement>('btn-view-reset').addEventListener('click', () => {
    session.resetView(); renderAll();
  });

  renderAll();
  return { session, api, root, refresh, submit, render };
}

declare global {
  interface Window { segallocApp?: App }
}

const autoRoot =
  typeof document !== 'undefined' ? document.getElementById('annotator-root') : null;
if (autoRoot) {
  const app = mountApp(autoRoot);
  window.segallocApp = app;
  void app.refresh();
}
