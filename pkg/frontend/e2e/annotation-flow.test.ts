// End-to-end: the real annotation service (spawned via the segalloc CLI)
// driven through the mounted UI with DOM events. Browser engine downloads are
// blocked in this environment, so the DOM layer is emulated; every HTTP
// exchange is real.
import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync, writeFileSync } from 'node:fs';
import { request } from 'node:http';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { mountApp, type App } from '../src/main.js';

const PORT = 8700 + (process.pid % 800);
const ORIGIN = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | null = null;
let app: App;

function ping(): Promise<boolean> {
  return new Promise((resolve) => {
    const req = request(
      { host: '127.0.0.1', port: PORT, path: '/api/v1/status', timeout: 1000 },
      (res) => { res.resume(); resolve(res.statusCode === 200); },
    );
    req.on('error', () => resolve(false));
    req.on('timeout', () => { req.destroy(); resolve(false); });
    req.end();
  });
}

async function until(cond: () => boolean, ms = 20000): Promise<void> {
  const t0 = Date.now();
  while (!cond()) {
    if (Date.now() - t0 > ms) throw new Error('condition not met in time');
    await new Promise((r) => setTimeout(r, 50));
  }
}

function click(el: Element, x = 0, y = 0): void {
  el.dispatchEvent(new MouseEvent('click', { clientX: x, clientY: y, bubbles: true }));
}

function canvas(): HTMLCanvasElement {
  return app.root.querySelector('#canvas') as HTMLCanvasElement;
}

function button(id: string): HTMLButtonElement {
  return app.root.querySelector(`#${id}`) as HTMLButtonElement;
}

function text(id: string): string {
  return (app.root.querySelector(`#${id}`) as HTMLElement).textContent ?? '';
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), 'segalloc-ui-'));
  const corpus = join(workdir, 'corpus');
  execFileSync('segalloc', ['gen-corpus', '--root', corpus, '--n', '4', '--seed', '5']);

  // Three coarse HUMAN tasks; serve order is by ascending predicted score.
  const plan = join(workdir, 'plan.csv');
  writeFileSync(plan, [
    'image_id,source,generator_id,predicted_score,cost_seconds',
    'syn0000,HUMAN,,0.7,20.0',
    'syn0001,HUMAN,,0.4,20.0',
    'syn0002,HUMAN,,0.1,20.0',
    '',
  ].join('\n'));

  server = spawn('segalloc', [
    'serve', '--root', corpus, '--state', join(workdir, 'state'),
    '--plan', plan, '--host', '127.0.0.1', '--port', String(PORT),
  ], { stdio: 'ignore' });

  const t0 = Date.now();
  while (!(await ping())) {
    if (Date.now() - t0 > 60000) throw new Error('service did not come up');
    await new Promise((r) => setTimeout(r, 200));
  }

  // Same-origin setup keeps the client on relative URLs, as when the service
  // serves the bundle itself; absolute base is the fallback.
  const w = window as unknown as { happyDOM?: { setURL?: (u: string) => void } };
  let base = ORIGIN;
  if (w.happyDOM?.setURL) {
    w.happyDOM.setURL(`${ORIGIN}/`);
    base = '';
  }
  app = mountApp(document.body, base);
});

afterAll(() => {
  if (server) server.kill();
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

describe('annotation flow against the live service', () => {
  it('fetches the worst-first task and shows mode and score', async () => {
    await app.refresh();
    expect(app.session.task?.image_id).toBe('syn0002');
    expect(app.session.task?.mode).toBe('coarse');
    expect(text('banner')).toContain('syn0002');
    expect(text('banner')).toContain('coarse');
    expect(text('banner')).toContain('0.10');
    expect(button('btn-submit').disabled).toBe(true);
  });

  it('draws a rectangle, submits, gets confirmation, and advances', async () => {
    const c = canvas();
    click(c, 5, 5);
    click(c, 91, 5);
    expect(button('btn-submit').disabled).toBe(true); // 2 vertices, not closeable
    click(c, 91, 91);
    click(c, 5, 91);
    expect(app.session.vertices).toEqual([[5, 5], [91, 5], [91, 91], [5, 91]]);
    click(button('btn-close'));
    expect(button('btn-submit').disabled).toBe(false);
    click(button('btn-submit'));
    await until(() => app.session.task?.image_id === 'syn0001');
    expect(text('confirm')).toContain('saved syn0002');
    expect(text('confirm')).toMatch(/mask area \d+ px/);
    expect(app.session.vertices).toEqual([]); // next task starts clean
  });

  it('surfaces the 422 reason for a figure-eight and keeps the vertices', async () => {
    const c = canvas();
    const bowtie: Array<[number, number]> = [[10, 10], [80, 80], [80, 10], [10, 80]];
    for (const [x, y] of bowtie) click(c, x, y);
    click(button('btn-close'));
    click(button('btn-submit'));
    await until(() => app.session.message.length > 0);
    expect(app.session.phase).toBe('drawing');
    expect(text('status')).toContain('self-intersecting');
    expect(app.session.vertices).toEqual(bowtie);
    expect(app.session.task?.image_id).toBe('syn0001'); // same task, still claimed
  });

  it('recovers by redrawing a valid polygon on the same task', async () => {
    click(button('btn-clear'));
    expect(app.session.vertices).toEqual([]);
    const c = canvas();
    click(c, 10, 10);
    click(c, 80, 10);
    click(c, 45, 80);
    click(button('btn-close'));
    click(button('btn-submit'));
    await until(() => app.session.task?.image_id === 'syn0000');
    expect(text('confirm')).toContain('saved syn0001');
  });

  it('drains the queue into the no-tasks state', async () => {
    const c = canvas();
    click(c, 5, 5);
    click(c, 91, 5);
    click(c, 91, 91);
    click(c, 5, 91);
    click(button('btn-close'));
    click(button('btn-submit'));
    await until(() => app.session.phase === 'empty');
    expect(text('banner')).toContain('no tasks pending');
    const counts = await app.api.fetchStatus();
    expect(counts.done).toBe(3);
    expect(counts.pending).toBe(0);
  });
});
