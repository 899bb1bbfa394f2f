// Typed client for the annotation service (all endpoints under /api/v1).

export interface AnnotationTask {
  task_id: string;
  image_id: string;
  mode: 'coarse' | 'fine';
  predicted_score: number;
  status: string;
  image_url: string;
  width: number;
  height: number;
}

export interface SubmitAccepted {
  task_id: string;
  image_id: string;
  status: string;
  mask_area: number;
  fg_fraction: number;
  width: number;
  height: number;
}

export interface QueueCounts {
  pending: number;
  claimed: number;
  done: number;
  total: number;
  plans: number;
}

// A 422/409 is an expected outcome the UI must render, not an exception.
export type SubmitResult =
  | { kind: 'accepted'; body: SubmitAccepted }
  | { kind: 'rejected'; reason: string };

export class ApiClient {
  constructor(readonly baseUrl: string = '') {}

  async fetchNextTask(): Promise<AnnotationTask | null> {
    const resp = await fetch(`${this.baseUrl}/api/v1/tasks/next`);
    if (resp.status === 204) return null;
    if (!resp.ok) throw new Error(`next task request failed: HTTP ${resp.status}`);
    return (await resp.json()) as AnnotationTask;
  }

  async submitAnnotation(
    taskId: string,
    vertices: Array<[number, number]>,
  ): Promise<SubmitResult> {
    const resp = await fetch(
      `${this.baseUrl}/api/v1/tasks/${encodeURIComponent(taskId)}/annotation`,
      {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ vertices }),
      },
    );
    if (resp.ok) {
      return { kind: 'accepted', body: (await resp.json()) as SubmitAccepted };
    }
    if (resp.status === 422 || resp.status === 409) {
      const body = (await resp.json()) as { detail?: unknown };
      return { kind: 'rejected', reason: String(body.detail ?? 'submission rejected') };
    }
    throw new Error(`submission failed: HTTP ${resp.status}`);
  }

  async fetchStatus(): Promise<QueueCounts> {
    const resp = await fetch(`${this.baseUrl}/api/v1/status`);
    if (!resp.ok) throw new Error(`status request failed: HTTP ${resp.status}`);
    return (await resp.json()) as QueueCounts;
  }

  imageUrl(task: AnnotationTask): string {
    return `${this.baseUrl}${task.image_url}`;
  }
}
