/** Status polling loop, one per watched run. */

import type { ApiClient, RunStatus } from "./api.js";

export interface PollHandle {
  done: Promise<RunStatus>;
  cancel(): void;
}

const TERMINAL: ReadonlySet<string> = new Set(["done", "failed"]);

export function pollRun(
  api: ApiClient,
  runId: string,
  onStatus: (status: RunStatus) => void,
  intervalMs = 400,
): PollHandle {
  let cancelled = false;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const done = new Promise<RunStatus>((resolve, reject) => {
    const tick = async (): Promise<void> => {
      if (cancelled) {
        return;
      }
      let status: RunStatus;
      try {
        status = await api.runStatus(runId);
      } catch (err) {
        reject(err);
        return;
      }
      if (cancelled) {
        return;
      }
      onStatus(status);
      if (TERMINAL.has(status.state)) {
        resolve(status);
        return;
      }
      timer = setTimeout(() => void tick(), intervalMs);
    };
    void tick();
  });

  return {
    done,
    cancel() {
      cancelled = true;
      if (timer !== null) {
        clearTimeout(timer);
      }
    },
  };
}
