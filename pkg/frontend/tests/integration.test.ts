// End-to-end UI loop against the real backend: a scripted boss scenario is
// served by the actual HTTP service (spawned as a child process), and the
// transcript store drives it through the awaiting_human checkpoint.

import { ChildProcess, spawn } from 'node:child_process';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiError, WorkbenchApi } from '../src/api.js';
import { TranscriptStore } from '../src/transcript.js';

const SERVICE_SCRIPT = `
import sys, tempfile, time
from ontobench.config import WorkbenchConfig
from ontobench.gateway import scripted_gateway
from ontobench.service import WorkbenchService

service = WorkbenchService(
    WorkbenchConfig(human_input_timeout=30.0),
    session_root=tempfile.mkdtemp(),
    gateway=scripted_gateway(["unused"]),
)
port = service.start(0)
print(port, flush=True)
time.sleep(120)
`;

let child: ChildProcess | null = null;
let baseUrl = '';

async function waitFor(
  predicate: () => Promise<boolean>,
  timeoutMs = 10_000,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (await predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
  throw new Error('timed out waiting for condition');
}

beforeAll(async () => {
  child = spawn('python3', ['-c', SERVICE_SCRIPT], { stdio: ['ignore', 'pipe', 'pipe'] });
  const port: string = await new Promise((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error('service did not start')), 15_000);
    child!.stdout!.once('data', (data: Buffer) => {
      clearTimeout(timer);
      resolve(data.toString().trim());
    });
    child!.stderr!.on('data', (data: Buffer) => {
      process.stderr.write(data);
    });
    child!.once('exit', () => reject(new Error('service exited early')));
  });
  baseUrl = `http://127.0.0.1:${port}`;
}, 20_000);

afterAll(() => {
  child?.kill();
});

describe('UI loop against the live service', () => {
  it('renders the boss scenario, approves at the checkpoint, and keeps drafts on 409', async () => {
    const api = new WorkbenchApi(baseUrl);
    const sessionId = await api.createSession('boss_demo', '');
    const store = new TranscriptStore(api, sessionId);

    await waitFor(async () => {
      await store.poll();
      return store.awaitingHuman;
    });

    // all turns rendered in seq order with no duplicates across polls
    await store.poll();
    await store.poll();
    const seqs = store.turns.map((t) => t.seq);
    expect(seqs).toEqual([...Array(seqs.length).keys()]);
    expect(store.turns.some((t) => t.content.includes('TERMINATE'))).toBe(true);

    // approval while awaiting_human: 204 and the session proceeds
    store.draft = 'Thank you!';
    const outcome = await store.submit();
    expect(outcome).toBe('accepted');
    await waitFor(async () => {
      await store.poll();
      return store.sessionState === 'terminated';
    });
    const kinds = store.turns.map((t) => t.kind);
    expect(kinds).toContain('human_input');
    expect(store.turns[store.turns.length - 1].kind).toBe('status');

    // input while not awaiting: 409 and the draft is preserved
    store.draft = 'one more thing';
    const rejected = await store.submit();
    expect(rejected).toBe('not_awaiting');
    expect(store.draft).toBe('one more thing');

    // direct API check of the same contract
    await expect(api.submitInput(sessionId, 'x')).rejects.toThrowError(ApiError);
  }, 30_000);

  it('serves the graph export for the graph view', async () => {
    const api = new WorkbenchApi(baseUrl);
    const text = await api.graphExport('jsonl');
    expect(typeof text).toBe('string');
  });
});
