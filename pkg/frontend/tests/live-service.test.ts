/**
 * Round trip against the real Python service over loopback: builder output
 * validates clean, serialization matches the engine byte for byte, and the
 * console modules drive a gated run through reject and edit decisions.
 */

import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiError, createRun, getEvents, getPending, getRun, postApproval, validateWorkflow } from '../src/api.js';
import { exportDocument, serializeDocument, type BuilderState } from '../src/builder.js';
import { applyEvents, initialConsoleState } from '../src/events.js';
import { RunWatcher } from '../src/console.js';
import type { PendingApproval, WorkflowDoc } from '../src/types.js';

const port = 20000 + Math.floor(Math.random() * 20000);
const base = `http://127.0.0.1:${port}`;
let service: ChildProcess;
let serviceLog = '';

function gatedState(): BuilderState {
  return {
    flowDescription: 'reviewed publishing chain',
    agents: [
      { name: 'Drafter', role: 'You draft text', task: 'Draft the text', approval: true, postprocessor: 'None' },
      { name: 'Publisher', role: 'You publish text', task: 'Publish the text', approval: false, postprocessor: 'None' },
    ],
  };
}

async function waitFor<T>(probe: () => Promise<T | null>, what: string, ms = 15000): Promise<T> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    const value = await probe().catch(() => null);
    if (value !== null) return value;
    await new Promise((resolve) => setTimeout(resolve, 40));
  }
  throw new Error(`timed out waiting for ${what}\nservice log:\n${serviceLog}`);
}

beforeAll(async () => {
  const interactions = mkdtempSync(join(tmpdir(), 'agentflow-ui-'));
  const boot = [
    'import uvicorn',
    'from agentflow.service import create_app',
    `app = create_app(interactions_dir=${JSON.stringify(interactions)}, poll_timeout_s=0.5)`,
    `uvicorn.run(app, host="127.0.0.1", port=${port}, log_level="error")`,
  ].join('\n');
  service = spawn('python3', ['-c', boot], { stdio: ['ignore', 'pipe', 'pipe'] });
  service.stdout?.on('data', (chunk) => (serviceLog += chunk));
  service.stderr?.on('data', (chunk) => (serviceLog += chunk));
  await waitFor(async () => {
    const response = await fetch(`${base}/workflows`);
    return response.ok ? true : null;
  }, 'service startup');
});

afterAll(() => {
  service?.kill();
});

describe('builder against the live validator', () => {
  it('exported draft passes strict validation', async () => {
    const report = await validateWorkflow(exportDocument(gatedState()), 'strict', base);
    expect(report.violations).toEqual([]);
  });

  it('inline violations point at the drafted field', async () => {
    const state = gatedState();
    state.agents[0]!.name = '';
    const report = await validateWorkflow(exportDocument(state), 'strict', base);
    const paths = report.violations.map((v) => v.path);
    expect(paths).toContain('/agents/0/name_of_agent');
  });

  it('serialization matches the engine byte for byte', () => {
    const text = serializeDocument(exportDocument(gatedState()));
    const echo = spawnSync(
      'python3',
      [
        '-c',
        'import sys\n' +
          'from agentflow.model import parse_workflow, serialize_workflow\n' +
          "sys.stdout.write(serialize_workflow(parse_workflow(sys.stdin.read(), source_stem='x')))",
      ],
      { input: text, encoding: 'utf-8' },
    );
    expect(echo.status).toBe(0);
    expect(echo.stdout).toBe(text);
  });
});

describe('run console against the live service', () => {
  it('reject then edit drives the gate; edited text reaches the next prompt', async () => {
    const workflow: WorkflowDoc = exportDocument(gatedState());
    const handle = await createRun(
      {
        workflow,
        config: { model: 'mock/script' },
        mock_script: ['draft attempt 1', 'draft attempt 2', 'publisher says done'],
      },
      base,
    );
    const runId = handle.run_id;

    const firstGate = await waitFor<PendingApproval>(
      () => getPending(runId, base),
      'first approval gate',
    );
    expect(firstGate.agent_name).toBe('Drafter');
    expect(firstGate.attempt).toBe(1);
    expect(firstGate.raw_output).toBe('draft attempt 1');

    await postApproval(runId, { action: 'reject', agent_name: 'Drafter', attempt: 1 }, base);

    const secondGate = await waitFor<PendingApproval>(
      () => getPending(runId, base).then((p) => (p && p.attempt === 2 ? p : null)),
      'gate to reappear after reject',
    );
    expect(secondGate.agent_name).toBe('Drafter');
    expect(secondGate.raw_output).toBe('draft attempt 2');

    await postApproval(
      runId,
      { action: 'edit', edited_output: 'FIXED', agent_name: 'Drafter', attempt: 2 },
      base,
    );

    await waitFor(async () => ((await getRun(runId, base)).terminal ? true : null), 'terminal run');
    const final = await getRun(runId, base);
    expect(final.state.phase).toBe('Completed');
    expect(final.final_output).toBe('publisher says done');

    const batch = await getEvents(runId, 0, base);
    expect(batch.terminal).toBe(true);
    const seqs = batch.events.map((e) => e.seq);
    expect(seqs).toEqual(Array.from({ length: seqs.length }, (_, i) => i + 1));

    // the reducer applied to real payloads sees the whole story
    const state = applyEvents(initialConsoleState(), batch.events);
    expect(state.panels.map((p) => p.agent)).toEqual(['Drafter', 'Publisher']);
    expect(state.panels[0]!.attempts.map((a) => a.attempt)).toEqual([1, 2]);
    expect(state.finalOutput).toBe('publisher says done');

    const publisherPrompt = state.panels[1]!.attempts[0]!.prompt;
    expect(publisherPrompt).toContain('FIXED');
    expect(publisherPrompt).not.toContain('draft attempt 2');
  });

  it('RunWatcher follows an ungated run to completion', async () => {
    const workflow = exportDocument({
      flowDescription: 'single step',
      agents: [{ name: 'Solo', role: 'You answer', task: 'Answer', approval: false, postprocessor: 'None' }],
    });
    const handle = await createRun(
      { workflow, config: { model: 'mock/script' }, mock_script: ['the only answer'] },
      base,
    );
    const views: string[] = [];
    const watcher = new RunWatcher(handle.run_id, (view) => views.push(view.state.phase), base);
    const state = await watcher.watch();
    expect(state.finalOutput).toBe('the only answer');
    expect(state.panels.map((p) => p.agent)).toEqual(['Solo']);
    expect(views[views.length - 1]).toBe('Completed');
  });

  it('unknown run id surfaces a 404 ApiError', async () => {
    await expect(getRun('not-a-run', base)).rejects.toThrowError(ApiError);
    await expect(getRun('not-a-run', base)).rejects.toMatchObject({ status: 404 });
  });
});
