/**
 * Pure reducer over the run event stream.
 *
 * The console never fabricates state: every string it renders is copied
 * verbatim out of an event payload (or the pending-approval endpoint).
 * Events arrive with contiguous seqs; anything at or below the cursor is
 * a replay and is dropped, so applying a batch twice is harmless.
 */

import type { InteractionPayload, RunEvent } from './types.js';

export interface AttemptView {
  attempt: number;
  prompt: string;
  raw: string;
}

export interface AgentPanel {
  agent: string;
  role: string;
  attempts: AttemptView[];
  raw: string | null; // latest model output (or step raw)
  post: string | null; // postprocessed output, when a function ran
  decision: string | null; // last approval action
}

export interface ConsoleState {
  cursor: number;
  phase: string;
  currentAgent: string | null;
  attempt: number;
  finalOutput: string | null;
  failure: string | null;
  panels: AgentPanel[]; // chain order, as first seen
}

export function initialConsoleState(): ConsoleState {
  return {
    cursor: 0,
    phase: 'Loading',
    currentAgent: null,
    attempt: 0,
    finalOutput: null,
    failure: null,
    panels: [],
  };
}

function panelFor(state: ConsoleState, agent: string, role = ''): AgentPanel {
  let panel = state.panels.find((p) => p.agent === agent);
  if (!panel) {
    panel = { agent, role, attempts: [], raw: null, post: null, decision: null };
    state.panels.push(panel);
  }
  if (role && !panel.role) panel.role = role;
  return panel;
}

function applyInteraction(state: ConsoleState, kind: string, payload: InteractionPayload): void {
  if (kind === 'run_start') return;
  if (kind === 'run_end') {
    const text = payload.output ?? '';
    if (text.startsWith('run failed: ')) state.failure = text;
    else state.finalOutput = text;
    return;
  }
  const agent = payload.agent_name;
  if (!agent) return;
  const panel = panelFor(state, agent, payload.agent_role ?? '');
  if (kind === 'llm_call') {
    panel.attempts.push({
      attempt: payload.attempt ?? panel.attempts.length + 1,
      prompt: payload.input ?? '',
      raw: payload.output ?? '',
    });
    panel.raw = payload.output ?? '';
    panel.post = null; // new attempt invalidates the old postprocess
  } else if (kind === 'approval_event') {
    panel.decision = payload.output ?? null;
    if (payload.output === 'reject') panel.raw = null; // rejected text is gone
  } else if (kind === 'postprocess') {
    panel.post = payload.output ?? '';
  }
}

export function applyEvents(state: ConsoleState, events: RunEvent[]): ConsoleState {
  // shallow-clone panels so callers can diff renders by identity
  const next: ConsoleState = {
    ...state,
    panels: state.panels.map((p) => ({ ...p, attempts: p.attempts.slice() })),
  };
  for (const event of events) {
    if (event.seq <= next.cursor) continue; // replayed or out of order
    next.cursor = event.seq;
    if (event.kind === 'state_change') {
      const payload = event.payload as { phase?: string; current_agent?: string | null; attempt?: number };
      next.phase = payload.phase ?? next.phase;
      next.currentAgent = payload.current_agent ?? null;
      next.attempt = payload.attempt ?? 0;
    } else if (event.kind === 'step_output') {
      const payload = event.payload as {
        agent_name?: string;
        raw_output?: string;
        post_output?: string;
      };
      if (payload.agent_name) {
        const panel = panelFor(next, payload.agent_name);
        panel.raw = payload.raw_output ?? panel.raw;
        panel.post = payload.post_output ?? panel.post;
      }
    } else {
      applyInteraction(next, event.kind, event.payload as unknown as InteractionPayload);
    }
  }
  return next;
}

export function isTerminalPhase(phase: string): boolean {
  return phase === 'Completed' || phase === 'Failed';
}
