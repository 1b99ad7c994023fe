/**
 * Workflow authoring state and its (de)serialization.
 *
 * The builder never exposes head/next pointers: the drafted order IS the
 * chain order. Export derives head="True" on the first agent and next
 * pointers down the list ending in "None". Import walks the pointers back
 * into visual order, so export -> import -> export is byte-identical.
 */

import type { AgentDoc, BoolString, Violation, WorkflowDoc } from './types.js';

export interface AgentDraft {
  name: string;
  role: string;
  task: string;
  approval: boolean;
  postprocessor: string; // "None" for none
}

export interface BuilderState {
  flowDescription: string;
  agents: AgentDraft[];
}

export function emptyDraft(): AgentDraft {
  return { name: '', role: '', task: '', approval: false, postprocessor: 'None' };
}

export function emptyBuilder(): BuilderState {
  return { flowDescription: '', agents: [] };
}

export function canExport(state: BuilderState): boolean {
  return state.agents.length > 0;
}

function boolString(value: boolean): BoolString {
  return value ? 'True' : 'False';
}

/** Drafted order to document: head on the first agent, next pointers chained. */
export function exportDocument(state: BuilderState): WorkflowDoc {
  if (!canExport(state)) throw new Error('cannot export a workflow with no agents');
  const agents: AgentDoc[] = state.agents.map((draft, i) => ({
    head: boolString(i === 0),
    name_of_agent: draft.name,
    role_of_agent: draft.role,
    what_should_agent_do: draft.task,
    require_human_approval_of_response: boolString(draft.approval),
    postprocessor_function: draft.postprocessor || 'None',
    next: i + 1 < state.agents.length ? state.agents[i + 1]!.name : 'None',
  }));
  return { flow_description: state.flowDescription, agents };
}

/**
 * Canonical text form: 2-space indent, unescaped non-ASCII, trailing newline.
 * Matches the engine's serializer byte for byte so round-trip files diff clean.
 */
export function serializeDocument(doc: WorkflowDoc): string {
  return JSON.stringify(doc, null, 2) + '\n';
}

export function exportText(state: BuilderState): string {
  return serializeDocument(exportDocument(state));
}

/** Document back to drafts, visual order recovered by walking next pointers. */
export function importDocument(doc: WorkflowDoc): BuilderState {
  const byName = new Map<string, AgentDoc>();
  for (const agent of doc.agents) byName.set(agent.name_of_agent, agent);
  const head = doc.agents.find((a) => a.head === 'True');
  if (!head) throw new Error('document has no head agent');
  const ordered: AgentDoc[] = [];
  const seen = new Set<string>();
  let current: AgentDoc | undefined = head;
  while (current) {
    if (seen.has(current.name_of_agent)) throw new Error('next pointers form a cycle');
    seen.add(current.name_of_agent);
    ordered.push(current);
    if (current.next === 'None') break;
    const follower = byName.get(current.next);
    if (!follower) throw new Error(`next pointer '${current.next}' names no agent`);
    current = follower;
  }
  return {
    flowDescription: doc.flow_description,
    agents: ordered.map((agent) => ({
      name: agent.name_of_agent,
      role: agent.role_of_agent,
      task: agent.what_should_agent_do,
      approval: agent.require_human_approval_of_response === 'True',
      postprocessor: agent.postprocessor_function,
    })),
  };
}

export function importText(text: string): BuilderState {
  return importDocument(JSON.parse(text) as WorkflowDoc);
}

export function moveAgent(state: BuilderState, from: number, to: number): BuilderState {
  if (from === to || from < 0 || to < 0) return state;
  if (from >= state.agents.length || to >= state.agents.length) return state;
  const agents = state.agents.slice();
  const [moved] = agents.splice(from, 1);
  agents.splice(to, 0, moved!);
  return { ...state, agents };
}

/** Where a violation pointer lands in the form, for inline rendering. */
export interface FieldRef {
  agentIndex: number | null; // null = workflow-level field
  field: string; // draft field name or document key
}

const DOC_TO_DRAFT: Record<string, string> = {
  name_of_agent: 'name',
  role_of_agent: 'role',
  what_should_agent_do: 'task',
  require_human_approval_of_response: 'approval',
  postprocessor_function: 'postprocessor',
};

export function fieldForPointer(path: string): FieldRef | null {
  if (path === '/flow_description') return { agentIndex: null, field: 'flowDescription' };
  const match = /^\/agents\/(\d+)(?:\/([^/]+))?$/.exec(path);
  if (!match) return null;
  const index = Number(match[1]);
  const key = match[2] ?? '';
  return { agentIndex: index, field: DOC_TO_DRAFT[key] ?? key };
}

/** Group violations by form field; unmapped ones land under '' for a banner. */
export function violationsByField(
  violations: Violation[],
): Map<string, Violation[]> {
  const grouped = new Map<string, Violation[]>();
  for (const violation of violations) {
    const ref = fieldForPointer(violation.path);
    const key = ref
      ? ref.agentIndex === null
        ? ref.field
        : `${ref.agentIndex}:${ref.field}`
      : '';
    const bucket = grouped.get(key) ?? [];
    bucket.push(violation);
    grouped.set(key, bucket);
  }
  return grouped;
}
