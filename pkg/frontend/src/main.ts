/**
 * Page assembly: hash-routed two-view app.
 *
 *   #builder     form-based workflow authoring with live strict validation
 *   #run=<id>    live console for one run (approve / edit / reject)
 *
 * No framework: small DOM helpers, explicit re-render of the dirty view.
 */

import {
  ApiError,
  createRun,
  listWorkflows,
  postApproval,
  storeToken,
  storedToken,
  validateWorkflow,
} from './api.js';
import {
  canExport,
  emptyBuilder,
  emptyDraft,
  exportDocument,
  exportText,
  importText,
  moveAgent,
  violationsByField,
  type BuilderState,
} from './builder.js';
import { RunWatcher, type ConsoleView } from './console.js';
import { chainGraphSvg, type GraphNode } from './graph.js';
import type { ValidationReport, WorkflowDoc } from './types.js';

const KNOWN_POSTPROCESSORS = [
  'None',
  'trimtoonly50chars',
  'last20chars',
  'printinpink',
  'pingserver',
  'execute_python_code',
];

// ── DOM helpers ─────────────────────────────────────────────────────────────

type Child = Node | string | null | undefined;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | boolean | ((event: Event) => void)> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === 'function') node.addEventListener(key.replace(/^on/, ''), value);
    else if (typeof value === 'boolean') {
      if (value) node.setAttribute(key, '');
    } else node.setAttribute(key, value);
  }
  for (const child of children) {
    if (child === null || child === undefined) continue;
    node.append(child);
  }
  return node;
}

function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

const root = document.getElementById('app')!;

// ── Builder view ────────────────────────────────────────────────────────────

let builder: BuilderState = emptyBuilder();
let report: ValidationReport | null = null;
let validateTimer: number | undefined;
let statusNote = '';

function scheduleValidation(): void {
  window.clearTimeout(validateTimer);
  if (!canExport(builder)) {
    report = null;
    renderBuilder();
    return;
  }
  validateTimer = window.setTimeout(async () => {
    try {
      report = await validateWorkflow(exportDocument(builder), 'strict');
    } catch (error) {
      statusNote = describeError(error);
      report = null;
    }
    renderBuilder();
  }, 250);
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    const detail =
      error.body && typeof error.body === 'object' && 'detail' in error.body
        ? String((error.body as { detail: unknown }).detail)
        : '';
    return `service error ${error.status}${detail ? `: ${detail}` : ''}`;
  }
  return error instanceof Error ? error.message : String(error);
}

function updateDraft(index: number, patch: Partial<(typeof builder.agents)[number]>): void {
  builder.agents[index] = { ...builder.agents[index]!, ...patch };
  scheduleValidation();
}

function fieldErrors(key: string): HTMLElement | null {
  if (!report) return null;
  const grouped = violationsByField(report.violations);
  const hits = grouped.get(key);
  if (!hits || hits.length === 0) return null;
  return el(
    'div',
    { class: 'field-errors' },
    ...hits.map((v) => el('span', {}, `${v.code}: ${v.message}`)),
  );
}

function agentCard(index: number): HTMLElement {
  const draft = builder.agents[index]!;
  const header = el(
    'div',
    { class: 'card-header' },
    el('strong', {}, `${index + 1}. ${draft.name || '(unnamed agent)'}`),
    el('span', { class: 'spacer' }),
    el('button', {
      type: 'button',
      title: 'move up',
      onclick: () => {
        builder = moveAgent(builder, index, index - 1);
        scheduleValidation();
        renderBuilder();
      },
    }, '↑'),
    el('button', {
      type: 'button',
      title: 'move down',
      onclick: () => {
        builder = moveAgent(builder, index, index + 1);
        scheduleValidation();
        renderBuilder();
      },
    }, '↓'),
    el('button', {
      type: 'button',
      title: 'remove agent',
      onclick: () => {
        builder.agents.splice(index, 1);
        scheduleValidation();
        renderBuilder();
      },
    }, '×'),
  );
  const nameInput = el('input', { value: draft.name, placeholder: 'Agent name' });
  (nameInput as HTMLInputElement).value = draft.name;
  nameInput.addEventListener('input', () =>
    updateDraft(index, { name: (nameInput as HTMLInputElement).value }),
  );
  const roleArea = el('textarea', { rows: '2', placeholder: 'Role (system prompt)' });
  (roleArea as HTMLTextAreaElement).value = draft.role;
  roleArea.addEventListener('input', () =>
    updateDraft(index, { role: (roleArea as HTMLTextAreaElement).value }),
  );
  const taskArea = el('textarea', { rows: '3', placeholder: 'Task (what should this agent do)' });
  (taskArea as HTMLTextAreaElement).value = draft.task;
  taskArea.addEventListener('input', () =>
    updateDraft(index, { task: (taskArea as HTMLTextAreaElement).value }),
  );
  const approvalBox = el('input', { type: 'checkbox' }) as HTMLInputElement;
  approvalBox.checked = draft.approval;
  approvalBox.addEventListener('change', () => updateDraft(index, { approval: approvalBox.checked }));
  const postInput = el('input', {
    list: 'postprocessors',
    value: draft.postprocessor,
  }) as HTMLInputElement;
  postInput.value = draft.postprocessor;
  postInput.addEventListener('input', () => updateDraft(index, { postprocessor: postInput.value }));

  const card = el(
    'div',
    { class: 'card agent-card', draggable: 'true', 'data-index': String(index) },
    header,
    el('label', {}, 'Name', nameInput, fieldErrors(`${index}:name`)),
    el('label', {}, 'Role', roleArea, fieldErrors(`${index}:role`)),
    el('label', {}, 'Task', taskArea, fieldErrors(`${index}:task`)),
    el(
      'div',
      { class: 'row' },
      el('label', { class: 'inline' }, approvalBox, ' require human approval'),
      el('label', { class: 'inline' }, 'postprocessor ', postInput, fieldErrors(`${index}:postprocessor`)),
    ),
  );
  card.addEventListener('dragstart', (event) => {
    (event as DragEvent).dataTransfer?.setData('text/plain', String(index));
  });
  card.addEventListener('dragover', (event) => event.preventDefault());
  card.addEventListener('drop', (event) => {
    event.preventDefault();
    const from = Number((event as DragEvent).dataTransfer?.getData('text/plain'));
    if (!Number.isNaN(from)) {
      builder = moveAgent(builder, from, index);
      scheduleValidation();
      renderBuilder();
    }
  });
  return card;
}

function downloadExport(): void {
  const text = exportText(builder);
  const blob = new Blob([text], { type: 'application/json' });
  const anchor = el('a', {
    href: URL.createObjectURL(blob),
    download: `${builder.flowDescription.replace(/[^A-Za-z0-9_-]+/g, '-') || 'workflow'}.json`,
  });
  anchor.click();
  URL.revokeObjectURL(anchor.getAttribute('href')!);
}

async function startRun(form: {
  workflow: string | WorkflowDoc;
  model: string;
  dynamicInput: string;
  mockScript: string;
  unsafe: boolean;
}): Promise<void> {
  let mockScript: string[] | undefined;
  if (form.mockScript.trim()) {
    const parsed = JSON.parse(form.mockScript);
    if (!Array.isArray(parsed)) throw new Error('mock script must be a JSON list of strings');
    mockScript = parsed.map(String);
  }
  const handle = await createRun({
    workflow: form.workflow,
    config: { model: form.model, dynamic_input: form.dynamicInput },
    mock_script: mockScript,
    unsafe_allow_code_execution: form.unsafe || undefined,
  });
  location.hash = `#run=${handle.run_id}`;
}

function runLaunchCard(): HTMLElement {
  const modelInput = el('input', { value: 'mock/echo' }) as HTMLInputElement;
  const inputArea = el('textarea', { rows: '2', placeholder: 'dynamic input (optional)' });
  const mockArea = el('textarea', {
    rows: '2',
    placeholder: 'mock script, JSON list (optional), e.g. ["first reply", "second reply"]',
  });
  const unsafeBox = el('input', { type: 'checkbox' }) as HTMLInputElement;
  const errorLine = el('div', { class: 'field-errors' });
  const button = el('button', {
    type: 'button',
    onclick: async () => {
      clear(errorLine);
      try {
        await startRun({
          workflow: exportDocument(builder),
          model: modelInput.value,
          dynamicInput: (inputArea as HTMLTextAreaElement).value,
          mockScript: (mockArea as HTMLTextAreaElement).value,
          unsafe: unsafeBox.checked,
        });
      } catch (error) {
        errorLine.append(el('span', {}, describeError(error)));
      }
    },
  }, 'Run this workflow');
  return el(
    'div',
    { class: 'card' },
    el('h3', {}, 'Run'),
    el('label', {}, 'Model', modelInput),
    el('label', {}, 'Dynamic input', inputArea),
    el('label', {}, 'Mock script', mockArea),
    el('label', { class: 'inline' }, unsafeBox, ' allow code execution (unsafe)'),
    button,
    errorLine,
  );
}

async function storedWorkflowsCard(): Promise<HTMLElement> {
  const container = el('div', { class: 'card' }, el('h3', {}, 'Stored workflows'));
  try {
    const listing = await listWorkflows();
    for (const item of listing) {
      container.append(
        el(
          'div',
          { class: 'stored-row' },
          el('code', {}, item.stem),
          el('span', {}, ` ${item.agents} agents`),
          el('span', { class: 'spacer' }),
          el('button', {
            type: 'button',
            onclick: async () => {
              try {
                await startRun({
                  workflow: item.stem,
                  model: 'mock/echo',
                  dynamicInput: '',
                  mockScript: '',
                  unsafe: false,
                });
              } catch (error) {
                alert(describeError(error));
              }
            },
          }, 'run with mock'),
        ),
      );
    }
  } catch (error) {
    container.append(el('div', { class: 'field-errors' }, describeError(error)));
  }
  return container;
}

function renderBuilder(): void {
  if (currentView !== 'builder') return;
  clear(root);
  const descriptionInput = el('input', {
    placeholder: 'Workflow description',
  }) as HTMLInputElement;
  descriptionInput.value = builder.flowDescription;
  descriptionInput.addEventListener('input', () => {
    builder.flowDescription = descriptionInput.value;
    scheduleValidation();
  });

  const exportReady = canExport(builder) && report !== null && report.violations.length === 0;
  const importInput = el('input', { type: 'file', accept: '.json,application/json' });
  importInput.addEventListener('change', async () => {
    const file = (importInput as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      builder = importText(await file.text());
      statusNote = `imported ${file.name}`;
    } catch (error) {
      statusNote = `import failed: ${describeError(error)}`;
    }
    scheduleValidation();
    renderBuilder();
  });

  const left = el(
    'div',
    { class: 'builder-col' },
    el('div', { class: 'card' },
      el('label', {}, 'Description', descriptionInput, fieldErrors('flowDescription')),
    ),
    ...builder.agents.map((_, i) => agentCard(i)),
    el('button', {
      type: 'button',
      class: 'add-agent',
      onclick: () => {
        builder.agents.push(emptyDraft());
        scheduleValidation();
        renderBuilder();
      },
    }, '+ add agent'),
  );

  const validationCard = el('div', { class: 'card' }, el('h3', {}, 'Validation'));
  if (!canExport(builder)) {
    validationCard.append(el('p', {}, 'Add at least one agent.'));
  } else if (report === null) {
    validationCard.append(el('p', {}, 'validating...'));
  } else if (report.violations.length === 0) {
    validationCard.append(el('p', { class: 'ok' }, 'strict validation: clean'));
  } else {
    for (const violation of report.violations) {
      validationCard.append(
        el('div', { class: 'violation' }, el('code', {}, violation.path), ` ${violation.code}: ${violation.message}`),
      );
    }
  }

  const right = el(
    'div',
    { class: 'builder-col side' },
    validationCard,
    el(
      'div',
      { class: 'card' },
      el('h3', {}, 'Document'),
      el('button', { type: 'button', disabled: !exportReady, onclick: downloadExport }, 'Export JSON'),
      el('label', { class: 'import-label' }, 'Import: ', importInput),
      statusNote ? el('p', { class: 'note' }, statusNote) : null,
      canExport(builder)
        ? el('pre', { class: 'preview' }, exportText(builder))
        : null,
    ),
    runLaunchCard(),
    el('div', { 'data-slot': 'stored' }),
  );

  root.append(el('div', { class: 'builder' }, left, right));
  void storedWorkflowsCard().then((card) => {
    const slot = root.querySelector('[data-slot="stored"]');
    if (slot) slot.replaceWith(card);
  });
}

// ── Run console view ────────────────────────────────────────────────────────

let watcher: RunWatcher | null = null;

function graphNodes(view: ConsoleView): GraphNode[] {
  return view.state.panels.map((panel, i) => {
    const failed = view.state.failure !== null && view.state.currentAgent === panel.agent;
    const isLast = i === view.state.panels.length - 1;
    const done = panel.post !== null || (panel.raw !== null && view.state.panels[i + 1]);
    const active = view.state.currentAgent === panel.agent && !view.terminal;
    return {
      name: panel.agent,
      status: failed ? 'failed' : active ? 'active' : done || (isLast && view.terminal && !view.state.failure) ? 'done' : 'pending',
      edgeLabel: isLast ? null : panel.post ?? panel.raw,
    };
  });
}

function approvalCard(view: ConsoleView, runId: string): HTMLElement | null {
  const pending = view.pending;
  if (!pending) return null;
  const editArea = el('textarea', { rows: '6' }) as HTMLTextAreaElement;
  editArea.value = pending.raw_output; // prefilled for quick touch-ups
  const errorLine = el('div', { class: 'field-errors' });
  const decide = async (action: 'approve' | 'reject' | 'edit') => {
    clear(errorLine);
    try {
      await postApproval(runId, {
        action,
        agent_name: pending.agent_name,
        attempt: pending.attempt,
        ...(action === 'edit' ? { edited_output: editArea.value } : {}),
      });
    } catch (error) {
      errorLine.append(el('span', {}, describeError(error)));
    }
  };
  return el(
    'div',
    { class: 'card approval' },
    el('h3', {}, `Approval required: ${pending.agent_name} (attempt ${pending.attempt})`),
    el('pre', { class: 'raw' }, pending.raw_output),
    editArea,
    el(
      'div',
      { class: 'row' },
      el('button', { type: 'button', class: 'approve', onclick: () => void decide('approve') }, 'Approve'),
      el('button', { type: 'button', class: 'edit', onclick: () => void decide('edit') }, 'Submit edit'),
      el('button', { type: 'button', class: 'reject', onclick: () => void decide('reject') }, 'Reject'),
    ),
    errorLine,
  );
}

function renderConsole(runId: string, view: ConsoleView): void {
  if (currentView !== 'run') return;
  clear(root);
  const container = el('div', { class: 'console' });
  container.append(
    el(
      'div',
      { class: 'console-head' },
      el('h2', {}, `run ${runId}`),
      el('span', { class: `phase phase-${view.state.phase}` }, view.state.phase),
      view.connected ? null : el('span', { class: 'offline' }, 'reconnecting...'),
      el('span', { class: 'spacer' }),
      el('a', { href: '#builder' }, 'back to builder'),
    ),
  );
  const graphBox = el('div', { class: 'card graph' });
  graphBox.innerHTML = chainGraphSvg(graphNodes(view));
  container.append(graphBox);

  const gate = approvalCard(view, runId);
  if (gate) container.append(gate);

  for (const panel of view.state.panels) {
    const card = el(
      'div',
      { class: 'card panel' },
      el('h3', {}, panel.agent),
      panel.role ? el('p', { class: 'role' }, panel.role) : null,
    );
    if (panel.attempts.length > 1) {
      card.append(el('p', { class: 'note' }, `${panel.attempts.length} attempts`));
    }
    if (panel.raw !== null) {
      card.append(el('h4', {}, 'model output'), el('pre', { class: 'raw' }, panel.raw));
    }
    if (panel.post !== null && panel.post !== panel.raw) {
      card.append(el('h4', {}, 'postprocessed'), el('pre', { class: 'post' }, panel.post));
    }
    if (panel.decision) {
      card.append(el('p', { class: 'note' }, `decision: ${panel.decision}`));
    }
    container.append(card);
  }

  if (view.state.failure) {
    container.append(el('div', { class: 'card failure' }, el('pre', {}, view.state.failure)));
  } else if (view.state.finalOutput !== null) {
    container.append(
      el('div', { class: 'card final' }, el('h3', {}, 'final output'), el('pre', {}, view.state.finalOutput)),
    );
  }
  root.append(container);
}

function renderMissingRun(runId: string): void {
  clear(root);
  root.append(
    el(
      'div',
      { class: 'card failure' },
      el('h3', {}, 'run not found'),
      el('p', {}, `no run with id ${runId} on this server`),
      el('a', { href: '#builder' }, 'back to builder'),
    ),
  );
}

function openRun(runId: string): void {
  watcher?.stop();
  watcher = new RunWatcher(runId, (view) => renderConsole(runId, view));
  void watcher.watch().catch((error) => {
    if (error instanceof ApiError && error.status === 404) renderMissingRun(runId);
    else renderConsole(runId, {
      state: initialStateForError(describeError(error)),
      pending: null,
      terminal: true,
      connected: false,
    });
  });
}

function initialStateForError(message: string) {
  return {
    cursor: 0,
    phase: 'Failed',
    currentAgent: null,
    attempt: 0,
    finalOutput: null,
    failure: message,
    panels: [],
  };
}

// ── Routing and chrome ──────────────────────────────────────────────────────

let currentView: 'builder' | 'run' = 'builder';

function route(): void {
  const hash = location.hash || '#builder';
  const runMatch = /^#run=(.+)$/.exec(hash);
  if (runMatch) {
    currentView = 'run';
    openRun(runMatch[1]!);
  } else {
    currentView = 'builder';
    watcher?.stop();
    watcher = null;
    renderBuilder();
  }
}

function buildChrome(): void {
  const tokenInput = el('input', {
    type: 'password',
    placeholder: 'API token (if required)',
  }) as HTMLInputElement;
  tokenInput.value = storedToken() ?? '';
  tokenInput.addEventListener('change', () => storeToken(tokenInput.value));
  const header = el(
    'header',
    {},
    el('h1', {}, 'agentflow console'),
    el('nav', {}, el('a', { href: '#builder' }, 'builder')),
    el('span', { class: 'spacer' }),
    el('label', { class: 'token' }, 'token ', tokenInput),
  );
  document.body.insertBefore(header, root);

  const datalist = el('datalist', { id: 'postprocessors' });
  for (const name of KNOWN_POSTPROCESSORS) datalist.append(el('option', { value: name }));
  document.body.append(datalist);
}

buildChrome();
window.addEventListener('hashchange', route);
route();
