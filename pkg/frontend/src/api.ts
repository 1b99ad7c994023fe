/**
 * Thin fetch wrapper over the agentflow service endpoints.
 *
 * All functions take an optional base URL so tests can point at a live
 * loopback server; in the browser the default same-origin base is used
 * (the console is served by the same process at /ui).
 */

import type {
  ApprovalBody,
  CreateRunBody,
  EventBatch,
  PendingApproval,
  RunHandle,
  ValidationReport,
  WorkflowDoc,
  WorkflowListing,
} from './types.js';

const TOKEN_KEY = 'agentflow_token';

export function storedToken(): string | null {
  if (typeof localStorage === 'undefined') return null;
  return localStorage.getItem(TOKEN_KEY);
}

export function storeToken(token: string): void {
  if (typeof localStorage === 'undefined') return;
  if (token) localStorage.setItem(TOKEN_KEY, token);
  else localStorage.removeItem(TOKEN_KEY);
}

function headers(): Record<string, string> {
  const h: Record<string, string> = { 'content-type': 'application/json' };
  const token = storedToken();
  if (token) h['authorization'] = `Bearer ${token}`;
  return h;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: unknown,
  ) {
    super(`service replied ${status}`);
  }
}

async function request<T>(
  method: string,
  url: string,
  body?: unknown,
  okStatuses: number[] = [200, 201, 204],
): Promise<T> {
  const response = await fetch(url, {
    method,
    headers: headers(),
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const text = await response.text();
  const parsed = text ? JSON.parse(text) : null;
  if (!okStatuses.includes(response.status)) throw new ApiError(response.status, parsed);
  return parsed as T;
}

export async function validateWorkflow(
  doc: WorkflowDoc | unknown,
  mode: 'strict' | 'lenient' = 'strict',
  base = '',
): Promise<ValidationReport> {
  // 422 still carries the report; both are useful answers
  return request('POST', `${base}/workflows/validate?mode=${mode}`, doc, [200, 422]);
}

export async function listWorkflows(base = ''): Promise<WorkflowListing[]> {
  const body = await request<{ workflows: WorkflowListing[] }>('GET', `${base}/workflows`);
  return body.workflows;
}

export async function createRun(body: CreateRunBody, base = ''): Promise<RunHandle> {
  return request('POST', `${base}/runs`, body, [201]);
}

export async function getRun(runId: string, base = ''): Promise<RunHandle> {
  return request('GET', `${base}/runs/${runId}`);
}

export async function getEvents(runId: string, after: number, base = ''): Promise<EventBatch> {
  return request('GET', `${base}/runs/${runId}/events?after=${after}`);
}

export async function getPending(
  runId: string,
  base = '',
): Promise<PendingApproval | null> {
  const body = await request<{ pending: PendingApproval | null }>(
    'GET',
    `${base}/runs/${runId}/approvals/pending`,
  );
  return body.pending;
}

export async function postApproval(
  runId: string,
  decision: ApprovalBody,
  base = '',
): Promise<void> {
  await request('POST', `${base}/runs/${runId}/approvals`, decision, [204]);
}
