/**
 * JSON shapes exchanged with the agentflow HTTP service. These mirror the
 * wire format exactly; all workflow values are strings ("True"/"False",
 * "None") per the document schema.
 */

export type BoolString = 'True' | 'False';

export interface AgentDoc {
  head: BoolString;
  name_of_agent: string;
  role_of_agent: string;
  what_should_agent_do: string;
  require_human_approval_of_response: BoolString;
  postprocessor_function: string;
  next: string;
}

export interface WorkflowDoc {
  flow_description: string;
  agents: AgentDoc[];
}

export interface Violation {
  code: string;
  path: string;
  message: string;
}

export interface ValidationReport {
  mode: string;
  violations: Violation[];
  warnings: Violation[];
}

export interface WorkflowListing {
  stem: string;
  flow_description: string;
  agents: number;
}

export interface RunState {
  phase: string;
  current_agent: string | null;
  attempt: number;
}

export interface RunHandle {
  run_id: string;
  workflow_stem: string;
  created_at: string;
  state: RunState;
  terminal: boolean;
  final_output: string | null;
  error: string | null;
}

/** One interaction record as it appears in event payloads. */
export interface InteractionPayload {
  seq: number;
  run_id: string;
  kind: string;
  timestamp: string;
  agent_name?: string;
  agent_role?: string;
  attempt?: number;
  input?: string;
  output?: string;
  model?: string;
  params?: Record<string, unknown>;
}

export interface RunEvent {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface EventBatch {
  events: RunEvent[];
  terminal: boolean;
}

export interface PendingApproval {
  agent_name: string;
  attempt: number;
  raw_output: string;
}

export type ApprovalAction = 'approve' | 'edit' | 'reject';

export interface ApprovalBody {
  action: ApprovalAction;
  edited_output?: string;
  agent_name?: string;
  attempt?: number;
}

export interface CreateRunBody {
  workflow: string | WorkflowDoc;
  config?: {
    model?: string;
    creativity?: number;
    diversity?: number;
    max_tokens?: number;
    dynamic_input?: string;
  };
  mock_script?: string[];
  unsafe_allow_code_execution?: boolean;
}
