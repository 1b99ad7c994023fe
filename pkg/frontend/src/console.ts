/**
 * Long-poll loop for one open run view.
 *
 * Repeatedly fetches /runs/{id}/events from the current cursor, folds each
 * batch through the reducer, and refreshes the pending approval whenever the
 * run is parked on a gate. Network errors back off and retry with the cursor
 * preserved, so no events are skipped across a reconnect.
 */

import { getEvents, getPending } from './api.js';
import { applyEvents, initialConsoleState, type ConsoleState } from './events.js';
import type { PendingApproval } from './types.js';

export interface ConsoleView {
  state: ConsoleState;
  pending: PendingApproval | null;
  terminal: boolean;
  connected: boolean;
}

export type ViewListener = (view: ConsoleView) => void;

const RETRY_DELAY_MS = 1000;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class RunWatcher {
  private state = initialConsoleState();
  private pending: PendingApproval | null = null;
  private terminal = false;
  private connected = true;
  private stopped = false;

  constructor(
    private runId: string,
    private listener: ViewListener,
    private base = '',
  ) {}

  stop(): void {
    this.stopped = true;
  }

  private emit(): void {
    this.listener({
      state: this.state,
      pending: this.pending,
      terminal: this.terminal,
      connected: this.connected,
    });
  }

  /** Resolves when the run reaches a terminal phase or stop() is called. */
  async watch(): Promise<ConsoleState> {
    this.emit();
    while (!this.stopped && !this.terminal) {
      try {
        const batch = await getEvents(this.runId, this.state.cursor, this.base);
        this.connected = true;
        this.state = applyEvents(this.state, batch.events);
        this.terminal = batch.terminal;
        if (this.state.phase === 'AwaitingApproval' && !this.terminal) {
          this.pending = await getPending(this.runId, this.base);
        } else {
          this.pending = null;
        }
        this.emit();
      } catch {
        this.connected = false;
        this.emit();
        await sleep(RETRY_DELAY_MS); // cursor untouched; retry resumes cleanly
      }
    }
    return this.state;
  }
}
