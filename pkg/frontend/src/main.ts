/**
 * Flow controller: session form -> task loop -> done screen.
 *
 * CASE is two-step (submit all verdicts, then the final decision); RULE
 * finalizes in one click that sends the checklist and the decision in
 * order. Submissions are optimistic — a rejected selection rolls the
 * screen back to the verdict step, and an OutOfOrder decision (the server
 * never saw our selection) does the same.
 */

import { ApiClient, ApiError } from './api';
import {
  TaskState,
  advanceToDecision,
  backToVerdicts,
  chooseDecision,
  initTaskState,
  selectionBody,
  setVerdict,
  toggleRule,
} from './state';
import {
  renderDone,
  renderError,
  renderSessionForm,
  renderTask,
  SessionFormValues,
  TaskHandlers,
} from './ui';
import type { DecisionValue, Verdict } from './types';

const SESSION_KEY = 'clg.session';

export interface AppOptions {
  root: HTMLElement;
  client: ApiClient;
  /** Where the session id survives a refresh; defaults to sessionStorage. */
  storage?: Pick<Storage, 'getItem' | 'setItem' | 'removeItem'>;
}

export class App {
  private readonly root: HTMLElement;
  private readonly client: ApiClient;
  private readonly storage: Pick<Storage, 'getItem' | 'setItem' | 'removeItem'>;
  private sessionId: string | null = null;
  private state: TaskState | null = null;

  constructor(options: AppOptions) {
    this.root = options.root;
    this.client = options.client;
    this.storage = options.storage ?? window.sessionStorage;
  }

  /** Resume the stored session if there is one, else show the sign-in form. */
  async start(): Promise<void> {
    const stored = this.storage.getItem(SESSION_KEY);
    if (stored) {
      this.sessionId = stored;
      await this.loadNext();
    } else {
      this.showSessionForm();
    }
  }

  private showSessionForm(note?: string): void {
    this.sessionId = null;
    this.state = null;
    renderSessionForm(this.root, (values) => void this.createSession(values));
    if (note) renderError(this.root, note, () => undefined);
  }

  private async createSession(values: SessionFormValues): Promise<void> {
    try {
      const info = await this.client.createSession(
        values.annotatorId,
        values.groupId,
        values.condition
      );
      this.sessionId = info.session_id;
      this.storage.setItem(SESSION_KEY, info.session_id);
      await this.loadNext();
    } catch (err) {
      renderError(this.root, describe(err), () => undefined);
    }
  }

  private async loadNext(): Promise<void> {
    if (!this.sessionId) return;
    let payload;
    try {
      payload = await this.client.nextTask(this.sessionId);
    } catch (err) {
      if (err instanceof ApiError && err.code === 'UnknownSession') {
        this.storage.removeItem(SESSION_KEY);
        this.showSessionForm('Session expired — please start a new one.');
        return;
      }
      renderError(this.root, describe(err), () => void this.loadNext());
      return;
    }
    if (payload.done) {
      this.state = null;
      renderDone(this.root, payload.finalized);
      return;
    }
    this.state = initTaskState(payload);
    this.renderCurrent();
  }

  private renderCurrent(): void {
    if (!this.state) return;
    renderTask(this.root, this.state, this.handlers());
  }

  private handlers(): TaskHandlers {
    return {
      onVerdict: (rank: number, verdict: Verdict) => {
        if (!this.state) return;
        setVerdict(this.state, rank, verdict);
        this.renderCurrent();
      },
      onToggleRule: (index: number) => {
        if (!this.state) return;
        toggleRule(this.state, index);
        this.renderCurrent();
      },
      onChooseDecision: (value: DecisionValue) => {
        if (!this.state) return;
        chooseDecision(this.state, value);
        this.renderCurrent();
      },
      onSubmitSelection: () => void this.submitSelection(),
      onFinalize: () => void this.finalize(),
    };
  }

  private async submitSelection(): Promise<void> {
    const state = this.state;
    if (!state || !this.sessionId) return;
    const body = selectionBody(state);
    advanceToDecision(state);
    this.renderCurrent();
    try {
      await this.client.submitSelection(this.sessionId, state.task.case_id, body);
    } catch (err) {
      backToVerdicts(state);
      this.renderCurrent();
      renderError(this.root, describe(err), () => void this.submitSelection());
    }
  }

  private async finalize(): Promise<void> {
    const state = this.state;
    if (!state || !this.sessionId || state.decision === null) return;
    const sessionId = this.sessionId;
    const caseId = state.task.case_id;
    try {
      if (state.task.condition === 'RULE') {
        // Always (re)send the checklist so the decision can never arrive first.
        await this.client.submitSelection(sessionId, caseId, selectionBody(state));
      }
      await this.client.submitDecision(sessionId, caseId, state.decision);
    } catch (err) {
      if (err instanceof ApiError && err.code === 'OutOfOrder') {
        backToVerdicts(state);
        this.renderCurrent();
        renderError(this.root, 'Your selections were not received — please submit them again.', () => undefined);
        return;
      }
      renderError(this.root, describe(err), () => void this.finalize());
      return;
    }
    await this.loadNext();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return `Request failed: ${err.message}`;
  return 'Request failed';
}

function boot(): void {
  const root = document.getElementById('app');
  if (!root) return;
  const app = new App({ root, client: new ApiClient() });
  void app.start();
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  boot();
} else if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', boot);
}
