/**
 * Local state for the task being annotated.
 *
 * The submit affordances are derived, never stored: a precedent selection
 * can only be sent once every candidate has a verdict, and a final
 * decision only after the selection step — so the client cannot produce
 * an incomplete submission through enabled controls. Server-reported
 * state (a refresh mid-case) pre-fills verdicts and skips straight to the
 * decision step.
 */

import type { DecisionValue, SelectionBody, Task, Verdict } from './types';

export type Step = 'verdicts' | 'decision';

export interface TaskState {
  task: Task;
  verdicts: Map<number, Verdict>;
  checkedRules: Set<number>;
  decision: DecisionValue | null;
  step: Step;
}

export function initTaskState(task: Task): TaskState {
  const verdicts = new Map<number, Verdict>();
  for (const [rank, verdict] of Object.entries(task.submitted_verdicts ?? {})) {
    verdicts.set(Number(rank), verdict);
  }
  const checkedRules = new Set<number>(task.submitted_checks ?? []);
  return {
    task,
    verdicts,
    checkedRules,
    decision: null,
    step: task.state === 'verdicts_submitted' ? 'decision' : 'verdicts',
  };
}

export function setVerdict(state: TaskState, rank: number, verdict: Verdict): void {
  state.verdicts.set(rank, verdict);
}

export function toggleRule(state: TaskState, index: number): void {
  if (state.checkedRules.has(index)) state.checkedRules.delete(index);
  else state.checkedRules.add(index);
}

export function chooseDecision(state: TaskState, decision: DecisionValue): void {
  state.decision = decision;
}

/** CASE: every candidate has a verdict; RULE: always submittable (checks are optional). */
export function selectionComplete(state: TaskState): boolean {
  if (state.task.condition === 'CASE') {
    const candidates = state.task.candidates ?? [];
    return candidates.every((c) => state.verdicts.has(c.rank));
  }
  return true;
}

export function canFinalize(state: TaskState): boolean {
  // RULE shows checklist and decision together; its finalize sends both
  // submissions in order, so only the decision gates the button.
  if (state.task.condition === 'RULE') return state.decision !== null;
  return state.step === 'decision' && state.decision !== null;
}

export function selectionBody(state: TaskState): SelectionBody {
  if (state.task.condition === 'CASE') {
    const verdicts: Record<string, Verdict> = {};
    for (const [rank, verdict] of state.verdicts) verdicts[String(rank)] = verdict;
    return { verdicts };
  }
  return { checked_rules: [...state.checkedRules].sort((a, b) => a - b) };
}

export function advanceToDecision(state: TaskState): void {
  state.step = 'decision';
}

/** An OutOfOrder response means the server never saw a selection: start over. */
export function backToVerdicts(state: TaskState): void {
  state.step = 'verdicts';
  state.decision = null;
}

const TOXICITY_LABELS = [
  'not at all toxic',
  'slightly toxic',
  'moderately toxic',
  'very toxic',
  'extremely toxic',
];

export interface DecisionOption {
  value: DecisionValue;
  label: string;
}

export function decisionOptions(kind: Task['decision_kind']): DecisionOption[] {
  if (kind === 'binary') {
    return [
      { value: 'keep', label: 'keep' },
      { value: 'remove', label: 'remove' },
    ];
  }
  return TOXICITY_LABELS.map((label, i) => ({ value: i + 1, label: `${i + 1} — ${label}` }));
}
