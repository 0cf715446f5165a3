/**
 * DOM rendering. Every state change re-renders the whole task screen —
 * the screens are small enough that diffing buys nothing.
 *
 * Layout: instructions and the judged case on the left; on the right
 * either the retrieved cases with Precedent / Doesn't Apply toggles
 * (CASE) or the rule checklist (RULE), then the final decision control.
 */

import {
  TaskState,
  canFinalize,
  decisionOptions,
  selectionComplete,
} from './state';
import type { DecisionValue, Verdict } from './types';

export interface TaskHandlers {
  onVerdict(rank: number, verdict: Verdict): void;
  onToggleRule(index: number): void;
  onSubmitSelection(): void;
  onChooseDecision(value: DecisionValue): void;
  onFinalize(): void;
}

type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  children: Child[] = []
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  for (const child of children) node.append(child);
  return node;
}

function verdictButton(
  doc: Document,
  state: TaskState,
  rank: number,
  verdict: Verdict,
  label: string,
  handlers: TaskHandlers
): HTMLButtonElement {
  const active = state.verdicts.get(rank) === verdict;
  const button = el(doc, 'button', {
    class: `verdict-btn${active ? ' active' : ''}`,
    'data-rank': String(rank),
    'data-verdict': verdict,
    'aria-pressed': String(active),
  });
  button.textContent = label;
  button.addEventListener('click', () => handlers.onVerdict(rank, verdict));
  return button;
}

function candidateList(doc: Document, state: TaskState, handlers: TaskHandlers): HTMLElement {
  const list = el(doc, 'div', { class: 'candidates' });
  for (const candidate of state.task.candidates ?? []) {
    const past = el(doc, 'p', { class: 'past-decision' });
    past.textContent = `Past decision: ${candidate.decision}`;
    const text = el(doc, 'p', { class: 'candidate-text' });
    text.textContent = candidate.text;
    list.append(
      el(doc, 'div', { class: 'candidate', 'data-rank': String(candidate.rank) }, [
        text,
        past,
        el(doc, 'div', { class: 'verdict-buttons' }, [
          verdictButton(doc, state, candidate.rank, 'precedent', 'Precedent', handlers),
          verdictButton(doc, state, candidate.rank, 'does_not_apply', "Doesn't Apply", handlers),
        ]),
      ])
    );
  }
  return list;
}

function ruleChecklist(doc: Document, state: TaskState, handlers: TaskHandlers): HTMLElement {
  const list = el(doc, 'div', { class: 'rules' });
  (state.task.rules ?? []).forEach((rule, i) => {
    const index = i + 1;
    const box = el(doc, 'input', {
      type: 'checkbox',
      class: 'rule-check',
      'data-rule': String(index),
    }) as HTMLInputElement;
    box.checked = state.checkedRules.has(index);
    box.addEventListener('change', () => handlers.onToggleRule(index));
    const label = el(doc, 'label', { class: 'rule' }, [box, `${index}. ${rule}`]);
    list.append(label);
  });
  return list;
}

function decisionControl(doc: Document, state: TaskState, handlers: TaskHandlers): HTMLElement {
  const wrap = el(doc, 'div', { class: 'decision-control' });
  for (const option of decisionOptions(state.task.decision_kind)) {
    const active = state.decision === option.value;
    const button = el(doc, 'button', {
      class: `decision-btn${active ? ' active' : ''}`,
      'data-decision': String(option.value),
      'aria-pressed': String(active),
    });
    button.textContent = option.label;
    button.addEventListener('click', () => handlers.onChooseDecision(option.value));
    wrap.append(button);
  }
  return wrap;
}

export function renderTask(root: HTMLElement, state: TaskState, handlers: TaskHandlers): void {
  const doc = root.ownerDocument;
  root.textContent = '';
  const task = state.task;

  const caseText = el(doc, 'blockquote', { class: 'judged-text' });
  caseText.textContent = task.text;
  const instructions = el(doc, 'p', { class: 'instructions' });
  instructions.textContent = task.instructions;
  const progress = el(doc, 'p', { class: 'progress' });
  progress.textContent = `Case ${task.progress.finalized + 1} of ${task.progress.total}`;
  const left = el(doc, 'section', { class: 'pane left' }, [
    progress,
    instructions,
    el(doc, 'h2', {}, ['Content being judged']),
    caseText,
  ]);

  const right = el(doc, 'section', { class: 'pane right' });
  const decisionHeading = () =>
    el(doc, 'h2', {}, [task.decision_kind === 'binary' ? 'Your decision' : 'Your toxicity rating']);
  const finalizeButton = () => {
    const finalize = el(doc, 'button', { class: 'finalize', id: 'finalize' });
    finalize.textContent = 'Finalize';
    finalize.disabled = !canFinalize(state);
    finalize.addEventListener('click', () => handlers.onFinalize());
    return finalize;
  };

  if (task.condition === 'RULE') {
    // Checklist and decision on one screen; finalize sends both in order.
    right.append(
      el(doc, 'h2', {}, ['Guidelines']),
      ruleChecklist(doc, state, handlers),
      decisionHeading(),
      decisionControl(doc, state, handlers),
      finalizeButton()
    );
  } else if (state.step === 'verdicts') {
    const submit = el(doc, 'button', { class: 'submit-selection', id: 'submit-selection' });
    submit.textContent = 'Submit selections';
    submit.disabled = !selectionComplete(state);
    submit.addEventListener('click', () => handlers.onSubmitSelection());
    right.append(el(doc, 'h2', {}, ['Similar past cases']), candidateList(doc, state, handlers), submit);
  } else {
    right.append(decisionHeading(), decisionControl(doc, state, handlers), finalizeButton());
  }

  root.append(el(doc, 'div', { class: 'task' }, [left, right]));
}

export interface SessionFormValues {
  annotatorId: string;
  groupId: string;
  condition: 'CASE' | 'RULE';
}

export function renderSessionForm(
  root: HTMLElement,
  onStart: (values: SessionFormValues) => void
): void {
  const doc = root.ownerDocument;
  root.textContent = '';
  const annotator = el(doc, 'input', { type: 'text', id: 'annotator', autocomplete: 'off' });
  const group = el(doc, 'input', { type: 'text', id: 'group', autocomplete: 'off' });
  const condition = el(doc, 'select', { id: 'condition' }) as HTMLSelectElement;
  for (const value of ['CASE', 'RULE']) {
    condition.append(el(doc, 'option', { value }, [value]));
  }
  const start = el(doc, 'button', { id: 'start-session', type: 'submit' });
  start.textContent = 'Start session';
  const form = el(doc, 'form', { class: 'session-form' }, [
    el(doc, 'h1', {}, ['Annotation session']),
    el(doc, 'label', {}, ['Annotator id', annotator]),
    el(doc, 'label', {}, ['Group', group]),
    el(doc, 'label', {}, ['Condition', condition]),
    start,
  ]);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    onStart({
      annotatorId: annotator.value.trim(),
      groupId: group.value.trim(),
      condition: condition.value as 'CASE' | 'RULE',
    });
  });
  root.append(form);
}

export function renderDone(root: HTMLElement, finalized: number): void {
  const doc = root.ownerDocument;
  root.textContent = '';
  const box = el(doc, 'div', { class: 'done' });
  const heading = el(doc, 'h1', {}, ['All done']);
  const body = el(doc, 'p', { class: 'done-count' });
  body.textContent = `You finalized ${finalized} cases in this batch. Thank you!`;
  box.append(heading, body);
  root.append(box);
}

export function renderError(root: HTMLElement, message: string, onRetry: () => void): void {
  const doc = root.ownerDocument;
  const existing = root.querySelector('.error-banner');
  if (existing) existing.remove();
  const banner = el(doc, 'div', { class: 'error-banner', role: 'alert' });
  const text = el(doc, 'span', {});
  text.textContent = message;
  const retry = el(doc, 'button', { class: 'retry' });
  retry.textContent = 'Retry';
  retry.addEventListener('click', () => {
    banner.remove();
    onRetry();
  });
  banner.append(text, retry);
  root.prepend(banner);
}
