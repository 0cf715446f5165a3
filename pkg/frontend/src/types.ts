/** Wire types for the annotation service API. */

export type Condition = 'CASE' | 'RULE';
export type DecisionKind = 'binary' | 'ordinal';
export type Verdict = 'precedent' | 'does_not_apply';
export type DecisionValue = string | number;

export interface SessionInfo {
  session_id: string;
  annotator_id: string;
  group_id: string;
  condition: Condition;
  case_ids: string[];
}

export interface Candidate {
  rank: number;
  text: string;
  decision: DecisionValue;
}

export interface TaskProgress {
  finalized: number;
  total: number;
}

/** One judged case as served by GET /sessions/{id}/next. */
export interface Task {
  done: false;
  case_id: string;
  text: string;
  condition: Condition;
  decision_kind: DecisionKind;
  instructions: string;
  state: 'pending' | 'verdicts_submitted' | 'finalized';
  progress: TaskProgress;
  // CASE only
  candidates?: Candidate[];
  submitted_verdicts?: Record<string, Verdict> | null;
  // RULE only
  rules?: string[];
  submitted_checks?: number[] | null;
}

export interface DoneMarker {
  done: true;
  finalized: number;
}

export type NextPayload = Task | DoneMarker;

export interface SelectionBody {
  verdicts?: Record<string, Verdict>;
  checked_rules?: number[];
}

export interface SubmitAck {
  state: string;
  derived?: DecisionValue | null;
}

export interface SessionResults {
  session_id: string;
  condition: Condition;
  partial: boolean;
  records: Array<Record<string, unknown>>;
}
