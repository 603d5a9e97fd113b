// View model and reducers, DOM-free so they unit-test directly.
// Event lines are strictly ordered by seq; reconnects resume from the
// cursor, so applying the same batch twice never duplicates a line.

import type { ApprovalRow, EventLine, PlanView } from "./api.js";

export interface ViewModel {
  sessionId: string | null;
  scenario: string;
  status: string;
  connected: boolean;
  events: EventLine[];
  lastSeq: number;
  pending: ApprovalRow[];
  history: ApprovalRow[];
  resolving: Set<string>;
  alerts: EventLine[];
  plan: PlanView | null;
  signals: Record<string, boolean | number | string>;
  workpieces: Array<Record<string, unknown>>;
  taskError: string | null;
}

export function newViewModel(): ViewModel {
  return {
    sessionId: null,
    scenario: "",
    status: "",
    connected: false,
    events: [],
    lastSeq: 0,
    pending: [],
    history: [],
    resolving: new Set(),
    alerts: [],
    plan: null,
    signals: {},
    workpieces: [],
    taskError: null,
  };
}

export function applyEvents(vm: ViewModel, lines: EventLine[]): EventLine[] {
  const fresh = lines
    .filter((line) => line.seq > vm.lastSeq)
    .sort((a, b) => a.seq - b.seq);
  for (const line of fresh) {
    vm.events.push(line);
    vm.lastSeq = line.seq;
    if (line.tags.includes("alert")) {
      vm.alerts.push(line);
    }
  }
  return fresh;
}

export function applyApprovals(vm: ViewModel, rows: ApprovalRow[]): void {
  const seen = new Map(rows.map((row) => [row.id, row]));
  // move freshly resolved rows into history, keeping arrival order
  for (const row of rows) {
    const wasKnown = vm.pending.some((p) => p.id === row.id) ||
      vm.history.some((h) => h.id === row.id);
    if (row.status !== "pending") {
      if (!vm.history.some((h) => h.id === row.id)) {
        vm.history.push(row);
      }
      vm.resolving.delete(row.id);
    } else if (!wasKnown) {
      vm.pending.push(row);
    }
  }
  vm.pending = vm.pending
    .map((p) => seen.get(p.id) ?? p)
    .filter((p) => p.status === "pending");
}

// Idempotent resolve guard: a second click while a verdict is in flight (or
// after resolution) is a no-op.
export function beginResolve(vm: ViewModel, approvalId: string): boolean {
  if (vm.resolving.has(approvalId)) {
    return false;
  }
  if (!vm.pending.some((p) => p.id === approvalId)) {
    return false;
  }
  vm.resolving.add(approvalId);
  return true;
}

export function finishResolve(vm: ViewModel, approvalId: string,
                              conflict: boolean): void {
  vm.resolving.delete(approvalId);
  if (conflict) {
    vm.pending = vm.pending.filter((p) => p.id !== approvalId);
  }
}

export function setConnected(vm: ViewModel, connected: boolean): void {
  vm.connected = connected;
}

export function applyStatus(vm: ViewModel, status: string): void {
  vm.status = status;
}

export function applyState(vm: ViewModel, signals: ViewModel["signals"],
                           workpieces: ViewModel["workpieces"],
                           plan: PlanView | null): void {
  vm.signals = signals;
  vm.workpieces = workpieces;
  if (plan) {
    vm.plan = plan;
  }
}

export function logLines(vm: ViewModel): string[] {
  return vm.events.map((line) => `${line.timestamp} ${line.text}`);
}
