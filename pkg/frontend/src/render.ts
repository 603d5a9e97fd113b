// DOM rendering. Full re-render per update; the log panel keeps its scroll
// pinned to the newest line.

import { ViewModel, logLines } from "./view.js";

export interface Handlers {
  onResolve: (approvalId: string, verdict: "approved" | "rejected") => void;
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function render(root: HTMLElement, vm: ViewModel, handlers: Handlers): void {
  const banner = root.querySelector("#banner") as HTMLElement;
  banner.replaceChildren();
  if (!vm.connected && vm.sessionId) {
    banner.appendChild(el("div", "banner-item banner-offline",
                          "Connection lost; retrying..."));
  }
  for (const alert of vm.alerts.slice(-3)) {
    banner.appendChild(el("div", "banner-item banner-alert",
                          `${alert.timestamp} ${alert.text}`));
  }

  const status = root.querySelector("#status") as HTMLElement;
  status.textContent = vm.sessionId
    ? `session ${vm.sessionId} (${vm.scenario}) - ${vm.status}`
    : "no session";

  const log = root.querySelector("#log") as HTMLElement;
  log.textContent = logLines(vm).join("\n");
  log.scrollTop = log.scrollHeight;

  const stations = root.querySelector("#stations") as HTMLElement;
  stations.replaceChildren();
  for (const [address, value] of Object.entries(vm.signals)) {
    stations.appendChild(el("div", "signal", `${address} = ${value}`));
  }
  for (const piece of vm.workpieces) {
    stations.appendChild(el("div", "workpiece", JSON.stringify(piece)));
  }

  const plan = root.querySelector("#plan") as HTMLElement;
  plan.replaceChildren();
  if (vm.plan) {
    plan.appendChild(el("div", "plan-goal", `Goal: ${vm.plan.goal}`));
    for (const step of vm.plan.steps) {
      plan.appendChild(el("div", "plan-step",
                          `${step.id} -> ${step.assignee}: ${step.instruction}`));
    }
  } else {
    plan.appendChild(el("div", "plan-empty", "No plan yet."));
  }

  const queue = root.querySelector("#approvals") as HTMLElement;
  queue.replaceChildren();
  for (const row of vm.pending) {
    const item = el("div", "approval");
    item.appendChild(el("span", "approval-command",
                        `${row.agent}: ${row.command} (${row.reason})`));
    for (const verdict of ["approved", "rejected"] as const) {
      const button = el("button", `btn-${verdict}`,
                        verdict === "approved" ? "Approve" : "Reject");
      (button as HTMLButtonElement).disabled = vm.resolving.has(row.id);
      button.addEventListener("click", () => handlers.onResolve(row.id, verdict));
      item.appendChild(button);
    }
    queue.appendChild(item);
  }
  for (const row of vm.history.slice(-8)) {
    queue.appendChild(el("div", "approval-done",
                         `${row.command} -> ${row.status}`));
  }

  const taskError = root.querySelector("#task-error") as HTMLElement;
  taskError.textContent = vm.taskError ?? "";
}
