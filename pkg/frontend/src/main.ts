// Bootstrap: attach to (or start) one session and keep the view live.

import { GatewayClient } from "./api.js";
import { PollController } from "./poll.js";
import { render } from "./render.js";
import { ViewModel, beginResolve, finishResolve, newViewModel } from "./view.js";

const base = window.location.origin;
const client = new GatewayClient(base);
const vm: ViewModel = newViewModel();
const root = document.body;

const controller = new PollController(client, vm, {
  intervalMs: 500,
  onUpdate: () => render(root, vm, handlers),
});

const handlers = {
  onResolve(approvalId: string, verdict: "approved" | "rejected"): void {
    if (!beginResolve(vm, approvalId)) {
      return;
    }
    render(root, vm, handlers);
    client.resolve(approvalId, verdict)
      .then((result) => finishResolve(vm, approvalId, result.conflict))
      .catch(() => finishResolve(vm, approvalId, false))
      .then(() => controller.tick());
  },
};

function attach(sessionId: string, scenario: string): void {
  vm.sessionId = sessionId;
  vm.scenario = scenario;
  controller.start();
}

document.getElementById("start-form")!.addEventListener("submit", (event) => {
  event.preventDefault();
  const input = document.getElementById("scenario-input") as HTMLInputElement;
  const approve = (document.getElementById("approve-input") as HTMLInputElement)
    .checked;
  client.startSession(input.value.trim() || "appendix_a",
                      approve ? "human" : "auto")
    .then((info) => attach(info.id, info.scenario))
    .catch((error) => {
      vm.taskError = String(error);
      render(root, vm, handlers);
    });
});

document.getElementById("attach-form")!.addEventListener("submit", (event) => {
  event.preventDefault();
  const input = document.getElementById("session-input") as HTMLInputElement;
  const sessionId = input.value.trim();
  if (sessionId) {
    attach(sessionId, "");
  }
});

document.getElementById("task-form")!.addEventListener("submit", (event) => {
  event.preventDefault();
  const input = document.getElementById("task-input") as HTMLInputElement;
  const text = input.value.trim();
  if (!text) {
    vm.taskError = "Task text must not be empty.";
    render(root, vm, handlers);
    return;
  }
  if (!vm.sessionId) {
    vm.taskError = "Attach to a session first.";
    render(root, vm, handlers);
    return;
  }
  vm.taskError = null;
  client.submitTask(vm.sessionId, text)
    .then((body) => {
      if (body.plan) {
        vm.plan = body.plan;
      } else {
        vm.taskError = body.message ?? "Plan could not be parsed.";
      }
      input.value = "";
      render(root, vm, handlers);
    })
    .catch((error) => {
      vm.taskError = String(error);
      render(root, vm, handlers);
    });
});

render(root, vm, handlers);
