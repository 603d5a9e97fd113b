// Polling controller: one monotone cursor drives the whole live view.

import { GatewayClient } from "./api.js";
import {
  ViewModel,
  applyApprovals,
  applyEvents,
  applyState,
  applyStatus,
  setConnected,
} from "./view.js";

export interface PollOptions {
  intervalMs?: number;
  onUpdate?: (vm: ViewModel) => void;
}

export class PollController {
  private timer: ReturnType<typeof setInterval> | null = null;
  private ticking = false;
  readonly intervalMs: number;
  private onUpdate: (vm: ViewModel) => void;

  constructor(private client: GatewayClient, private vm: ViewModel,
              options: PollOptions = {}) {
    this.intervalMs = options.intervalMs ?? 500;
    this.onUpdate = options.onUpdate ?? (() => undefined);
  }

  start(): void {
    this.stop();
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  // One poll cycle; overlapping ticks are skipped, failures flip the
  // connection banner and the next tick retries from the same cursor.
  async tick(): Promise<void> {
    if (this.ticking || !this.vm.sessionId) {
      return;
    }
    this.ticking = true;
    try {
      const id = this.vm.sessionId;
      const events = await this.client.events(id, this.vm.lastSeq);
      applyEvents(this.vm, events.events);
      applyStatus(this.vm, events.status);
      applyApprovals(this.vm, await this.client.approvals(id));
      const state = await this.client.state(id);
      applyState(this.vm, state.signals, state.workpieces, state.plan);
      setConnected(this.vm, true);
    } catch {
      setConnected(this.vm, false);
    } finally {
      this.ticking = false;
      this.onUpdate(this.vm);
    }
  }
}
