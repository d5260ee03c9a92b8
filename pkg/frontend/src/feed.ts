/** Long-poll event feed for one focused run. Each poll returns only events
 * after the last seen tick, so stage changes appear within one poll cycle. */

import { ApiClient, RunEvent } from "./api.js";

export class EventFeed {
  events: RunEvent[] = [];
  stage = "";
  terminal = false;
  awaitingGuidance = false;

  constructor(
    private readonly client: ApiClient,
    private readonly runId: string,
  ) {}

  get lastTick(): number {
    const last = this.events[this.events.length - 1];
    return last === undefined ? 0 : last[0];
  }

  /** One long-poll cycle; resolves with the newly observed events. */
  async poll(waitSeconds = 0): Promise<RunEvent[]> {
    const batch = await this.client.getEvents(
      this.runId,
      this.lastTick,
      waitSeconds,
    );
    this.events.push(...batch.events);
    this.stage = batch.stage;
    this.terminal = batch.terminal;
    this.awaitingGuidance = batch.awaiting_guidance;
    return batch.events;
  }

  /** Poll until the run is terminal or paused for guidance. */
  async follow(waitSeconds = 5, maxCycles = 1000): Promise<void> {
    for (let i = 0; i < maxCycles; i++) {
      await this.poll(waitSeconds);
      if (this.terminal || this.awaitingGuidance) return;
    }
    throw new Error(`run ${this.runId} still active after ${maxCycles} polls`);
  }
}
