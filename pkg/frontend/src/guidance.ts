/** Guidance composer state machine: client-side empty-text block, inline
 * conflict messages, visible retry on network failure. */

import { ApiClient, ApiError } from "./api.js";

export type ComposerStatus =
  | { state: "idle" }
  | { state: "submitting"; attempt: number }
  | { state: "submitted" }
  | { state: "blocked"; message: string }
  | { state: "conflict"; message: string }
  | { state: "retrying"; attempt: number; message: string };

export class GuidanceComposer {
  status: ComposerStatus = { state: "idle" };

  constructor(
    private readonly client: ApiClient,
    private readonly runId: string,
    private readonly maxRetries = 2,
    private readonly retryDelayMs = 200,
  ) {}

  /** True once guidance was accepted; the composer then stays disabled. */
  get disabled(): boolean {
    return this.status.state === "submitted";
  }

  async submit(text: string): Promise<boolean> {
    if (this.disabled) return false;
    if (text.trim() === "") {
      this.status = { state: "blocked", message: "guidance text is empty" };
      return false;
    }
    for (let attempt = 1; ; attempt++) {
      this.status = { state: "submitting", attempt };
      try {
        await this.client.submitGuidance(this.runId, text);
        this.status = { state: "submitted" };
        return true;
      } catch (err) {
        if (err instanceof ApiError) {
          // 409 (wrong stage) and 400 are final; surface inline, keep editable
          this.status = { state: "conflict", message: err.message };
          return false;
        }
        if (attempt > this.maxRetries) {
          this.status = {
            state: "conflict",
            message: `network failure after ${attempt} attempts: ${String(err)}`,
          };
          return false;
        }
        this.status = {
          state: "retrying",
          attempt,
          message: String(err),
        };
        await new Promise((r) => setTimeout(r, this.retryDelayMs * attempt));
      }
    }
  }
}
