/** DOM wiring: ties the API client, view-models, and renderers to the page.
 * All state lives server-side; every interaction refetches and re-renders. */

import { ApiClient } from "./api.js";
import { dispatchRecommendation } from "./dispatch.js";
import { GuidanceComposer } from "./guidance.js";
import { buildBoard, buildDetail } from "./model.js";
import { renderBoard, renderDetail } from "./render.js";

export function mount(root: HTMLElement, baseUrl: string): void {
  const client = new ApiClient(baseUrl);
  const boardEl = document.createElement("div");
  const detailEl = document.createElement("div");
  root.append(boardEl, detailEl);
  let focused: string | undefined;

  async function refresh(): Promise<void> {
    const { runs } = await client.listRuns();
    boardEl.innerHTML = renderBoard(buildBoard(runs), focused);
    if (focused === undefined) {
      detailEl.innerHTML = "";
      return;
    }
    const view = await client.getRun(focused);
    const report = view.report === null ? null : await client.getReport(focused);
    const detail = buildDetail(view, report, (n) => client.artifactUrl(view.run_id, n));
    detailEl.innerHTML = renderDetail(detail);

    const form = detailEl.querySelector<HTMLFormElement>(".guidance-composer");
    if (form) {
      const composer = new GuidanceComposer(client, view.run_id);
      form.addEventListener("submit", async (ev) => {
        ev.preventDefault();
        const text = form.querySelector<HTMLTextAreaElement>("textarea")!.value;
        const ok = await composer.submit(text);
        form.querySelector(".status")!.textContent = composer.status.state;
        if (ok) {
          await client.advance(view.run_id, "terminal");
          await refresh();
        }
      });
    }
    for (const btn of detailEl.querySelectorAll<HTMLButtonElement>(".dispatch")) {
      btn.addEventListener("click", async () => {
        const rec = detail.recommendations[Number(btn.dataset.rec)];
        if (rec === undefined) return;
        const child = await dispatchRecommendation(client, view.run_id, rec);
        await client.advance(child, "terminal");
        await refresh();
      });
    }
  }

  boardEl.addEventListener("click", (ev) => {
    const row = (ev.target as HTMLElement).closest<HTMLElement>("[data-run]");
    if (row?.dataset.run) {
      focused = row.dataset.run;
      void refresh();
    }
  });

  void refresh();
  setInterval(() => void refresh(), 5000);
}
