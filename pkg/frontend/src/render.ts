/** Pure HTML renderers for the dashboard; kept free of DOM and network so
 * they can be unit-tested as string functions. */

import type { RunBoard, RunDetail } from "./model.js";

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBoard(board: RunBoard, focused?: string): string {
  const rows = board.rows
    .map((r) => {
      const cls = [
        "run-row",
        r.terminal ? "terminal" : "active",
        r.runId === focused ? "focused" : "",
      ]
        .filter(Boolean)
        .join(" ");
      const badge = r.awaitingGuidance
        ? `<span class="badge pause">awaiting guidance</span>`
        : `<span class="badge stage">${esc(r.stage)}</span>`;
      const link = r.parent
        ? `<span class="link">from ${esc(r.parent)}</span>`
        : "";
      return (
        `<li class="${cls}" data-run="${esc(r.runId)}">` +
        `<code>${esc(r.runId)}</code> <em>${esc(r.kind)}</em> ${badge} ${link}</li>`
      );
    })
    .join("\n");
  return `<ul class="run-board">\n${rows}\n</ul>`;
}

export function renderDetail(detail: RunDetail): string {
  const parts: string[] = [`<section class="run-detail" data-run="${esc(detail.runId)}">`];
  parts.push(`<h2>${esc(detail.runId)} — ${esc(detail.stage)}</h2>`);

  for (const s of detail.summaries) {
    parts.push(`<p class="summary">${esc(s)}</p>`);
  }

  if (detail.claims.length > 0) {
    const cards = detail.claims
      .map((c) => {
        const tag = c.humanGuided
          ? `<span class="origin human-guided">human-guided</span>`
          : `<span class="origin automated">automated</span>`;
        const score =
          c.score === null
            ? ""
            : `<span class="score">${esc(c.category ?? "")} (${c.score}/5)</span>`;
        const cites = c.citations
          .map((x) => `<li class="citation">${esc(x)}</li>`)
          .join("");
        const lit = c.literature
          ? `<p class="literature">${esc(c.literature)}</p><ul>${cites}</ul>`
          : "";
        return (
          `<article class="claim-card" data-claim="${esc(c.claimId)}">` +
          `<p>${esc(c.statement)}</p>${tag}${score}${lit}</article>`
        );
      })
      .join("\n");
    parts.push(`<div class="claims">\n${cards}\n</div>`);
  }

  if (detail.recommendations.length > 0) {
    const items = detail.recommendations
      .map((r) => {
        const button = r.canDispatch
          ? `<button class="dispatch" data-rec="${r.index}">run simulation</button>`
          : "";
        const warnings = r.warnings
          .map((w) => `<p class="warning">${esc(w)}</p>`)
          .join("");
        return (
          `<li class="recommendation" data-kind="${esc(r.kind)}">` +
          `<strong>${esc(r.title)}</strong> ${esc(r.rationale)}${warnings}${button}</li>`
        );
      })
      .join("\n");
    parts.push(`<ol class="recommendations">\n${items}\n</ol>`);
  }

  if (detail.awaitingGuidance) {
    parts.push(
      `<form class="guidance-composer">` +
        `<textarea name="guidance" placeholder="guidance for claim generation"></textarea>` +
        `<button type="submit">send guidance</button><span class="status"></span></form>`,
    );
  }

  const gallery = detail.gallery
    .map((a) =>
      a.kind === "image"
        ? `<figure><img src="${esc(a.url)}" alt="${esc(a.name)}"><figcaption>${esc(a.name)}</figcaption></figure>`
        : `<a class="artifact" href="${esc(a.url)}">${esc(a.name)}</a>`,
    )
    .join("\n");
  parts.push(`<div class="gallery">\n${gallery}\n</div>`);
  parts.push(`</section>`);
  return parts.join("\n");
}
