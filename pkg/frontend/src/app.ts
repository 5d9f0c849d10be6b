// Browser entry point: wires the review session to the DOM. No framework;
// the server's API is the single source of truth and the client enforces
// the same invariants it does (see validation.ts).

import { ApiClient, ApiError } from "./api.js";
import { noteSegments, segmentsToHtml } from "./highlight.js";
import { sparklineSvg, tableRows, METRIC_COLUMNS } from "./metrics.js";
import { MemoryStorage, ReviewSession, type DraftStorage } from "./session.js";
import type { AdjudicationDraft, OutreachRecordOut, PendingPair, VerdictLabel, VerdictOut } from "./types.js";
import {
  VERDICT_LABELS,
  adjudicationBody,
  setEligible,
  validateAdjudication,
  validateOutreachResponse,
} from "./validation.js";

function el<T extends HTMLElement = HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function browserStorage(): DraftStorage {
  try {
    window.localStorage.setItem("trialmatch:probe", "1");
    window.localStorage.removeItem("trialmatch:probe");
    return window.localStorage;
  } catch {
    return new MemoryStorage();
  }
}

let api: ApiClient | null = null;
let session: ReviewSession | null = null;
let selectedVerdict: VerdictOut | null = null;

function banner(message: string, kind: "error" | "ok" = "error"): void {
  const node = el("banner");
  node.textContent = message;
  node.className = message ? `banner ${kind}` : "banner hidden";
}

function describeApiError(error: unknown): string {
  if (error instanceof ApiError) {
    if (Array.isArray(error.detail)) {
      return error.detail
        .map((d) => (typeof d === "object" && d ? `${(d as any).field}: ${(d as any).message}` : String(d)))
        .join("; ");
    }
    return `${error.status}: ${JSON.stringify(error.detail)}`;
  }
  return String(error);
}

async function connect(): Promise<void> {
  const baseUrl = (el<HTMLInputElement>("api-url").value || "").replace(/\/$/, "");
  const raterId = el<HTMLInputElement>("rater-id").value.trim();
  if (!baseUrl || !raterId) {
    banner("set the API base URL and a rater id first");
    return;
  }
  api = new ApiClient(baseUrl, raterId);
  session = new ReviewSession(raterId, browserStorage());
  try {
    await api.registerRater(raterId);
    await refreshQueue();
    await refreshMetrics();
    await refreshOutreach();
    banner(`connected as ${raterId}`, "ok");
  } catch (error) {
    banner(describeApiError(error));
  }
}

async function refreshQueue(): Promise<void> {
  if (!api || !session) return;
  session.load(await api.pending());
  renderQueue();
  renderPair();
}

function renderQueue(): void {
  if (!session) return;
  el("queue-count").textContent = String(session.queue.length);
  const list = el("queue-list");
  list.innerHTML = "";
  session.queue.forEach((pair, index) => {
    const item = document.createElement("li");
    item.textContent = `${pair.case_id} × ${pair.trial_id}`;
    if (index === session!.position) item.className = "active";
    item.onclick = () => {
      session!.position = index;
      selectedVerdict = null;
      renderQueue();
      renderPair();
    };
    list.appendChild(item);
  });
}

function verdictRow(pair: PendingPair, verdict: VerdictOut, draft: AdjudicationDraft): HTMLElement {
  const row = document.createElement("div");
  row.className = `criterion ${verdict === selectedVerdict ? "selected" : ""}`;
  const head = document.createElement("div");
  head.className = "criterion-head";
  head.innerHTML =
    `<span class="label label-${verdict.label}">${verdict.label}</span> ` +
    `<span class="criterion-text"></span>`;
  (head.querySelector(".criterion-text") as HTMLElement).textContent =
    verdict.criterion || "(criterion text unavailable)";
  head.onclick = () => {
    selectedVerdict = selectedVerdict === verdict ? null : verdict;
    renderPair();
  };
  row.appendChild(head);

  const explanation = document.createElement("p");
  explanation.className = "explanation";
  explanation.textContent = verdict.explanation || "(no explanation)";
  row.appendChild(explanation);

  const key = `${verdict.kind}:${verdict.ordinal}`;
  const override = document.createElement("select");
  override.innerHTML =
    `<option value="">override…</option>` +
    VERDICT_LABELS.map((label) => `<option value="${label}">${label}</option>`).join("");
  override.value = draft.overrides[key] ?? "";
  override.onchange = () => {
    const next = { ...draft, overrides: { ...draft.overrides } };
    if (override.value) {
      next.overrides[key] = override.value as VerdictLabel;
    } else {
      delete next.overrides[key];
    }
    session!.saveDraft(pair, next);
    renderPair();
  };
  row.appendChild(override);
  return row;
}

function renderPair(): void {
  if (!session) return;
  const pair = session.current;
  const container = el("pair-view");
  if (!pair) {
    container.classList.add("hidden");
    el("all-done").classList.toggle("hidden", session.queue.length !== 0);
    return;
  }
  container.classList.remove("hidden");
  el("all-done").classList.add("hidden");
  const draft = session.draft(pair);

  el("pair-title").textContent = `${pair.case_id} × ${pair.trial_id}`;
  el("pair-meta").textContent =
    `${pair.trial.brief_title} — ${pair.trial.phase}, ${pair.trial.study_type}; ` +
    `methods: ${pair.methods.join(", ") || "n/a"}${pair.rank ? `, rank ${pair.rank}` : ""}`;
  el("note-view").innerHTML = segmentsToHtml(noteSegments(pair, selectedVerdict));

  const inclusion = el("inclusion-list");
  const exclusion = el("exclusion-list");
  inclusion.innerHTML = "";
  exclusion.innerHTML = "";
  let nInclusion = 0;
  let nExclusion = 0;
  for (const verdict of pair.verdicts) {
    const row = verdictRow(pair, verdict, draft);
    if (verdict.kind === "Inclusion") {
      inclusion.appendChild(row);
      nInclusion += 1;
    } else {
      exclusion.appendChild(row);
      nExclusion += 1;
    }
  }
  if (nInclusion === 0) inclusion.textContent = "none";
  if (nExclusion === 0) exclusion.textContent = "none";

  const eligibleYes = el<HTMLInputElement>("eligible-yes");
  const eligibleNo = el<HTMLInputElement>("eligible-no");
  eligibleYes.checked = draft.eligible === true;
  eligibleNo.checked = draft.eligible === false;
  eligibleYes.onchange = () => {
    session!.saveDraft(pair, setEligible(draft, true));
    renderPair();
  };
  eligibleNo.onchange = () => {
    session!.saveDraft(pair, setEligible(draft, false));
    renderPair();
  };

  const beneficialWrap = el("beneficial-wrap");
  const beneficialYes = el<HTMLInputElement>("beneficial-yes");
  const beneficialNo = el<HTMLInputElement>("beneficial-no");
  const enabled = draft.eligible === true;
  beneficialWrap.classList.toggle("disabled", !enabled);
  beneficialYes.disabled = !enabled;
  beneficialNo.disabled = !enabled;
  beneficialYes.checked = draft.beneficial === true;
  beneficialNo.checked = draft.beneficial === false;
  beneficialYes.onchange = () => {
    session!.saveDraft(pair, { ...draft, beneficial: true });
    renderPair();
  };
  beneficialNo.onchange = () => {
    session!.saveDraft(pair, { ...draft, beneficial: false });
    renderPair();
  };

  const note = el<HTMLTextAreaElement>("review-note");
  note.value = draft.note;
  note.oninput = () => session!.saveDraft(pair, { ...draft, note: note.value });

  const errors = validateAdjudication(draft, pair);
  const submit = el<HTMLButtonElement>("submit-review");
  submit.disabled = errors.length > 0;
  el("review-errors").textContent = errors.map((e) => `${e.field}: ${e.message}`).join("; ");
  submit.onclick = () => void submitReview(pair, draft);

  renderOutreachForm(pair);
}

async function submitReview(pair: PendingPair, draft: AdjudicationDraft): Promise<void> {
  if (!api || !session) return;
  if (validateAdjudication(draft, pair).length > 0) return;
  try {
    await api.submitAdjudication(adjudicationBody(draft));
    session.markSubmitted(pair);
    selectedVerdict = null;
    renderQueue();
    renderPair();
    await refreshMetrics();
    banner("label stored", "ok");
  } catch (error) {
    // Draft is still in storage; show the server's field diagnostics.
    banner(describeApiError(error));
  }
}

function renderOutreachForm(pair: PendingPair): void {
  const flag = el<HTMLButtonElement>("flag-outreach");
  flag.onclick = async () => {
    if (!api) return;
    const role = el<HTMLSelectElement>("outreach-role").value;
    const date = el<HTMLInputElement>("outreach-date").value;
    if (!role || !date) {
      banner("outreach needs a contact role and a first-contact date");
      return;
    }
    try {
      await api.createOutreach({
        case_id: pair.case_id,
        trial_id: pair.trial_id,
        contact_role: role,
        first_contact_date: date,
      });
      await refreshOutreach();
      banner("outreach recorded", "ok");
    } catch (error) {
      banner(describeApiError(error));
    }
  };
}

function likertSelect(current: number | null): HTMLSelectElement {
  const select = document.createElement("select");
  select.innerHTML =
    `<option value="">–</option>` +
    [1, 2, 3, 4, 5].map((v) => `<option value="${v}">${v}</option>`).join("");
  select.value = current === null ? "" : String(current);
  return select;
}

async function refreshOutreach(): Promise<void> {
  if (!api) return;
  const records = await api.outreachList();
  const body = el("outreach-rows");
  body.innerHTML = "";
  for (const record of records) {
    body.appendChild(outreachRow(record));
  }
  el("outreach-empty").classList.toggle("hidden", records.length > 0);
}

function outreachRow(record: OutreachRecordOut): HTMLTableRowElement {
  const row = document.createElement("tr");
  const cells = [
    `${record.case_id} × ${record.trial_id}`,
    record.contact_role,
    record.status,
    record.first_contact_date,
  ];
  for (const text of cells) {
    const cell = document.createElement("td");
    cell.textContent = text;
    row.appendChild(cell);
  }

  const helpfulness = likertSelect(record.helpfulness);
  const clarity = likertSelect(record.clarity);
  const confirmed = document.createElement("select");
  confirmed.innerHTML = `<option value="">–</option><option value="true">yes</option><option value="false">no</option>`;
  confirmed.value = record.eligibility_confirmed === null ? "" : String(record.eligibility_confirmed);
  const date = document.createElement("input");
  date.type = "date";
  date.value = record.response_date ?? "";
  const save = document.createElement("button");
  save.textContent = "record response";
  const closed = record.status === "Responded" || record.status === "Unresponsive";
  save.disabled = closed;
  helpfulness.disabled = clarity.disabled = confirmed.disabled = date.disabled = closed;
  save.onclick = async () => {
    if (!api) return;
    const draft = {
      status: "Responded" as const,
      eligibility_confirmed: confirmed.value === "" ? null : confirmed.value === "true",
      helpfulness: helpfulness.value === "" ? null : Number(helpfulness.value),
      clarity: clarity.value === "" ? null : Number(clarity.value),
      response_date: date.value || null,
    };
    const errors = validateOutreachResponse(draft);
    if (errors.length > 0) {
      banner(errors.map((e) => `${e.field}: ${e.message}`).join("; "));
      return;
    }
    try {
      await api.updateOutreach(record.outreach_id, draft);
      await refreshOutreach();
      banner("response stored", "ok");
    } catch (error) {
      banner(describeApiError(error));
    }
  };
  for (const widget of [confirmed, helpfulness, clarity, date, save]) {
    const cell = document.createElement("td");
    cell.appendChild(widget);
    row.appendChild(cell);
  }
  return row;
}

async function refreshMetrics(): Promise<void> {
  if (!api) return;
  const metrics = await api.metrics();
  el("metrics-labels").textContent = String(metrics.n_labels);
  const head = el("metrics-head");
  head.innerHTML =
    "<tr><th>method</th><th>stratum</th><th>N</th>" +
    METRIC_COLUMNS.map((c) => `<th>${c}</th>`).join("") +
    "<th>HitRate curve</th></tr>";
  const body = el("metrics-rows");
  body.innerHTML = "";
  metrics.rows.forEach((raw, index) => {
    const row = tableRows(metrics)[index]!;
    const tr = document.createElement("tr");
    tr.innerHTML =
      `<td>${row.method}</td><td>${row.stratum}</td><td>${row.nCases}</td>` +
      row.cells.map((cell) => `<td>${cell}</td>`).join("") +
      `<td>${sparklineSvg(raw)}</td>`;
    body.appendChild(tr);
  });
}

export function start(): void {
  el<HTMLButtonElement>("connect").onclick = () => void connect();
  el<HTMLButtonElement>("refresh-queue").onclick = () => void refreshQueue();
  el<HTMLButtonElement>("refresh-metrics").onclick = () => void refreshMetrics();
  el<HTMLButtonElement>("prev-pair").onclick = () => {
    session?.previous();
    selectedVerdict = null;
    renderQueue();
    renderPair();
  };
  el<HTMLButtonElement>("next-pair").onclick = () => {
    session?.next();
    selectedVerdict = null;
    renderQueue();
    renderPair();
  };
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  start();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
