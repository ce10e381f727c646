// Admin dashboard helpers: roster / per-group phase rows, scoring, export
// download. Verdicts shown here come only from score responses; the client
// never re-derives rubric logic.

import type { GameApi } from './api.js';
import type { AdminStateView } from './types.js';

export interface GroupRow {
  group: number;
  members: string;
  round: number;
  phase: string;
  contract: string;
  finished: boolean;
}

export function dashboardRows(view: AdminStateView): GroupRow[] {
  return view.groups.map((g, i) => ({
    group: i,
    members: g.members.join(', '),
    round: g.current_round + 1,
    phase: g.phase,
    contract: g.contract ? `${g.contract.winner}: ${g.contract.rationale}` : '',
    finished: g.finished,
  }));
}

export function downloadText(filename: string, text: string,
                             doc: Document = document): HTMLAnchorElement {
  const anchor = doc.createElement('a');
  const blob = new Blob([text], { type: 'application/x-ndjson' });
  // jsdom has no createObjectURL: fall back to a data URL and skip the click
  const realBrowser = typeof URL.createObjectURL === 'function';
  anchor.href = realBrowser
    ? URL.createObjectURL(blob)
    : `data:application/x-ndjson;charset=utf-8,${encodeURIComponent(text)}`;
  anchor.download = filename;
  anchor.rel = 'noopener';
  doc.body.appendChild(anchor);
  if (realBrowser) anchor.click();
  anchor.remove();
  return anchor;
}

export async function exportAndDownload(api: GameApi, session: string, seed = 0,
                                        doc: Document = document): Promise<string> {
  const text = await api.exportLog(session, seed);
  downloadText(`${session}-anonymized.ndjson`, text, doc);
  return text;
}
