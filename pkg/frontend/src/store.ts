// Client state: the latest role-scoped server view folded with realtime
// pushes. The rendered UI derives purely from this store plus the composer
// draft, so a refresh + rejoin reproduces the same view.

import type { MailboxMessage, PlayerStateView, ServerPush } from './types.js';

export class PlayerStore {
  private view: PlayerStateView | null = null;
  private listeners: (() => void)[] = [];
  lastError: string | null = null;

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  get current(): PlayerStateView | null {
    return this.view;
  }

  replace(view: PlayerStateView): void {
    this.view = view;
    this.emit();
  }

  applyPush(msg: ServerPush): void {
    if (!this.view) return;
    if (msg.type === 'mailbox_update') {
      if (msg.seq > this.view.last_seq
          && !this.view.mailbox.some((m) => m.seq === msg.payload.seq)) {
        this.view.mailbox.push(msg.payload);
      }
      this.emit();
    } else if (msg.type === 'state_update') {
      // every mailbox_update with seq <= n arrives before state_update n,
      // so folding the phase header here can never outrun the thread view
      if (msg.payload.group === this.view.group) {
        this.view.round = msg.payload.current_round[this.view.group];
        if (msg.payload.phase && msg.payload.round === this.view.round) {
          this.view.phase = msg.payload.phase;
        }
      }
      this.view.finished = msg.payload.finished;
      this.view.last_seq = Math.max(this.view.last_seq, msg.seq);
      this.emit();
    } else if (msg.type === 'error') {
      this.lastError = `${msg.reason}${msg.detail ? `: ${msg.detail}` : ''}`;
      this.emit();
    }
  }

  canSubmit(kind: string, target?: string): boolean {
    if (!this.view) return false;
    return this.view.legal_actions.some(
      (a) => a.kind === kind && (target === undefined || a.target === target));
  }
}

/** Mailbox threads, one per counterpart (per the paper-style triad layout a
 * sender has one thread; a receiver has one per sender). */
export function threads(view: PlayerStateView): Map<string, MailboxMessage[]> {
  const out = new Map<string, MailboxMessage[]>();
  for (const m of view.mailbox) {
    const mine = m.from === view.player;
    const counterparts = mine ? m.to : [m.from];
    for (const who of counterparts) {
      if (who === view.player) continue;
      if (!out.has(who)) out.set(who, []);
      out.get(who)!.push(m);
    }
  }
  for (const list of out.values()) list.sort((a, b) => a.seq - b.seq);
  return out;
}
