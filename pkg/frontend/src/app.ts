// Application shell: role-specific panels wired to the store, composer, and
// transport. Everything here is plain DOM so the client stays dependency-free
// and headless-testable.

import { GameApi, GameChannel, SocketFactory } from './api.js';
import { Composer } from './composer.js';
import { dashboardRows, exportAndDownload } from './admin.js';
import { renderView } from './renderer.js';
import { PlayerStore, threads } from './store.js';
import { DEFAULT_THEME, Theme } from './theme.js';
import type { AdminStateView, ChartSpec, PlayerStateView } from './types.js';

export interface AppConfig {
  httpBase: string;
  wsBase: string;
  session: string;
  token: string;
  socketFactory: SocketFactory;
  theme?: Theme;
}

export class PlayerApp {
  readonly api: GameApi;
  readonly store = new PlayerStore();
  readonly composer = new Composer();
  channel: GameChannel | null = null;
  readonly root: HTMLElement;
  private pendingCharts: ChartSpec[] = [];
  private theme: Theme;

  constructor(private config: AppConfig, doc: Document = document) {
    this.api = new GameApi(config.httpBase, config.token);
    this.theme = config.theme ?? DEFAULT_THEME;
    this.root = doc.createElement('div');
    this.root.className = 'showhide-app';
    this.store.subscribe(() => this.renderShell(doc));
  }

  async start(): Promise<void> {
    this.channel = new GameChannel(this.config.wsBase, this.config.session,
      this.config.token, (msg) => this.store.applyPush(msg),
      this.config.socketFactory);
    await this.refresh();
  }

  async refresh(): Promise<void> {
    const view = await this.api.state(this.config.session) as PlayerStateView;
    this.store.replace(view);
  }

  get view(): PlayerStateView | null {
    return this.store.current;
  }

  attachChart(spec: ChartSpec): void {
    this.pendingCharts.push(spec);
  }

  get attachedCharts(): ChartSpec[] {
    return [...this.pendingCharts];
  }

  async preview(): Promise<ReturnType<GameApi['preview']>> {
    const view = this.view;
    if (!view) throw new Error('not joined');
    return this.api.preview(this.config.session, view.puzzle, this.composer.toSpec());
  }

  /** Senders: submit the draft text + attached charts as one response. */
  async sendResponse(text: string): Promise<void> {
    if (!this.store.canSubmit('ResponseSent')) {
      throw new Error('sending is not legal right now');
    }
    await this.channel!.submit('ResponseSent',
      { text, charts: this.pendingCharts });
    this.pendingCharts = [];
    await this.refresh();
  }

  async sendQuery(text: string): Promise<void> {
    await this.channel!.submit('QuerySent', { text });
    await this.refresh();
  }

  async sendFollowup(target: string, text: string): Promise<void> {
    await this.channel!.submit('FollowupSent', { target_sender: target, text });
    await this.refresh();
  }

  /** Receiver: contract signing with inline validation of the rationale. */
  async signContract(winner: string, rationale: string): Promise<string | null> {
    if (!rationale.trim()) return 'a written rationale is required';
    if (!this.store.canSubmit('ContractSigned')) return 'signing is not legal right now';
    try {
      await this.channel!.submit('ContractSigned', { winner, rationale });
    } catch (err) {
      return err instanceof Error ? err.message : String(err);
    }
    await this.refresh();
    return null;
  }

  renderShell(doc: Document = document): HTMLElement {
    const view = this.view;
    this.root.textContent = '';
    if (!view) return this.root;

    const badge = doc.createElement('header');
    badge.className = 'role-badge';
    badge.textContent = `${this.theme.title} · ${view.player} · ${view.role} · `
      + `round ${view.round + 1} · ${view.phase}`;
    this.root.appendChild(badge);

    const mail = doc.createElement('section');
    mail.className = 'mailbox';
    mail.dataset.app = this.theme.apps.mail;
    for (const [who, messages] of threads(view)) {
      const thread = doc.createElement('article');
      thread.className = 'thread';
      thread.dataset.counterpart = who;
      for (const m of messages) {
        const item = doc.createElement('div');
        item.className = `message message-${m.kind}`;
        item.textContent = `${m.from}: ${m.text}`;
        for (const chart of m.charts) {
          const holder = doc.createElement('figure');
          holder.className = 'chart-holder';
          holder.dataset.spec = JSON.stringify(chart);
          item.appendChild(holder);
        }
        thread.appendChild(item);
      }
      mail.appendChild(thread);
    }
    this.root.appendChild(mail);

    if (view.role === 'sender') {
      const composer = doc.createElement('section');
      composer.className = 'composer';
      composer.dataset.app = this.theme.apps.plot;
      const send = doc.createElement('button');
      send.className = 'send-response';
      send.disabled = !this.store.canSubmit('ResponseSent');
      send.textContent = 'Send response';
      composer.appendChild(send);
      if (view.capabilities.can_download_dataset) {
        const dl = doc.createElement('a');
        dl.className = 'dataset-download';
        dl.textContent = 'dataset.csv';
        composer.appendChild(dl);
      }
      this.root.appendChild(composer);
    } else {
      // the receiver view never exposes dataset download or preview
      const contract = doc.createElement('section');
      contract.className = 'contract-panel';
      contract.dataset.app = this.theme.apps.sign;
      const sign = doc.createElement('button');
      sign.className = 'sign-contract';
      sign.disabled = !this.store.canSubmit('ContractSigned');
      contract.appendChild(sign);
      this.root.appendChild(contract);
    }
    if (this.store.lastError) {
      const err = doc.createElement('p');
      err.className = 'inline-error';
      err.textContent = this.store.lastError;
      this.root.appendChild(err);
    }
    return this.root;
  }

  renderChartInto(holder: HTMLElement, view: Parameters<typeof renderView>[0]): void {
    holder.textContent = '';
    holder.appendChild(renderView(view));
  }

  close(): void {
    this.channel?.close();
  }
}

export class AdminApp {
  readonly api: GameApi;
  view: AdminStateView | null = null;

  constructor(private config: AppConfig) {
    this.api = new GameApi(config.httpBase, config.token);
  }

  async refresh(): Promise<AdminStateView> {
    this.view = await this.api.state(this.config.session) as AdminStateView;
    return this.view;
  }

  rows(): ReturnType<typeof dashboardRows> {
    if (!this.view) return [];
    return dashboardRows(this.view);
  }

  async advanceRound(group: number, socketFactory: SocketFactory): Promise<void> {
    const channel = new GameChannel(this.config.wsBase, this.config.session,
      this.config.token, () => undefined, socketFactory);
    try {
      await channel.submit('RoundAdvanced', { group });
    } finally {
      channel.close();
    }
  }

  async score(group: number, round: number): Promise<unknown[]> {
    return this.api.scoreRound(this.config.session, group, round);
  }

  async downloadExport(seed = 0, doc: Document = document): Promise<string> {
    return exportAndDownload(this.api, this.config.session, seed, doc);
  }
}
