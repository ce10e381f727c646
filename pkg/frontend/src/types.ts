// Wire types mirroring the server's published schemas (docs/chart_spec_schema.md).

export type MarkType =
  | 'point' | 'tick' | 'line' | 'area' | 'bar' | 'rect' | 'arc' | 'boxplot' | 'trail';

export type Channel = 'x' | 'y' | 'color' | 'size' | 'theta' | 'detail';

export interface MarkParams {
  size?: number;
  opacity?: number;
  interpolation?: 'linear' | 'monotone' | 'step';
  show_outlier_points?: boolean;
}

export interface Encoding {
  field?: string;
  aggregate?: 'count' | 'sum' | 'mean' | 'median' | 'min' | 'max';
  bin?: { width?: number; count?: number };
}

export interface AggregateOp { op: string; field?: string; as: string }

export type Transform =
  | { op: 'aggregate'; groupby: string[]; ops: AggregateOp[] }
  | { op: 'classify'; field: string; width?: number; count?: number; as: string }
  | { op: 'band'; field: string; cutpoints?: number[]; quantiles?: number; as: string }
  | { op: 'derive'; expr: string; as: string }
  | { op: 'subsample'; n?: number; fraction?: number; seed: number }
  | { op: 'smooth'; field: string; bandwidth?: number; grid_n?: number }
  | { op: 'filter'; field: string; cmp: string; value: number | string };

export interface ChartSpec {
  mark: MarkType;
  mark_params?: MarkParams;
  transforms?: Transform[];
  encoding: Partial<Record<Channel, Encoding>>;
}

export interface IntervalValue { index: number; lo: number; hi: number }

export type ChannelValue = number | string | IntervalValue | null;

export interface ViewInstance {
  channels: Partial<Record<Channel, ChannelValue>>;
  provenance_size?: number;
  source_rows?: number[];
  derived_stats?: {
    q1: number; median: number; q3: number;
    lower_fence: number; upper_fence: number; outliers: number[];
  };
}

export interface Domain { lo?: number; hi?: number; categories?: string[] }

export interface RenderedView {
  mark: MarkType;
  mark_params: Required<MarkParams>;
  instances: ViewInstance[];
  domains: Partial<Record<Channel, Domain>>;
  pipeline_echo: Transform[];
  channels: Record<string, unknown>;
}

export interface MailboxMessage {
  seq: number;
  from: string;
  to: string[];
  kind: 'query' | 'response' | 'followup' | 'contract';
  text: string;
  charts: ChartSpec[];
}

export interface LegalAction { kind: string; target?: string }

export interface PlayerStateView {
  session: string;
  player: string;
  role: 'sender' | 'receiver';
  group: number;
  round: number;
  puzzle: string;
  phase: string;
  finished: boolean;
  capabilities: { can_download_dataset: boolean; can_preview: boolean };
  legal_actions: LegalAction[];
  mailbox: MailboxMessage[];
  contract: { winner: string; rationale: string } | null;
  last_seq: number;
}

export interface AdminGroupView {
  members: string[];
  current_round: number;
  phase: string;
  contract: { winner: string; rationale: string } | null;
  finished: boolean;
}

export interface AdminStateView {
  session: string;
  roster: string[];
  groups: AdminGroupView[];
  finished: boolean;
  last_seq: number;
}

export interface JoinGrant {
  player: string;
  role: 'sender' | 'receiver';
  group: number;
  round: number;
  puzzle: string;
  token: string;
  capabilities: { can_download_dataset: boolean; can_preview: boolean };
}

export type ServerPush =
  | { type: 'ack'; seq: number; idempotency_key?: string }
  | { type: 'error'; reason: string; detail?: string }
  | { type: 'state_update'; seq: number; payload: { group: number; round: number; phase: string | null; current_round: number[]; finished: boolean } }
  | { type: 'mailbox_update'; seq: number; payload: MailboxMessage };

export interface ValidationReport { violations: { code: string; message: string }[] }
