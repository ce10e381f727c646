// Chart composer model: a form builder and a raw JSON editor kept in two-way
// sync. The form is the primary path; the raw editor accepts anything the
// server's published schema accepts and round-trips through the same model.

import type { AggregateOp, Channel, ChartSpec, Encoding, MarkType, Transform } from './types.js';

export const MARKS: MarkType[] = ['point', 'tick', 'line', 'area', 'bar', 'rect',
  'arc', 'boxplot', 'trail'];
export const CHANNELS: Channel[] = ['x', 'y', 'color', 'size', 'theta', 'detail'];
export const AGGREGATES = ['count', 'sum', 'mean', 'median', 'min', 'max'] as const;

export interface ComposerState {
  mark: MarkType;
  markParams: { size?: number; opacity?: number; interpolation?: string;
    show_outlier_points?: boolean };
  transforms: Transform[];
  encodings: Partial<Record<Channel, Encoding>>;
}

export class Composer {
  private state: ComposerState = { mark: 'point', markParams: {}, transforms: [],
    encodings: {} };
  private listeners: ((s: ComposerState) => void)[] = [];

  onChange(fn: (s: ComposerState) => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.snapshot());
  }

  snapshot(): ComposerState {
    return JSON.parse(JSON.stringify(this.state)) as ComposerState;
  }

  setMark(mark: MarkType): void {
    this.state.mark = mark;
    this.emit();
  }

  setMarkParam<K extends keyof ComposerState['markParams']>(
      key: K, value: ComposerState['markParams'][K]): void {
    if (value === undefined) delete this.state.markParams[key];
    else this.state.markParams[key] = value;
    this.emit();
  }

  setEncoding(channel: Channel, enc: Encoding | null): void {
    if (enc === null) delete this.state.encodings[channel];
    else this.state.encodings[channel] = enc;
    this.emit();
  }

  addTransform(t: Transform): void {
    this.state.transforms.push(t);
    this.emit();
  }

  removeTransform(index: number): void {
    this.state.transforms.splice(index, 1);
    this.emit();
  }

  /** Convenience used by the form's "summarize by group" block. */
  addAggregate(groupby: string[], ops: AggregateOp[]): void {
    this.addTransform({ op: 'aggregate', groupby, ops });
  }

  clear(): void {
    this.state = { mark: 'point', markParams: {}, transforms: [], encodings: {} };
    this.emit();
  }

  toSpec(): ChartSpec {
    const spec: ChartSpec = { mark: this.state.mark, encoding: {} };
    if (Object.keys(this.state.markParams).length) {
      spec.mark_params = { ...this.state.markParams } as ChartSpec['mark_params'];
    }
    if (this.state.transforms.length) {
      spec.transforms = JSON.parse(JSON.stringify(this.state.transforms)) as Transform[];
    }
    for (const ch of CHANNELS) {
      const enc = this.state.encodings[ch];
      if (enc) spec.encoding[ch] = JSON.parse(JSON.stringify(enc)) as Encoding;
    }
    return spec;
  }

  toJson(): string {
    return JSON.stringify(this.toSpec(), null, 2);
  }

  /** Raw-editor path; throws SyntaxError/TypeError on malformed input. */
  fromJson(text: string): void {
    const spec = JSON.parse(text) as ChartSpec;
    this.fromSpec(spec);
  }

  fromSpec(spec: ChartSpec): void {
    if (!spec || typeof spec !== 'object' || !spec.mark || !spec.encoding) {
      throw new TypeError('spec needs at least mark and encoding');
    }
    if (!MARKS.includes(spec.mark)) throw new TypeError(`unknown mark ${spec.mark}`);
    this.state = {
      mark: spec.mark,
      markParams: { ...(spec.mark_params ?? {}) },
      transforms: JSON.parse(JSON.stringify(spec.transforms ?? [])) as Transform[],
      encodings: JSON.parse(JSON.stringify(spec.encoding)) as
        Partial<Record<Channel, Encoding>>,
    };
    this.emit();
  }
}
