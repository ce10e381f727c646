// SVG renderer for server-evaluated views. Draws instances per mark type with
// axes from view.domains; an unsupported mark renders a placeholder, never
// throws into the thread.

import type { Channel, ChannelValue, Domain, RenderedView, ViewInstance } from './types.js';

const SVGNS = 'http://www.w3.org/2000/svg';

const PALETTE = ['#4c78a8', '#f58518', '#54a24b', '#e45756', '#72b7b2',
  '#b279a2', '#eeca3b', '#9d755d', '#bab0ac', '#337ab7'];

/** Above this many instances, point-like marks batch into one path element. */
const BATCH_THRESHOLD = 500;

export interface RenderOptions {
  width?: number;
  height?: number;
  margin?: number;
}

function el(tag: string, attrs: Record<string, string | number> = {},
            text?: string): SVGElement {
  const node = document.createElementNS(SVGNS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  if (text !== undefined) node.textContent = text;
  return node;
}

class Scale {
  private cats: Map<string, number> = new Map();
  constructor(private domain: Domain, private lo: number, private hi: number) {
    (domain.categories ?? []).forEach((c, i) => this.cats.set(c, i));
  }

  get isQuantitative(): boolean {
    return this.domain.categories === undefined;
  }

  place(v: ChannelValue): number {
    if (v === null || v === undefined) return (this.lo + this.hi) / 2;
    if (typeof v === 'object') return this.placeNumber((v.lo + v.hi) / 2);
    if (typeof v === 'string') {
      const n = Math.max(1, this.cats.size);
      const idx = this.cats.get(v) ?? 0;
      return this.lo + ((idx + 0.5) / n) * (this.hi - this.lo);
    }
    return this.placeNumber(v);
  }

  placeNumber(v: number): number {
    const d0 = this.domain.lo ?? 0;
    const d1 = this.domain.hi ?? 1;
    if (d1 === d0) return (this.lo + this.hi) / 2;
    return this.lo + ((v - d0) / (d1 - d0)) * (this.hi - this.lo);
  }

  bandWidth(): number {
    const n = Math.max(1, this.cats.size || 1);
    return Math.abs(this.hi - this.lo) / n;
  }

  ticks(count = 5): { pos: number; label: string }[] {
    if (!this.isQuantitative) {
      return (this.domain.categories ?? []).map((c) => ({
        pos: this.place(c), label: c,
      }));
    }
    const d0 = this.domain.lo ?? 0;
    const d1 = this.domain.hi ?? 1;
    const out = [];
    for (let i = 0; i <= count; i++) {
      const v = d0 + (i / count) * (d1 - d0);
      out.push({ pos: this.placeNumber(v), label: formatTick(v) });
    }
    return out;
  }
}

function formatTick(v: number): string {
  if (Math.abs(v) >= 1000 || (v !== 0 && Math.abs(v) < 0.01)) return v.toExponential(1);
  return String(Math.round(v * 100) / 100);
}

function colorFor(v: ChannelValue, domain: Domain | undefined): string {
  if (v === null || v === undefined) return PALETTE[0];
  if (typeof v === 'number' && domain?.lo !== undefined && domain.hi !== undefined) {
    const t = domain.hi === domain.lo ? 1 : (v - domain.lo) / (domain.hi - domain.lo);
    const shade = Math.round(235 - t * 180);
    return `rgb(${shade}, ${shade}, 250)`;
  }
  const key = typeof v === 'object' ? v.index : v;
  const cats = domain?.categories ?? [];
  const idx = typeof key === 'string' ? Math.max(0, cats.indexOf(key)) : Number(key);
  return PALETTE[((idx % PALETTE.length) + PALETTE.length) % PALETTE.length];
}

function numeric(v: ChannelValue): number {
  if (v === null || v === undefined) return 0;
  if (typeof v === 'object') return (v.lo + v.hi) / 2;
  if (typeof v === 'string') return 0;
  return v;
}

export function renderView(view: RenderedView, opts: RenderOptions = {}): SVGSVGElement {
  const width = opts.width ?? 560;
  const height = opts.height ?? 320;
  const margin = opts.margin ?? 36;
  const svg = el('svg', {
    width, height, viewBox: `0 0 ${width} ${height}`, class: 'showhide-chart',
  }) as SVGSVGElement;

  const plot = { x0: margin, x1: width - 12, y0: height - margin, y1: 12 };
  const xDom = view.domains.x ?? { lo: 0, hi: 1 };
  const yDom = view.domains.y ?? { lo: 0, hi: 1 };
  const xs = new Scale(xDom, plot.x0, plot.x1);
  const ys = new Scale(yDom, plot.y0, plot.y1);

  if (view.mark !== 'arc') drawAxes(svg, view, xs, ys, plot);

  const body = el('g', { class: 'marks' });
  svg.appendChild(body);
  try {
    drawMarks(body, view, xs, ys, plot, width, height);
  } catch {
    body.appendChild(el('text', {
      x: width / 2, y: height / 2, 'text-anchor': 'middle', class: 'placeholder',
    }, `cannot draw ${view.mark}`));
  }
  return svg;
}

function drawAxes(svg: SVGElement, view: RenderedView, xs: Scale, ys: Scale,
                  plot: { x0: number; x1: number; y0: number; y1: number }): void {
  const axes = el('g', { class: 'axes', stroke: '#888', 'stroke-width': 1 });
  axes.appendChild(el('line', { x1: plot.x0, y1: plot.y0, x2: plot.x1, y2: plot.y0 }));
  axes.appendChild(el('line', { x1: plot.x0, y1: plot.y0, x2: plot.x0, y2: plot.y1 }));
  if (view.domains.x) {
    for (const t of xs.ticks()) {
      axes.appendChild(el('line', { x1: t.pos, y1: plot.y0, x2: t.pos, y2: plot.y0 + 4 }));
      axes.appendChild(el('text', {
        x: t.pos, y: plot.y0 + 16, 'text-anchor': 'middle', 'font-size': 10,
        stroke: 'none', fill: '#444', class: 'tick-label',
      }, t.label));
    }
  }
  if (view.domains.y) {
    for (const t of ys.ticks(4)) {
      axes.appendChild(el('line', { x1: plot.x0 - 4, y1: t.pos, x2: plot.x0, y2: t.pos }));
      axes.appendChild(el('text', {
        x: plot.x0 - 6, y: t.pos + 3, 'text-anchor': 'end', 'font-size': 10,
        stroke: 'none', fill: '#444', class: 'tick-label',
      }, t.label));
    }
  }
  svg.appendChild(axes);
}

function drawMarks(body: SVGElement, view: RenderedView, xs: Scale, ys: Scale,
                   plot: { x0: number; x1: number; y0: number; y1: number },
                   width: number, height: number): void {
  const opacity = view.mark_params.opacity ?? 1;
  switch (view.mark) {
    case 'point':
      drawPoints(body, view, xs, ys, opacity, false);
      break;
    case 'tick':
      drawPoints(body, view, xs, ys, opacity, true);
      break;
    case 'line':
    case 'trail':
      drawPath(body, view, xs, ys, opacity);
      break;
    case 'area':
      drawArea(body, view, xs, ys, plot, opacity);
      break;
    case 'bar':
      drawBars(body, view, xs, ys, plot, opacity);
      break;
    case 'rect':
      drawRects(body, view, xs, ys, opacity);
      break;
    case 'arc':
      drawArcs(body, view, width, height, opacity);
      break;
    case 'boxplot':
      drawBoxplots(body, view, xs, ys, opacity);
      break;
    default:
      body.appendChild(el('text', {
        x: (plot.x0 + plot.x1) / 2, y: (plot.y0 + plot.y1) / 2,
        'text-anchor': 'middle', class: 'placeholder',
      }, `unsupported mark: ${String(view.mark)}`));
  }
}

function drawPoints(body: SVGElement, view: RenderedView, xs: Scale, ys: Scale,
                    opacity: number, asTick: boolean): void {
  const r = 3;
  const hasY = view.domains.y !== undefined;
  const midY = ys.place(null);
  if (view.instances.length > BATCH_THRESHOLD) {
    // one path with a segment per mark keeps huge previews fast
    const segments: string[] = [];
    for (const inst of view.instances) {
      const cx = xs.place(inst.channels.x ?? null);
      const cy = hasY ? ys.place(inst.channels.y ?? null) : midY;
      segments.push(asTick
        ? `M${cx.toFixed(1)} ${(cy - 5).toFixed(1)}v10`
        : `M${(cx - r).toFixed(1)} ${cy.toFixed(1)}h${2 * r}`);
    }
    body.appendChild(el('path', {
      d: segments.join(''), stroke: PALETTE[0], 'stroke-width': asTick ? 1.5 : 2 * r,
      'stroke-linecap': asTick ? 'butt' : 'round', fill: 'none', opacity,
      class: 'point-batch', 'data-count': view.instances.length,
    }));
    return;
  }
  for (const inst of view.instances) {
    const cx = xs.place(inst.channels.x ?? null);
    const cy = hasY ? ys.place(inst.channels.y ?? null) : midY;
    const fill = colorFor(inst.channels.color ?? null, view.domains.color);
    body.appendChild(asTick
      ? el('line', { x1: cx, y1: cy - 5, x2: cx, y2: cy + 5, stroke: fill,
                     'stroke-width': 1.5, opacity, class: 'mark-tick' })
      : el('circle', { cx, cy, r, fill, opacity, class: 'mark-point' }));
  }
}

function drawPath(body: SVGElement, view: RenderedView, xs: Scale, ys: Scale,
                  opacity: number): void {
  if (!view.instances.length) return;
  const pts = view.instances.map((inst) => [
    xs.place(inst.channels.x ?? null),
    ys.place(inst.channels.y ?? null)] as const);
  const step = view.mark_params.interpolation === 'step';
  let d = `M${pts[0][0]} ${pts[0][1]}`;
  for (let i = 1; i < pts.length; i++) {
    d += step ? `H${pts[i][0]}V${pts[i][1]}` : `L${pts[i][0]} ${pts[i][1]}`;
  }
  body.appendChild(el('path', {
    d, fill: 'none', stroke: PALETTE[0], 'stroke-width': 2, opacity,
    class: 'mark-line',
  }));
}

function drawArea(body: SVGElement, view: RenderedView, xs: Scale, ys: Scale,
                  plot: { y0: number }, opacity: number): void {
  if (!view.instances.length) return;
  const pts = view.instances.map((inst) => [
    xs.place(inst.channels.x ?? null),
    ys.place(inst.channels.y ?? null)] as const);
  let d = `M${pts[0][0]} ${plot.y0}`;
  for (const [px, py] of pts) d += `L${px} ${py}`;
  d += `L${pts[pts.length - 1][0]} ${plot.y0}Z`;
  body.appendChild(el('path', {
    d, fill: PALETTE[0], 'fill-opacity': 0.55 * opacity, stroke: PALETTE[0],
    class: 'mark-area',
  }));
}

function drawBars(body: SVGElement, view: RenderedView, xs: Scale, ys: Scale,
                  plot: { y0: number }, opacity: number): void {
  for (const inst of view.instances) {
    const xv = inst.channels.x ?? null;
    let x0: number;
    let w: number;
    if (xv !== null && typeof xv === 'object') {
      x0 = xs.placeNumber(xv.lo);
      w = Math.max(1, xs.placeNumber(xv.hi) - x0 - 1);
    } else {
      w = Math.max(4, xs.bandWidth() * 0.8);
      x0 = xs.place(xv) - w / 2;
    }
    const top = ys.place(inst.channels.y ?? null);
    body.appendChild(el('rect', {
      x: x0, y: Math.min(top, plot.y0), width: w,
      height: Math.max(1, Math.abs(plot.y0 - top)),
      fill: colorFor(inst.channels.color ?? null, view.domains.color), opacity,
      class: 'mark-bar',
    }));
  }
}

function drawRects(body: SVGElement, view: RenderedView, xs: Scale, ys: Scale,
                   opacity: number): void {
  for (const inst of view.instances) {
    const xv = inst.channels.x ?? null;
    const yv = inst.channels.y ?? null;
    const x0 = (xv !== null && typeof xv === 'object')
      ? xs.placeNumber(xv.lo) : xs.place(xv) - xs.bandWidth() / 2;
    const x1 = (xv !== null && typeof xv === 'object')
      ? xs.placeNumber(xv.hi) : xs.place(xv) + xs.bandWidth() / 2;
    const y0 = (yv !== null && typeof yv === 'object')
      ? ys.placeNumber(yv.lo) : ys.place(yv) - ys.bandWidth() / 2;
    const y1 = (yv !== null && typeof yv === 'object')
      ? ys.placeNumber(yv.hi) : ys.place(yv) + ys.bandWidth() / 2;
    body.appendChild(el('rect', {
      x: Math.min(x0, x1), y: Math.min(y0, y1),
      width: Math.max(1, Math.abs(x1 - x0) - 0.5),
      height: Math.max(1, Math.abs(y1 - y0) - 0.5),
      fill: colorFor(inst.channels.color ?? null, view.domains.color), opacity,
      class: 'mark-rect',
    }));
  }
}

function drawArcs(body: SVGElement, view: RenderedView, width: number,
                  height: number, opacity: number): void {
  const cx = width / 2;
  const cy = height / 2;
  const radius = Math.min(width, height) / 2 - 20;
  const total = view.instances.reduce(
    (acc, inst) => acc + Math.max(0, numeric(inst.channels.theta ?? null)), 0);
  if (total <= 0) return;
  let angle = -Math.PI / 2;
  const legend = el('g', { class: 'arc-legend' });
  view.instances.forEach((inst, i) => {
    const share = Math.max(0, numeric(inst.channels.theta ?? null)) / total;
    const sweep = share * 2 * Math.PI;
    const a0 = angle;
    const a1 = angle + sweep;
    angle = a1;
    const fill = colorFor(inst.channels.color ?? null, view.domains.color);
    if (share > 0) {
      const large = sweep > Math.PI ? 1 : 0;
      const p0 = [cx + radius * Math.cos(a0), cy + radius * Math.sin(a0)];
      const p1 = [cx + radius * Math.cos(a1), cy + radius * Math.sin(a1)];
      body.appendChild(el('path', {
        d: `M${cx} ${cy}L${p0[0]} ${p0[1]}A${radius} ${radius} 0 ${large} 1 ${p1[0]} ${p1[1]}Z`,
        fill, opacity, class: 'mark-arc',
      }));
    }
    const label = inst.channels.color ?? null;
    legend.appendChild(el('text', {
      x: 8, y: 14 + i * 14, 'font-size': 10, fill, class: 'legend-entry',
    }, `${labelOf(label)} (${Math.round(share * 100)}%)`));
  });
  body.appendChild(legend);
}

function labelOf(v: ChannelValue): string {
  if (v === null || v === undefined) return '(null)';
  if (typeof v === 'object') return `[${v.lo.toPrecision(3)}, ${v.hi.toPrecision(3)})`;
  return String(v);
}

function drawBoxplots(body: SVGElement, view: RenderedView, xs: Scale, ys: Scale,
                      opacity: number): void {
  // the quantitative positional channel carries the stats; the other positions the group
  const valueChannel: Channel = view.domains.y && view.domains.y.categories === undefined
    && view.instances.some((i) => i.derived_stats) && view.domains.x?.categories
    ? 'y' : (view.domains.y?.categories ? 'x' : (view.domains.x?.categories ? 'y' : 'x'));
  const groupChannel: Channel = valueChannel === 'x' ? 'y' : 'x';
  const vScale = valueChannel === 'x' ? xs : ys;
  const gScale = valueChannel === 'x' ? ys : xs;
  const half = Math.max(8, gScale.bandWidth() * 0.3);

  for (const inst of view.instances) {
    const stats = inst.derived_stats;
    if (!stats) continue;
    const g = el('g', { class: 'mark-boxplot', opacity });
    const center = gScale.place(inst.channels[groupChannel] ?? null);
    const q1 = vScale.placeNumber(stats.q1);
    const q3 = vScale.placeNumber(stats.q3);
    const med = vScale.placeNumber(stats.median);
    const loF = vScale.placeNumber(stats.lower_fence);
    const hiF = vScale.placeNumber(stats.upper_fence);
    const box = (a: number, b: number) => valueChannel === 'x'
      ? { x: Math.min(a, b), y: center - half, width: Math.abs(b - a) || 1, height: 2 * half }
      : { x: center - half, y: Math.min(a, b), width: 2 * half, height: Math.abs(b - a) || 1 };
    g.appendChild(el('rect', {
      ...box(q1, q3), fill: '#cfe0f1', stroke: PALETTE[0], class: 'box',
    }));
    const lineAt = (v: number, cls: string, extent = half) => valueChannel === 'x'
      ? el('line', { x1: v, y1: center - extent, x2: v, y2: center + extent,
                     stroke: PALETTE[0], 'stroke-width': cls === 'median' ? 2 : 1, class: cls })
      : el('line', { x1: center - extent, y1: v, x2: center + extent, y2: v,
                     stroke: PALETTE[0], 'stroke-width': cls === 'median' ? 2 : 1, class: cls });
    g.appendChild(lineAt(med, 'median'));
    g.appendChild(lineAt(loF, 'fence'));
    g.appendChild(lineAt(hiF, 'fence'));
    const whisker = (a: number, b: number) => valueChannel === 'x'
      ? el('line', { x1: a, y1: center, x2: b, y2: center, stroke: PALETTE[0],
                     'stroke-dasharray': '3 2', class: 'whisker' })
      : el('line', { x1: center, y1: a, x2: center, y2: b, stroke: PALETTE[0],
                     'stroke-dasharray': '3 2', class: 'whisker' });
    g.appendChild(whisker(loF, q1));
    g.appendChild(whisker(q3, hiF));
    if (view.mark_params.show_outlier_points) {
      for (const _row of stats.outliers) {
        // provenance ids only; dots sit just beyond the fence on the value axis
        g.appendChild(el('circle', {
          cx: valueChannel === 'x' ? hiF + 6 : center,
          cy: valueChannel === 'x' ? center : hiF - 6,
          r: 2.5, fill: '#e45756', class: 'outlier-dot',
        }));
      }
    }
    body.appendChild(g);
  }
}
