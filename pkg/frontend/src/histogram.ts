/**
 * Brushable histogram: full counts behind, filtered counts in front.
 *
 * Dragging creates or moves an interval brush; the selected interval is
 * snapped to bin edges so a brush always corresponds exactly to whole bars.
 */
import { HistogramPayload } from "./types.js";

export interface BrushRange {
  lo: number;
  hi: number;
}

const WIDTH = 260;
const HEIGHT = 110;
const MARGIN = { top: 4, right: 6, bottom: 18, left: 6 };

export function plotWidth(): number {
  return WIDTH - MARGIN.left - MARGIN.right;
}

/** Pixel offset (within the plot area) for a data value. */
export function valueToPixel(value: number, lo: number, hi: number): number {
  if (hi === lo) return 0;
  return ((value - lo) / (hi - lo)) * plotWidth();
}

export function pixelToValue(px: number, lo: number, hi: number): number {
  return lo + (px / plotWidth()) * (hi - lo);
}

/** Snap an interval outward to the enclosing bin edges. */
export function snapToEdges(range: BrushRange, edges: number[]): BrushRange {
  let lo = edges[0];
  let hi = edges[edges.length - 1];
  for (const e of edges) {
    if (e <= range.lo) lo = e;
  }
  for (let i = edges.length - 1; i >= 0; i--) {
    if (edges[i] >= range.hi) hi = edges[i];
  }
  if (lo >= hi) {
    // degenerate drag inside one bin: select that bin
    const idx = Math.max(
      0,
      Math.min(edges.length - 2, edges.findIndex((e) => e > range.lo) - 1),
    );
    return { lo: edges[idx], hi: edges[idx + 1] };
  }
  return { lo, hi };
}

export class HistogramView {
  readonly element: HTMLElement;
  private payload: HistogramPayload | null = null;
  private brush: BrushRange | null = null;
  private dragStartPx: number | null = null;
  private svg: SVGSVGElement;

  constructor(
    readonly dimension: string,
    private readonly onBrush: (dim: string, range: BrushRange | null) => void,
  ) {
    this.element = document.createElement("div");
    this.element.className = "histogram";
    const title = document.createElement("div");
    title.className = "histogram-title";
    title.textContent = dimension;
    this.element.appendChild(title);
    this.svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    this.svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
    this.svg.setAttribute("width", String(WIDTH));
    this.svg.setAttribute("height", String(HEIGHT));
    this.element.appendChild(this.svg);
    this.attachPointerHandlers();
  }

  update(payload: HistogramPayload, brush: BrushRange | null): void {
    this.payload = payload;
    this.brush = brush;
    this.render();
  }

  private attachPointerHandlers(): void {
    this.svg.addEventListener("pointerdown", (ev) => {
      if (!this.payload?.edges) return;
      this.svg.setPointerCapture(ev.pointerId);
      this.dragStartPx = this.plotX(ev);
    });
    this.svg.addEventListener("pointermove", (ev) => {
      if (this.dragStartPx === null || !this.payload?.edges) return;
      this.brush = this.dragRange(this.plotX(ev));
      this.render();
    });
    this.svg.addEventListener("pointerup", (ev) => {
      if (this.dragStartPx === null || !this.payload?.edges) return;
      const start = this.dragStartPx;
      this.dragStartPx = null;
      const px = this.plotX(ev);
      if (Math.abs(px - start) < 2) {
        // click clears the brush
        this.brush = null;
        this.onBrush(this.dimension, null);
      } else {
        this.brush = this.dragRange(px);
        this.onBrush(this.dimension, this.brush);
      }
      this.render();
    });
  }

  private plotX(ev: PointerEvent): number {
    const rect = this.svg.getBoundingClientRect();
    const scale = WIDTH / rect.width;
    return (ev.clientX - rect.left) * scale - MARGIN.left;
  }

  private dragRange(px: number): BrushRange {
    const edges = this.payload!.edges!;
    const lo = edges[0];
    const hi = edges[edges.length - 1];
    const a = pixelToValue(Math.min(this.dragStartPx!, px), lo, hi);
    const b = pixelToValue(Math.max(this.dragStartPx!, px), lo, hi);
    return snapToEdges({ lo: a, hi: b }, edges);
  }

  private render(): void {
    const p = this.payload;
    if (!p) return;
    while (this.svg.firstChild) this.svg.removeChild(this.svg.firstChild);
    const n = p.full_counts.length;
    if (n === 0) return;
    const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
    const peak = Math.max(1, ...p.full_counts);
    const barW = plotWidth() / n;
    const g = document.createElementNS("http://www.w3.org/2000/svg", "g");
    g.setAttribute("transform", `translate(${MARGIN.left},${MARGIN.top})`);
    this.svg.appendChild(g);

    for (let i = 0; i < n; i++) {
      g.appendChild(this.bar(i * barW, barW, p.full_counts[i], peak, plotH, "bar-full"));
      g.appendChild(this.bar(i * barW, barW, p.filtered_counts[i], peak, plotH, "bar-filtered"));
    }

    if (this.brush && p.edges) {
      const lo = p.edges[0];
      const hi = p.edges[p.edges.length - 1];
      const x0 = valueToPixel(this.brush.lo, lo, hi);
      const x1 = valueToPixel(this.brush.hi, lo, hi);
      const rect = document.createElementNS("http://www.w3.org/2000/svg", "rect");
      rect.setAttribute("class", "brush");
      rect.setAttribute("x", String(x0));
      rect.setAttribute("y", "0");
      rect.setAttribute("width", String(Math.max(0, x1 - x0)));
      rect.setAttribute("height", String(plotH));
      g.appendChild(rect);
    }

    if (p.edges) {
      const labels = [p.edges[0], p.edges[p.edges.length - 1]];
      for (const [i, v] of labels.entries()) {
        const text = document.createElementNS("http://www.w3.org/2000/svg", "text");
        text.setAttribute("class", "axis-label");
        text.setAttribute("x", i === 0 ? "0" : String(plotWidth()));
        text.setAttribute("y", String(plotH + 13));
        text.setAttribute("text-anchor", i === 0 ? "start" : "end");
        text.textContent = formatTick(v);
        g.appendChild(text);
      }
    }
  }

  private bar(
    x: number,
    w: number,
    count: number,
    peak: number,
    plotH: number,
    cls: string,
  ): SVGRectElement {
    const h = (count / peak) * plotH;
    const rect = document.createElementNS("http://www.w3.org/2000/svg", "rect");
    rect.setAttribute("class", cls);
    rect.setAttribute("x", String(x + 0.5));
    rect.setAttribute("y", String(plotH - h));
    rect.setAttribute("width", String(Math.max(0.5, w - 1)));
    rect.setAttribute("height", String(h));
    return rect;
  }
}

export function formatTick(v: number): string {
  if (Number.isInteger(v)) return String(v);
  return v.toPrecision(4).replace(/\.?0+$/, "");
}
