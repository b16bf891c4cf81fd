/**
 * Minimal string-assembled SVG chart primitives.
 *
 * No DOM: figures are built as deterministic strings so the same inputs
 * always produce byte-identical files.  d3 supplies only scales and tick
 * placement.
 */

import { scaleLinear, scaleLog, type ScaleContinuousNumeric } from "d3-scale";

export type Scale = ScaleContinuousNumeric<number, number>;

export interface Layout {
  width: number;
  height: number;
  marginLeft: number;
  marginRight: number;
  marginTop: number;
  marginBottom: number;
}

export const DEFAULT_LAYOUT: Layout = {
  width: 640,
  height: 420,
  marginLeft: 64,
  marginRight: 24,
  marginTop: 32,
  marginBottom: 48,
};

export const SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

const fmt = (v: number): string => (Math.abs(v) < 1e-12 ? "0" : String(+v.toPrecision(6)));

export function makeScale(
  kind: "linear" | "log",
  domain: [number, number],
  range: [number, number]
): Scale {
  const scale = kind === "log" ? scaleLog() : scaleLinear();
  return scale.domain(domain).range(range).nice();
}

export class SvgChart {
  private parts: string[] = [];

  constructor(
    readonly layout: Layout,
    readonly x: Scale,
    readonly y: Scale
  ) {}

  private get plotRight(): number {
    return this.layout.width - this.layout.marginRight;
  }

  private get plotBottom(): number {
    return this.layout.height - this.layout.marginBottom;
  }

  axes(xLabel: string, yLabel: string, title: string): this {
    const { marginLeft, marginTop, width, height } = this.layout;
    const bottom = this.plotBottom;
    this.parts.push(
      `<line x1="${marginLeft}" y1="${bottom}" x2="${this.plotRight}" y2="${bottom}" stroke="black"/>`,
      `<line x1="${marginLeft}" y1="${marginTop}" x2="${marginLeft}" y2="${bottom}" stroke="black"/>`
    );
    for (const t of this.x.ticks(6)) {
      const px = fmt(this.x(t));
      this.parts.push(
        `<line x1="${px}" y1="${bottom}" x2="${px}" y2="${bottom + 5}" stroke="black"/>`,
        `<text x="${px}" y="${bottom + 18}" text-anchor="middle" font-size="11">${fmt(t)}</text>`
      );
    }
    for (const t of this.y.ticks(6)) {
      const py = fmt(this.y(t));
      this.parts.push(
        `<line x1="${marginLeft - 5}" y1="${py}" x2="${marginLeft}" y2="${py}" stroke="black"/>`,
        `<text x="${marginLeft - 8}" y="${py}" text-anchor="end" dominant-baseline="middle" font-size="11">${fmt(t)}</text>`
      );
    }
    this.parts.push(
      `<text x="${(marginLeft + this.plotRight) / 2}" y="${height - 10}" text-anchor="middle" font-size="13">${xLabel}</text>`,
      `<text x="16" y="${(marginTop + bottom) / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 16 ${(marginTop + bottom) / 2})">${yLabel}</text>`,
      `<text x="${(marginLeft + this.plotRight) / 2}" y="${marginTop - 12}" text-anchor="middle" font-size="15">${title}</text>`
    );
    return this;
  }

  line(xs: number[], ys: number[], color: string, dashed = false): this {
    const pts = xs.map((v, i) => `${fmt(this.x(v))},${fmt(this.y(ys[i]))}`).join(" ");
    const dash = dashed ? ' stroke-dasharray="6 4"' : "";
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"${dash}/>`
    );
    return this;
  }

  points(xs: number[], ys: number[], color: string): this {
    for (let i = 0; i < xs.length; i++) {
      this.parts.push(
        `<circle cx="${fmt(this.x(xs[i]))}" cy="${fmt(this.y(ys[i]))}" r="3.5" fill="${color}"/>`
      );
    }
    return this;
  }

  annotation(text: string, slot: number): this {
    const y = this.layout.marginTop + 16 + 16 * slot;
    this.parts.push(
      `<text x="${this.plotRight - 8}" y="${y}" text-anchor="end" font-size="12">${text}</text>`
    );
    return this;
  }

  legend(labels: string[], colors: string[]): this {
    const x0 = this.layout.marginLeft + 10;
    labels.forEach((label, i) => {
      const y = this.layout.marginTop + 16 + 16 * i;
      this.parts.push(
        `<line x1="${x0}" y1="${y - 4}" x2="${x0 + 18}" y2="${y - 4}" stroke="${colors[i]}" stroke-width="2"/>`,
        `<text x="${x0 + 24}" y="${y}" font-size="12">${label}</text>`
      );
    });
    return this;
  }

  render(): string {
    const { width, height } = this.layout;
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
      ...this.parts,
      "</svg>",
      "",
    ].join("\n");
  }
}
