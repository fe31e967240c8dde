import { describe, expect, it } from "vitest";

import { pickThreshold, valueToX, xToValue, type HistogramLayout } from "../src/statspanel.js";

const layout: HistogramLayout = { width: 250, height: 110, lo: 0.5, hi: 2.5 };

describe("histogram threshold picker", () => {
  it("maps values to pixels and back", () => {
    expect(valueToX(layout, 0.5)).toBe(0);
    expect(valueToX(layout, 2.5)).toBe(250);
    expect(xToValue(layout, valueToX(layout, 1.37))).toBeCloseTo(1.37, 12);
    expect(xToValue(layout, -20)).toBe(0.5); // clamped to the range
    expect(xToValue(layout, 900)).toBe(2.5);
  });

  it("moves the nearer threshold on a pick", () => {
    const f = { tMin: 1.0, tMax: 2.0, reversed: false };
    expect(pickThreshold(f, 1.1)).toEqual({ tMin: 1.1, tMax: 2.0, reversed: false });
    expect(pickThreshold(f, 1.9)).toEqual({ tMin: 1.0, tMax: 1.9, reversed: false });
  });

  it("never inverts the thresholds", () => {
    const f = { tMin: 1.0, tMax: 1.05, reversed: false };
    const up = pickThreshold(f, 1.6); // nearer tMax
    expect(up.tMin).toBeLessThanOrEqual(up.tMax);
    const below = pickThreshold({ tMin: 1.5, tMax: 1.52, reversed: false }, 0.2);
    expect(below.tMin).toBeLessThanOrEqual(below.tMax);
  });

  it("raising tMin via picks never widens the visible set", () => {
    let f = { tMin: 1.0, tMax: 2.0, reversed: false };
    const visibleAt = (g: typeof f, v: number): boolean => v >= g.tMin;
    const before = [0.8, 1.2, 1.7, 2.2].map((v) => visibleAt(f, v));
    f = pickThreshold(f, 1.3);
    const after = [0.8, 1.2, 1.7, 2.2].map((v) => visibleAt(f, v));
    after.forEach((vis, i) => {
      if (vis) {
        expect(before[i]).toBe(true);
      }
    });
  });
});
