import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { decodeRaster } from "../src/rasterWire.js";

const FIXTURES = join(__dirname, "fixtures");

function load(name: string): ArrayBuffer {
  const buf = readFileSync(join(FIXTURES, name));
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength) as ArrayBuffer;
}

describe("raster wire format", () => {
  it("decodes a golden payload", () => {
    const { header, values } = decodeRaster(load("density_plain.bin"));
    expect(header.width).toBe(200);
    expect(header.height).toBe(150);
    expect(values.length).toBe(200 * 150);
    let min = Infinity;
    let max = -Infinity;
    for (const v of values) {
      expect(Number.isFinite(v)).toBe(true);
      min = Math.min(min, v);
      max = Math.max(max, v);
    }
    // header range brackets the payload
    expect(min).toBeGreaterThanOrEqual(header.value_range[0]);
    expect(max).toBeLessThanOrEqual(header.value_range[1]);
  });

  it("rejects truncated and inconsistent payloads", () => {
    expect(() => decodeRaster(new ArrayBuffer(2))).toThrow();
    const header = new TextEncoder().encode(
      JSON.stringify({ width: 4, height: 4, value_range: [0, 1] }),
    );
    const blob = new Uint8Array(4 + header.length + 8); // only 2 floats, not 16
    new DataView(blob.buffer).setUint32(0, header.length, true);
    blob.set(header, 4);
    expect(() => decodeRaster(blob.buffer)).toThrow(/header says/);
  });
});
